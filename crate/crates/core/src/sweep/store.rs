//! Resumable JSONL persistence.
//!
//! Results are appended one line per run as runs finish, so an interrupted sweep loses at
//! most the runs in flight. Once every run is present the file is rewritten in canonical
//! order, which makes the finished file independent of completion order and of how many
//! times the sweep was resumed.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;

use super::{enumerate_runs, execute_runs_sharing_training, RunResult, RunSpec};
use crate::config::SweepConfig;
use crate::error::{Error, Result};

/// The resolved config is stored next to the results as `<results>.config.toml`.
pub const CONFIG_SUFFIX: &str = ".config.toml";
/// Per-run wall-clock times, `<results>.timing.jsonl`.
pub const TIMING_SUFFIX: &str = ".timing.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Maximum concurrent trainings.
    pub parallelism: usize,
    /// Stop after appending this many new results, leaving the sweep resumable.
    pub stop_after: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            parallelism: 1,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Every result in the file, in canonical order.
    pub results: Vec<RunResult>,
    /// Runs found in the file before this call.
    pub skipped: usize,
    /// Runs executed by this call.
    pub executed: usize,
    /// Networks trained by this call (one per distinct training key).
    pub trainings: usize,
    pub complete: bool,
}

pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn load_results(path: &Path) -> Result<Vec<RunResult>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::CorruptFile {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn sort_canonical(results: &mut [RunResult]) {
    results.sort_by(|a, b| a.cell.canonical_cmp(&b.cell));
}

fn write_atomically(path: &Path, results: &[RunResult]) -> Result<()> {
    let tmp = sidecar(path, ".tmp");
    let io = |e| Error::io(&tmp, e);
    let mut w = std::io::BufWriter::new(File::create(&tmp).map_err(io)?);
    for r in results {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.into_inner().map_err(|e| io(e.into_error()))?.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Rewrites a results file in canonical order.
pub fn canonicalize_results(path: &Path) -> Result<Vec<RunResult>> {
    let mut results = load_results(path)?;
    sort_canonical(&mut results);
    write_atomically(path, &results)?;
    Ok(results)
}

type Key = ((usize, usize, usize, crate::data_gen::NoiseFamily, u64, usize), usize);

fn key_of(cell: &super::Cell) -> Key {
    (cell.training_key(), cell.ensemble_size)
}

/// Splits pending specs into groups that share one training; canonical order keeps
/// those groups contiguous.
fn training_groups(pending: Vec<RunSpec>) -> Vec<Vec<RunSpec>> {
    let mut groups: Vec<Vec<RunSpec>> = Vec::new();
    for spec in pending {
        match groups.last_mut() {
            Some(g) if g[0].cell.training_key() == spec.cell.training_key() => g.push(spec),
            _ => groups.push(vec![spec]),
        }
    }
    groups
}

struct Sink {
    results: File,
    timing: File,
    written: usize,
    collected: Vec<RunResult>,
}

impl Sink {
    fn append(&mut self, result: RunResult, path: &Path, timing_path: &Path) -> Result<()> {
        let mut line = serde_json::to_string(&result)?;
        line.push('\n');
        self.results.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        let timing = serde_json::json!({
            "cell": result.cell.to_string(),
            "wall_seconds": result.wall_seconds,
        });
        writeln!(self.timing, "{timing}").map_err(|e| Error::io(timing_path, e))?;
        self.written += 1;
        self.collected.push(result);
        Ok(())
    }
}

fn ensure_trailing_newline(path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = OpenOptions::new().read(true).append(true).open(path).map_err(io)?;
    let len = f.metadata().map_err(io)?.len();
    if len == 0 {
        return Ok(());
    }
    f.seek(SeekFrom::Start(len - 1)).map_err(io)?;
    let mut last = [0u8];
    f.read_exact(&mut last).map_err(io)?;
    if last[0] != b'\n' {
        f.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

/// Runs every grid cell not already present in `output`.
///
/// Existing records must belong to this grid and carry the seeds this grid derives for
/// them; a config sidecar that disagrees with `cfg` is refused rather than mixed.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions, output: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    if opts.parallelism == 0 {
        return Err(Error::invalid("parallelism", "must be >= 1"));
    }
    let specs = enumerate_runs(&cfg.grid);

    let cfg_path = sidecar(output, CONFIG_SUFFIX);
    let cfg_text = cfg.to_toml();
    if cfg_path.exists() {
        let previous = std::fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        if previous != cfg_text {
            return Err(Error::Config(format!(
                "{} was produced with a different config ({}); refusing to resume",
                output.display(),
                cfg_path.display()
            )));
        }
    }

    let existing = if output.exists() {
        load_results(output)?
    } else {
        Vec::new()
    };
    let index: HashMap<Key, usize> = specs.iter().enumerate().map(|(i, s)| (key_of(&s.cell), i)).collect();
    let mut done = vec![false; specs.len()];
    for (line, record) in existing.iter().enumerate() {
        let corrupt = |reason: String| Error::CorruptFile {
            path: output.to_path_buf(),
            line: line + 1,
            reason,
        };
        let &i = index
            .get(&key_of(&record.cell))
            .ok_or_else(|| corrupt(format!("cell {} is not part of this grid", record.cell)))?;
        if specs[i].seeds != record.seeds {
            return Err(corrupt(format!("cell {} has seeds from a different base seed", record.cell)));
        }
        if std::mem::replace(&mut done[i], true) {
            return Err(corrupt(format!("duplicate record for cell {}", record.cell)));
        }
    }

    std::fs::write(&cfg_path, &cfg_text).map_err(|e| Error::io(&cfg_path, e))?;
    let open_append = |p: &Path| {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .map_err(|e| Error::io(p, e))
    };
    let results_file = open_append(output)?;
    ensure_trailing_newline(output)?;
    let timing_path = sidecar(output, TIMING_SUFFIX);
    let timing_file = open_append(&timing_path)?;

    let pending: Vec<RunSpec> = specs
        .iter()
        .zip(&done)
        .filter(|(_, &d)| !d)
        .map(|(s, _)| s.clone())
        .collect();
    let pending_count = pending.len();
    let groups = training_groups(pending);
    log::info!(
        "sweep: {} runs in grid, {} already done, {} to run in {} trainings",
        specs.len(),
        existing.len(),
        pending_count,
        groups.len()
    );

    let sink = Mutex::new(Sink {
        results: results_file,
        timing: timing_file,
        written: 0,
        collected: Vec::new(),
    });
    let stop = AtomicBool::new(opts.stop_after == Some(0));
    let trainings = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism)
        .build()
        .map_err(|e| Error::invalid("parallelism", e.to_string()))?;
    pool.install(|| {
        groups.par_iter().for_each(|group| {
            if stop.load(Ordering::SeqCst) {
                return;
            }
            let results = execute_runs_sharing_training(group, cfg);
            trainings.fetch_add(1, Ordering::SeqCst);
            let mut sink = sink.lock().expect("sink poisoned");
            for r in results {
                if opts.stop_after.is_some_and(|limit| sink.written >= limit) {
                    stop.store(true, Ordering::SeqCst);
                    break;
                }
                log::debug!("done {} failed={}", r.cell, r.failed);
                if let Err(e) = sink.append(r, output, &timing_path) {
                    failure.lock().expect("failure poisoned").get_or_insert(e);
                    stop.store(true, Ordering::SeqCst);
                    break;
                }
            }
            if opts.stop_after.is_some_and(|limit| sink.written >= limit) {
                stop.store(true, Ordering::SeqCst);
            }
        })
    });
    if let Some(e) = failure.into_inner().expect("failure poisoned") {
        return Err(e);
    }

    let sink = sink.into_inner().expect("sink poisoned");
    drop(sink.results);
    let executed = sink.written;
    let complete = executed == pending_count;
    let mut results = existing;
    let skipped = results.len();
    results.extend(sink.collected);
    sort_canonical(&mut results);
    if complete {
        write_atomically(output, &results)?;
    }
    Ok(SweepReport {
        results,
        skipped,
        executed,
        trainings: trainings.into_inner(),
        complete,
    })
}

/// Flat CSV with one row per run; absent metrics are written as `NA`.
pub fn write_results_csv<W: Write>(results: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "depth",
        "width",
        "ensemble_size",
        "order",
        "family",
        "snr",
        "repeat",
        "failed",
        "final_epoch",
        "best_epoch",
        "noise_scale",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for split in ["test", "ood"] {
        for m in ["l1", "l2", "l2_raw", "rmse", "bd"] {
            header.push(format!("{split}_{m}"));
        }
    }
    w.write_record(&header)?;
    let na = || super::NA.to_string();
    let opt = |v: Option<f64>| v.map_or_else(na, |v| v.to_string());
    for r in results {
        let c = &r.cell;
        let mut row = vec![
            c.depth.to_string(),
            c.width.to_string(),
            c.ensemble_size.to_string(),
            c.order.to_string(),
            c.family.to_string(),
            c.snr.to_string(),
            c.repeat.to_string(),
            r.failed.to_string(),
            r.history.as_ref().map_or_else(na, |h| h.final_epoch.to_string()),
            r.history.as_ref().map_or_else(na, |h| h.best_epoch.to_string()),
            opt(r.noise_scale),
        ];
        for m in [&r.test, &r.ood] {
            match m {
                Some(m) => {
                    row.extend([m.l1, m.l2, m.l2_raw, m.rmse].iter().map(|v| v.to_string()));
                    row.push(opt(m.bd));
                }
                None => row.extend(std::iter::repeat_n(na(), 5)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
