use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use polysweep::config::SweepConfig;
use polysweep::data_gen::{generate_dataset, load_dataset, measured_snr, sample_coefficients, save_dataset, NoiseSpec, Snr};
use polysweep::ensemble::mc_predict;
use polysweep::metrics::evaluate;
use polysweep::nn::{save_checkpoint, train, Mlp, NetworkConfig};
use polysweep::seed;
use polysweep::sweep::{
    ensemble_curve, landscape_export, load_results, optimal_depth, run_sweep, write_results_csv, CellFilter,
    DimValue, Dimension, Metric, RunResult, SweepOptions,
};
use polysweep::Error;

use crate::args::{AnalyzeArgs, ConfigArgs, GenerateArgs, LandscapeArgs, SweepArgs, TrainArgs};

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_MISSING: i32 = 4;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Diverged { .. } => EXIT_DIVERGED,
            Error::MissingCells(_) => EXIT_MISSING,
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => 1,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn flag_error(flag: &str, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: format!("invalid --{flag}: {e}"),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

type CmdResult = Result<(), Failure>;

fn resolve_config(args: &ConfigArgs) -> Result<SweepConfig, Failure> {
    let base = match &args.config {
        Some(p) => SweepConfig::load(p)?,
        None => SweepConfig::preset(&args.preset).map_err(|e| flag_error("preset", e))?,
    };
    Ok(base.with_overrides(&args.overrides)?)
}

pub fn generate(args: &GenerateArgs) -> CmdResult {
    let family = args.noise.parse().map_err(|e| flag_error("noise", e))?;
    let snr: Snr = args.snr.parse().map_err(|e| flag_error("snr", e))?;
    if args.order == 0 {
        return Err(flag_error("order", "must be >= 1"));
    }
    let cfg = match &args.config {
        Some(p) => SweepConfig::load(p)?,
        None => SweepConfig::full(),
    }
    .with_overrides(&args.overrides)?;
    let mut opts = cfg.data.options(seed::derive(args.seed, &[seed::tag("inputs")]));
    if let Some(size) = args.size {
        opts.size = size;
    }
    if !args.with_ood {
        opts.ood_domain = None;
    }
    let poly = sample_coefficients(args.order, seed::derive(args.seed, &[seed::tag("coeff")]));
    let noise = NoiseSpec::new(family, snr, seed::derive(args.seed, &[seed::tag("noise")]));
    let ds = generate_dataset(&poly, &noise, &opts).map_err(|e| match e {
        Error::Invalid { name: "size", reason } => flag_error("size", reason),
        other => other.into(),
    })?;
    save_dataset(&ds, &args.out)?;
    let measured = measured_snr(&ds)?;
    let line = json!({
        "out": args.out.display().to_string(),
        "rows": ds.inputs.len(),
        "measured_snr": if measured.is_finite() { json!(measured) } else { json!("inf") },
        "noise_scale": ds.noise.scale,
        "coefficients": poly.coefficients,
    });
    println!("{line}");
    Ok(())
}

pub fn train_one(args: &TrainArgs) -> CmdResult {
    let cfg = resolve_config(&args.config)?;
    let ds = load_dataset(&args.data)?;
    let network = NetworkConfig {
        width: args.width,
        depth: args.depth,
        ensemble_size: args.ensemble_size,
        activation: cfg.network.activation,
        dropout_rate: cfg.network.dropout_rate,
        init_seed: seed::derive(args.seed, &[seed::tag("init")]),
    };
    network.validate().map_err(|e| match e {
        Error::Invalid { name, reason } => flag_error(&name.replace('_', "-"), reason),
        other => other.into(),
    })?;
    let train_cfg = cfg.train.with_seed(seed::derive(args.seed, &[seed::tag("train")]));
    let (mlp, history) = train(Mlp::init(&network)?, &ds, &train_cfg)?;
    log::info!(
        "trained {} epochs, best epoch {} (test mse {:.6})",
        history.final_epoch,
        history.best_epoch,
        history.test_loss[history.best_epoch.max(1) - 1]
    );
    save_checkpoint(&mlp, Some(&train_cfg), &args.checkpoint)?;
    let test = ds.test();
    let pred = mc_predict(&mlp, test.x, args.ensemble_size, seed::derive(args.seed, &[seed::tag("mask")]))?;
    let record = evaluate(&pred.mean, test.noisy, test.noise)?;
    println!("{}", serde_json::to_string(&record).expect("metrics serialize"));
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let cfg = resolve_config(&args.config)?;
    if args.parallelism == 0 {
        return Err(flag_error("parallelism", "must be >= 1"));
    }
    let opts = SweepOptions {
        parallelism: args.parallelism,
        stop_after: args.stop_after,
    };
    let report = run_sweep(&cfg, &opts, &args.out)?;
    if let Some(path) = &args.csv {
        let file = File::create(path).map_err(|e| io_failure(path, e))?;
        write_results_csv(&report.results, BufWriter::new(file))?;
    }
    let failed = report.results.iter().filter(|r| r.failed).count();
    let line = json!({
        "out": args.out.display().to_string(),
        "runs": cfg.grid.run_count(),
        "present": report.results.len(),
        "skipped": report.skipped,
        "executed": report.executed,
        "trainings": report.trainings,
        "failed": failed,
        "complete": report.complete,
    });
    println!("{line}");
    Ok(())
}

/// Pins every dimension outside `free` that has a single value across `results`.
fn complete_filter(results: &[RunResult], mut filter: CellFilter, free: &[Dimension]) -> CellFilter {
    for dim in Dimension::ALL {
        if free.contains(&dim) || filter.get(dim).is_some() {
            continue;
        }
        let mut values = results.iter().map(|r| dim.value_of(&r.cell));
        if let Some(first) = values.next() {
            if values.all(|v| v == first) {
                filter = filter.pin(dim, first);
            }
        }
    }
    filter
}

fn load_nonempty(path: &Path) -> Result<Vec<RunResult>, Failure> {
    let results = load_results(path)?;
    if results.is_empty() {
        return Err(Failure {
            code: EXIT_MISSING,
            message: format!("{} holds no results", path.display()),
        });
    }
    Ok(results)
}

pub fn landscape(args: &LandscapeArgs) -> CmdResult {
    let x: Dimension = args.x.parse().map_err(|e| flag_error("x", e))?;
    let y: Dimension = args.y.parse().map_err(|e| flag_error("y", e))?;
    let metric: Metric = args.metric.parse().map_err(|e| flag_error("metric", e))?;
    let filter: CellFilter = args.filter.parse().map_err(|e| flag_error("filter", e))?;
    let results = load_nonempty(&args.results)?;
    let filter = complete_filter(&results, filter, &[x, y]);
    let l = landscape_export(&results, x, y, metric, &filter)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            let mut w = BufWriter::new(file);
            l.write_csv(&mut w)?;
            w.flush().map_err(|e| io_failure(path, e))?;
        }
        None => l.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| polysweep::sweep::NA.to_string(), |v| format!("{v:.6}"))
}

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let metric: Metric = args.metric.parse().map_err(|e| flag_error("metric", e))?;
    let filter: CellFilter = args.filter.parse().map_err(|e| flag_error("filter", e))?;
    let results = load_nonempty(&args.results)?;
    let mut widths: Vec<usize> = results.iter().map(|r| r.cell.width).collect();
    widths.sort_unstable();
    widths.dedup();
    let m = args
        .ensemble_size
        .or_else(|| filter.get(Dimension::Ensemble).and_then(|v| v.as_int()))
        .unwrap_or_else(|| results.iter().map(|r| r.cell.ensemble_size).min().expect("nonempty"));

    let depth_filter = complete_filter(
        &results,
        filter.clone().pin(Dimension::Ensemble, DimValue::Int(m)),
        &[Dimension::Depth, Dimension::Width],
    );
    let mut out = String::new();
    let _ = writeln!(out, "optimal depth per width ({metric}, m={m})");
    let _ = writeln!(out, "{:>8}  {:>6}  {:>12}", "width", "depth", metric.to_string());
    let mut optimum = Vec::with_capacity(widths.len());
    for &w in &widths {
        let (d, v) = optimal_depth(&results, w, metric, &depth_filter)?;
        let _ = writeln!(out, "{w:>8}  {d:>6}  {:>12}", fmt_value(Some(v)));
        optimum.push((w, d));
    }

    let (width, depth) = match (args.width, args.depth) {
        (Some(w), Some(d)) => (w, d),
        (Some(w), None) => (w, optimal_depth(&results, w, metric, &depth_filter)?.0),
        (None, Some(d)) => (*widths.last().expect("nonempty"), d),
        (None, None) => *optimum.last().expect("nonempty"),
    };
    let curve_filter = complete_filter(
        &results,
        filter
            .pin(Dimension::Width, DimValue::Int(width))
            .pin(Dimension::Depth, DimValue::Int(depth)),
        &[Dimension::Ensemble],
    );
    let curve = ensemble_curve(&results, metric, &curve_filter)?;
    let _ = writeln!(out, "\nensemble curve ({metric}, width={width}, depth={depth})");
    let _ = writeln!(out, "{:>8}  {:>12}", "m", metric.to_string());
    for (m, v) in curve {
        let _ = writeln!(out, "{m:>8}  {:>12}", fmt_value(v));
    }
    print!("{out}");
    Ok(())
}
