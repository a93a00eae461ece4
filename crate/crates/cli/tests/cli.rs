use std::path::Path;
use std::process::{Command, Output};

use polysweep::data_gen::{load_dataset, NoiseFamily, Snr};
use polysweep::metrics::MetricsRecord;
use polysweep::nn::load_checkpoint;
use polysweep::sweep::{Cell, RunResult, RunSeeds};

fn polysweep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polysweep"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn polysweep")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}

#[test]
fn generate_writes_requested_rows_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--order", "3", "--noise", "gaussian", "--snr", "20", "--size", "12000", "--seed", "7"];
    let first = ok(polysweep(&[&args[..], &["--out", "a.csv"]].concat(), dir.path()));
    ok(polysweep(&[&args[..], &["--out", "b.csv"]].concat(), dir.path()));

    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 12000 + 1, "data rows plus the column header");

    let summary: serde_json::Value = serde_json::from_str(stdout(&first).trim()).unwrap();
    let snr = summary["measured_snr"].as_f64().unwrap();
    assert!((snr / 20.0 - 1.0).abs() < 0.05, "{snr}");
    assert_eq!(summary["coefficients"].as_array().unwrap().len(), 4);

    let ds = load_dataset(&dir.path().join("a.csv")).unwrap();
    assert_eq!((ds.split.train, ds.split.test, ds.split.ood), (10000, 2000, 0));
}

#[test]
fn generate_can_append_ood_block() {
    let dir = tempfile::tempdir().unwrap();
    ok(polysweep(
        &["generate", "--order", "2", "--snr", "10", "--size", "600", "--with-ood", "--out", "d.csv"],
        dir.path(),
    ));
    let ds = load_dataset(&dir.path().join("d.csv")).unwrap();
    assert_eq!(ds.split.ood, ds.split.test);
    assert!(ds.ood().x.iter().all(|x| x.abs() >= 1.0));
}

#[test]
fn invalid_snr_exits_2_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = polysweep(&["generate", "--order", "3", "--snr", "0", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("--snr"), "{err}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn unknown_flag_and_bad_family_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(polysweep(&["generate", "--bogus"], dir.path()).status.code(), Some(2));
    let o = polysweep(&["generate", "--order", "2", "--snr", "5", "--noise", "cauchy", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--noise"));
}

#[test]
fn train_fits_clean_quadratic_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    ok(polysweep(
        &["generate", "--order", "2", "--snr", "inf", "--seed", "3", "--out", "clean.csv"],
        dir.path(),
    ));
    let args = ["train", "--data", "clean.csv", "--checkpoint", "net.json", "-m", "10", "--seed", "3"];
    let first = stdout(&ok(polysweep(&args, dir.path())));
    let second = stdout(&ok(polysweep(&args, dir.path())));
    assert_eq!(first, second);
    assert_eq!(first.lines().count(), 1);
    let record: MetricsRecord = serde_json::from_str(first.trim()).unwrap();
    assert!(record.rmse < 0.05, "{record:?}");
    assert_eq!(record.bd, None, "no noise, no distance");

    let ckpt = load_checkpoint(&dir.path().join("net.json")).unwrap();
    assert_eq!((ckpt.mlp.config.width, ckpt.mlp.config.depth, ckpt.mlp.config.ensemble_size), (64, 3, 10));
    assert_eq!(ckpt.train.unwrap().epochs, 200);
}

#[test]
fn train_without_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = polysweep(&["train", "--data", "missing.csv", "--checkpoint", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn divergence_exits_3_with_epoch() {
    let dir = tempfile::tempdir().unwrap();
    ok(polysweep(
        &["generate", "--order", "3", "--snr", "10", "--size", "400", "--out", "d.csv"],
        dir.path(),
    ));
    let o = polysweep(
        &[
            "train",
            "--data",
            "d.csv",
            "--checkpoint",
            "c.json",
            "--set",
            "train.optimizer={kind=\"sgd\"}",
            "--set",
            "train.learning_rate=1e8",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("epoch"));
    assert!(!dir.path().join("c.json").exists());
}

const TINY: &str = r#"
[grid]
depths = [1, 2]
widths = [4, 8]
ensemble_sizes = [1, 3]
orders = [2]
noise_families = ["gaussian"]
snrs = [10]
repeats = 2
base_seed = 0

[data]
size = 200
test_fraction = 0.25
domain = { lo = -1.0, hi = 1.0 }
ood_domain = { lo = -1.5, hi = 1.5 }

[network]
activation = "relu"
dropout_rate = 0.1

[train]
epochs = 5
batch_size = 32
learning_rate = 0.001
optimizer = { kind = "adam", beta1 = 0.9, beta2 = 0.999, eps = 1e-8 }
early_stop_patience = 20
"#;

#[test]
fn sweep_landscape_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = ok(polysweep(
        &["sweep", "--config", "tiny.toml", "--out", "r.jsonl", "--csv", "r.csv", "--parallelism", "2"],
        dir.path(),
    ));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["executed"], 16);
    assert_eq!(std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap().lines().count(), 16);
    assert_eq!(std::fs::read_to_string(dir.path().join("r.csv")).unwrap().lines().count(), 17);

    let again = ok(polysweep(&["sweep", "--config", "tiny.toml", "--out", "r.jsonl"], dir.path()));
    let summary: serde_json::Value = serde_json::from_str(stdout(&again).trim()).unwrap();
    assert_eq!((summary["executed"].as_u64(), summary["trainings"].as_u64()), (Some(0), Some(0)));

    let changed = polysweep(
        &["sweep", "--config", "tiny.toml", "--set", "train.epochs=6", "--out", "r.jsonl"],
        dir.path(),
    );
    assert_eq!(changed.status.code(), Some(2));

    let l = ok(polysweep(
        &["landscape", "--results", "r.jsonl", "--x", "width", "--y", "depth", "--metric", "l1", "--filter", "m=3"],
        dir.path(),
    ));
    let csv = stdout(&l);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ends_with(",4,8"), "{}", rows[0]);
    assert!(rows[1].starts_with("1,") && rows[2].starts_with("2,"));

    let a = ok(polysweep(&["analyze", "--results", "r.jsonl"], dir.path()));
    assert!(stdout(&a).contains("optimal depth per width"));
}

#[test]
fn landscape_needs_every_other_dimension_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let results = planted(&[1, 2], &[4], &[1, 3], |d, _, _| d as f64);
    write_results(&dir.path().join("r.jsonl"), &results);
    let o = polysweep(&["landscape", "--results", "r.jsonl", "--x", "width", "--y", "depth"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ensemble"), "{}", stderr(&o));
}

fn cell(depth: usize, width: usize, m: usize, repeat: usize) -> Cell {
    Cell {
        depth,
        width,
        ensemble_size: m,
        order: 5,
        family: NoiseFamily::Gaussian,
        snr: Snr::Ratio(20.0),
        repeat,
    }
}

/// Three repeats per cell whose test L1 is `f(depth, width, m)` plus a repeat offset.
fn planted(depths: &[usize], widths: &[usize], ms: &[usize], f: impl Fn(usize, usize, usize) -> f64) -> Vec<RunResult> {
    let mut out = Vec::new();
    for &d in depths {
        for &w in widths {
            for r in 0..3 {
                for &m in ms {
                    let c = cell(d, w, m, r);
                    let l1 = f(d, w, m) + 0.001 * r as f64;
                    out.push(RunResult {
                        cell: c,
                        seeds: RunSeeds::derive(0, &c),
                        failed: false,
                        error: None,
                        diverged_epoch: None,
                        history: None,
                        coefficients: vec![1.0; 6],
                        noise_scale: Some(0.1),
                        test: Some(MetricsRecord {
                            l1,
                            l2: l1,
                            l2_raw: l1 * l1,
                            rmse: l1,
                            bd: Some(l1),
                        }),
                        ood: None,
                        wall_seconds: 0.0,
                    });
                }
            }
        }
    }
    out
}

fn write_results(path: &Path, results: &[RunResult]) {
    let text: String = results.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn desk_shaped_landscape_is_eight_by_five() {
    let dir = tempfile::tempdir().unwrap();
    let results = planted(&(1..=8).collect::<Vec<_>>(), &[6, 16, 30, 64, 128], &[1], |d, w, _| {
        (d as f64 - 4.0).powi(2) + 10.0 / w as f64
    });
    write_results(&dir.path().join("r.jsonl"), &results);
    let o = ok(polysweep(
        &["landscape", "--results", "r.jsonl", "--out", "l.csv", "--filter", "order=5,family=gaussian,snr=20,m=1"],
        dir.path(),
    ));
    assert!(stdout(&o).is_empty());
    let csv = std::fs::read_to_string(dir.path().join("l.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 1 + 8);
    assert!(rows.iter().all(|r| r.len() == 1 + 5));
    assert_eq!(rows[0][1..], ["6", "16", "30", "64", "128"]);
    // median of the three repeats is the +0.001 one
    let v: f64 = rows[4][4].parse().unwrap();
    assert!((v - (0.0 + 10.0 / 64.0 + 0.001)).abs() < 1e-12, "{v}");
}

#[test]
fn analyze_reports_planted_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let results = planted(&(1..=6).collect::<Vec<_>>(), &[8, 32], &[1, 5, 20], |d, w, m| {
        let valley = if w == 8 { 2.0 } else { 5.0 };
        (d as f64 - valley).abs() + 1.0 / m as f64
    });
    write_results(&dir.path().join("r.jsonl"), &results);
    let o = ok(polysweep(&["analyze", "--results", "r.jsonl"], dir.path()));
    let text = stdout(&o);
    let table: Vec<Vec<&str>> = text
        .lines()
        .skip(2)
        .take(2)
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(table[0][..2], ["8", "2"]);
    assert_eq!(table[1][..2], ["32", "5"]);
    assert!(text.contains("ensemble curve (l1, width=32, depth=5)"), "{text}");
    let curve: Vec<&str> = text.lines().rev().take(3).collect();
    assert!(curve[0].trim_start().starts_with("20") && curve[2].trim_start().starts_with('1'));
}

#[test]
fn missing_cells_exit_4_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = planted(&[1, 2], &[4, 8], &[1], |d, _, _| d as f64);
    results.retain(|r| !(r.cell.depth == 2 && r.cell.width == 8));
    write_results(&dir.path().join("r.jsonl"), &results);
    let o = polysweep(&["landscape", "--results", "r.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("depth=2 width=8"), "{}", stderr(&o));
}
