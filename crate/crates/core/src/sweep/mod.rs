//! Exhaustive hyperparameter × dataset sweeps.
//!
//! Runs are keyed by their cell coordinates. Every seed a run uses is derived from the
//! grid's `base_seed` and the coordinate *values*, never from enumeration position, so a
//! cell reproduces identically whatever else the grid contains. Seeds ignore the ensemble
//! size: all `m` for one network share a single trained model, and a larger ensemble
//! extends the member set of a smaller one.

mod landscape;
mod run;
mod store;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use landscape::{
    curve, ensemble_curve, landscape_export, optimal_depth, CellFilter, DimValue, Dimension, Landscape, Metric,
    MetricKind, MetricSplit, NA,
};
pub use run::{execute_run, execute_runs_sharing_training};
pub use store::{
    canonicalize_results, load_results, run_sweep, write_results_csv, SweepOptions, SweepReport, CONFIG_SUFFIX,
    TIMING_SUFFIX,
};

use crate::config::SweepGrid;
use crate::data_gen::{NoiseFamily, Snr};
use crate::metrics::MetricsRecord;
use crate::seed;

/// Coordinates of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub depth: usize,
    pub width: usize,
    pub ensemble_size: usize,
    pub order: usize,
    pub family: NoiseFamily,
    pub snr: Snr,
    pub repeat: usize,
}

impl Cell {
    /// Canonical ordering: order, family, snr, depth, width, repeat, ensemble size.
    pub fn canonical_cmp(&self, other: &Cell) -> Ordering {
        (self.order, self.family)
            .cmp(&(other.order, other.family))
            .then(self.snr.value().total_cmp(&other.snr.value()))
            .then((self.depth, self.width, self.repeat, self.ensemble_size).cmp(&(
                other.depth,
                other.width,
                other.repeat,
                other.ensemble_size,
            )))
    }

    /// Everything except the ensemble size: runs with equal keys share one trained network.
    pub fn training_key(&self) -> (usize, usize, usize, NoiseFamily, u64, usize) {
        (self.depth, self.width, self.order, self.family, self.snr.key_bits(), self.repeat)
    }

    #[cfg(test)]
    fn same(&self, other: &Cell) -> bool {
        self.canonical_cmp(other) == Ordering::Equal
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth={} width={} m={} order={} family={} snr={} repeat={}",
            self.depth, self.width, self.ensemble_size, self.order, self.family, self.snr, self.repeat
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub coeff_seed: u64,
    pub data_seed: u64,
    pub noise_seed: u64,
    pub init_seed: u64,
    pub train_seed: u64,
    pub mask_seed: u64,
}

impl RunSeeds {
    /// The counter scheme: each seed hashes `base_seed`, a stream tag and the coordinate
    /// values that stream depends on.
    pub fn derive(base_seed: u64, cell: &Cell) -> RunSeeds {
        let snr = cell.snr.key_bits();
        let fam = cell.family.index();
        let (o, r) = (cell.order as u64, cell.repeat as u64);
        let (d, w) = (cell.depth as u64, cell.width as u64);
        RunSeeds {
            // the polynomial and inputs are shared across noise settings
            coeff_seed: seed::derive(base_seed, &[seed::tag("coeff"), o, r]),
            data_seed: seed::derive(base_seed, &[seed::tag("inputs"), o, r]),
            noise_seed: seed::derive(base_seed, &[seed::tag("noise"), o, fam, snr, r]),
            init_seed: seed::derive(base_seed, &[seed::tag("init"), d, w, o, fam, snr, r]),
            train_seed: seed::derive(base_seed, &[seed::tag("train"), d, w, o, fam, snr, r]),
            mask_seed: seed::derive(base_seed, &[seed::tag("mask"), d, w, o, fam, snr, r]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub cell: Cell,
    pub seeds: RunSeeds,
}

/// Every (cell, repeat) of the grid in canonical order.
pub fn enumerate_runs(grid: &SweepGrid) -> Vec<RunSpec> {
    let sorted = |v: &[usize]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    };
    let mut families = grid.noise_families.clone();
    families.sort();
    let mut snrs = grid.snrs.clone();
    snrs.sort_by(|a, b| a.value().total_cmp(&b.value()));

    let mut specs = Vec::with_capacity(grid.run_count());
    for &order in &sorted(&grid.orders) {
        for &family in &families {
            for &snr in &snrs {
                for &depth in &sorted(&grid.depths) {
                    for &width in &sorted(&grid.widths) {
                        for repeat in 0..grid.repeats {
                            for &ensemble_size in &sorted(&grid.ensemble_sizes) {
                                let cell = Cell {
                                    depth,
                                    width,
                                    ensemble_size,
                                    order,
                                    family,
                                    snr,
                                    repeat,
                                };
                                specs.push(RunSpec {
                                    seeds: RunSeeds::derive(grid.base_seed, &cell),
                                    cell,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    specs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub final_epoch: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Test MSE of the returned parameters, dropout off.
    pub best_test_mse: f64,
}

/// One line of the results file.
///
/// `failed` runs carry no metrics; `error` says why (e.g. the divergence epoch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    #[serde(flatten)]
    pub cell: Cell,
    pub seeds: RunSeeds,
    pub failed: bool,
    pub error: Option<String>,
    pub diverged_epoch: Option<usize>,
    pub history: Option<HistorySummary>,
    pub coefficients: Vec<f64>,
    pub noise_scale: Option<f64>,
    pub test: Option<MetricsRecord>,
    pub ood: Option<MetricsRecord>,
    /// Wall-clock time, including the training shared with other ensemble sizes.
    /// Not written to the results file, which must stay reproducible byte for byte;
    /// it goes to the timing sidecar instead.
    #[serde(skip)]
    pub wall_seconds: f64,
}
