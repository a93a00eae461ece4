use std::time::Instant;

use super::{HistorySummary, RunResult, RunSpec};
use crate::config::SweepConfig;
use crate::data_gen::{generate_dataset, sample_coefficients, Block, Dataset, NoiseSpec};
use crate::ensemble::{mc_predict, EnsemblePrediction};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsRecord};
use crate::nn::{train, Mlp, NetworkConfig};

/// Generate data → init → train → MC-dropout predict → evaluate, for a single run.
///
/// Failures (divergence included) are reported through `failed`, never as `Err`.
pub fn execute_run(spec: &RunSpec, cfg: &SweepConfig) -> RunResult {
    execute_runs_sharing_training(std::slice::from_ref(spec), cfg)
        .pop()
        .expect("one result per spec")
}

/// Executes specs that differ only in ensemble size with one shared training.
///
/// Because member masks nest, the `m`-member prediction is the prefix of the largest
/// ensemble, so each result equals what [`execute_run`] produces on its own.
///
/// # Panics
///
/// If `specs` is empty or the specs do not share a training key.
pub fn execute_runs_sharing_training(specs: &[RunSpec], cfg: &SweepConfig) -> Vec<RunResult> {
    assert!(!specs.is_empty(), "no specs");
    let key = specs[0].cell.training_key();
    assert!(
        specs.iter().all(|s| s.cell.training_key() == key && s.seeds == specs[0].seeds),
        "specs do not share a training"
    );
    let start = Instant::now();
    let first = &specs[0];
    let poly = sample_coefficients(first.cell.order, first.seeds.coeff_seed);
    let outcome = train_and_predict(first, cfg);
    let elapsed = start.elapsed().as_secs_f64();

    specs
        .iter()
        .map(|spec| {
            let mut result = RunResult {
                cell: spec.cell,
                seeds: spec.seeds,
                failed: false,
                error: None,
                diverged_epoch: None,
                history: None,
                coefficients: poly.coefficients.clone(),
                noise_scale: None,
                test: None,
                ood: None,
                wall_seconds: elapsed,
            };
            match &outcome {
                Ok(out) => {
                    result.noise_scale = out.dataset.noise.scale;
                    result.history = Some(out.history.clone());
                    match out.metrics(spec.cell.ensemble_size) {
                        Ok((test, ood)) => {
                            result.test = Some(test);
                            result.ood = ood;
                        }
                        Err(e) => {
                            result.failed = true;
                            result.error = Some(e.to_string());
                        }
                    }
                }
                Err(e) => {
                    result.failed = true;
                    result.error = Some(e.to_string());
                    if let Error::Diverged { epoch } = e {
                        result.diverged_epoch = Some(*epoch);
                    }
                }
            }
            result
        })
        .collect()
}

struct Trained {
    dataset: Dataset,
    history: HistorySummary,
    test: EnsemblePrediction,
    ood: Option<EnsemblePrediction>,
}

impl Trained {
    fn metrics(&self, m: usize) -> Result<(MetricsRecord, Option<MetricsRecord>)> {
        let eval = |pred: &EnsemblePrediction, block: Block<'_>| -> Result<MetricsRecord> {
            let pred = pred.truncate(m)?;
            evaluate(&pred.mean, block.noisy, block.noise)
        };
        let test = eval(&self.test, self.dataset.test())?;
        let ood = self.ood.as_ref().map(|p| eval(p, self.dataset.ood())).transpose()?;
        Ok((test, ood))
    }
}

fn train_and_predict(spec: &RunSpec, cfg: &SweepConfig) -> Result<Trained> {
    let cell = &spec.cell;
    let seeds = &spec.seeds;
    let poly = sample_coefficients(cell.order, seeds.coeff_seed);
    let noise = NoiseSpec::new(cell.family, cell.snr, seeds.noise_seed);
    let dataset = generate_dataset(&poly, &noise, &cfg.data.options(seeds.data_seed))?;

    let net = NetworkConfig {
        width: cell.width,
        depth: cell.depth,
        ensemble_size: cell.ensemble_size,
        activation: cfg.network.activation,
        dropout_rate: cfg.network.dropout_rate,
        init_seed: seeds.init_seed,
    };
    let mlp = Mlp::init(&net)?;
    let train_cfg = cfg.train.with_seed(seeds.train_seed);
    let (mlp, history) = train(mlp, &dataset, &train_cfg)?;
    let best_test_mse = history.test_loss[history.best_epoch - 1];

    // enough members for every ensemble size in the grid
    let m_max = cfg.grid.ensemble_sizes.iter().copied().max().unwrap_or(1).max(cell.ensemble_size);
    let test = mc_predict(&mlp, dataset.test().x, m_max, seeds.mask_seed)?;
    let ood = if dataset.ood().is_empty() {
        None
    } else {
        Some(mc_predict(&mlp, dataset.ood().x, m_max, seeds.mask_seed)?)
    };

    Ok(Trained {
        history: HistorySummary {
            final_epoch: history.final_epoch,
            best_epoch: history.best_epoch,
            stopped_early: history.stopped_early,
            best_test_mse,
        },
        test,
        ood,
        dataset,
    })
}
