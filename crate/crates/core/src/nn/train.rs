use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp, Mode};
use crate::data_gen::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM_DEFAULT: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

/// Mini-batch training schedule. The loss is always mean squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub early_stop_patience: Option<usize>,
    /// Drives shuffling and training dropout masks.
    pub train_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::ADAM_DEFAULT,
            early_stop_patience: Some(20),
            train_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("must be > 0, got {}", self.learning_rate),
            ));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps.is_nan() || eps <= 0.0 {
                return Err(Error::invalid("optimizer", "adam needs beta in [0, 1) and eps > 0"));
            }
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::invalid("early_stop_patience", "must be >= 1 when set"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean training MSE per epoch (dropout active).
    pub train_loss: Vec<f64>,
    /// Test MSE per epoch, dropout off.
    pub test_loss: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    /// 1-based last epoch run.
    pub final_epoch: usize,
    pub stopped_early: bool,
}

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

impl AdamState {
    fn new(mlp: &Mlp) -> Self {
        let zw = || mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect::<Vec<_>>();
        let zb = || mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect::<Vec<_>>();
        AdamState {
            m_w: zw(),
            v_w: zw(),
            m_b: zb(),
            v_b: zb(),
            t: 0,
        }
    }
}

fn adam_update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr_t: f64,
    (beta1, beta2, eps): (f64, f64, f64),
) {
    ndarray::Zip::from(param).and(grad).and(m).and(v).for_each(|p, &g, m, v| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr_t * *m / (v.sqrt() + eps);
    });
}

fn step(mlp: &mut Mlp, grads: &Gradients, cfg: &TrainConfig, adam: &mut Option<AdamState>) {
    match (cfg.optimizer, adam) {
        (Optimizer::Sgd, _) => {
            for (w, g) in mlp.weights.iter_mut().zip(&grads.weights) {
                w.scaled_add(-cfg.learning_rate, g);
            }
            for (b, g) in mlp.biases.iter_mut().zip(&grads.biases) {
                b.scaled_add(-cfg.learning_rate, g);
            }
        }
        (Optimizer::Adam { beta1, beta2, eps }, Some(state)) => {
            state.t += 1;
            let bias1 = 1.0 - beta1.powi(state.t);
            let bias2 = 1.0 - beta2.powi(state.t);
            // bias correction folded into the step size: eps_hat = eps·√(1-β₂ᵗ)
            let lr_t = cfg.learning_rate * bias2.sqrt() / bias1;
            let eps_hat = eps * bias2.sqrt();
            for l in 0..mlp.weights.len() {
                adam_update(
                    &mut mlp.weights[l],
                    &grads.weights[l],
                    &mut state.m_w[l],
                    &mut state.v_w[l],
                    lr_t,
                    (beta1, beta2, eps_hat),
                );
                adam_update(
                    &mut mlp.biases[l],
                    &grads.biases[l],
                    &mut state.m_b[l],
                    &mut state.v_b[l],
                    lr_t,
                    (beta1, beta2, eps_hat),
                );
            }
        }
        (Optimizer::Adam { .. }, None) => unreachable!("adam state initialised with optimizer"),
    }
}

pub(crate) fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Fits `mlp` to the dataset's noisy train targets.
///
/// With early stopping on, the returned parameters come from the epoch with the lowest
/// test loss. A non-finite loss aborts with [`Error::Diverged`].
pub fn train(mut mlp: Mlp, dataset: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, TrainingHistory)> {
    cfg.validate()?;
    let train_block = dataset.train();
    let test_block = dataset.test();
    if train_block.is_empty() || test_block.is_empty() {
        return Err(Error::invalid("dataset", "train and test splits must be nonempty"));
    }

    let n = train_block.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = matches!(cfg.optimizer, Optimizer::Adam { .. }).then(|| AdamState::new(&mlp));
    let mut history = TrainingHistory {
        train_loss: Vec::with_capacity(cfg.epochs),
        test_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        final_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Mlp)> = None;
    let mut since_best = 0;
    let mut xb = Vec::with_capacity(cfg.batch_size);
    let mut yb = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        let mut rng = seed::rng(seed::derive(cfg.train_seed, &[seed::tag("shuffle"), epoch as u64]));
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            xb.clear();
            yb.clear();
            xb.extend(chunk.iter().map(|&i| train_block.x[i]));
            yb.extend(chunk.iter().map(|&i| train_block.noisy[i]));
            let mask_seed = seed::derive(cfg.train_seed, &[seed::tag("batch"), epoch as u64, b as u64]);
            let (loss, grads) = mlp.backward(&xb, &yb, Mode::Train { mask_seed })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            total += loss * chunk.len() as f64;
            step(&mut mlp, &grads, cfg, &mut adam);
        }
        let train_loss = total / n as f64;
        let test_loss = mse(&mlp.forward(test_block.x, Mode::Eval)?, test_block.noisy);
        if !test_loss.is_finite() || !mlp.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.train_loss.push(train_loss);
        history.test_loss.push(test_loss);
        history.final_epoch = epoch;

        if let Some(patience) = cfg.early_stop_patience {
            if best.as_ref().is_none_or(|(b, _)| test_loss < *b) {
                best = Some((test_loss, mlp.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    history.stopped_early = true;
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
        }
    }

    if let Some((_, best_mlp)) = best {
        mlp = best_mlp;
    }
    Ok((mlp, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{generate_dataset, GenerateOptions, NoiseFamily, NoiseSpec, PolynomialSpec, Snr};
    use crate::nn::{Activation, NetworkConfig};

    fn linear_dataset() -> Dataset {
        let p = PolynomialSpec::from_coefficients(vec![0.2, -0.8], 0).unwrap();
        let n = NoiseSpec::new(NoiseFamily::Gaussian, Snr::Noiseless, 0);
        generate_dataset(
            &p,
            &n,
            &GenerateOptions {
                size: 600,
                seed: 1,
                ..GenerateOptions::default()
            },
        )
        .unwrap()
    }

    fn small_net(seed: u64) -> Mlp {
        Mlp::init(&NetworkConfig {
            width: 8,
            depth: 2,
            ensemble_size: 1,
            activation: Activation::Relu,
            dropout_rate: 0.0,
            init_seed: seed,
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { early_stop_patience: Some(0), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Invalid { .. })));
        }
    }

    #[test]
    fn loss_decreases_on_linear_data() {
        let data = linear_dataset();
        let cfg = TrainConfig {
            epochs: 50,
            early_stop_patience: None,
            ..Default::default()
        };
        let (_, h) = train(small_net(3), &data, &cfg).unwrap();
        assert_eq!(h.train_loss.len(), 50);
        assert!(h.train_loss[49] < h.train_loss[0]);
        assert_eq!(h.best_epoch, 50);
    }

    #[test]
    fn sgd_also_learns() {
        let data = linear_dataset();
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            optimizer: Optimizer::Sgd,
            early_stop_patience: None,
            ..Default::default()
        };
        let (_, h) = train(small_net(4), &data, &cfg).unwrap();
        assert!(h.train_loss[29] < h.train_loss[0]);
    }

    #[test]
    fn deterministic() {
        let data = linear_dataset();
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let a = train(small_net(5), &data, &cfg).unwrap();
        let b = train(small_net(5), &data, &cfg).unwrap();
        assert_eq!(a.0.flat_params(), b.0.flat_params());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn early_stopping_returns_best_epoch() {
        let data = linear_dataset();
        let cfg = TrainConfig {
            epochs: 400,
            learning_rate: 0.05,
            early_stop_patience: Some(3),
            ..Default::default()
        };
        let (net, h) = train(small_net(6), &data, &cfg).unwrap();
        let best = h.test_loss[h.best_epoch - 1];
        assert!(h.test_loss.iter().all(|&l| l >= best));
        let test = data.test();
        assert_eq!(mse(&net.forward(test.x, Mode::Eval).unwrap(), test.noisy), best);
        if h.stopped_early {
            assert_eq!(h.final_epoch, h.best_epoch + 3);
        }
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = linear_dataset();
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e6,
            optimizer: Optimizer::Sgd,
            early_stop_patience: None,
            ..Default::default()
        };
        match train(small_net(7), &data, &cfg) {
            Err(Error::Diverged { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h.final_epoch)),
        }
    }
}
