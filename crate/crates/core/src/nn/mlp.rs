use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Activation, NetworkConfig};
use crate::error::{Error, Result};
use crate::seed;

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How dropout is applied during a forward pass.
///
/// Masks use inverted dropout: kept units are scaled by `1 / (1 - p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Independent mask per (sample, unit), as used for mini-batch training.
    Train { mask_seed: u64 },
    /// No dropout.
    Eval,
    /// One mask per unit shared by the whole batch, so a pass evaluates a single thinned
    /// network `f_i(x)`.
    McEval { mask_seed: u64 },
}

/// Dense network `1 -> w -> ... -> w -> 1` with a linear output unit.
///
/// Layer `l` maps `x` (batch × fan_in) to `x · W_l + b_l` with `W_l` of shape
/// fan_in × fan_out.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: NetworkConfig,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    /// Same ordering as [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }
}

fn flatten(weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in weights.iter().zip(biases) {
        out.extend(w.iter());
        out.extend(b.iter());
    }
    out
}

struct Trace {
    input: Array2<f64>,
    /// Hidden pre-activations.
    pre: Vec<Array2<f64>>,
    /// Hidden activations after masking.
    post: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    output: Array2<f64>,
}

fn layer_dims(config: &NetworkConfig) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(config.depth + 1);
    let mut fan_in = 1;
    for _ in 0..config.depth {
        dims.push((fan_in, config.width));
        fan_in = config.width;
    }
    dims.push((fan_in, 1));
    dims
}

impl Mlp {
    /// Random weights (He for ReLU, `std = √(2/fan_in)`; Xavier for Sigmoid,
    /// `std = √(1/fan_in)`), zero biases. Deterministic in `config.init_seed`.
    pub fn init(config: &NetworkConfig) -> Result<Mlp> {
        config.validate()?;
        let gain = match config.activation {
            Activation::Relu => 2.0,
            Activation::Sigmoid => 1.0,
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, (fan_in, fan_out)) in layer_dims(config).into_iter().enumerate() {
            let std = (gain / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let mut rng = seed::rng(seed::derive(config.init_seed, &[seed::tag("init"), l as u64]));
            weights.push(Array2::from_shape_simple_fn((fan_in, fan_out), || normal.sample(&mut rng)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            config: *config,
            weights,
            biases,
        })
    }

    /// Assembles a network from explicit parameters, checking that shapes chain.
    pub fn from_parts(config: NetworkConfig, weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Mlp> {
        config.validate()?;
        let dims = layer_dims(&config);
        if weights.len() != dims.len() || biases.len() != dims.len() {
            return Err(Error::invalid(
                "layers",
                format!("expected {} layers, got {} weights / {} biases", dims.len(), weights.len(), biases.len()),
            ));
        }
        for (l, ((fan_in, fan_out), (w, b))) in dims.iter().zip(weights.iter().zip(&biases)).enumerate() {
            if w.dim() != (*fan_in, *fan_out) || b.len() != *fan_out {
                return Err(Error::invalid(
                    "layers",
                    format!("layer {l}: expected {fan_in}x{fan_out}, got {:?} / {}", w.dim(), b.len()),
                ));
            }
        }
        Ok(Mlp {
            config,
            weights,
            biases,
        })
    }

    pub fn depth(&self) -> usize {
        self.config.depth
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Layer by layer: weights (row-major) then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: self.param_count(),
            });
        }
        let mut it = params.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn mask(&self, mode: Mode, layer: usize, batch: usize) -> Option<Array2<f64>> {
        let p = self.config.dropout_rate;
        let (mask_seed, rows) = match mode {
            Mode::Eval => return None,
            _ if p == 0.0 => return None,
            Mode::Train { mask_seed } => (mask_seed, batch),
            Mode::McEval { mask_seed } => (mask_seed, 1),
        };
        let keep = 1.0 / (1.0 - p);
        let mut rng = seed::rng(seed::derive(mask_seed, &[seed::tag("dropout"), layer as u64]));
        Some(Array2::from_shape_simple_fn((rows, self.config.width), || {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        }))
    }

    fn run(&self, input: ArrayView2<f64>, mode: Mode) -> Trace {
        let batch = input.nrows();
        let act = self.config.activation;
        let hidden = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(hidden);
        let mut post = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut current = input.to_owned();
        for l in 0..hidden {
            let z = current.dot(&self.weights[l]) + &self.biases[l];
            let mut a = z.mapv(|v| act.apply(v));
            let mask = self.mask(mode, l, batch);
            if let Some(m) = &mask {
                a *= m;
            }
            pre.push(z);
            post.push(a.clone());
            masks.push(mask);
            current = a;
        }
        let output = current.dot(&self.weights[hidden]) + &self.biases[hidden];
        Trace {
            input: input.to_owned(),
            pre,
            post,
            masks,
            output,
        }
    }

    fn check_inputs(x: &[f64]) -> Result<()> {
        match x.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFiniteInput { index }),
            None => Ok(()),
        }
    }

    /// Batched prediction; returns one output per input.
    pub fn forward(&self, x: &[f64], mode: Mode) -> Result<Vec<f64>> {
        Self::check_inputs(x)?;
        let input = ArrayView2::from_shape((x.len(), 1), x).expect("column view");
        Ok(self.run(input, mode).output.into_raw_vec_and_offset().0)
    }

    /// Mean squared error over the batch and its exact gradient with respect to every
    /// parameter, under the dropout masks selected by `mode`.
    pub fn backward(&self, x: &[f64], y: &[f64], mode: Mode) -> Result<(f64, Gradients)> {
        if x.is_empty() {
            return Err(Error::Empty);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        Self::check_inputs(x)?;
        let n = x.len();
        let input = ArrayView2::from_shape((n, 1), x).expect("column view");
        let trace = self.run(input, mode);

        let target = ArrayView2::from_shape((n, 1), y).expect("column view");
        let err = &trace.output - &target;
        let loss = err.iter().map(|e| e * e).sum::<f64>() / n as f64;

        let layers = self.weights.len();
        let mut grad_w = vec![Array2::zeros((0, 0)); layers];
        let mut grad_b = vec![Array1::zeros(0); layers];
        let mut delta = err * (2.0 / n as f64);
        for l in (0..layers).rev() {
            let below = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            grad_w[l] = below.t().dot(&delta);
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let act = self.config.activation;
                let mut d = delta.dot(&self.weights[l].t());
                d.zip_mut_with(&trace.pre[l - 1], |g, &z| *g *= act.derivative(z));
                if let Some(m) = &trace.masks[l - 1] {
                    d *= m;
                }
                delta = d;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
        ))
    }
}
