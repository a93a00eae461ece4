//! MC-dropout ensembles and the ensemble error decomposition
//! `(y − ŷ)² = (1/m)Σ(y − f_i)² − (1/m)Σ(f_i − ŷ)²`.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::{Mlp, Mode};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    /// m × B: row `i` holds member `f_i` over the batch.
    pub member_outputs: Array2<f64>,
    pub mean: Vec<f64>,
    /// Across-member variance with the 1/m convention.
    pub predictive_variance: Vec<f64>,
    pub m: usize,
    pub mask_seed: u64,
}

/// Element-wise decomposition terms, each of batch length.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    pub total: Vec<f64>,
    pub avg_member_error: Vec<f64>,
    pub ambiguity: Vec<f64>,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Dropout mask seed of member `i`. Adding members never changes earlier ones.
pub fn member_seed(mask_seed: u64, member: usize) -> u64 {
    seed::derive(mask_seed, &[seed::tag("member"), member as u64])
}

impl EnsemblePrediction {
    pub fn from_members(member_outputs: Array2<f64>, mask_seed: u64) -> Result<Self> {
        let (m, b) = member_outputs.dim();
        if m == 0 || b == 0 {
            return Err(Error::Empty);
        }
        let mut mean = Vec::with_capacity(b);
        let mut var = Vec::with_capacity(b);
        for col in member_outputs.columns() {
            // shifted by the first member so identical members give that value exactly
            let x0 = col[0];
            let mu = x0 + compensated_sum(col.iter().map(|f| f - x0)) / m as f64;
            let v = compensated_sum(col.iter().map(|f| (f - mu) * (f - mu))) / m as f64;
            mean.push(mu);
            var.push(v);
        }
        Ok(EnsemblePrediction {
            member_outputs,
            mean,
            predictive_variance: var,
            m,
            mask_seed,
        })
    }

    /// The first `k` members as their own ensemble.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.m {
            return Err(Error::invalid("ensemble_size", format!("need 1..={}, got {k}", self.m)));
        }
        Self::from_members(self.member_outputs.slice(ndarray::s![..k, ..]).to_owned(), self.mask_seed)
    }

    pub fn batch_len(&self) -> usize {
        self.mean.len()
    }

    /// One row per input: `x, mean, variance, f_1, ..., f_m`.
    pub fn write_csv<W: Write>(&self, x: &[f64], out: W) -> Result<()> {
        if x.len() != self.batch_len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: self.batch_len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string(), "mean".into(), "variance".into()];
        header.extend((1..=self.m).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for (j, xj) in x.iter().enumerate() {
            let mut row = vec![xj.to_string(), self.mean[j].to_string(), self.predictive_variance[j].to_string()];
            row.extend(self.member_outputs.column(j).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<members>", e))?;
        Ok(())
    }
}

/// `m` stochastic forward passes with dropout left on, one thinned network per member.
pub fn mc_predict(mlp: &Mlp, x: &[f64], m: usize, mask_seed: u64) -> Result<EnsemblePrediction> {
    if m == 0 {
        return Err(Error::invalid("ensemble_size", "must be >= 1"));
    }
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let mut members = Array2::zeros((m, x.len()));
    for (i, mut row) in members.rows_mut().into_iter().enumerate() {
        let out = mlp.forward(
            x,
            Mode::McEval {
                mask_seed: member_seed(mask_seed, i),
            },
        )?;
        row.assign(&ndarray::ArrayView1::from(&out));
    }
    EnsemblePrediction::from_members(members, mask_seed)
}

fn check_len(y: &[f64], pred: &EnsemblePrediction) -> Result<()> {
    if y.len() != pred.batch_len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: pred.batch_len(),
        });
    }
    Ok(())
}

pub fn decompose_error(y: &[f64], pred: &EnsemblePrediction) -> Result<ErrorDecomposition> {
    check_len(y, pred)?;
    let m = pred.m as f64;
    let mut total = Vec::with_capacity(y.len());
    let mut avg = Vec::with_capacity(y.len());
    let mut amb = Vec::with_capacity(y.len());
    for (j, (&yj, &mu)) in y.iter().zip(&pred.mean).enumerate() {
        let col = pred.member_outputs.column(j);
        total.push((yj - mu) * (yj - mu));
        avg.push(compensated_sum(col.iter().map(|f| (yj - f) * (yj - f))) / m);
        amb.push(compensated_sum(col.iter().map(|f| (f - mu) * (f - mu))) / m);
    }
    Ok(ErrorDecomposition {
        total,
        avg_member_error: avg,
        ambiguity: amb,
    })
}

/// `ŷ − y`.
pub fn ensemble_residuals(y: &[f64], pred: &EnsemblePrediction) -> Result<Vec<f64>> {
    check_len(y, pred)?;
    Ok(pred.mean.iter().zip(y).map(|(p, t)| p - t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, NetworkConfig};
    use ndarray::array;
    use proptest::prelude::*;

    fn net(dropout_rate: f64) -> Mlp {
        Mlp::init(&NetworkConfig {
            width: 12,
            depth: 2,
            ensemble_size: 1,
            activation: Activation::Relu,
            dropout_rate,
            init_seed: 21,
        })
        .unwrap()
    }

    #[test]
    fn single_member() {
        let x = [-0.5, 0.1, 0.8];
        let p = mc_predict(&net(0.2), &x, 1, 3).unwrap();
        assert_eq!(p.mean, p.member_outputs.row(0).to_vec());
        assert!(p.predictive_variance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_dropout_members_coincide() {
        let x = [-0.5, 0.1, 0.8];
        let n = net(0.0);
        let p = mc_predict(&n, &x, 7, 3).unwrap();
        let det = n.forward(&x, Mode::Eval).unwrap();
        for row in p.member_outputs.rows() {
            assert_eq!(row.to_vec(), det);
        }
        assert!(p.predictive_variance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn members_extend_with_m() {
        let x = [-0.5, 0.1, 0.8];
        let n = net(0.3);
        let small = mc_predict(&n, &x, 5, 3).unwrap();
        let big = mc_predict(&n, &x, 40, 3).unwrap();
        assert_eq!(small.member_outputs, big.member_outputs.slice(ndarray::s![..5, ..]));
        assert_eq!(big.truncate(5).unwrap(), small);
        assert_eq!(big, mc_predict(&n, &x, 40, 3).unwrap());
        for (j, &mu) in big.mean.iter().enumerate() {
            let avg = big.member_outputs.column(j).sum() / 40.0;
            assert!((mu - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_decomposition() {
        let p = EnsemblePrediction::from_members(array![[0.0], [2.0]], 0).unwrap();
        let d = decompose_error(&[1.0], &p).unwrap();
        assert_eq!(p.mean, vec![1.0]);
        assert_eq!((d.total[0], d.avg_member_error[0], d.ambiguity[0]), (0.0, 1.0, 1.0));

        let exact = EnsemblePrediction::from_members(array![[1.0, 2.0], [1.0, 2.0]], 0).unwrap();
        let d = decompose_error(&[1.0, 2.0], &exact).unwrap();
        assert!(d.total.iter().chain(&d.avg_member_error).chain(&d.ambiguity).all(|&v| v == 0.0));
        assert!(decompose_error(&[1.0], &exact).is_err());
    }

    #[test]
    fn residuals() {
        let p = EnsemblePrediction::from_members(array![[1.0, 2.0], [3.0, 4.0]], 0).unwrap();
        assert_eq!(ensemble_residuals(&[2.0, 3.0], &p).unwrap(), vec![0.0, 0.0]);
        assert_eq!(ensemble_residuals(&[1.5, 2.5], &p).unwrap(), vec![0.5, 0.5]);
        assert!(ensemble_residuals(&[1.0], &p).is_err());
    }

    #[test]
    fn csv_export() {
        let p = EnsemblePrediction::from_members(array![[1.0, 2.0], [3.0, 4.0]], 0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&[0.1, 0.2], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,mean,variance,f1,f2\n0.1,2,1,1,3\n0.2,3,1,2,4\n");
    }

    proptest! {
        #[test]
        fn identity_and_ambiguity_sign(
            m in 1usize..20,
            b in 1usize..8,
            vals in proptest::collection::vec(-50.0f64..50.0, 160),
            ys in proptest::collection::vec(-50.0f64..50.0, 8),
        ) {
            let members = Array2::from_shape_fn((m, b), |(i, j)| vals[(i * 8 + j) % vals.len()]);
            let p = EnsemblePrediction::from_members(members, 0).unwrap();
            let d = decompose_error(&ys[..b], &p).unwrap();
            for j in 0..b {
                let resid = d.total[j] - (d.avg_member_error[j] - d.ambiguity[j]);
                prop_assert!(resid.abs() <= 1e-10 * (1.0 + d.total[j].abs()));
                prop_assert!(d.ambiguity[j] >= 0.0);
                prop_assert!(d.total[j] <= d.avg_member_error[j] + 1e-10 * (1.0 + d.total[j]));
                prop_assert!(p.predictive_variance[j] >= 0.0);
            }
        }
    }
}
