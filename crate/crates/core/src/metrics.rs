//! Prediction norms and the Bhattacharyya distance between residual and noise samples.
//!
//! The Bhattacharyya distance uses the closed form for two univariate Gaussians fitted by
//! moments. It is applied to every noise family, including the skewed ones, so for
//! Exponential and Rayleigh noise it compares only the first two moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Norms {
    /// `√Σ(ŷ−y)²`.
    pub l2: f64,
    /// `Σ(ŷ−y)²`, no root.
    pub l2_raw: f64,
    pub rmse: f64,
}

/// All evaluation metrics for one prediction set.
///
/// `bd` is `None` when either the residuals or the noise have zero variance, in which
/// case the Gaussian Bhattacharyya distance is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub l1: f64,
    pub l2: f64,
    pub l2_raw: f64,
    pub rmse: f64,
    pub bd: Option<f64>,
}

fn check_pair(pred: &[f64], y: &[f64]) -> Result<()> {
    if pred.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: y.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

pub fn l2_norm(pred: &[f64], y: &[f64]) -> Result<L2Norms> {
    check_pair(pred, y)?;
    let l2_raw: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(L2Norms {
        l2: l2_raw.sqrt(),
        l2_raw,
        rmse: (l2_raw / pred.len() as f64).sqrt(),
    })
}

/// Mean absolute error.
pub fn l1_norm(pred: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(pred, y)?;
    Ok(pred.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn gaussian_moments(samples: &[f64]) -> Result<GaussianMoments> {
    if samples.len() < 2 {
        return Err(Error::invalid("samples", format!("need at least 2, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if variance == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(GaussianMoments {
        mean,
        variance,
        count: samples.len(),
    })
}

/// `¼·ln(¼(σ₁²/σ₂² + σ₂²/σ₁² + 2)) + ¼·(μ₂−μ₁)²/(σ₁²+σ₂²)`.
pub fn bhattacharyya(p1: &GaussianMoments, p2: &GaussianMoments) -> Result<f64> {
    for v in [p1.variance, p2.variance] {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::ZeroVariance);
        }
    }
    let (v1, v2) = (p1.variance, p2.variance);
    let spread = 0.25 * (0.25 * (v1 / v2 + v2 / v1 + 2.0)).ln();
    let dm = p2.mean - p1.mean;
    let location = 0.25 * dm * dm / (v1 + v2);
    Ok(spread + location)
}

/// Norms of `pred` against `y`, plus the distance between the residual `pred − y` and the
/// injected noise.
pub fn evaluate(pred: &[f64], y: &[f64], noise_samples: &[f64]) -> Result<MetricsRecord> {
    let norms = l2_norm(pred, y)?;
    let l1 = l1_norm(pred, y)?;
    if noise_samples.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: noise_samples.len(),
            right: pred.len(),
        });
    }
    let residuals: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
    let bd = match (gaussian_moments(noise_samples), gaussian_moments(&residuals)) {
        (Ok(noise), Ok(resid)) => Some(bhattacharyya(&noise, &resid)?),
        (Err(Error::ZeroVariance), _) | (_, Err(Error::ZeroVariance)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(MetricsRecord {
        l1,
        l2: norms.l2,
        l2_raw: norms.l2_raw,
        rmse: norms.rmse,
        bd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{sample_noise, NoiseFamily};
    use proptest::prelude::*;

    fn gm(mean: f64, variance: f64) -> GaussianMoments {
        GaussianMoments {
            mean,
            variance,
            count: 100,
        }
    }

    #[test]
    fn l2_examples() {
        assert_eq!(
            l2_norm(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            L2Norms { l2: 0.0, l2_raw: 0.0, rmse: 0.0 }
        );
        let n = l2_norm(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(n.l2_raw, 25.0);
        assert_eq!(n.l2, 5.0);
        assert_eq!(n.rmse, 12.5f64.sqrt());
        assert!(matches!(l2_norm(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(l2_norm(&[], &[]), Err(Error::Empty)));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_norm(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), 0.0);
        assert_eq!(l1_norm(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(l1_norm(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), 2.0);
        assert!(l1_norm(&[], &[]).is_err());
    }

    #[test]
    fn moments() {
        let m = gaussian_moments(&[0.0, 2.0]).unwrap();
        assert_eq!((m.mean, m.variance, m.count), (1.0, 2.0, 2));
        assert!(matches!(gaussian_moments(&[3.0; 5]), Err(Error::ZeroVariance)));
        assert!(gaussian_moments(&[1.0]).is_err());
        let g = sample_noise(NoiseFamily::Gaussian, 1.0, 1_000_000, 17).unwrap();
        let m = gaussian_moments(&g).unwrap();
        assert!(m.mean.abs() < 0.005 && (m.variance - 1.0).abs() < 0.005, "{m:?}");
    }

    #[test]
    fn bd_examples() {
        assert_eq!(bhattacharyya(&gm(0.3, 2.0), &gm(0.3, 2.0)).unwrap(), 0.0);
        let d = bhattacharyya(&gm(0.0, 2.0), &gm(1.5, 2.0)).unwrap();
        assert!((d - 1.5 * 1.5 / 16.0).abs() < 1e-15);
        assert!(matches!(bhattacharyya(&gm(0.0, 0.0), &gm(0.0, 1.0)), Err(Error::ZeroVariance)));
        assert!(bhattacharyya(&gm(0.0, 1.0), &gm(0.0, -1.0)).is_err());
    }

    proptest! {
        #[test]
        fn bd_symmetric_nonnegative(m1 in -10.0f64..10.0, m2 in -10.0f64..10.0, v1 in 1e-3f64..1e3, v2 in 1e-3f64..1e3) {
            let a = bhattacharyya(&gm(m1, v1), &gm(m2, v2)).unwrap();
            let b = bhattacharyya(&gm(m2, v2), &gm(m1, v1)).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn bd_monotone_in_separation(m in -5.0f64..5.0, d1 in 0.0f64..5.0, extra in 1e-3f64..5.0, v1 in 0.1f64..10.0, v2 in 0.1f64..10.0) {
            let near = bhattacharyya(&gm(m, v1), &gm(m + d1, v2)).unwrap();
            let far = bhattacharyya(&gm(m, v1), &gm(m + d1 + extra, v2)).unwrap();
            prop_assert!(far > near);
        }

        #[test]
        fn norm_relations(errs in proptest::collection::vec(-100.0f64..100.0, 1..50), c in 0.0f64..10.0) {
            let zeros = vec![0.0; errs.len()];
            let n = l2_norm(&errs, &zeros).unwrap();
            let len = errs.len() as f64;
            prop_assert!((n.l2_raw - len * n.rmse * n.rmse).abs() <= 1e-9 * (1.0 + n.l2_raw));
            prop_assert!((n.l2 - len.sqrt() * n.rmse).abs() <= 1e-9 * (1.0 + n.l2));
            prop_assert_eq!(n.l2, n.l2_raw.sqrt());
            let scaled: Vec<f64> = errs.iter().map(|e| e * c).collect();
            let s = l2_norm(&scaled, &zeros).unwrap();
            prop_assert!((s.l2 - c * n.l2).abs() <= 1e-9 * (1.0 + s.l2));
            prop_assert!((s.l2_raw - c * c * n.l2_raw).abs() <= 1e-9 * (1.0 + s.l2_raw));
        }
    }

    #[test]
    fn evaluate_perfect_noiseless() {
        let y = [0.1, 0.5, -0.2];
        let r = evaluate(&y, &y, &[0.0; 3]).unwrap();
        assert_eq!((r.l1, r.l2, r.l2_raw, r.rmse), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.bd, None);
    }

    #[test]
    fn evaluate_residual_equals_noise() {
        let noise = sample_noise(NoiseFamily::Gaussian, 1.0, 10_000, 5).unwrap();
        let y = vec![0.0; noise.len()];
        // pred − y = noise
        let r = evaluate(&noise, &y, &noise).unwrap();
        assert_eq!(r.bd, Some(0.0));
        let other = sample_noise(NoiseFamily::Gaussian, 1.0, 10_000, 6).unwrap();
        let r = evaluate(&other, &y, &noise).unwrap();
        assert!(r.bd.unwrap() < 0.01);
    }

    #[test]
    fn evaluate_biased_residual() {
        let noise = sample_noise(NoiseFamily::Gaussian, 1.0, 10_000, 8).unwrap();
        let y = vec![0.0; noise.len()];
        let pred: Vec<f64> = noise.iter().map(|e| e + 1.0).collect();
        let bd = evaluate(&pred, &y, &noise).unwrap().bd.unwrap();
        let v = gaussian_moments(&noise).unwrap().variance;
        assert!((bd - 1.0 / (8.0 * v)).abs() < 1e-9);
        assert!((bd - 0.125).abs() < 0.005);
    }
}
