use crate::error::{Error, Result};

/// Fraction of pixels removed per step.
pub const DEFAULT_SPARSIFICATION_STEP: f64 = 0.02;
const MAX_REMOVED: f64 = 0.98;
const MIN_SAMPLES: usize = 50;

/// How per-pixel errors aggregate into a curve value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SparsifyMetric {
    /// Mean error (abs_rel when errors are relative).
    Mean,
    /// Root mean square (rmse when errors are absolute).
    RootMeanSquare,
    /// Fraction of errors `>=` the threshold (e.g. ratio `>= 1.25`).
    FractionAtLeast(f64),
}

impl SparsifyMetric {
    fn contribution(&self, e: f64) -> f64 {
        match *self {
            SparsifyMetric::Mean => e,
            SparsifyMetric::RootMeanSquare => e * e,
            SparsifyMetric::FractionAtLeast(t) => (e >= t) as u8 as f64,
        }
    }

    fn finish(&self, sum: f64, count: usize) -> f64 {
        let mean = sum / count as f64;
        match self {
            SparsifyMetric::RootMeanSquare => mean.sqrt(),
            _ => mean,
        }
    }
}

/// Sparsification, oracle and random curves plus the area between the
/// sparsification and oracle curves.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsificationResult {
    pub fractions: Vec<f64>,
    pub sparsification: Vec<f64>,
    pub oracle: Vec<f64>,
    pub random: Vec<f64>,
    pub ause: f64,
}

/// Evaluates how well `uncertainty` ranks `errors`.
///
/// For removal fractions `0, step, 2 step, ...` up to 98 %, the metric is
/// recomputed on the pixels left after dropping the most uncertain ones
/// (sparsification) or the ones with the largest error (oracle). Ties are
/// broken by ascending pixel index. The random curve is the metric over all
/// pixels.
pub fn sparsification(
    errors: &[f64],
    uncertainty: &[f64],
    metric: SparsifyMetric,
    step: f64,
) -> Result<SparsificationResult> {
    if errors.len() != uncertainty.len() {
        return Err(Error::InvalidArgument(format!(
            "{} errors vs {} uncertainties",
            errors.len(),
            uncertainty.len()
        )));
    }
    if errors.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "sparsification needs at least {MIN_SAMPLES} pixels, got {}",
            errors.len()
        )));
    }
    if !(step > 0.0 && step <= MAX_REMOVED) {
        return Err(Error::InvalidArgument(format!("step {step} outside (0, 0.98]")));
    }
    if errors.iter().chain(uncertainty).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in sparsification input".into()));
    }

    let n = errors.len();
    let steps = (MAX_REMOVED / step + 1e-9).floor() as usize;
    let fractions: Vec<f64> = (0..=steps).map(|k| k as f64 * step).collect();
    let removed: Vec<usize> = fractions.iter().map(|f| (f * n as f64).round() as usize).collect();

    let curve = |keys: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
        // tail[k] = sum of contributions of order[k..]
        let mut tail = vec![0.0; n + 1];
        for k in (0..n).rev() {
            tail[k] = tail[k + 1] + metric.contribution(errors[order[k]]);
        }
        removed.iter().map(|&k| metric.finish(tail[k], n - k)).collect()
    };

    let sparsification = curve(uncertainty);
    let oracle = curve(errors);
    let total = metric.finish(errors.iter().map(|e| metric.contribution(*e)).sum(), n);
    let random = vec![total; fractions.len()];
    let ause = fractions
        .windows(2)
        .enumerate()
        .map(|(i, f)| {
            let a = sparsification[i] - oracle[i];
            let b = sparsification[i + 1] - oracle[i + 1];
            0.5 * (f[1] - f[0]) * (a + b)
        })
        .sum();
    Ok(SparsificationResult {
        fractions,
        sparsification,
        oracle,
        random,
        ause,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn errors(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37) % 101) as f64 / 100.0).collect()
    }

    #[test]
    fn fraction_grid() {
        let e = errors(200);
        let r = sparsification(&e, &e, SparsifyMetric::Mean, DEFAULT_SPARSIFICATION_STEP).unwrap();
        assert_eq!(r.fractions.len(), 50);
        assert_eq!(r.fractions[0], 0.0);
        assert!((r.fractions[49] - 0.98).abs() < 1e-12);
        assert!(r.fractions.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn perfect_uncertainty_matches_oracle() {
        let e: Vec<f64> = (0..300).map(|i| (((i * 7919) % 263) as f64 - 131.0) / 50.0).collect();
        let abs: Vec<f64> = e.iter().map(|v| v.abs()).collect();
        let r = sparsification(&abs, &abs, SparsifyMetric::RootMeanSquare, 0.02).unwrap();
        assert_eq!(r.sparsification, r.oracle);
        assert_eq!(r.ause, 0.0);
    }

    #[test]
    fn equal_errors_give_flat_oracle() {
        let e = vec![0.3; 120];
        let u: Vec<f64> = (0..120).map(|i| i as f64).collect();
        let r = sparsification(&e, &u, SparsifyMetric::Mean, 0.02).unwrap();
        for (o, rnd) in r.oracle.iter().zip(&r.random) {
            assert!((o - 0.3).abs() < 1e-12 && (rnd - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn curves_start_at_full_metric() {
        let e = errors(100);
        let u: Vec<f64> = (0..100).map(|i| (i % 13) as f64).collect();
        let r = sparsification(&e, &u, SparsifyMetric::Mean, 0.02).unwrap();
        assert_eq!(r.sparsification[0], r.random[0]);
        assert_eq!(r.oracle[0], r.random[0]);
    }

    #[test]
    fn input_validation() {
        let e = errors(100);
        assert!(sparsification(&e, &e[..99], SparsifyMetric::Mean, 0.02).is_err());
        assert!(sparsification(&e[..49], &e[..49], SparsifyMetric::Mean, 0.02).is_err());
        assert!(sparsification(&e, &e, SparsifyMetric::Mean, 0.0).is_err());
    }

    #[test]
    fn exceedance_metric() {
        let ratios: Vec<f64> = (0..100).map(|i| if i % 4 == 0 { 1.5 } else { 1.1 }).collect();
        let r = sparsification(&ratios, &ratios, SparsifyMetric::FractionAtLeast(1.25), 0.02).unwrap();
        assert!((r.random[0] - 0.25).abs() < 1e-12);
        // All 25 bad pixels are gone once 26 % has been removed.
        assert_eq!(r.oracle[13], 0.0);
    }

    proptest! {
        #[test]
        fn oracle_never_above_sparsification(
            e in prop::collection::vec(0.0f64..10.0, 50..200),
            seed in any::<u64>(),
        ) {
            let u: Vec<f64> = e.iter().enumerate().map(|(i, _)| ((i as u64).wrapping_mul(seed | 1) % 97) as f64).collect();
            for metric in [SparsifyMetric::Mean, SparsifyMetric::RootMeanSquare] {
                let r = sparsification(&e, &u, metric, 0.02).unwrap();
                for (o, s) in r.oracle.iter().zip(&r.sparsification) {
                    prop_assert!(*o <= *s + 1e-9);
                }
                prop_assert!(r.ause >= -1e-12);
            }
        }
    }
}
