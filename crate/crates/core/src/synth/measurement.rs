use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::pixel_rng;
use crate::bayesfilter::{MonocularPrior, MIN_INVERSE_DEPTH};
use crate::consistency::Observation;
use crate::error::{Error, Result};
use crate::geometry::DepthField;
use crate::probvolume::{DepthHypotheses, ProbabilityVolume};
use crate::Grid;

const OBSERVATION_STREAM: u64 = 0x0B5E;
const PRIOR_STREAM: u64 = 0x9_0120;

/// Mixture measurement model: with probability `rho` an observation is
/// `N(1/d, (tau_rel/d)^2)`, otherwise uniform over the pixel's range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementModel {
    pub rho: f64,
    pub tau_rel: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho {} outside [0, 1]", self.rho)));
        }
        if !(self.tau_rel > 0.0 && self.tau_rel.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau_rel {}", self.tau_rel)));
        }
        Ok(())
    }
}

/// Draws one observation per valid ground-truth pixel.
pub fn sample_observation(
    gt: &DepthField,
    model: &MeasurementModel,
    z_min: &Grid<f64>,
    z_max: &Grid<f64>,
) -> Result<Observation> {
    model.validate()?;
    z_min.ensure_dims(gt.dims())?;
    z_max.ensure_dims(gt.dims())?;
    let (w, h) = gt.dims();
    let samples: Vec<Option<(f64, f64)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let Some(d) = gt.at_index(i) else {
                return Ok(None);
            };
            let (lo, hi) = (z_min[i], z_max[i]);
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("pixel {i}: z range [{lo}, {hi}]")));
            }
            let mut rng = pixel_rng(model.seed, OBSERVATION_STREAM, i);
            let sd = model.tau_rel / d;
            let z = if rng.random::<f64>() < model.rho {
                let n: f64 = rng.sample(StandardNormal);
                1.0 / d + sd * n
            } else {
                rng.random_range(lo..hi)
            };
            Ok(Some((z.max(MIN_INVERSE_DEPTH), sd * sd)))
        })
        .collect::<Result<_>>()?;
    let grid = |f: fn(&(f64, f64)) -> f64| {
        Grid::from_vec(w, h, samples.iter().map(|s| s.as_ref().map_or(f64::NAN, f)).collect())
    };
    Observation::new(
        grid(|s| s.0)?,
        grid(|s| s.1)?,
        Grid::from_vec(w, h, samples.iter().map(Option::is_some).collect())?,
    )
}

/// Monocular-like prior: inverse depth `(1/d)(1 + rel_error n)` with `n`
/// standard normal clipped to ±3, and inverse-depth standard deviation
/// `rel_uncertainty` times the prior inverse depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorModel {
    pub rel_error: f64,
    pub rel_uncertainty: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PriorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_error >= 0.0 && self.rel_error < 1.0 / 3.0) {
            return Err(Error::InvalidArgument(format!(
                "prior rel_error {} outside [0, 1/3)",
                self.rel_error
            )));
        }
        if !(self.rel_uncertainty > 0.0 && self.rel_uncertainty.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prior rel_uncertainty {}",
                self.rel_uncertainty
            )));
        }
        Ok(())
    }
}

pub fn make_prior(gt: &DepthField, model: &PriorModel) -> Result<MonocularPrior> {
    model.validate()?;
    let (w, h) = gt.dims();
    let pixels: Vec<Option<f64>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            gt.at_index(i).map(|d| {
                let n: f64 = pixel_rng(model.seed, PRIOR_STREAM, i).sample(StandardNormal);
                (1.0 + model.rel_error * n.clamp(-3.0, 3.0)) / d
            })
        })
        .collect();
    let depth = DepthField::new(
        Grid::from_vec(w, h, pixels.iter().map(|z| z.map_or(f64::NAN, |z| 1.0 / z)).collect())?,
        gt.mask().clone(),
    )?;
    let uncertainty = Grid::from_vec(
        w,
        h,
        pixels.iter().map(|z| z.map_or(f64::NAN, |z| model.rel_uncertainty * z)).collect(),
    )?;
    MonocularPrior::new(depth, uncertainty)
}

/// Per-pixel softmax of `-peakedness |d_j - d_gt|`. Pixels without ground
/// truth get a uniform distribution.
pub fn make_probvolume(gt: &DepthField, hypotheses: &DepthHypotheses, peakedness: f64) -> Result<ProbabilityVolume> {
    if !(peakedness >= 0.0) {
        return Err(Error::InvalidArgument(format!("peakedness {peakedness}")));
    }
    let planes = hypotheses.planes();
    let n = planes.len();
    let (w, h) = gt.dims();
    let mut probs = vec![0.0; w * h * n];
    probs.par_chunks_mut(n).enumerate().for_each(|(i, p)| match gt.at_index(i) {
        None => p.fill(1.0 / n as f64),
        Some(d) => {
            for (pj, dj) in p.iter_mut().zip(planes) {
                *pj = -peakedness * (dj - d).abs();
            }
            let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for pj in p.iter_mut() {
                *pj = (*pj - max).exp();
                sum += *pj;
            }
            for pj in p.iter_mut() {
                *pj /= sum;
            }
        }
    });
    ProbabilityVolume::new(w, h, hypotheses.clone(), probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probvolume::{entropy_uncertainty, expectation_depth};

    fn ranges(w: usize, h: usize, lo: f64, hi: f64) -> (Grid<f64>, Grid<f64>) {
        (Grid::filled(w, h, lo), Grid::filled(w, h, hi))
    }

    #[test]
    fn noiseless_inliers_equal_ground_truth() {
        let gt = DepthField::from_values(Grid::from_fn(8, 8, |x, y| 2.0 + x as f64 + 0.5 * y as f64));
        let (lo, hi) = ranges(8, 8, 0.01, 1.0);
        let m = MeasurementModel {
            rho: 1.0,
            tau_rel: 1e-9,
            seed: 5,
        };
        let obs = sample_observation(&gt, &m, &lo, &hi).unwrap();
        for i in 0..64 {
            let (z, _) = obs.at_index(i).unwrap();
            assert!((z - 1.0 / gt.at_index(i).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn outliers_are_uniform() {
        let gt = DepthField::constant(400, 250, 10.0).unwrap();
        let (lo, hi) = ranges(400, 250, 0.2, 0.6);
        let m = MeasurementModel {
            rho: 0.0,
            tau_rel: 0.01,
            seed: 1,
        };
        let obs = sample_observation(&gt, &m, &lo, &hi).unwrap();
        let n = 100_000.0;
        let mean = obs.inv_depth().iter().sum::<f64>() / n;
        let se = 0.4 / 12f64.sqrt() / n.sqrt();
        assert!((mean - 0.4).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn inlier_frequency_matches_rho() {
        // Inliers land within 10 sd of 1/d = 0.1; outliers are drawn from
        // [0.5, 1.0], so the two are separable.
        let gt = DepthField::constant(400, 250, 10.0).unwrap();
        let (lo, hi) = ranges(400, 250, 0.5, 1.0);
        let rho = 0.7;
        let m = MeasurementModel {
            rho,
            tau_rel: 0.01,
            seed: 2,
        };
        let obs = sample_observation(&gt, &m, &lo, &hi).unwrap();
        let n = 100_000.0;
        let inliers = obs.inv_depth().iter().filter(|z| **z < 0.3).count() as f64;
        // Two-sided binomial test at 1%: |z| < 2.576.
        let z = (inliers - n * rho) / (n * rho * (1.0 - rho)).sqrt();
        assert!(z.abs() < 2.576, "z = {z}");
    }

    #[test]
    fn observations_are_reproducible() {
        let gt = DepthField::from_values(Grid::from_fn(16, 9, |x, _| 3.0 + x as f64));
        let (lo, hi) = ranges(16, 9, 0.01, 0.5);
        let m = MeasurementModel {
            rho: 0.5,
            tau_rel: 0.05,
            seed: 77,
        };
        let a = sample_observation(&gt, &m, &lo, &hi).unwrap();
        let b = sample_observation(&gt, &m, &lo, &hi).unwrap();
        assert_eq!(a.inv_depth().as_slice().len(), b.inv_depth().as_slice().len());
        for (x, y) in a.inv_depth().iter().zip(b.inv_depth().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let c = sample_observation(&gt, &MeasurementModel { seed: 78, ..m }, &lo, &hi).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_range_is_rejected() {
        let gt = DepthField::constant(2, 2, 1.0).unwrap();
        let (lo, hi) = ranges(2, 2, 0.5, 0.5);
        let m = MeasurementModel {
            rho: 0.5,
            tau_rel: 0.1,
            seed: 0,
        };
        assert!(sample_observation(&gt, &m, &lo, &hi).is_err());
    }

    #[test]
    fn prior_error_statistics() {
        let gt = DepthField::constant(200, 100, 8.0).unwrap();
        let model = PriorModel {
            rel_error: 0.1,
            rel_uncertainty: 0.05,
            seed: 3,
        };
        let prior = make_prior(&gt, &model).unwrap();
        let rel: Vec<f64> = prior.depth().values().iter().map(|d| 8.0 / d - 1.0).collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rel.len() as f64).sqrt();
        assert!(mean.abs() < 0.002, "{mean}");
        assert!((sd - 0.1).abs() < 0.003, "{sd}");
        for i in 0..rel.len() {
            let z = 1.0 / prior.depth().at_index(i).unwrap();
            assert!((prior.uncertainty()[i] - 0.05 * z).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_volume_at_zero_peakedness() {
        let hyp = DepthHypotheses::uniform_inverse(2.0, 50.0, 32).unwrap();
        let gt = DepthField::constant(3, 2, 7.0).unwrap();
        let v = make_probvolume(&gt, &hyp, 0.0).unwrap();
        let mean = hyp.planes().iter().sum::<f64>() / 32.0;
        for d in expectation_depth(&v).unwrap().values().iter() {
            assert!((d - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn sharp_volume_picks_nearest_plane() {
        let hyp = DepthHypotheses::uniform_inverse(2.0, 50.0, 32).unwrap();
        let gt = DepthField::from_values(Grid::from_fn(5, 1, |x, _| 3.1 + 7.3 * x as f64));
        let v = make_probvolume(&gt, &hyp, 1e6).unwrap();
        let e = expectation_depth(&v).unwrap();
        for i in 0..5 {
            let d = gt.at_index(i).unwrap();
            let nearest = hyp
                .planes()
                .iter()
                .cloned()
                .min_by(|a, b| (a - d).abs().total_cmp(&(b - d).abs()))
                .unwrap();
            assert!((e.at_index(i).unwrap() - nearest).abs() < 1e-6);
        }
    }

    #[test]
    fn entropy_falls_with_peakedness() {
        let hyp = DepthHypotheses::uniform_inverse(2.0, 50.0, 32).unwrap();
        let gt = DepthField::constant(1, 1, 9.0).unwrap();
        let entropies: Vec<f64> = [0.0, 1.0, 10.0, 100.0]
            .iter()
            .map(|p| entropy_uncertainty(&make_probvolume(&gt, &hyp, *p).unwrap()).unwrap()[0])
            .collect();
        assert!(entropies.windows(2).all(|w| w[1] < w[0]), "{entropies:?}");
    }
}
