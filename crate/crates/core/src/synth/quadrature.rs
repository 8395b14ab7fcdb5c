use crate::bayesfilter::PixelState;
use crate::error::{Error, Result};

/// Midpoint grid resolution for [`quadrature_posterior`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGrid {
    /// Points along inverse depth.
    pub z_points: usize,
    /// Points along the inlier ratio on `(0, 1)`.
    pub rho_points: usize,
    /// Drop the uniform branch, leaving a Gaussian-Gaussian product.
    pub inlier_only: bool,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            z_points: 4096,
            rho_points: 1024,
            inlier_only: false,
        }
    }
}

/// Normalised posterior moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraturePosterior {
    pub mean: f64,
    pub variance: f64,
    pub inlier_mean: f64,
}

/// Inverse-depth integration interval: the outlier support widened by three
/// prior deviations, and wide enough to hold ten deviations of both the
/// prior and the measurement.
fn z_interval(s: &PixelState, z_obs: f64, tau: f64) -> (f64, f64) {
    let sigma = s.sigma2.sqrt();
    let lo = (s.z_min - 3.0 * sigma).min(s.mu - 10.0 * sigma).min(z_obs - 10.0 * tau);
    let hi = (s.z_max + 3.0 * sigma).max(s.mu + 10.0 * sigma).max(z_obs + 10.0 * tau);
    (lo, hi)
}

fn validate(s: &PixelState, z_obs: f64, tau2: f64, grid: &QuadratureGrid) -> Result<()> {
    if !(tau2 > 0.0 && tau2.is_finite() && z_obs.is_finite()) {
        return Err(Error::InvalidArgument(format!("observation {z_obs} with variance {tau2}")));
    }
    if !(s.sigma2 > 0.0 && s.a > 0.0 && s.b > 0.0 && s.z_min < s.z_max) {
        return Err(Error::InvalidArgument(format!("pixel state {s:?}")));
    }
    if grid.z_points < 2 || grid.rho_points < 2 {
        return Err(Error::InvalidArgument("quadrature grid needs at least 2x2 points".into()));
    }
    Ok(())
}

/// Beta(a, b) weights at midpoints of `(0, 1)`, scaled so the largest is 1.
fn beta_weights(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let logs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let r = (k as f64 + 0.5) / n as f64;
            (r, (a - 1.0) * r.ln() + (b - 1.0) * (1.0 - r).ln())
        })
        .collect();
    let max = logs.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    logs.into_iter().map(|(r, l)| (r, (l - max).exp())).collect()
}

fn normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Moments of the exact single-measurement posterior
/// `Beta(rho; a, b) N(z; mu, sigma^2) [rho N(z_obs; z, tau^2) + (1 - rho) U(z_obs)]`
/// by a midpoint rule over `(z, rho)`.
///
/// The integrand is a sum of products of a `rho` factor and a `z` factor, so
/// the 2-D sum is evaluated exactly as products of 1-D sums.
pub fn quadrature_posterior(s: &PixelState, z_obs: f64, tau2: f64, grid: &QuadratureGrid) -> Result<QuadraturePosterior> {
    validate(s, z_obs, tau2, grid)?;
    let (lo, hi) = z_interval(s, z_obs, tau2.sqrt());
    let dz = (hi - lo) / grid.z_points as f64;
    let uniform = if grid.inlier_only || z_obs < s.z_min || z_obs > s.z_max {
        0.0
    } else {
        1.0 / (s.z_max - s.z_min)
    };

    // rho sums: [rho^0 rho^1 rho^2] for the inlier branch and the same
    // times (1 - rho) for the outlier branch.
    let (mut r_in, mut r_out) = ([0.0; 3], [0.0; 3]);
    for (r, w) in beta_weights(s.a, s.b, grid.rho_points) {
        let (wi, wo) = (w * r, w * (1.0 - r));
        r_in[0] += wi;
        r_in[1] += wi * r;
        r_in[2] += wi * r * r;
        r_out[0] += wo;
        r_out[1] += wo * r;
    }

    // z sums of offsets from mu: [e^0 e^1 e^2] with and without likelihood.
    let (mut z_in, mut z_out) = ([0.0; 3], [0.0; 3]);
    for k in 0..grid.z_points {
        let z = lo + (k as f64 + 0.5) * dz;
        let e = z - s.mu;
        let g = normal(z, s.mu, s.sigma2);
        let l = g * normal(z_obs, z, tau2);
        for (p, (zi, zo)) in z_in.iter_mut().zip(z_out.iter_mut()).enumerate() {
            let ep = e.powi(p as i32);
            *zi += l * ep;
            *zo += g * ep;
        }
    }

    let mass = r_in[0] * z_in[0] + uniform * r_out[0] * z_out[0];
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Degenerate(format!("posterior mass {mass} at z_obs {z_obs}")));
    }
    let moment = |p: usize| (r_in[0] * z_in[p] + uniform * r_out[0] * z_out[p]) / mass;
    let e1 = moment(1);
    let e2 = moment(2);
    Ok(QuadraturePosterior {
        mean: s.mu + e1,
        variance: e2 - e1 * e1,
        inlier_mean: (r_in[1] * z_in[0] + uniform * r_out[1] * z_out[0]) / mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesfilter::{update_pixel, Update};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double loop over the grid, for checking the factorised sums.
    fn literal(s: &PixelState, z_obs: f64, tau2: f64, grid: &QuadratureGrid) -> QuadraturePosterior {
        let (lo, hi) = z_interval(s, z_obs, tau2.sqrt());
        let dz = (hi - lo) / grid.z_points as f64;
        let uniform = if z_obs < s.z_min || z_obs > s.z_max {
            0.0
        } else {
            1.0 / (s.z_max - s.z_min)
        };
        let (mut m0, mut mz, mut mzz, mut mr) = (0.0, 0.0, 0.0, 0.0);
        for (r, w) in beta_weights(s.a, s.b, grid.rho_points) {
            for k in 0..grid.z_points {
                let z = lo + (k as f64 + 0.5) * dz;
                let f = w * normal(z, s.mu, s.sigma2) * (r * normal(z_obs, z, tau2) + (1.0 - r) * uniform);
                m0 += f;
                mz += f * z;
                mzz += f * z * z;
                mr += f * r;
            }
        }
        let mean = mz / m0;
        QuadraturePosterior {
            mean,
            variance: mzz / m0 - mean * mean,
            inlier_mean: mr / m0,
        }
    }

    fn state(mu: f64, sigma: f64, a: f64, b: f64, k: f64) -> PixelState {
        PixelState {
            mu,
            sigma2: sigma * sigma,
            a,
            b,
            z_min: mu - k * sigma,
            z_max: mu + k * sigma,
        }
    }

    #[test]
    fn gaussian_product_without_outliers() {
        let s = state(0.2, 0.02, 3.0, 2.0, 1.0);
        let (z_obs, tau2) = (0.215, 0.01f64.powi(2));
        let grid = QuadratureGrid {
            inlier_only: true,
            ..Default::default()
        };
        let q = quadrature_posterior(&s, z_obs, tau2, &grid).unwrap();
        let var = 1.0 / (1.0 / s.sigma2 + 1.0 / tau2);
        let mean = var * (s.mu / s.sigma2 + z_obs / tau2);
        assert!((q.mean - mean).abs() < 1e-6);
        assert!((q.variance - var).abs() < 1e-6 * var.max(1e-6));
        // Only the inlier branch: rho posterior is Beta(a + 1, b).
        assert!((q.inlier_mean - 4.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn factorised_sum_equals_double_loop() {
        let grid = QuadratureGrid {
            z_points: 96,
            rho_points: 40,
            inlier_only: false,
        };
        for (s, z_obs, tau2) in [
            (state(0.1, 0.01, 5.0, 3.0, 2.0), 0.104, 1e-4),
            (state(0.5, 0.1, 2.0, 9.0, 0.7), 0.62, 0.003),
            (state(0.05, 0.004, 20.0, 20.0, 3.0), 0.058, 2e-5),
        ] {
            let f = quadrature_posterior(&s, z_obs, tau2, &grid).unwrap();
            let l = literal(&s, z_obs, tau2, &grid);
            assert!((f.mean - l.mean).abs() < 1e-12 * l.mean.abs());
            assert!((f.variance - l.variance).abs() < 1e-7 * l.variance);
            assert!((f.inlier_mean - l.inlier_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_changes_little() {
        let s = state(0.25, 0.03, 4.0, 6.0, 1.5);
        let coarse = quadrature_posterior(&s, 0.27, 0.02f64.powi(2), &QuadratureGrid::default()).unwrap();
        let fine = quadrature_posterior(
            &s,
            0.27,
            0.02f64.powi(2),
            &QuadratureGrid {
                z_points: 8192,
                rho_points: 2048,
                inlier_only: false,
            },
        )
        .unwrap();
        assert!((coarse.mean - fine.mean).abs() < 1e-5 * fine.mean);
        assert!((coarse.variance - fine.variance).abs() < 1e-5 * fine.variance);
        assert!((coarse.inlier_mean - fine.inlier_mean).abs() < 1e-5);
    }

    #[test]
    fn agrees_with_moment_matched_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mu = rng.random_range(0.02..1.0);
            let sigma = mu * rng.random_range(0.05..0.3);
            let s = state(mu, sigma, rng.random_range(2.0..30.0), rng.random_range(2.0..30.0), rng.random_range(0.5..3.0));
            let tau = sigma * rng.random_range(0.3..2.0);
            let z_obs = mu + sigma * rng.random_range(-4.0..4.0);
            let Update::Accepted(u) = update_pixel(&s, z_obs, tau * tau).unwrap() else {
                continue;
            };
            let q = quadrature_posterior(&s, z_obs, tau * tau, &QuadratureGrid::default()).unwrap();
            assert!((u.mu - q.mean).abs() <= 1e-3 * q.mean.abs());
            assert!((u.sigma2 - q.variance).abs() <= 1e-3 * q.variance);
            assert!((u.inlier_ratio() - q.inlier_mean).abs() <= 1e-3 * q.inlier_mean);
        }
    }

    #[test]
    fn no_mass_is_an_error() {
        // Measurement 1e4 deviations away and outside the outlier range.
        let s = state(0.1, 0.001, 2.0, 2.0, 1.0);
        let grid = QuadratureGrid {
            z_points: 64,
            rho_points: 16,
            inlier_only: false,
        };
        assert!(matches!(
            quadrature_posterior(&s, 10.0, 1e-8, &grid),
            Err(Error::Degenerate(_))
        ));
        assert!(quadrature_posterior(&s, 0.1, 0.0, &grid).is_err());
    }
}
