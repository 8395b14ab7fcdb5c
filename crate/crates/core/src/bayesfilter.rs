//! Per-pixel inverse-depth filter with a Gaussian x Beta posterior.
//!
//! Each pixel tracks `N(z | mu, sigma^2) Beta(rho | a, b)` where `z` is the
//! inverse depth and `rho` the probability that a measurement is an inlier.
//! A measurement is either `N(z_obs | z, tau^2)` (inlier) or uniform over the
//! pixel's `[z_min, z_max]` (outlier). Each update matches the first two
//! moments of the exact posterior for `z` and for `rho`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::Observation;
use crate::error::{Error, Result};
use crate::geometry::DepthField;
use crate::photometrics::DEFAULT_DEPTH_CAP;
use crate::Grid;

/// Lower bound of the outlier interval.
pub const MIN_INVERSE_DEPTH: f64 = 1e-6;
/// Below this Gaussian density, an observation outside `[z_min, z_max]` is
/// discarded rather than treated as a pure inlier.
const MIN_GAUSSIAN_DENSITY: f64 = 1e-12;
const MIN_REFINED_DEPTH: f64 = 1e-3;

/// Filter configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterParams {
    /// Initial Beta parameters for the inlier ratio.
    pub a0: f64,
    pub b0: f64,
    /// A pixel converges once `sigma < sigma_conv_rel * mu0`.
    pub sigma_conv_rel: f64,
    /// ... or once an update changes `sigma^2` by less than this fraction.
    pub rel_change_tol: f64,
    /// Refined depths are clamped to `[1e-3, depth_cap]`.
    pub depth_cap: f64,
    /// Drop refined pixels whose inlier estimate `a / (a + b)` is below this.
    pub min_inlier_ratio: Option<f64>,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            a0: 1.0,
            b0: 1.0,
            sigma_conv_rel: 0.02,
            rel_change_tol: 1e-3,
            depth_cap: DEFAULT_DEPTH_CAP,
            min_inlier_ratio: None,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("a0", self.a0)?;
        positive("b0", self.b0)?;
        positive("sigma_conv_rel", self.sigma_conv_rel)?;
        positive("rel_change_tol", self.rel_change_tol)?;
        positive("depth_cap", self.depth_cap)?;
        if let Some(t) = self.min_inlier_ratio {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!("min_inlier_ratio {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Dense monocular depth with an inverse-depth standard deviation per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct MonocularPrior {
    depth: DepthField,
    uncertainty: Grid<f64>,
}

impl MonocularPrior {
    pub fn new(depth: DepthField, uncertainty: Grid<f64>) -> Result<Self> {
        uncertainty.ensure_dims(depth.dims())?;
        for i in 0..uncertainty.len() {
            if depth.mask()[i] && !(uncertainty[i] > 0.0 && uncertainty[i].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "prior uncertainty at {i} is {}",
                    uncertainty[i]
                )));
            }
        }
        Ok(Self { depth, uncertainty })
    }

    pub fn depth(&self) -> &DepthField {
        &self.depth
    }

    pub fn uncertainty(&self) -> &Grid<f64> {
        &self.uncertainty
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }
}

/// Posterior parameters of one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelState {
    pub mu: f64,
    pub sigma2: f64,
    pub a: f64,
    pub b: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl PixelState {
    /// Prior from a depth and its inverse-depth standard deviation.
    pub fn from_prior(depth: f64, sigma: f64, a0: f64, b0: f64) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::NonPositiveDepth(depth));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior sigma {sigma}")));
        }
        let mu = 1.0 / depth;
        Ok(Self {
            mu,
            sigma2: sigma * sigma,
            a: a0,
            b: b0,
            z_min: (mu - sigma).max(MIN_INVERSE_DEPTH),
            z_max: mu + sigma,
        })
    }

    /// Posterior mean of the inlier ratio.
    pub fn inlier_ratio(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// Result of feeding one measurement to a pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Update {
    Accepted(PixelState),
    /// The measurement has no support under either branch; state unchanged.
    Rejected,
}

/// Normalised branch weights `(C1', C2')` of a measurement.
fn branch_weights(s: &PixelState, z_obs: f64, tau2: f64) -> Option<(f64, f64)> {
    let n = s.a + s.b;
    let var = s.sigma2 + tau2;
    let dz = z_obs - s.mu;
    let gaussian = (-0.5 * dz * dz / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let inside = z_obs >= s.z_min && z_obs <= s.z_max;
    if !inside && gaussian <= MIN_GAUSSIAN_DENSITY {
        return None;
    }
    let uniform = if inside { 1.0 / (s.z_max - s.z_min) } else { 0.0 };
    let c1 = s.a / n * gaussian;
    let c2 = s.b / n * uniform;
    let total = c1 + c2;
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some((c1 / total, c2 / total))
}

/// Moment-matched Beta parameters after a measurement with inlier weight
/// `c1`. Algebraically equal to solving the Beta moment equations for the
/// mixture `c1 Beta(a+1, b) + (1-c1) Beta(a, b+1)`, rearranged to avoid
/// cancellation.
fn beta_update(a: f64, b: f64, c1: f64) -> (f64, f64) {
    let n = a + b;
    let num = (a + c1) * (c1 * (a - b) - a * (b + 1.0));
    let den = c1 * c1 * (n + 2.0) - (b + 1.0) * (a + 2.0 * c1);
    let a_new = num / den;
    let b_new = a_new * (b + 1.0 - c1) / (a + c1);
    if a_new > 0.0 && b_new > 0.0 && a_new.is_finite() && b_new.is_finite() {
        (a_new, b_new)
    } else {
        (a, b)
    }
}

/// Applies one inverse-depth measurement `z_obs` with variance `tau2`.
pub fn update_pixel(state: &PixelState, z_obs: f64, tau2: f64) -> Result<Update> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(Error::InvalidArgument(format!("observation variance {tau2}")));
    }
    if !z_obs.is_finite() {
        return Err(Error::InvalidArgument(format!("observation {z_obs}")));
    }
    let Some((c1, c2)) = branch_weights(state, z_obs, tau2) else {
        return Ok(Update::Rejected);
    };
    let s = state;
    let s2 = 1.0 / (1.0 / s.sigma2 + 1.0 / tau2);
    let m = s2 * (s.mu / s.sigma2 + z_obs / tau2);
    let mu = c1 * m + c2 * s.mu;
    // C1'(s^2 + m^2) + C2'(sigma^2 + mu^2) - mu'^2, expanded so that the
    // square terms cancel exactly.
    let dm = m - s.mu;
    let sigma2 = c1 * s2 + c2 * s.sigma2 + c1 * c2 * dm * dm;
    let (a, b) = beta_update(s.a, s.b, c1);
    Ok(Update::Accepted(PixelState {
        mu,
        sigma2,
        a,
        b,
        z_min: s.z_min,
        z_max: s.z_max,
    }))
}

/// Dense filter state. Pixels outside `valid` carry NaN parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub mu: Grid<f64>,
    pub sigma2: Grid<f64>,
    pub a: Grid<f64>,
    pub b: Grid<f64>,
    pub z_min: Grid<f64>,
    pub z_max: Grid<f64>,
    pub converged: Grid<bool>,
    pub valid: Grid<bool>,
}

impl FilterState {
    pub fn dims(&self) -> (usize, usize) {
        self.mu.dims()
    }

    pub fn pixel(&self, i: usize) -> Option<PixelState> {
        self.valid[i].then(|| PixelState {
            mu: self.mu[i],
            sigma2: self.sigma2[i],
            a: self.a[i],
            b: self.b[i],
            z_min: self.z_min[i],
            z_max: self.z_max[i],
        })
    }

    fn from_pixels(width: usize, height: usize, pixels: &[Option<PixelState>], converged: Vec<bool>) -> Self {
        let field = |f: fn(&PixelState) -> f64| {
            Grid::from_vec(width, height, pixels.iter().map(|p| p.as_ref().map_or(f64::NAN, f)).collect())
                .expect("pixel count matches dims")
        };
        FilterState {
            mu: field(|p| p.mu),
            sigma2: field(|p| p.sigma2),
            a: field(|p| p.a),
            b: field(|p| p.b),
            z_min: field(|p| p.z_min),
            z_max: field(|p| p.z_max),
            converged: Grid::from_vec(width, height, converged).expect("pixel count matches dims"),
            valid: Grid::from_vec(width, height, pixels.iter().map(Option::is_some).collect())
                .expect("pixel count matches dims"),
        }
    }

    /// Mean inlier estimate over valid pixels.
    pub fn mean_inlier_ratio(&self) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for i in 0..self.valid.len() {
            if self.valid[i] {
                sum += self.a[i] / (self.a[i] + self.b[i]);
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Initialises every valid prior pixel.
pub fn init_state(prior: &MonocularPrior, params: &FilterParams) -> Result<FilterState> {
    params.validate()?;
    let (w, h) = prior.dims();
    let pixels = init_pixels(prior, params)?;
    Ok(FilterState::from_pixels(w, h, &pixels, vec![false; w * h]))
}

fn init_pixels(prior: &MonocularPrior, params: &FilterParams) -> Result<Vec<Option<PixelState>>> {
    (0..prior.uncertainty.len())
        .map(|i| {
            prior
                .depth
                .at_index(i)
                .map(|d| PixelState::from_prior(d, prior.uncertainty[i], params.a0, params.b0))
                .transpose()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionStatus {
    /// Every observation was applied.
    Completed,
    /// Stopped early: all valid pixels converged after this many observations.
    Converged { after: usize },
    /// No observations were given; the prior is returned unchanged.
    NoObservations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult {
    pub state: FilterState,
    /// `1 / mu` on updated pixels, the prior depth elsewhere.
    pub refined: DepthField,
    /// Inverse-depth standard deviation.
    pub uncertainty: Grid<f64>,
    /// Pixels that accepted at least one observation.
    pub updated: Grid<bool>,
    pub status: FusionStatus,
    /// Number of accepted pixel updates.
    pub accepted_updates: usize,
}

#[derive(Clone, Copy)]
struct Cell {
    state: Option<PixelState>,
    mu0: f64,
    updated: bool,
    converged: bool,
    accepted: usize,
}

/// Fuses a sequence of observations into the prior.
///
/// Only pixels masked in an observation are updated by it. Pixels are
/// independent, so the parallel map produces identical results for any
/// thread count.
pub fn run_fusion(
    prior: &MonocularPrior,
    observations: &[Observation],
    params: &FilterParams,
) -> Result<FusionResult> {
    params.validate()?;
    let dims = prior.dims();
    for obs in observations {
        obs.inv_depth().ensure_dims(dims)?;
    }
    let (w, h) = dims;
    let mut cells: Vec<Cell> = init_pixels(prior, params)?
        .into_iter()
        .map(|state| Cell {
            mu0: state.map_or(f64::NAN, |s| s.mu),
            state,
            updated: false,
            converged: false,
            accepted: 0,
        })
        .collect();

    let mut status = if observations.is_empty() {
        log::warn!("fusion called without observations; returning the prior");
        FusionStatus::NoObservations
    } else {
        FusionStatus::Completed
    };

    for (iteration, obs) in observations.iter().enumerate() {
        cells.par_iter_mut().enumerate().try_for_each(|(i, cell)| -> Result<()> {
            let (Some(state), false) = (cell.state, cell.converged) else {
                return Ok(());
            };
            let Some((z, tau2)) = obs.at_index(i) else {
                return Ok(());
            };
            if let Update::Accepted(next) = update_pixel(&state, z, tau2)? {
                let sigma_conv = params.sigma_conv_rel * cell.mu0;
                let change = (next.sigma2 - state.sigma2).abs() / state.sigma2;
                cell.converged = next.sigma2 < sigma_conv * sigma_conv || change < params.rel_change_tol;
                cell.state = Some(next);
                cell.updated = true;
                cell.accepted += 1;
            }
            Ok(())
        })?;
        let all_converged = cells.iter().all(|c| c.state.is_none() || c.converged);
        if all_converged && iteration + 1 < observations.len() {
            status = FusionStatus::Converged { after: iteration + 1 };
            break;
        }
    }

    let mut refined_values = Grid::filled(w, h, f64::NAN);
    let mut refined_mask = Grid::filled(w, h, false);
    let mut uncertainty = Grid::filled(w, h, f64::NAN);
    for (i, cell) in cells.iter().enumerate() {
        let Some(state) = cell.state else { continue };
        let keep = match params.min_inlier_ratio {
            Some(t) if cell.updated => state.inlier_ratio() >= t,
            _ => true,
        };
        if cell.updated {
            let depth = if state.mu > 0.0 { 1.0 / state.mu } else { params.depth_cap };
            refined_values[i] = depth.clamp(MIN_REFINED_DEPTH, params.depth_cap);
            uncertainty[i] = state.sigma2.sqrt();
        } else {
            refined_values[i] = prior.depth.values()[i];
            uncertainty[i] = prior.uncertainty[i];
        }
        refined_mask[i] = keep;
    }
    let pixels: Vec<Option<PixelState>> = cells.iter().map(|c| c.state).collect();
    Ok(FusionResult {
        state: FilterState::from_pixels(w, h, &pixels, cells.iter().map(|c| c.converged).collect()),
        refined: DepthField::new(refined_values, refined_mask)?,
        uncertainty,
        updated: Grid::from_vec(w, h, cells.iter().map(|c| c.updated).collect())?,
        status,
        accepted_updates: cells.iter().map(|c| c.accepted).sum(),
    })
}
