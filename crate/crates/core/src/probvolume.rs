//! Depth and uncertainty regression from per-pixel distributions over
//! hypothesis depth planes.

use crate::error::{Error, Result};
use crate::geometry::DepthField;
use crate::Grid;

const NORMALIZATION_TOL: f64 = 1e-6;

/// Strictly increasing positive depth planes, at least two.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthHypotheses {
    planes: Vec<f64>,
}

impl DepthHypotheses {
    pub fn new(planes: Vec<f64>) -> Result<Self> {
        if planes.len() < 2 {
            return Err(Error::InvalidArgument(format!("{} depth planes, need >= 2", planes.len())));
        }
        if !planes.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(Error::InvalidArgument("depth planes must be finite and positive".into()));
        }
        if !planes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("depth planes must be strictly increasing".into()));
        }
        Ok(Self { planes })
    }

    /// `count` planes spaced uniformly in inverse depth over `[near, far]`.
    pub fn uniform_inverse(near: f64, far: f64, count: usize) -> Result<Self> {
        if !(near > 0.0 && far > near) || count < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad plane range [{near}, {far}] x {count}"
            )));
        }
        let (zn, zf) = (1.0 / near, 1.0 / far);
        // Largest inverse depth first so the planes come out increasing.
        let planes = (0..count)
            .map(|j| {
                let t = j as f64 / (count - 1) as f64;
                1.0 / (zn + t * (zf - zn))
            })
            .collect();
        Self::new(planes)
    }

    pub fn planes(&self) -> &[f64] {
        &self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }
}

/// H x W x N_d probabilities, stored pixel-major (`probs[pixel * N_d + j]`).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVolume {
    width: usize,
    height: usize,
    hypotheses: DepthHypotheses,
    probs: Vec<f64>,
}

impl ProbabilityVolume {
    /// Checks shape and non-negativity; normalisation is checked by the
    /// regression functions.
    pub fn new(width: usize, height: usize, hypotheses: DepthHypotheses, probs: Vec<f64>) -> Result<Self> {
        let expected = width * height * hypotheses.len();
        if probs.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "volume needs {expected} probabilities, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidArgument(format!("probability {p}")));
        }
        Ok(Self {
            width,
            height,
            hypotheses,
            probs,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn hypotheses(&self) -> &DepthHypotheses {
        &self.hypotheses
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Distribution of one pixel.
    pub fn pixel(&self, index: usize) -> &[f64] {
        let n = self.hypotheses.len();
        &self.probs[index * n..(index + 1) * n]
    }

    /// Probability slice for plane `j` as an H x W grid.
    pub fn slice(&self, j: usize) -> Grid<f64> {
        let n = self.hypotheses.len();
        Grid::from_vec(
            self.width,
            self.height,
            (0..self.width * self.height).map(|i| self.probs[i * n + j]).collect(),
        )
        .expect("slice has H x W entries")
    }

    /// Stacks per-plane H x W slices.
    pub fn from_slices(hypotheses: DepthHypotheses, slices: &[Grid<f64>]) -> Result<Self> {
        if slices.len() != hypotheses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} slices for {} planes",
                slices.len(),
                hypotheses.len()
            )));
        }
        let dims = slices[0].dims();
        for s in slices {
            s.ensure_dims(dims)?;
        }
        let n = hypotheses.len();
        let mut probs = vec![0.0; dims.0 * dims.1 * n];
        for (j, s) in slices.iter().enumerate() {
            for (i, p) in s.iter().enumerate() {
                probs[i * n + j] = *p;
            }
        }
        Self::new(dims.0, dims.1, hypotheses, probs)
    }

    fn check_normalized(&self) -> Result<()> {
        for i in 0..self.width * self.height {
            let sum: f64 = self.pixel(i).iter().sum();
            if !((sum - 1.0).abs() <= NORMALIZATION_TOL) {
                return Err(Error::UnnormalizedVolume { pixel: i, sum });
            }
        }
        Ok(())
    }
}

/// Per-pixel expected depth `sum_j d_j P_j`; every pixel is valid.
pub fn expectation_depth(v: &ProbabilityVolume) -> Result<DepthField> {
    v.check_normalized()?;
    let planes = v.hypotheses.planes();
    let values = Grid::from_vec(
        v.width,
        v.height,
        (0..v.width * v.height)
            .map(|i| v.pixel(i).iter().zip(planes).map(|(p, d)| p * d).sum())
            .collect(),
    )?;
    DepthField::new(values, Grid::filled(v.width, v.height, true))
}

/// Per-pixel Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy_uncertainty(v: &ProbabilityVolume) -> Result<Grid<f64>> {
    v.check_normalized()?;
    Grid::from_vec(
        v.width,
        v.height,
        (0..v.width * v.height)
            .map(|i| {
                v.pixel(i)
                    .iter()
                    .filter(|p| **p > 0.0)
                    .map(|p| -p * p.ln())
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect(),
    )
}
