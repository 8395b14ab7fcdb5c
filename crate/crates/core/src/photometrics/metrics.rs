use crate::error::{Error, Result};
use crate::geometry::DepthField;

/// Ground truth beyond this range is ignored and predictions are clamped to it.
pub const DEFAULT_DEPTH_CAP: f64 = 80.0;
const MIN_DEPTH: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricOptions {
    pub cap: f64,
    /// Rescale predictions by `median(gt) / median(pred)` before evaluation.
    pub median_scaling: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_DEPTH_CAP,
            median_scaling: false,
        }
    }
}

/// Standard depth error and accuracy record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    /// Fraction of pixels with `max(pred/gt, gt/pred) < 1.25^k`.
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// Pixels that entered the evaluation.
    pub count: usize,
}

impl DepthMetrics {
    pub const FIELDS: [&'static str; 7] = ["abs_rel", "sq_rel", "rmse", "rmse_log", "d1", "d2", "d3"];

    pub fn values(&self) -> [f64; 7] {
        [self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.d1, self.d2, self.d3]
    }
}

/// Pairs `(pred, gt)` that take part in the evaluation, after median scaling
/// and clamping.
fn evaluation_pairs(pred: &DepthField, gt: &DepthField, opts: &MetricOptions) -> Result<Vec<(f64, f64)>> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            actual: pred.dims(),
        });
    }
    if !(opts.cap > MIN_DEPTH) {
        return Err(Error::InvalidArgument(format!("depth cap {}", opts.cap)));
    }
    let mut pairs: Vec<(f64, f64)> = (0..gt.values().len())
        .filter_map(|i| Some((pred.at_index(i)?, gt.at_index(i)?)))
        .filter(|(_, g)| *g <= opts.cap)
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoValidPixels);
    }
    if opts.median_scaling {
        let ratio = median(pairs.iter().map(|p| p.1).collect()) / median(pairs.iter().map(|p| p.0).collect());
        for p in &mut pairs {
            p.0 *= ratio;
        }
    }
    for p in &mut pairs {
        p.0 = p.0.clamp(MIN_DEPTH, opts.cap);
    }
    Ok(pairs)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Error and accuracy metrics over pixels valid in both maps with
/// `gt <= cap`.
pub fn depth_metrics(pred: &DepthField, gt: &DepthField, opts: &MetricOptions) -> Result<DepthMetrics> {
    let pairs = evaluation_pairs(pred, gt, opts)?;
    let n = pairs.len() as f64;
    let mut m = DepthMetrics {
        abs_rel: 0.0,
        sq_rel: 0.0,
        rmse: 0.0,
        rmse_log: 0.0,
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
        count: pairs.len(),
    };
    let t1 = 1.25;
    let t2 = 1.25 * 1.25;
    let t3 = 1.25 * 1.25 * 1.25;
    for &(p, g) in &pairs {
        let diff = p - g;
        m.abs_rel += diff.abs() / g;
        m.sq_rel += diff * diff / g;
        m.rmse += diff * diff;
        let dl = p.ln() - g.ln();
        m.rmse_log += dl * dl;
        let ratio = (p / g).max(g / p);
        m.d1 += (ratio < t1) as u8 as f64;
        m.d2 += (ratio < t2) as u8 as f64;
        m.d3 += (ratio < t3) as u8 as f64;
    }
    m.abs_rel /= n;
    m.sq_rel /= n;
    m.rmse = (m.rmse / n).sqrt();
    m.rmse_log = (m.rmse_log / n).sqrt();
    m.d1 /= n;
    m.d2 /= n;
    m.d3 /= n;
    Ok(m)
}

/// Per-pixel error measure used for sparsification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// `|pred - gt| / gt`
    AbsRel,
    /// `|pred - gt|`
    Abs,
    /// `max(pred/gt, gt/pred)`
    Ratio,
}

/// Per-pixel errors and the flat index of each evaluated pixel, under the
/// same pixel selection as [`depth_metrics`].
pub fn per_pixel_errors(
    pred: &DepthField,
    gt: &DepthField,
    opts: &MetricOptions,
    kind: ErrorKind,
) -> Result<(Vec<f64>, Vec<usize>)> {
    // Re-derive the index list alongside the pairs.
    let indices: Vec<usize> = (0..gt.values().len())
        .filter(|&i| pred.at_index(i).is_some() && gt.at_index(i).is_some_and(|g| g <= opts.cap))
        .collect();
    let pairs = evaluation_pairs(pred, gt, opts)?;
    debug_assert_eq!(indices.len(), pairs.len());
    let errors = pairs
        .iter()
        .map(|&(p, g)| match kind {
            ErrorKind::AbsRel => (p - g).abs() / g,
            ErrorKind::Abs => (p - g).abs(),
            ErrorKind::Ratio => (p / g).max(g / p),
        })
        .collect();
    Ok((errors, indices))
}
