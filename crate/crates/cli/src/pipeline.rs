//! End-to-end refinement of every target frame.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use depthfuse::bayesfilter::{run_fusion, FusionResult, FusionStatus, MonocularPrior};
use depthfuse::consistency::{check_pair, fuse_checks, Observation};
use depthfuse::geometry::{warp_image, DepthField, Intrinsics, RigidTransform};
use depthfuse::io::{self, Manifest};
use depthfuse::photometrics::{
    depth_metrics, min_reprojection, mono_loss, per_pixel_errors, photometric_residual, refined_total_loss,
    sparsification, DepthMetrics, ErrorKind, Image, MetricOptions, SparsificationResult, SparsifyMetric,
};
use depthfuse::Grid;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::dataset::{read_image, Layout};
use crate::error::{io_err, CliError, CliResult};

/// Per-frame outcome, written to `report.toml`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameReport {
    pub frame: usize,
    pub status: String,
    /// Pixels passing the consistency check, per view set.
    pub observed: Vec<usize>,
    pub updated_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_inlier_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_abs_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_abs_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_ause: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_ause: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mono_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_mono_loss: Option<f64>,
    /// Inverse-depth NLL of the refined depth under the prior uncertainty
    /// plus the refined monocular loss.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_prior_abs_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_refined_abs_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_prior_ause: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_refined_ause: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub summary: RunSummary,
    pub frames: Vec<FrameReport>,
}

/// Output file names relative to the output directory.
pub fn refined_path(frame: usize) -> String {
    format!("refined/{frame:06}.pfm")
}

pub fn sigma_path(frame: usize) -> String {
    format!("refined/{frame:06}.sigma.pfm")
}

pub fn state_path(frame: usize) -> String {
    format!("state/{frame:06}.bin")
}

pub fn curve_path(frame: usize, which: &str) -> String {
    format!("curves/{frame:06}_{which}.csv")
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

struct Inputs {
    k: Intrinsics,
    poses: Vec<RigidTransform>,
    targets: Vec<usize>,
}

fn required_files(data: &Layout, cfg: &PipelineConfig, targets: &[usize]) -> Vec<PathBuf> {
    let mut files = BTreeSet::new();
    for &t in targets {
        files.insert(data.prior_depth(t));
        files.insert(data.prior_sigma(t));
        for (e, set) in cfg.fusion.view_sets.iter().enumerate() {
            files.insert(data.mvs(t, e));
            for o in set {
                files.insert(data.mvs((t as i64 + o) as usize, e));
            }
        }
    }
    files.into_iter().collect()
}

fn load_inputs(cfg: &PipelineConfig, data: &Layout) -> CliResult<Inputs> {
    let missing: Vec<PathBuf> = [data.intrinsics(), data.poses()]
        .into_iter()
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingInputs(missing));
    }
    let k = io::read_intrinsics(data.intrinsics())?;
    let poses = io::read_poses(data.poses())?;
    let targets = cfg.target_frames(poses.len())?;
    let missing: Vec<PathBuf> = required_files(data, cfg, &targets)
        .into_iter()
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingInputs(missing));
    }
    Ok(Inputs { k, poses, targets })
}

/// Runs the consistency checks of every view set for `target`.
pub fn observations_for(
    cfg: &PipelineConfig,
    data: &Layout,
    k: &Intrinsics,
    poses: &[RigidTransform],
    target: usize,
) -> CliResult<Vec<Observation>> {
    let mut out = Vec::with_capacity(cfg.fusion.view_sets.len());
    for (e, set) in cfg.fusion.view_sets.iter().enumerate() {
        let target_depth = io::read_depth_pfm(data.mvs(target, e))?;
        let mut reports = Vec::with_capacity(set.len());
        for o in set {
            let source = (target as i64 + o) as usize;
            let source_depth = io::read_depth_pfm(data.mvs(source, e))?;
            let pose = io::relative_pose(poses, target, source)?;
            reports.push(check_pair(&target_depth, &source_depth, &pose, k, &cfg.consistency)?);
        }
        out.push(fuse_checks(&reports, &target_depth)?);
    }
    Ok(out)
}

fn status_name(s: FusionStatus) -> String {
    match s {
        FusionStatus::Completed => "completed".into(),
        FusionStatus::Converged { after } => format!("converged after {after}"),
        FusionStatus::NoObservations => "no observations".into(),
    }
}

/// Min-reprojection monocular loss of `depth` against the configured
/// source frames. Pixels no source covers take the largest residual, 1.
fn frame_mono_loss(
    cfg: &PipelineConfig,
    depth: &DepthField,
    target_image: &Image,
    sources: &[(Image, RigidTransform)],
    k: &Intrinsics,
) -> CliResult<f64> {
    let mut maps = Vec::with_capacity(sources.len());
    for (image, pose) in sources {
        let (warped, mask) = warp_image(image, depth, pose, k)?;
        let mut r = photometric_residual(target_image, &warped, cfg.loss.alpha)?;
        for (v, m) in r.as_mut_slice().iter_mut().zip(mask.iter()) {
            if !m {
                *v = 1.0;
            }
        }
        maps.push(r);
    }
    let photometric = if maps.is_empty() {
        Grid::filled(depth.width(), depth.height(), 1.0)
    } else {
        min_reprojection(&maps)?
    };
    Ok(mono_loss(
        &[photometric],
        std::slice::from_ref(depth),
        std::slice::from_ref(target_image),
        cfg.loss.smoothness_weight,
    )?)
}

struct Evaluation {
    prior: DepthMetrics,
    refined: DepthMetrics,
    prior_curve: SparsificationResult,
    refined_curve: SparsificationResult,
}

fn evaluate(cfg: &PipelineConfig, gt: &DepthField, prior: &MonocularPrior, fused: &FusionResult) -> CliResult<Evaluation> {
    let opts = MetricOptions {
        cap: cfg.eval.cap,
        median_scaling: cfg.eval.median_scaling,
    };
    let curve = |pred: &DepthField, sigma: &Grid<f64>| -> CliResult<SparsificationResult> {
        let (errors, idx) = per_pixel_errors(pred, gt, &opts, ErrorKind::AbsRel)?;
        // Relative uncertainty sigma/mu, matching the relative error metric.
        let unc: Vec<f64> = idx
            .iter()
            .map(|&i| sigma[i] * pred.at_index(i).unwrap_or(f64::NAN))
            .collect();
        Ok(sparsification(&errors, &unc, SparsifyMetric::Mean, cfg.eval.step)?)
    };
    Ok(Evaluation {
        prior: depth_metrics(prior.depth(), gt, &opts)?,
        refined: depth_metrics(&fused.refined, gt, &opts)?,
        prior_curve: curve(prior.depth(), prior.uncertainty())?,
        refined_curve: curve(&fused.refined, &fused.uncertainty)?,
    })
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs the pipeline with a thread pool of `cfg.threads` workers.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<RunReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.threads > 0 {
        builder = builder.num_threads(cfg.threads);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &PipelineConfig) -> CliResult<RunReport> {
    let data = Layout::new(&cfg.paths.data);
    let inputs = load_inputs(cfg, &data)?;
    let out = &cfg.paths.out;
    for sub in ["refined", "state", "curves"] {
        create_dir(&out.join(sub))?;
    }
    let mut manifest = Manifest::new();
    let mut metrics_rows = Vec::new();
    let mut frames = Vec::new();
    let offsets: BTreeSet<i64> = cfg.fusion.view_sets.iter().flatten().copied().collect();

    for &t in &inputs.targets {
        log::info!("frame {t}");
        let prior = MonocularPrior::new(io::read_depth_pfm(data.prior_depth(t))?, io::read_pfm(data.prior_sigma(t))?)?;
        let observations = observations_for(cfg, &data, &inputs.k, &inputs.poses, t)?;
        let fused = run_fusion(&prior, &observations, &cfg.filter)?;

        io::write_depth_pfm(out.join(refined_path(t)), &fused.refined)?;
        io::write_pfm(out.join(sigma_path(t)), &fused.uncertainty)?;
        io::write_state(out.join(state_path(t)), &fused.state)?;
        manifest.add(out, "refined-depth", &refined_path(t))?;
        manifest.add(out, "refined-sigma", &sigma_path(t))?;
        manifest.add(out, "filter-state", &state_path(t))?;

        let (w, h) = prior.dims();
        let mut report = FrameReport {
            frame: t,
            status: status_name(fused.status),
            observed: observations.iter().map(Observation::masked_count).collect(),
            updated_fraction: fused.updated.iter().filter(|u| **u).count() as f64 / (w * h) as f64,
            mean_inlier_ratio: fused.state.mean_inlier_ratio(),
            prior_abs_rel: None,
            refined_abs_rel: None,
            prior_ause: None,
            refined_ause: None,
            prior_mono_loss: None,
            refined_mono_loss: None,
            total_loss: None,
        };

        if data.gt(t).is_file() {
            let gt = io::read_depth_pfm(data.gt(t))?;
            let ev = evaluate(cfg, &gt, &prior, &fused)?;
            for (which, curve) in [("prior", &ev.prior_curve), ("refined", &ev.refined_curve)] {
                let rel = curve_path(t, which);
                io::write_sparsification_csv(out.join(&rel), curve)?;
                manifest.add(out, &format!("sparsification-{which}"), &rel)?;
            }
            report.prior_abs_rel = Some(ev.prior.abs_rel);
            report.refined_abs_rel = Some(ev.refined.abs_rel);
            report.prior_ause = Some(ev.prior_curve.ause);
            report.refined_ause = Some(ev.refined_curve.ause);
            metrics_rows.push((format!("{t:06} prior"), ev.prior));
            metrics_rows.push((format!("{t:06} refined"), ev.refined));
        }

        let image_paths: Vec<PathBuf> = std::iter::once(t)
            .chain(offsets.iter().map(|o| (t as i64 + o) as usize))
            .map(|f| data.image(f))
            .collect();
        if image_paths.iter().all(|p| p.is_file()) {
            let target_image = read_image(&image_paths[0])?;
            let sources = offsets
                .iter()
                .zip(&image_paths[1..])
                .map(|(o, p)| Ok((read_image(p)?, io::relative_pose(&inputs.poses, t, (t as i64 + o) as usize)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let prior_loss = frame_mono_loss(cfg, prior.depth(), &target_image, &sources, &inputs.k)?;
            let refined_loss = frame_mono_loss(cfg, &fused.refined, &target_image, &sources, &inputs.k)?;
            report.prior_mono_loss = Some(prior_loss);
            report.refined_mono_loss = Some(refined_loss);
            report.total_loss = Some(refined_total_loss(&fused.refined, prior.depth(), prior.uncertainty(), refined_loss)?);
        }
        frames.push(report);
    }

    if !metrics_rows.is_empty() {
        io::write_metrics_csv(out.join(METRICS_FILE), &metrics_rows)?;
        manifest.add(out, "metrics", METRICS_FILE)?;
    }
    let summary = RunSummary {
        frames: frames.len(),
        mean_prior_abs_rel: mean(frames.iter().map(|f| f.prior_abs_rel)),
        mean_refined_abs_rel: mean(frames.iter().map(|f| f.refined_abs_rel)),
        mean_prior_ause: mean(frames.iter().map(|f| f.prior_ause)),
        mean_refined_ause: mean(frames.iter().map(|f| f.refined_ause)),
    };
    let report = RunReport { summary, frames };
    let text = toml::to_string(&report).map_err(|e| CliError::Usage(format!("report: {e}")))?;
    std::fs::write(out.join(REPORT_FILE), text).map_err(io_err(out.join(REPORT_FILE)))?;
    manifest.add(out, "report", REPORT_FILE)?;
    manifest.write(out.join(MANIFEST_FILE))?;
    Ok(report)
}
