//! Pipeline configuration (TOML). Every section is optional; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use depthfuse::bayesfilter::FilterParams;
use depthfuse::consistency::ConsistencyThresholds;
use depthfuse::geometry::Intrinsics;
use depthfuse::photometrics::{DEFAULT_ALPHA, DEFAULT_DEPTH_CAP, DEFAULT_SMOOTHNESS_WEIGHT, DEFAULT_SPARSIFICATION_STEP};
use depthfuse::synth::{Layout, SceneSpec};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    pub threads: usize,
    pub paths: Paths,
    pub consistency: ConsistencyThresholds,
    pub filter: FilterParams,
    pub fusion: FusionConfig,
    pub loss: LossConfig,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Dataset directory (see [`crate::dataset`]).
    pub data: PathBuf,
    /// Output directory.
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Source frame offsets per filter iteration, in order.
    pub view_sets: Vec<Vec<i64>>,
    /// Target frames; empty selects every frame whose sources all exist.
    pub targets: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub alpha: f64,
    pub smoothness_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub step: f64,
    pub median_scaling: bool,
    pub cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraConfig {
    pub fn intrinsics(&self) -> depthfuse::Result<Intrinsics> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

/// Monocular prior noise relative to ground-truth inverse depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorNoise {
    pub rel_error: f64,
    pub rel_uncertainty: f64,
}

/// Multi-view depth noise: mixture of relative Gaussian noise in inverse
/// depth (probability `rho`) and uniform outliers over the scene range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvsNoise {
    pub rho: f64,
    pub tau_rel: f64,
    /// Independent estimates per frame, one per view set.
    pub estimates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub frames: usize,
    /// Forward motion per frame in meters.
    pub step: f64,
    pub camera: CameraConfig,
    pub scene: SceneSpec,
    pub prior: PriorNoise,
    pub mvs: MvsNoise,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            out: PathBuf::from("out"),
        }
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            view_sets: vec![vec![-1, 1], vec![-2, 1], vec![-1, 2], vec![-2, 2]],
            targets: Vec::new(),
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            smoothness_weight: DEFAULT_SMOOTHNESS_WEIGHT,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_SPARSIFICATION_STEP,
            median_scaling: false,
            cap: DEFAULT_DEPTH_CAP,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 10,
            step: 1.0,
            camera: CameraConfig {
                width: 384,
                height: 128,
                fx: 220.0,
                fy: 220.0,
                cx: 191.5,
                cy: 63.5,
            },
            scene: SceneSpec {
                layout: Layout::Mixed,
                depth_range: [4.0, 60.0],
                texture: 0,
                seed: 0,
            },
            prior: PriorNoise {
                rel_error: 0.15,
                rel_uncertainty: 0.075,
            },
            mvs: MvsNoise {
                rho: 0.8,
                tau_rel: 3e-4,
                estimates: 4,
            },
        }
    }
}

fn positive(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{name} must be positive and finite, got {v}"));
    }
}

fn core_error(errors: &mut Vec<String>, section: &str, r: depthfuse::Result<()>) {
    if let Err(e) = r {
        errors.push(format!("[{section}] {e}"));
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(list) => {
                CliError::Config(list.into_iter().map(|m| format!("{}: {m}", path.display())).collect())
            }
            e => e,
        })
    }

    /// Reports every problem at once.
    pub fn validate(&self) -> CliResult<()> {
        let mut errors = Vec::new();
        core_error(&mut errors, "consistency", self.consistency.validate());
        core_error(&mut errors, "filter", self.filter.validate());
        for (i, set) in self.fusion.view_sets.iter().enumerate() {
            if set.is_empty() {
                errors.push(format!("[fusion] view set {i} is empty"));
            }
            if set.contains(&0) {
                errors.push(format!("[fusion] view set {i} uses the target itself as a source"));
            }
        }
        if !(self.loss.alpha >= 0.0 && self.loss.alpha <= 1.0) {
            errors.push(format!("[loss] alpha must lie in [0, 1], got {}", self.loss.alpha));
        }
        if !(self.loss.smoothness_weight >= 0.0 && self.loss.smoothness_weight.is_finite()) {
            errors.push(format!("[loss] smoothness_weight must be non-negative, got {}", self.loss.smoothness_weight));
        }
        if !(self.eval.step > 0.0 && self.eval.step <= 0.98) {
            errors.push(format!("[eval] step must lie in (0, 0.98], got {}", self.eval.step));
        }
        positive(&mut errors, "[eval] cap", self.eval.cap);
        let s = &self.synth;
        core_error(&mut errors, "synth.camera", s.camera.intrinsics().map(|_| ()));
        core_error(&mut errors, "synth.scene", s.scene.validate());
        if s.frames == 0 {
            errors.push("[synth] frames must be at least 1".into());
        }
        positive(&mut errors, "[synth] step", s.step);
        if !(s.prior.rel_error >= 0.0 && s.prior.rel_error < 1.0 / 3.0) {
            errors.push(format!("[synth.prior] rel_error must lie in [0, 1/3), got {}", s.prior.rel_error));
        }
        positive(&mut errors, "[synth.prior] rel_uncertainty", s.prior.rel_uncertainty);
        if !(0.0..=1.0).contains(&s.mvs.rho) {
            errors.push(format!("[synth.mvs] rho must lie in [0, 1], got {}", s.mvs.rho));
        }
        positive(&mut errors, "[synth.mvs] tau_rel", s.mvs.tau_rel);
        if s.mvs.estimates == 0 {
            errors.push("[synth.mvs] estimates must be at least 1".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errors))
        }
    }

    /// Frames to refine among `frames`.
    pub fn target_frames(&self, frames: usize) -> CliResult<Vec<usize>> {
        let fits = |t: usize| {
            self.fusion
                .view_sets
                .iter()
                .flatten()
                .all(|o| (0..frames as i64).contains(&(t as i64 + o)))
        };
        if self.fusion.targets.is_empty() {
            return Ok((0..frames).filter(|t| fits(*t)).collect());
        }
        let bad: Vec<String> = self
            .fusion
            .targets
            .iter()
            .filter(|t| !fits(**t))
            .map(|t| format!("[fusion] target {t} needs source frames outside 0..{frames}"))
            .collect();
        if bad.is_empty() {
            Ok(self.fusion.targets.clone())
        } else {
            Err(CliError::Config(bad))
        }
    }
}
