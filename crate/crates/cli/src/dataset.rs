//! On-disk dataset layout and synthetic dataset generation.
//!
//! ```text
//! <data>/intrinsics.txt
//! <data>/poses.txt                  camera-to-first-camera, KITTI format
//! <data>/prior/NNNNNN.depth.pfm     monocular depth prior
//! <data>/prior/NNNNNN.sigma.pfm     its inverse-depth standard deviation
//! <data>/mvs/NNNNNN_K.pfm           multi-view depth estimate K of frame N
//! <data>/gt/NNNNNN.pfm              ground truth (optional)
//! <data>/images/NNNNNN.pfm          grayscale image in [0, 1] (optional)
//! ```

use std::path::{Path, PathBuf};

use depthfuse::geometry::DepthField;
use depthfuse::io;
use depthfuse::photometrics::Image;
use depthfuse::synth::{forward_trajectory, make_prior, make_scene, sample_observation, MeasurementModel, PriorModel};
use depthfuse::Grid;

use crate::config::SynthConfig;
use crate::error::{io_err, CliResult};

#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn intrinsics(&self) -> PathBuf {
        self.root.join("intrinsics.txt")
    }

    pub fn poses(&self) -> PathBuf {
        self.root.join("poses.txt")
    }

    pub fn prior_depth(&self, frame: usize) -> PathBuf {
        self.root.join(format!("prior/{frame:06}.depth.pfm"))
    }

    pub fn prior_sigma(&self, frame: usize) -> PathBuf {
        self.root.join(format!("prior/{frame:06}.sigma.pfm"))
    }

    pub fn mvs(&self, frame: usize, estimate: usize) -> PathBuf {
        self.root.join(format!("mvs/{frame:06}_{estimate}.pfm"))
    }

    pub fn gt(&self, frame: usize) -> PathBuf {
        self.root.join(format!("gt/{frame:06}.pfm"))
    }

    pub fn image(&self, frame: usize) -> PathBuf {
        self.root.join(format!("images/{frame:06}.pfm"))
    }

    fn create_dirs(&self) -> CliResult<()> {
        for sub in ["prior", "mvs", "gt", "images"] {
            let dir = self.root.join(sub);
            std::fs::create_dir_all(&dir).map_err(io_err(dir))?;
        }
        Ok(())
    }
}

fn stream_seed(seed: u64, frame: usize, slot: u64) -> u64 {
    seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ slot.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Renders a synthetic sequence and writes it in the dataset layout.
pub fn write_synthetic(cfg: &SynthConfig, out: &Layout) -> CliResult<()> {
    let k = cfg.camera.intrinsics()?;
    let trajectory = forward_trajectory(cfg.frames, cfg.step, cfg.seed);
    let views = make_scene(&cfg.scene, &k, &trajectory)?;
    out.create_dirs()?;
    io::write_intrinsics(out.intrinsics(), &k)?;
    io::write_poses(out.poses(), &trajectory)?;

    let [near, far] = cfg.scene.depth_range;
    let (w, h) = (k.width, k.height);
    let z_lo = Grid::filled(w, h, 1.0 / far);
    let z_hi = Grid::filled(w, h, 1.0 / near);
    for (t, view) in views.iter().enumerate() {
        io::write_depth_pfm(out.gt(t), &view.depth)?;
        io::write_pfm(out.image(t), &grayscale(&view.image))?;

        let prior = make_prior(
            &view.depth,
            &PriorModel {
                rel_error: cfg.prior.rel_error,
                rel_uncertainty: cfg.prior.rel_uncertainty,
                seed: stream_seed(cfg.seed, t, 1),
            },
        )?;
        io::write_depth_pfm(out.prior_depth(t), prior.depth())?;
        io::write_pfm(out.prior_sigma(t), prior.uncertainty())?;

        for e in 0..cfg.mvs.estimates {
            let model = MeasurementModel {
                rho: cfg.mvs.rho,
                tau_rel: cfg.mvs.tau_rel,
                seed: stream_seed(cfg.seed, t, 100 + e as u64),
            };
            let obs = sample_observation(&view.depth, &model, &z_lo, &z_hi)?;
            let depth = Grid::from_vec(
                w,
                h,
                (0..w * h)
                    .map(|i| obs.at_index(i).map_or(f64::NAN, |(z, _)| 1.0 / z))
                    .collect(),
            )?;
            io::write_depth_pfm(out.mvs(t, e), &DepthField::from_values(depth))?;
        }
    }
    Ok(())
}

fn grayscale(image: &Image) -> Grid<f64> {
    let (w, h) = image.dims();
    let c = image.channels() as f64;
    Grid::from_fn(w, h, |x, y| image.pixel(x, y).iter().sum::<f64>() / c)
}

/// Loads a grayscale PFM image.
pub fn read_image(path: &Path) -> CliResult<Image> {
    let g = io::read_pfm(path)?;
    let (w, h) = g.dims();
    Ok(Image::new(w, h, 1, g.into_vec())?)
}
