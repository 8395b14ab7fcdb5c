use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use depthfuse::bayesfilter::{run_fusion, MonocularPrior};
use depthfuse::consistency::{check_pair, fuse_checks};
use depthfuse::io;
use depthfuse::photometrics::{depth_metrics, sparsification, DepthMetrics, MetricOptions, SparsifyMetric};
use depthfuse_cli::dataset::{write_synthetic, Layout};
use depthfuse_cli::{run_pipeline, CliError, CliResult, PipelineConfig};

#[derive(Parser)]
#[command(name = "depthfuse", version, about = "Refine monocular depth priors with multi-view observations")]
struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Consistency-check one target against one source and save the
    /// resulting observation.
    Check {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        target: usize,
        #[arg(long)]
        source: usize,
        /// Multi-view estimate index.
        #[arg(long, default_value_t = 0)]
        estimate: usize,
        /// Directory for `<stem>.invdepth.pfm` and `<stem>.variance.pfm`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "observation")]
        stem: String,
    },
    /// Run the filter from saved observations.
    Fuse {
        #[arg(long)]
        prior_depth: PathBuf,
        #[arg(long)]
        prior_sigma: PathBuf,
        /// Observation path prefix `<dir>/<stem>`; repeat in filter order.
        #[arg(long = "observation")]
        observations: Vec<PathBuf>,
        /// Output directory for `refined.pfm`, `sigma.pfm`, `state.bin`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth metrics of a prediction against ground truth, as CSV.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        median_scaling: bool,
        #[arg(long)]
        cap: Option<f64>,
    },
    /// Sparsification curves from per-pixel errors and uncertainties.
    Sparsify {
        #[arg(long)]
        errors: PathBuf,
        #[arg(long)]
        uncertainty: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Mean)]
        metric: Metric,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full refinement over every target frame.
    Pipeline {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Mean,
    Rms,
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn require(paths: &[&Path]) -> CliResult<()> {
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).map(|p| p.to_path_buf()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::MissingInputs(missing))
    }
}

fn split_prefix(prefix: &Path) -> CliResult<(PathBuf, String)> {
    let stem = prefix
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::Usage(format!("observation prefix {} has no file name", prefix.display())))?;
    let dir = prefix.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok((dir, stem.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { data, seed, frames } => {
            if let Some(d) = data {
                cfg.paths.data = d;
            }
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            if let Some(f) = frames {
                cfg.synth.frames = f;
            }
            cfg.validate()?;
            write_synthetic(&cfg.synth, &Layout::new(&cfg.paths.data))?;
            println!("wrote {} frames to {}", cfg.synth.frames, cfg.paths.data.display());
        }
        Command::Check {
            data,
            target,
            source,
            estimate,
            out,
            stem,
        } => {
            if let Some(d) = data {
                cfg.paths.data = d;
            }
            let layout = Layout::new(&cfg.paths.data);
            let (tp, sp) = (layout.mvs(target, estimate), layout.mvs(source, estimate));
            require(&[&layout.intrinsics(), &layout.poses(), &tp, &sp])?;
            let k = io::read_intrinsics(layout.intrinsics())?;
            let poses = io::read_poses(layout.poses())?;
            let target_depth = io::read_depth_pfm(&tp)?;
            let report = check_pair(
                &target_depth,
                &io::read_depth_pfm(&sp)?,
                &io::relative_pose(&poses, target, source)?,
                &k,
                &cfg.consistency,
            )?;
            let obs = fuse_checks(std::slice::from_ref(&report), &target_depth)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Io { path: out.clone(), source: e })?;
            io::write_observation(&out, &stem, &obs)?;
            println!(
                "covered {} passed {} of {} pixels",
                report.covered_count(),
                report.passed_count(),
                target_depth.values().len()
            );
        }
        Command::Fuse {
            prior_depth,
            prior_sigma,
            observations,
            out,
        } => {
            require(&[&prior_depth, &prior_sigma])?;
            let prior = MonocularPrior::new(io::read_depth_pfm(&prior_depth)?, io::read_pfm(&prior_sigma)?)?;
            let mut obs = Vec::new();
            for prefix in &observations {
                let (dir, stem) = split_prefix(prefix)?;
                let files = [dir.join(format!("{stem}.invdepth.pfm")), dir.join(format!("{stem}.variance.pfm"))];
                require(&[&files[0], &files[1]])?;
                obs.push(io::read_observation(&dir, &stem)?);
            }
            let fused = run_fusion(&prior, &obs, &cfg.filter)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Io { path: out.clone(), source: e })?;
            io::write_depth_pfm(out.join("refined.pfm"), &fused.refined)?;
            io::write_pfm(out.join("sigma.pfm"), &fused.uncertainty)?;
            io::write_state(out.join("state.bin"), &fused.state)?;
            println!("{} pixel updates", fused.accepted_updates);
        }
        Command::Eval {
            pred,
            gt,
            median_scaling,
            cap,
        } => {
            require(&[&pred, &gt])?;
            let opts = MetricOptions {
                cap: cap.unwrap_or(cfg.eval.cap),
                median_scaling: median_scaling || cfg.eval.median_scaling,
            };
            let m: DepthMetrics = depth_metrics(&io::read_depth_pfm(&pred)?, &io::read_depth_pfm(&gt)?, &opts)?;
            print!("{}", io::metrics_csv(&[(pred.display().to_string(), m)])?);
        }
        Command::Sparsify {
            errors,
            uncertainty,
            metric,
            step,
            out,
        } => {
            require(&[&errors, &uncertainty])?;
            let e = io::read_pfm(&errors)?;
            let u = io::read_pfm(&uncertainty)?;
            if e.dims() != u.dims() {
                return Err(depthfuse::Error::DimensionMismatch {
                    expected: e.dims(),
                    actual: u.dims(),
                }
                .into());
            }
            let (ev, uv): (Vec<f64>, Vec<f64>) = e
                .iter()
                .zip(u.iter())
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (*a, *b))
                .unzip();
            let metric = match metric {
                Metric::Mean => SparsifyMetric::Mean,
                Metric::Rms => SparsifyMetric::RootMeanSquare,
            };
            let r = sparsification(&ev, &uv, metric, step.unwrap_or(cfg.eval.step))?;
            io::write_sparsification_csv(&out, &r)?;
            println!("ause {}", r.ause);
        }
        Command::Pipeline { data, out, threads } => {
            if let Some(d) = data {
                cfg.paths.data = d;
            }
            if let Some(o) = out {
                cfg.paths.out = o;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let report = run_pipeline(&cfg)?;
            let s = &report.summary;
            println!("refined {} frames", s.frames);
            if let (Some(a), Some(b)) = (s.mean_prior_abs_rel, s.mean_refined_abs_rel) {
                println!("abs_rel prior {a:.5} refined {b:.5}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
