//! Cross-module checks on rendered synthetic scenes.

use depthfuse::consistency::{check_pair, fuse_checks, ConsistencyThresholds};
use depthfuse::geometry::{project, unproject, warp_depth, warp_image, DepthField, Intrinsics, RigidTransform, Vector2, Vector3};
use depthfuse::io::relative_pose;
use depthfuse::photometrics::{photometric_residual, DEFAULT_ALPHA};
use depthfuse::synth::{forward_trajectory, make_scene, pixel_rng, Layout, RenderedView, SceneSpec};
use depthfuse::Grid;
use rand_distr::{Distribution, StandardNormal};

fn k() -> Intrinsics {
    Intrinsics::new(220.0, 220.0, 191.5, 63.5, 384, 128).unwrap()
}

fn render(layout: Layout, seed: u64) -> (Vec<RenderedView>, Vec<RigidTransform>) {
    let spec = SceneSpec {
        layout,
        depth_range: [4.0, 60.0],
        texture: 0,
        seed,
    };
    let trajectory = forward_trajectory(3, 1.0, seed);
    (make_scene(&spec, &k(), &trajectory).unwrap(), trajectory)
}

#[test]
fn warped_depth_matches_target_rendering() {
    for layout in [Layout::FrontoParallel, Layout::Staircase, Layout::Mixed] {
        let (views, poses) = render(layout, 3);
        let target = &views[1].depth;
        let warped = warp_depth(&views[0].depth, &relative_pose(&poses, 0, 1).unwrap(), &k());
        let (w, h) = target.dims();
        let (mut covered, mut close) = (0usize, 0usize);
        for y in 0..h {
            for x in 0..w {
                let Some(d) = warped.at(x, y) else { continue };
                covered += 1;
                // Nearest-pixel rasterisation: accept any depth spanned by
                // the 3x3 neighbourhood of the target rendering.
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for ny in y.saturating_sub(1)..(y + 2).min(h) {
                    for nx in x.saturating_sub(1)..(x + 2).min(w) {
                        if let Some(t) = target.at(nx, ny) {
                            lo = lo.min(t);
                            hi = hi.max(t);
                        }
                    }
                }
                if d >= lo * (1.0 - 1e-9) && d <= hi * (1.0 + 1e-9) {
                    close += 1;
                }
            }
        }
        let rate = close as f64 / covered as f64;
        assert!(covered > w * h / 2, "{layout:?}: covered {covered}");
        assert!(rate >= 0.95, "{layout:?}: {rate}");
    }
}

#[test]
fn exact_depth_explains_the_source_image() {
    let (views, poses) = render(Layout::Mixed, 5);
    let pose = relative_pose(&poses, 1, 0).unwrap();
    let residual_with = |depth: &DepthField| {
        let (warped, mask) = warp_image(&views[0].image, depth, &pose, &k()).unwrap();
        let r = photometric_residual(&views[1].image, &warped, DEFAULT_ALPHA).unwrap();
        let mut values: Vec<f64> = (0..r.len()).filter(|&i| mask[i]).map(|i| r[i]).collect();
        values.sort_by(f64::total_cmp);
        values[values.len() / 2]
    };
    let exact = residual_with(&views[1].depth);
    let wrong = residual_with(&views[1].depth.scaled(1.1).unwrap());
        // Medians: occluded pixels are photometrically wrong even with exact depth.
    assert!(exact < 1e-3, "median residual {exact}");
    assert!(exact < 0.1 * wrong, "exact {exact}, 10% off {wrong}");
}

#[test]
fn source_noise_lowers_the_pass_rate() {
    let th = ConsistencyThresholds::default();
    for seed in 0..20 {
        let (views, poses) = render(Layout::Mixed, seed);
        let pose = relative_pose(&poses, 1, 0).unwrap();
        let rates: Vec<f64> = [0.0, 0.01, 0.05]
            .iter()
            .map(|&sigma_rel| {
                let source = &views[0].depth;
                let noisy = Grid::from_fn(source.width(), source.height(), |x, y| {
                    let i = y * source.width() + x;
                    let n: f64 = StandardNormal.sample(&mut pixel_rng(seed, 7, i));
                    source.at(x, y).map_or(f64::NAN, |d| d * (1.0 + sigma_rel * n.clamp(-3.0, 3.0)))
                });
                let r = check_pair(&views[1].depth, &DepthField::from_values(noisy), &pose, &k(), &th).unwrap();
                r.passed_count() as f64 / r.covered_count() as f64
            })
            .collect();
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "seed {seed}: {rates:?}");
    }
}

#[test]
fn observation_variance_matches_triangulation_sensitivity() {
    // Rectified pair with baseline b along x: inverse depth z = disparity / (f b),
    // so a matching error of kappa pixels moves z by kappa / (f b).
    let k = Intrinsics::new(100.0, 100.0, 31.5, 23.5, 64, 48).unwrap();
    let b = 0.5;
    let pose = RigidTransform::from_translation(Vector3::new(-b, 0.0, 0.0));
    let target = DepthField::constant(64, 48, 4.0).unwrap();
    let source = DepthField::constant(64, 48, 4.0).unwrap();
    let report = check_pair(&target, &source, &pose, &k, &ConsistencyThresholds::default()).unwrap();
    let obs = fuse_checks(&[report], &target).unwrap();

    let triangulate = |u_s: f64| -> f64 {
        let u_t = 31.5;
        (u_t - u_s) / (k.fx * b)
    };
    let point = unproject(&Vector2::new(31.5, 23.5), 4.0, &k).unwrap();
    let (px, _) = project(&pose.transform_point(&point), &k).unwrap();
    assert!((triangulate(px.x) - 0.25).abs() < 1e-12);
    let h = 1e-3;
    let slope = (triangulate(px.x - h) - triangulate(px.x + h)) / (2.0 * h);
    let kappa = 0.5;
    let (_, var) = obs.at_index(23 * 64 + 31).unwrap();
    assert!((var.sqrt() - kappa * slope).abs() < 1e-9, "{} vs {}", var.sqrt(), kappa * slope);
}
