use super::Image;
use crate::error::{Error, Result};
use crate::geometry::DepthField;
use crate::Grid;

/// Weight of the structural term in [`photometric_residual`].
pub const DEFAULT_ALPHA: f64 = 0.85;
/// Weight of the edge-aware smoothness term in [`mono_loss`].
pub const DEFAULT_SMOOTHNESS_WEIGHT: f64 = 1e-3;

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Per-pixel `(alpha / 2) (1 - SSIM) + (1 - alpha) |target - warped|`.
///
/// SSIM uses 3x3 box statistics with reflect padding; both terms are averaged
/// over channels.
pub fn photometric_residual(target: &Image, warped: &Image, alpha: f64) -> Result<Grid<f64>> {
    if target.dims() != warped.dims() || target.channels() != warped.channels() {
        return Err(Error::DimensionMismatch {
            expected: target.dims(),
            actual: warped.dims(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside [0, 1]")));
    }
    let (w, h) = target.dims();
    let channels = target.channels();
    let mut out = Grid::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut dssim = 0.0;
            let mut l1 = 0.0;
            for c in 0..channels {
                dssim += 1.0 - ssim_at(target, warped, x, y, c);
                l1 += (target.at(x, y, c) - warped.at(x, y, c)).abs();
            }
            let dssim = (dssim / channels as f64).clamp(0.0, 2.0);
            let l1 = l1 / channels as f64;
            *out.get_mut(x, y) = 0.5 * alpha * dssim + (1.0 - alpha) * l1;
        }
    }
    Ok(out)
}

fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let n = len as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

fn ssim_at(a: &Image, b: &Image, x: usize, y: usize, c: usize) -> f64 {
    let (w, h) = a.dims();
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dy in -1..=1isize {
        let yy = reflect(y as isize + dy, h);
        for dx in -1..=1isize {
            let xx = reflect(x as isize + dx, w);
            let va = a.at(xx, yy, c);
            let vb = b.at(xx, yy, c);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
    }
    let n = 9.0;
    let (mu_a, mu_b) = (sa / n, sb / n);
    let var_a = saa / n - mu_a * mu_a;
    let var_b = sbb / n - mu_b * mu_b;
    let cov = sab / n - mu_a * mu_b;
    let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    num / den
}

/// Per-pixel minimum over the residual maps of several source views.
pub fn min_reprojection(residual_maps: &[Grid<f64>]) -> Result<Grid<f64>> {
    let (first, rest) = residual_maps
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("no residual maps".into()))?;
    let mut out = first.clone();
    for map in rest {
        map.ensure_dims(out.dims())?;
        for (o, v) in out.as_mut_slice().iter_mut().zip(map.iter()) {
            *o = o.min(*v);
        }
    }
    Ok(out)
}

/// Edge-aware smoothness of mean-normalised depth.
///
/// Sum of the mean `|dx d| exp(-|dx I|)` over horizontal neighbour pairs and
/// the mean `|dy d| exp(-|dy I|)` over vertical pairs, using forward
/// differences, pairs with both depths valid, and image gradients averaged
/// over channels.
pub fn smoothness_loss(depth: &DepthField, image: &Image) -> Result<f64> {
    image_dims_match(depth, image)?;
    let valid: Vec<f64> = (0..depth.values().len()).filter_map(|i| depth.at_index(i)).collect();
    if valid.is_empty() {
        return Err(Error::NoValidPixels);
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let (w, h) = depth.dims();
    let channels = image.channels() as f64;
    let grad = |x0: usize, y0: usize, x1: usize, y1: usize| -> Option<f64> {
        let d0 = depth.at(x0, y0)? / mean;
        let d1 = depth.at(x1, y1)? / mean;
        let di: f64 = image
            .pixel(x0, y0)
            .iter()
            .zip(image.pixel(x1, y1))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / channels;
        Some((d1 - d0).abs() * (-di).exp())
    };
    let term = |pairs: &mut dyn Iterator<Item = (usize, usize, usize, usize)>| {
        let (mut sum, mut n) = (0.0, 0usize);
        for (x0, y0, x1, y1) in pairs {
            if let Some(g) = grad(x0, y0, x1, y1) {
                sum += g;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let sx = term(&mut (0..h).flat_map(|y| (0..w.saturating_sub(1)).map(move |x| (x, y, x + 1, y))));
    let sy = term(&mut (0..h.saturating_sub(1)).flat_map(|y| (0..w).map(move |x| (x, y, x, y + 1))));
    Ok(sx + sy)
}

fn image_dims_match(depth: &DepthField, image: &Image) -> Result<()> {
    if depth.dims() != image.dims() {
        return Err(Error::DimensionMismatch {
            expected: depth.dims(),
            actual: image.dims(),
        });
    }
    Ok(())
}

/// Multi-scale monocular loss: the scale average of the mean photometric
/// residual plus `lambda` times the smoothness term.
///
/// `photometric[i]` is the per-pixel (already min-reprojected) residual at
/// scale `i`.
pub fn mono_loss(
    photometric: &[Grid<f64>],
    depths: &[DepthField],
    images: &[Image],
    lambda: f64,
) -> Result<f64> {
    let s = photometric.len();
    if s == 0 || depths.len() != s || images.len() != s {
        return Err(Error::InvalidArgument(format!(
            "scale lists must share a non-zero length, got {s}, {}, {}",
            depths.len(),
            images.len()
        )));
    }
    let mut total = 0.0;
    for ((residual, depth), image) in photometric.iter().zip(depths).zip(images) {
        residual.ensure_dims(depth.dims())?;
        let pho = residual.iter().sum::<f64>() / residual.len() as f64;
        total += pho + lambda * smoothness_loss(depth, image)?;
    }
    Ok(total / s as f64)
}

/// Uncertainty-weighted negative log-likelihood `mean(r / U + ln U)`.
///
/// Pixels whose residual is NaN are skipped.
pub fn nll_loss(residual: &Grid<f64>, uncertainty: &Grid<f64>) -> Result<f64> {
    uncertainty.ensure_dims(residual.dims())?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (&r, &u) in residual.iter().zip(uncertainty.iter()) {
        if r.is_nan() {
            continue;
        }
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::InvalidArgument(format!("non-positive uncertainty {u}")));
        }
        sum += r / u + u.ln();
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(sum / n as f64)
}

/// Total loss with a refined depth target: the NLL of the inverse-depth gap
/// `|1/refined - 1/predicted|` under the predicted uncertainty, plus a
/// precomputed monocular loss term.
pub fn refined_total_loss(
    refined: &DepthField,
    predicted: &DepthField,
    uncertainty: &Grid<f64>,
    mono: f64,
) -> Result<f64> {
    refined.values().ensure_dims(predicted.dims())?;
    let residual = Grid::from_fn(refined.width(), refined.height(), |x, y| {
        match (refined.at(x, y), predicted.at(x, y)) {
            (Some(r), Some(p)) => (1.0 / r - 1.0 / p).abs(),
            _ => f64::NAN,
        }
    });
    Ok(nll_loss(&residual, uncertainty)? + mono)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn textured(w: usize, h: usize, seed: u64) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| {
            let v = ((x as u64 * 31 + y as u64 * 17 + c as u64 * 7 + seed) % 23) as f64;
            v / 22.0
        })
        .unwrap()
    }

    #[test]
    fn identical_images_have_zero_residual() {
        let img = textured(9, 7, 1);
        let r = photometric_residual(&img, &img, DEFAULT_ALPHA).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn alpha_zero_is_mean_absolute_difference() {
        let a = textured(9, 7, 1);
        let b = textured(9, 7, 5);
        let r = photometric_residual(&a, &b, 0.0).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let l1: f64 = (0..3).map(|c| (a.at(x, y, c) - b.at(x, y, c)).abs()).sum::<f64>() / 3.0;
                assert!((r.get(x, y) - l1).abs() < 1e-15);
            }
        }
        assert_eq!(DEFAULT_ALPHA, 0.85);
    }

    #[test]
    fn residual_rejects_bad_inputs() {
        let a = textured(9, 7, 1);
        let b = textured(8, 7, 1);
        assert!(photometric_residual(&a, &b, 0.5).is_err());
        assert!(photometric_residual(&a, &a, 1.5).is_err());
    }

    #[test]
    fn min_reprojection_cases() {
        let one = Grid::filled(3, 2, 0.7);
        assert_eq!(min_reprojection(std::slice::from_ref(&one)).unwrap(), one);
        let m = min_reprojection(&[Grid::filled(3, 2, 2.0), Grid::filled(3, 2, 3.0)]).unwrap();
        assert_eq!(m, Grid::filled(3, 2, 2.0));
        assert!(min_reprojection(&[]).is_err());
        assert!(min_reprojection(&[Grid::filled(3, 2, 2.0), Grid::filled(2, 2, 3.0)]).is_err());
    }

    proptest! {
        #[test]
        fn min_is_below_mean(maps in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 12), 1..6)) {
            let grids: Vec<Grid<f64>> = maps.iter().map(|m| Grid::from_vec(4, 3, m.clone()).unwrap()).collect();
            let min = min_reprojection(&grids).unwrap();
            for i in 0..12 {
                let mean = maps.iter().map(|m| m[i]).sum::<f64>() / maps.len() as f64;
                prop_assert!(min[i] <= mean + 1e-12);
            }
        }
    }

    #[test]
    fn smoothness_of_constant_depth_is_zero() {
        let d = DepthField::constant(6, 5, 3.0).unwrap();
        assert_eq!(smoothness_loss(&d, &textured(6, 5, 2)).unwrap(), 0.0);
    }

    #[test]
    fn image_edges_discount_depth_edges() {
        let depth = DepthField::from_values(Grid::from_fn(8, 4, |x, _| if x < 4 { 2.0 } else { 6.0 }));
        let flat = Image::from_fn(8, 4, 1, |_, _, _| 0.5).unwrap();
        let edge = Image::from_fn(8, 4, 1, |x, _, _| if x < 4 { 0.0 } else { 1.0 }).unwrap();
        assert!(smoothness_loss(&depth, &flat).unwrap() > smoothness_loss(&depth, &edge).unwrap());
    }

    #[test]
    fn smoothness_is_scale_invariant() {
        let depth = DepthField::from_values(Grid::from_fn(10, 7, |x, y| 1.0 + 0.3 * x as f64 + 0.1 * (y * y) as f64));
        let img = textured(10, 7, 3);
        let base = smoothness_loss(&depth, &img).unwrap();
        for c in [0.1, 10.0] {
            let scaled = smoothness_loss(&depth.scaled(c).unwrap(), &img).unwrap();
            assert!((scaled - base).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothness_needs_valid_pixels() {
        let depth = DepthField::from_values(Grid::filled(3, 3, f64::NAN));
        assert!(matches!(
            smoothness_loss(&depth, &textured(3, 3, 0)),
            Err(Error::NoValidPixels)
        ));
    }

    #[test]
    fn mono_loss_cases() {
        let flat = Image::from_fn(2, 2, 1, |_, _, _| 0.5).unwrap();
        let zero = Grid::filled(2, 2, 0.0);
        let constant = DepthField::constant(2, 2, 4.0).unwrap();
        let l = mono_loss(&[zero], std::slice::from_ref(&constant), std::slice::from_ref(&flat), DEFAULT_SMOOTHNESS_WEIGHT).unwrap();
        assert_eq!(l, 0.0);

        // Residual 0.5 everywhere; depth columns 0.9 and 1.1 (mean 1) with a
        // flat image give 0.2 from the horizontal pairs and 0 vertically.
        let half = Grid::filled(2, 2, 0.5);
        let ramp = DepthField::from_values(Grid::from_vec(2, 2, vec![0.9, 1.1, 0.9, 1.1]).unwrap());
        let smooth = (1.1f64 - 0.9).abs();
        let expected = 0.5 + 1e-3 * smooth;
        let l = mono_loss(std::slice::from_ref(&half), std::slice::from_ref(&ramp), std::slice::from_ref(&flat), 1e-3).unwrap();
        assert!((l - 0.5002).abs() < 1e-12 && (l - expected).abs() < 1e-15);

        let l0 = mono_loss(std::slice::from_ref(&half), std::slice::from_ref(&ramp), std::slice::from_ref(&flat), 0.0).unwrap();
        assert_eq!(l0, 0.5);
        assert!(mono_loss(&[half], &[], &[flat], 0.0).is_err());
    }

    #[test]
    fn nll_cases() {
        let r = Grid::filled(2, 2, 0.0);
        assert_eq!(nll_loss(&r, &Grid::filled(2, 2, 1.0)).unwrap(), 0.0);
        let r1 = Grid::filled(2, 2, 1.0);
        let e = std::f64::consts::E;
        assert!((nll_loss(&r1, &Grid::filled(2, 2, e)).unwrap() - (1.0 / e + 1.0)).abs() < 1e-12);
        assert!(nll_loss(&r1, &Grid::filled(2, 2, 0.0)).is_err());
    }

    #[test]
    fn nll_minimised_at_mean_residual() {
        let residual = Grid::from_vec(3, 1, vec![0.2, 0.5, 0.8]).unwrap();
        let mean = 0.5;
        let best = (1..5000)
            .map(|i| i as f64 * 1e-3)
            .min_by(|a, b| {
                let la = nll_loss(&residual, &Grid::filled(3, 1, *a)).unwrap();
                let lb = nll_loss(&residual, &Grid::filled(3, 1, *b)).unwrap();
                la.total_cmp(&lb)
            })
            .unwrap();
        assert!((best - mean).abs() <= 1e-3);
    }

    #[test]
    fn refined_total_loss_matches_nll() {
        let refined = DepthField::constant(2, 2, 2.0).unwrap();
        let predicted = DepthField::constant(2, 2, 4.0).unwrap();
        let sigma = Grid::filled(2, 2, 0.25);
        let l = refined_total_loss(&refined, &predicted, &sigma, 0.1).unwrap();
        let expected = 0.25 / 0.25 + 0.25f64.ln() + 0.1;
        assert!((l - expected).abs() < 1e-12);
    }
}
