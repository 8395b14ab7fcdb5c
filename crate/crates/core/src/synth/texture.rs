//! Procedural surface textures evaluated in surface coordinates (meters).

use super::rng::splitmix64;

fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64((i as u64).wrapping_mul(0x1656_67B1) ^ (j as u64).wrapping_mul(0x27D4_EB2F)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Value noise in [0, 1] with unit lattice spacing.
fn value_noise(seed: u64, u: f64, v: f64) -> f64 {
    let (i, j) = (u.floor(), v.floor());
    let (fu, fv) = (smooth(u - i), smooth(v - j));
    let (i, j) = (i as i64, j as i64);
    let a = lattice(seed, i, j);
    let b = lattice(seed, i + 1, j);
    let c = lattice(seed, i, j + 1);
    let d = lattice(seed, i + 1, j + 1);
    let top = a + fu * (b - a);
    let bottom = c + fu * (d - c);
    top + fv * (bottom - top)
}

/// Texture `id`: 0 noise + stripes, 1 noise, 2 stripes, anything else flat.
pub(crate) fn shade(id: u32, seed: u64, u: f64, v: f64, channel: usize) -> f64 {
    let cseed = splitmix64(seed ^ (channel as u64 + 1));
    let noise = || {
        0.65 * value_noise(cseed, u / 1.2, v / 1.2) + 0.35 * value_noise(cseed ^ 0xABCD, u / 0.6, v / 0.6)
    };
    let stripes = || {
        let phase = (seed % 97) as f64 * 0.1 + channel as f64 * 0.7;
        0.5 + 0.5 * (std::f64::consts::TAU * (u + 0.3 * v) / 1.7 + phase).sin()
    };
    let value = match id {
        0 => 0.6 * noise() + 0.4 * stripes(),
        1 => noise(),
        2 => stripes(),
        _ => 0.5,
    };
    (0.1 + 0.8 * value).clamp(0.0, 1.0)
}
