use std::path::Path;

use super::{read_bytes, read_pfm, write_bytes, write_pfm};
use crate::bayesfilter::FilterState;
use crate::consistency::Observation;
use crate::error::{Error, Result};
use crate::Grid;

/// Leading bytes of an encoded [`FilterState`]; the last byte is the format
/// version.
pub const STATE_MAGIC: &[u8; 8] = b"DFSTATE\x01";
const PLANES: usize = 6;
const MAX_PIXELS: usize = 1 << 28;

/// Layout: magic, `u32` width and height (little-endian), then the planes
/// `mu, sigma2, a, b, z_min, z_max` as row-major `f64` LE, then one byte per
/// pixel for `converged` and one for `valid`.
pub fn encode_state(s: &FilterState) -> Vec<u8> {
    let (w, h) = s.dims();
    let n = w * h;
    let mut out = Vec::with_capacity(16 + n * (PLANES * 8 + 2));
    out.extend_from_slice(STATE_MAGIC);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    for plane in [&s.mu, &s.sigma2, &s.a, &s.b, &s.z_min, &s.z_max] {
        for v in plane.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend(s.converged.iter().map(|c| *c as u8));
    out.extend(s.valid.iter().map(|c| *c as u8));
    out
}

pub fn decode_state(bytes: &[u8]) -> Result<FilterState> {
    let header = bytes
        .get(..16)
        .ok_or_else(|| Error::parse("filter state: truncated header"))?;
    if &header[..8] != STATE_MAGIC {
        return Err(Error::parse("filter state: bad magic"));
    }
    let w = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    let n = w
        .checked_mul(h)
        .filter(|n| *n > 0 && *n <= MAX_PIXELS)
        .ok_or_else(|| Error::parse(format!("filter state: size {w}x{h}")))?;
    let expected = 16 + n * (PLANES * 8 + 2);
    if bytes.len() != expected {
        return Err(Error::parse(format!(
            "filter state: {} bytes, expected {expected} for {w}x{h}",
            bytes.len()
        )));
    }
    let body = &bytes[16..];
    let plane = |k: usize| -> Grid<f64> {
        let raw = &body[k * n * 8..(k + 1) * n * 8];
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Grid::from_vec(w, h, data).expect("n values")
    };
    let flags = |k: usize| -> Result<Grid<bool>> {
        let raw = &body[PLANES * n * 8 + k * n..PLANES * n * 8 + (k + 1) * n];
        let data = raw
            .iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::parse(format!("filter state: flag byte {b}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::from_vec(w, h, data)
    };
    let state = FilterState {
        mu: plane(0),
        sigma2: plane(1),
        a: plane(2),
        b: plane(3),
        z_min: plane(4),
        z_max: plane(5),
        converged: flags(0)?,
        valid: flags(1)?,
    };
    for i in 0..n {
        if let Some(p) = state.pixel(i) {
            let ok = [p.mu, p.sigma2, p.a, p.b, p.z_min, p.z_max].iter().all(|v| v.is_finite())
                && p.sigma2 > 0.0
                && p.a > 0.0
                && p.b > 0.0
                && p.z_min < p.z_max;
            if !ok {
                return Err(Error::parse(format!("filter state: invalid parameters at pixel {i}")));
            }
        }
    }
    Ok(state)
}

pub fn write_state(path: impl AsRef<Path>, s: &FilterState) -> Result<()> {
    write_bytes(path.as_ref(), &encode_state(s))
}

pub fn read_state(path: impl AsRef<Path>) -> Result<FilterState> {
    let path = path.as_ref();
    decode_state(&read_bytes(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })
}

/// Writes `<stem>.invdepth.pfm` and `<stem>.variance.pfm`; pixels outside the
/// mask are NaN in both.
pub fn write_observation(dir: impl AsRef<Path>, stem: &str, obs: &Observation) -> Result<()> {
    let dir = dir.as_ref();
    let masked = |g: &Grid<f64>| {
        Grid::from_vec(
            g.width(),
            g.height(),
            g.iter().zip(obs.mask().iter()).map(|(v, m)| if *m { *v } else { f64::NAN }).collect(),
        )
        .expect("same dims")
    };
    write_pfm(dir.join(format!("{stem}.invdepth.pfm")), &masked(obs.inv_depth()))?;
    write_pfm(dir.join(format!("{stem}.variance.pfm")), &masked(obs.variance()))
}

pub fn read_observation(dir: impl AsRef<Path>, stem: &str) -> Result<Observation> {
    let dir = dir.as_ref();
    let inv = read_pfm(dir.join(format!("{stem}.invdepth.pfm")))?;
    let var = read_pfm(dir.join(format!("{stem}.variance.pfm")))?;
    let mask = inv.map(|z| z.is_finite());
    Observation::new(inv, var, mask)
}
