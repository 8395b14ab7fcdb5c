use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::DepthField;
use crate::Grid;

/// Largest accepted width or height.
const MAX_SIDE: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

/// Reads one header token terminated by a single whitespace byte.
fn token<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(format!("PFM header: missing {what}")));
    }
    if *pos >= bytes.len() {
        return Err(Error::parse(format!("PFM header: {what} not terminated")));
    }
    let tok = std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::parse(format!("PFM header: {what} is not ASCII")))?;
    *pos += 1;
    Ok(tok)
}

/// Decodes a single-channel PFM into a top-down grid.
pub fn decode_pfm(bytes: &[u8]) -> Result<Grid<f32>> {
    let mut pos = 0;
    match token(bytes, &mut pos, "magic")? {
        "Pf" => {}
        "PF" => return Err(Error::parse("three-channel PFM (PF) is not a scalar field")),
        other => return Err(Error::parse(format!("PFM magic {other:?}"))),
    }
    let side = |tok: &str, what: &str| -> Result<usize> {
        let v: usize = tok.parse().map_err(|_| Error::parse(format!("PFM {what} {tok:?}")))?;
        if v == 0 || v > MAX_SIDE {
            return Err(Error::parse(format!("PFM {what} {v} out of range")));
        }
        Ok(v)
    };
    let width = side(token(bytes, &mut pos, "width")?, "width")?;
    let height = side(token(bytes, &mut pos, "height")?, "height")?;
    let scale_tok = token(bytes, &mut pos, "scale")?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::parse(format!("PFM scale {scale_tok:?}")))?;
    if !(scale.is_finite() && scale != 0.0) {
        return Err(Error::parse(format!("PFM scale {scale}")));
    }
    let order = if scale < 0.0 { ByteOrder::Little } else { ByteOrder::Big };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::parse("PFM dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(Error::parse(format!(
            "PFM payload is {} bytes, header says {width}x{height} ({expected} bytes)",
            payload.len()
        )));
    }
    let mut data = vec![0f32; width * height];
    for (row, chunk) in payload.chunks_exact(width * 4).enumerate() {
        let y = height - 1 - row;
        for (x, b) in chunk.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            data[y * width + x] = match order {
                ByteOrder::Little => f32::from_le_bytes(b),
                ByteOrder::Big => f32::from_be_bytes(b),
            };
        }
    }
    Grid::from_vec(width, height, data)
}

/// Encodes a grid as `Pf` with scale `-1.0` (little-endian) or `1.0`.
pub fn encode_pfm(grid: &Grid<f32>, order: ByteOrder) -> Vec<u8> {
    let (w, h) = grid.dims();
    let scale = match order {
        ByteOrder::Little => "-1.0",
        ByteOrder::Big => "1.0",
    };
    let mut out = format!("Pf\n{w} {h}\n{scale}\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = *grid.get(x, y);
            out.extend_from_slice(&match order {
                ByteOrder::Little => v.to_le_bytes(),
                ByteOrder::Big => v.to_be_bytes(),
            });
        }
    }
    out
}

/// Reads a scalar field; values are widened to `f64`, NaN is kept.
pub fn read_pfm(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    let grid = decode_pfm(&read_bytes(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })?;
    Ok(grid.map(|v| *v as f64))
}

/// Writes a scalar field as little-endian `Pf`, rounding to `f32`.
pub fn write_pfm(path: impl AsRef<Path>, grid: &Grid<f64>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pfm(&grid.map(|v| *v as f32), ByteOrder::Little))
}

/// Reads a depth map; NaN, infinite and non-positive pixels are invalid.
pub fn read_depth_pfm(path: impl AsRef<Path>) -> Result<DepthField> {
    Ok(DepthField::from_values(read_pfm(path)?))
}

/// Writes a depth map with invalid pixels as NaN.
pub fn write_depth_pfm(path: impl AsRef<Path>, depth: &DepthField) -> Result<()> {
    write_pfm(path, &depth.to_nan_masked())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(w: usize, h: usize, seed: u64) -> Grid<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(w, h, |_, _| rng.random_range(-1e3f32..1e3))
    }

    fn bits(g: &Grid<f32>) -> Vec<u32> {
        g.iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = random_grid(16, 16, 1);
        assert_eq!(bits(&decode_pfm(&encode_pfm(&g, ByteOrder::Little)).unwrap()), bits(&g));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pfm");
        let wide = g.map(|v| *v as f64);
        write_pfm(&path, &wide).unwrap();
        let back = read_pfm(&path).unwrap();
        assert!(back.iter().zip(wide.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn minimal_header() {
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let g = decode_pfm(&bytes).unwrap();
        assert_eq!(g.dims(), (2, 2));
        // First stored row is the bottom one.
        assert_eq!(g.as_slice(), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn big_endian_twin_matches() {
        let g = random_grid(7, 5, 2);
        let le = decode_pfm(&encode_pfm(&g, ByteOrder::Little)).unwrap();
        let be_bytes = encode_pfm(&g, ByteOrder::Big);
        assert!(be_bytes.starts_with(b"Pf\n7 5\n1.0\n"));
        assert_eq!(bits(&decode_pfm(&be_bytes).unwrap()), bits(&le));
    }

    #[test]
    fn nan_marks_invalid_depth() {
        let mut values = Grid::filled(3, 2, 4.5);
        values[4] = f64::NAN;
        let depth = DepthField::from_values(values);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        write_depth_pfm(&path, &depth).unwrap();
        let back = read_depth_pfm(&path).unwrap();
        assert_eq!(back.mask(), depth.mask());
        assert_eq!(back.valid_count(), 5);
    }

    #[test]
    fn malformed_inputs() {
        let ok = encode_pfm(&Grid::filled(2, 2, 1.0f32), ByteOrder::Little);
        // truncated and oversized payloads
        assert!(decode_pfm(&ok[..ok.len() - 1]).is_err());
        let mut long = ok.clone();
        long.push(0);
        assert!(decode_pfm(&long).is_err());
        for header in [
            &b"P5\n2 2\n-1.0\n"[..],
            b"PF\n2 2\n-1.0\n",
            b"Pf\n0 2\n-1.0\n",
            b"Pf\n2 x\n-1.0\n",
            b"Pf\n2 2\n0\n",
            b"Pf\n2 2\nnan\n",
            b"Pf\n2 2",
            b"Pf\n99999999999 99999999999\n-1\n",
            b"",
        ] {
            let mut bytes = header.to_vec();
            bytes.extend_from_slice(&[0; 16]);
            assert!(decode_pfm(&bytes).is_err(), "{:?}", String::from_utf8_lossy(header));
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_pfm("/nonexistent/depth.pfm").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/depth.pfm"));
    }
}
