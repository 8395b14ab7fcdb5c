use std::fmt::Write as _;
use std::path::Path;

use super::{read_pfm, read_text, write_bytes, write_pfm};
use crate::error::{Error, Result};
use crate::probvolume::{DepthHypotheses, ProbabilityVolume};

const PLANES_FILE: &str = "planes.txt";

fn slice_name(j: usize) -> String {
    format!("slice_{j:03}.pfm")
}

/// One plane depth per line.
pub fn parse_planes(text: &str) -> Result<DepthHypotheses> {
    let planes = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("planes line {}: {l:?}", n + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    DepthHypotheses::new(planes)
}

pub fn format_planes(h: &DepthHypotheses) -> String {
    let mut out = String::new();
    for p in h.planes() {
        let _ = writeln!(out, "{p:?}");
    }
    out
}

/// Writes `planes.txt` and `slice_NNN.pfm` into `dir`, which must exist.
/// Probabilities are stored as 32-bit floats.
pub fn write_volume(dir: impl AsRef<Path>, v: &ProbabilityVolume) -> Result<()> {
    let dir = dir.as_ref();
    write_bytes(&dir.join(PLANES_FILE), format_planes(v.hypotheses()).as_bytes())?;
    for j in 0..v.hypotheses().len() {
        write_pfm(dir.join(slice_name(j)), &v.slice(j))?;
    }
    Ok(())
}

pub fn read_volume(dir: impl AsRef<Path>) -> Result<ProbabilityVolume> {
    let dir = dir.as_ref();
    let hypotheses = parse_planes(&read_text(&dir.join(PLANES_FILE))?)?;
    let slices = (0..hypotheses.len())
        .map(|j| read_pfm(dir.join(slice_name(j))))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityVolume::from_slices(hypotheses, &slices)
}
