use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::{orthonormality_error, RigidTransform};

/// Rotations further than this from orthonormal are rejected.
const MAX_ORTHONORMALITY_ERROR: f64 = 1e-3;
/// Rotations within this are taken as-is.
const EXACT_ORTHONORMALITY: f64 = 1e-9;

/// Parses KITTI odometry poses: per line, the row-major `[R | t]` mapping
/// points of that camera into the first camera's frame.
///
/// Rotations off by more than `1e-9` but at most `1e-3` are replaced by the
/// nearest rotation with a warning.
pub fn parse_poses(text: &str) -> Result<Vec<RigidTransform>> {
    let mut poses = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(format!("poses line {n}: bad number {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 12 {
            return Err(Error::parse(format!(
                "poses line {n}: expected 12 numbers, found {}",
                values.len()
            )));
        }
        let r = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9], values[10],
        );
        let t = Vector3::new(values[3], values[7], values[11]);
        let err = orthonormality_error(&r);
        if err > MAX_ORTHONORMALITY_ERROR {
            return Err(Error::parse(format!("poses line {n}: rotation is not orthonormal (error {err:.3e})")));
        }
        if r.determinant() <= 0.0 {
            return Err(Error::parse(format!("poses line {n}: rotation is a reflection")));
        }
        let pose = if err > EXACT_ORTHONORMALITY {
            log::warn!("poses line {n}: re-orthonormalising rotation (error {err:.3e})");
            RigidTransform::from_approximate(&r, t)?
        } else {
            RigidTransform::new(r, t)?
        };
        poses.push(pose);
    }
    Ok(poses)
}

/// One line per pose, 17 significant digits.
pub fn format_poses(poses: &[RigidTransform]) -> String {
    let mut out = String::new();
    for pose in poses {
        let m = pose.to_matrix3x4();
        let fields: Vec<String> = (0..3)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| format!("{:.16e}", m[(r, c)]))
            .collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<RigidTransform>> {
    let path = path.as_ref();
    parse_poses(&read_text(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn write_poses(path: impl AsRef<Path>, poses: &[RigidTransform]) -> Result<()> {
    write_bytes(path.as_ref(), format_poses(poses).as_bytes())
}

/// Transform taking camera-`from` coordinates to camera-`to` coordinates,
/// `T_to^-1 T_from`.
pub fn relative_pose(poses: &[RigidTransform], from: usize, to: usize) -> Result<RigidTransform> {
    let get = |i: usize| {
        poses
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("frame {i} of {}", poses.len())))
    };
    Ok(get(to)?.inverse().compose(get(from)?))
}
