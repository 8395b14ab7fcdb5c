//! File formats.
//!
//! - Dense real fields: single-channel PFM (`Pf`), rows stored bottom-up,
//!   32-bit floats. Invalid pixels are written as NaN, so a depth mask is
//!   recovered from the file alone.
//! - Poses: KITTI odometry text, twelve numbers per line.
//! - Intrinsics: `key=value` lines `fx`, `fy`, `cx`, `cy`, `size=WxH`.
//! - Probability volumes: a directory with `planes.txt` and one PFM per plane.
//! - Filter state: a small little-endian binary container.
//! - Manifests: TOML listing every artifact with its SHA-256.
//!
//! Every reader has a byte- or string-level counterpart (`decode_*`,
//! `parse_*`) that does no file access.

mod export;
mod intrinsics;
mod manifest;
mod pfm;
mod poses;
mod state;
mod volume;

pub use export::{metrics_csv, sparsification_csv, write_metrics_csv, write_sparsification_csv};
pub use intrinsics::{format_intrinsics, parse_intrinsics, read_intrinsics, write_intrinsics};
pub use manifest::{sha256_file, Manifest, ManifestEntry, MANIFEST_VERSION};
pub use pfm::{
    decode_pfm, encode_pfm, read_depth_pfm, read_pfm, write_depth_pfm, write_pfm, ByteOrder,
};
pub use poses::{format_poses, parse_poses, read_poses, relative_pose, write_poses};
pub use state::{
    decode_state, encode_state, read_observation, read_state, write_observation, write_state,
    STATE_MAGIC,
};
pub use volume::{format_planes, parse_planes, read_volume, write_volume};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
