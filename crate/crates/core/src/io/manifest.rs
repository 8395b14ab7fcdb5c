use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_bytes, read_text, write_bytes};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub role: String,
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    /// Lowercase hex SHA-256 of the file contents.
    pub sha256: String,
}

/// Inventory of a run's artifacts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(read_bytes(path.as_ref())?)))
}

fn checked_relative(path: &str) -> Result<&Path> {
    let p = Path::new(path);
    if path.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(Error::parse(format!("manifest path {path:?} must be relative and stay inside the run")));
    }
    Ok(p)
}

impl Manifest {
    pub fn new() -> Self {
        Self {
            version: MANIFEST_VERSION,
            entries: Vec::new(),
        }
    }

    /// Hashes `root/path` and records it.
    pub fn add(&mut self, root: &Path, role: &str, path: &str) -> Result<()> {
        let rel = checked_relative(path)?;
        self.entries.push(ManifestEntry {
            role: role.to_string(),
            path: path.to_string(),
            sha256: sha256_file(root.join(rel))?,
        });
        Ok(())
    }

    /// Parses and validates structure without touching the listed files.
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::parse(format!("manifest: {e}")))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::parse(format!("manifest version {} (expected {MANIFEST_VERSION})", m.version)));
        }
        for e in &m.entries {
            checked_relative(&e.path)?;
            if e.sha256.len() != 64 || !e.sha256.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
                return Err(Error::parse(format!("manifest: bad checksum for {}", e.path)));
            }
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.to_toml().as_bytes())
    }

    /// Loads a manifest and verifies every checksum against the files next
    /// to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m = Self::parse(&read_text(path)?)?;
        let root = path.parent().unwrap_or(Path::new("."));
        m.verify(root)?;
        Ok(m)
    }

    pub fn verify(&self, root: &Path) -> Result<()> {
        for e in &self.entries {
            let file: PathBuf = root.join(checked_relative(&e.path)?);
            if sha256_file(&file)? != e.sha256 {
                return Err(Error::ChecksumMismatch { path: file });
            }
        }
        Ok(())
    }
}

impl Default for Manifest {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("abc"), b"abc").unwrap();
        assert_eq!(
            sha256_file(dir.path().join("abc")).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/a.pfm"), b"one").unwrap();
        std::fs::write(dir.path().join("b.csv"), b"two").unwrap();
        let mut m = Manifest::new();
        m.add(dir.path(), "depth", "sub/a.pfm").unwrap();
        m.add(dir.path(), "metrics", "b.csv").unwrap();
        let path = dir.path().join("manifest.toml");
        m.write(&path).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), m);

        std::fs::write(dir.path().join("b.csv"), b"changed").unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn structural_errors() {
        assert!(Manifest::parse("version = 2\n").is_err());
        assert!(Manifest::parse("version = 1\nextra = 3\n").is_err());
        let entry = |path: &str, sum: &str| {
            format!("version = 1\n[[entries]]\nrole = \"x\"\npath = \"{path}\"\nsha256 = \"{sum}\"\n")
        };
        let good = "0".repeat(64);
        assert!(Manifest::parse(&entry("a/b.pfm", &good)).is_ok());
        assert!(Manifest::parse(&entry("../b.pfm", &good)).is_err());
        assert!(Manifest::parse(&entry("/etc/passwd", &good)).is_err());
        assert!(Manifest::parse(&entry("b.pfm", "zz")).is_err());
    }
}
