use std::path::Path;

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::Intrinsics;

const KEYS: [&str; 5] = ["fx", "fy", "cx", "cy", "size"];

/// Parses `fx=`, `fy=`, `cx=`, `cy=` and `size=WxH` lines in any order.
pub fn parse_intrinsics(text: &str) -> Result<Intrinsics> {
    let mut values: [Option<&str>; 5] = [None; 5];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("intrinsics line {}: expected key=value", n + 1)))?;
        let key = key.trim();
        let slot = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::parse(format!("intrinsics: unknown key {key:?}")))?;
        if values[slot].replace(value.trim()).is_some() {
            return Err(Error::parse(format!("intrinsics: duplicate key {key:?}")));
        }
    }
    let get = |i: usize| values[i].ok_or_else(|| Error::parse(format!("intrinsics: missing key {:?}", KEYS[i])));
    let real = |i: usize| -> Result<f64> {
        let v = get(i)?;
        v.parse()
            .map_err(|_| Error::parse(format!("intrinsics: {} = {v:?} is not a number", KEYS[i])))
    };
    let size = get(4)?;
    let (w, h) = size
        .split_once('x')
        .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)))
        .ok_or_else(|| Error::parse(format!("intrinsics: size {size:?} is not WxH")))?;
    Intrinsics::new(real(0)?, real(1)?, real(2)?, real(3)?, w, h)
}

/// Shortest round-trip formatting of each value.
pub fn format_intrinsics(k: &Intrinsics) -> String {
    format!(
        "fx={:?}\nfy={:?}\ncx={:?}\ncy={:?}\nsize={}x{}\n",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    )
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<Intrinsics> {
    let path = path.as_ref();
    parse_intrinsics(&read_text(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn write_intrinsics(path: impl AsRef<Path>, k: &Intrinsics) -> Result<()> {
    write_bytes(path.as_ref(), format_intrinsics(k).as_bytes())
}
