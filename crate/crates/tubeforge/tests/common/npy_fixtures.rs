//! NPY fixtures shared by the fixture tests and the acceptance suite.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;

pub fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/npy")
}

#[derive(Deserialize)]
struct FixtureList {
    shapes: Vec<Vec<usize>>,
}

pub fn shapes() -> Vec<Vec<usize>> {
    let text = std::fs::read_to_string(dir().join("fixtures.json")).unwrap();
    serde_json::from_str::<FixtureList>(&text).unwrap().shapes
}

pub fn payload(k: usize, shape: &[usize]) -> Vec<u8> {
    let n: usize = shape.iter().product();
    (0..n).map(|i| ((i * 131 + k * 17 + 7) % 256) as u8).collect()
}

pub fn name(k: usize) -> String {
    format!("fx_{k:02}.npy")
}

/// What numpy reported for each file in `written/`.
#[derive(Debug, Deserialize)]
pub struct Expected {
    pub name: String,
    pub version: [u8; 2],
    pub shape: Vec<usize>,
    pub dtype: String,
    pub fortran_order: bool,
    pub data_offset: usize,
    pub fnv1a64: String,
}

pub fn expected() -> Vec<Expected> {
    let text = std::fs::read_to_string(dir().join("expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Runs numpy over `files_dir`; `None` when python3 with numpy is absent.
pub fn numpy_check(files_dir: &Path) -> Option<Result<String, String>> {
    let probe = Command::new("python3").args(["-c", "import numpy"]).output().ok()?;
    if !probe.status.success() {
        return None;
    }
    let out = Command::new("python3")
        .arg(dir().join("npy_reference.py"))
        .arg("check")
        .arg(files_dir)
        .output()
        .ok()?;
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    Some(if out.status.success() { Ok(text) } else { Err(text) })
}
