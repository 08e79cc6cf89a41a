#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jackstraw"));
    c.env_remove("JIVE_JACKSTRAW_THREADS");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn gaussian(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(d, n, |_, _| normal.sample(&mut rng))
}

pub fn case_ids(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("s{j}")).collect()
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) {
    let mut text = String::from("feature");
    for c in case_ids(m.ncols()) {
        text.push(',');
        text.push_str(&c);
    }
    text.push('\n');
    for i in 0..m.nrows() {
        text.push_str(&format!("g{}", i + 1));
        for v in m.row(i).iter() {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn write_labels(path: &Path, labels: &[&str]) {
    let mut text = String::from("case,label\n");
    for (c, l) in case_ids(labels.len()).iter().zip(labels) {
        text.push_str(&format!("{c},{l}\n"));
    }
    std::fs::write(path, text).unwrap();
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// All files of an output directory, with the metadata `run` field removed.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mut bytes = std::fs::read(&p).unwrap();
            if name == jackstraw_cli::METADATA_FILE {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("run");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            (name, bytes)
        })
        .collect()
}

/// Non-comment rows of a CSV file.
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
