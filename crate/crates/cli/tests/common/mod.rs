#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_posture-stack"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn posture-stack")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "posture-stack {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

pub struct Workdir {
    pub dir: tempfile::TempDir,
}

impl Workdir {
    pub fn new() -> Self {
        Workdir {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Generates `data.csv` with the given preset and seed.
    pub fn generate(&self, n: usize, seed: u64, preset: &str) -> PathBuf {
        let out = self.path("data.csv");
        run_ok(&[
            "generate",
            "-n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
            "--preset",
            preset,
            "-o",
            p(&out),
        ]);
        out
    }

    /// Trains on `data` and returns (model, report, test csv) paths.
    pub fn train(&self, data: &Path, mode: &str, tag: &str) -> (PathBuf, PathBuf, PathBuf) {
        let model = self.path(&format!("{tag}-model.json"));
        let report = self.path(&format!("{tag}-report.json"));
        let test = self.path(&format!("{tag}-test.csv"));
        run_ok(&[
            "train",
            "--data",
            p(data),
            "--mode",
            mode,
            "--model-out",
            p(&model),
            "--report-out",
            p(&report),
            "--test-out",
            p(&test),
        ]);
        (model, report, test)
    }
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("read json")).expect("parse json")
}
