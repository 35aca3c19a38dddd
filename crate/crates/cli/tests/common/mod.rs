#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn shipped_config(name: &str) -> PathBuf {
    workspace_root().join("configs").join(name)
}

pub fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

/// Runs the binary; returns the exit code and stderr.
pub fn robust_detect(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_robust-detect"));
    cmd.args(args).env_remove("ROBUST_DETECT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn run_cmd(command: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let mut args = vec![
        command,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    robust_detect(&args, &[])
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// All CSV files of an output directory, by name.
pub fn csv_bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

pub fn gaussian(mean: f64, var: f64) -> Value {
    serde_json::json!({"kind": "gaussian", "mean": mean, "var": var})
}

pub fn scaled_band(nominal: Value, a: f64, b: f64) -> Value {
    serde_json::json!({"type": "band", "nominal": nominal, "a": a, "b": b})
}

/// The two-Gaussian band pair with `a = 0.75`, `b = 1.2` on a coarse grid.
pub fn band_lfd_config(n: usize) -> Value {
    serde_json::json!({
        "schema_version": 1,
        "command": "lfd",
        "grid": {"x_min": -30, "x_max": 30, "n": n},
        "hypotheses": [scaled_band(gaussian(-2.0, 4.0), 0.75, 1.2), scaled_band(gaussian(0.0, 16.0), 0.75, 1.2)]
    })
}

/// A small three-hypothesis sequential problem: uniform run-length measure and two
/// exponentially tilted bands.
pub fn small_sequential_config(command: &str, points: usize) -> Value {
    let band = |s: f64| {
        serde_json::json!({
            "type": "band",
            "lower": {"kind": "exp_offset", "a": {"mass": 0.9}, "s": s, "c": 0.1},
            "upper": {"kind": "lower_plus", "add": 0.2}
        })
    };
    serde_json::json!({
        "schema_version": 1,
        "command": command,
        "grid": {"x_min": -1, "x_max": 1, "n": 15},
        "seed": 5,
        "hypotheses": [
            {"type": "density", "density": {"kind": "uniform", "a": -1, "b": 1}},
            band(-2.0),
            band(2.0)
        ],
        "sequential": {"lambda": [20, 20], "half_width": 8, "points": points},
        "simulate": {"runs": 300, "horizon": 2000, "per_run": true}
    })
}
