//! Helpers for driving the `ssad` binary from tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn ssad() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssad"))
}

pub fn run(args: &[&str]) -> Output {
    ssad().args(args).output().expect("spawn ssad")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn describe(out: &Output) -> String {
    format!(
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Writes a configuration for a tiny dataset and network so that the full
/// pipeline runs in seconds.
pub fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    let cfg = serde_json::json!({
        "synth.num_train": 4,
        "synth.num_test": 2,
        "synth.generator.min_snippets": 128,
        "synth.generator.max_snippets": 200,
        "synth.generator.min_instance_len": 16,
        "synth.generator.max_instance_len": 40,
        "synth.generator.max_instances": 2,
        "network.window_len": 128,
        "network.base_filters": 4,
        "network.anchor_filters": 6,
        "train.epochs": 2,
        "train.batch_size": 4,
        "train.lr": 0.001
    });
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Runs `synth` with the given config file into `out`.
pub fn synth(config: &Path, out: &Path) -> Output {
    run(&["synth", "--config", path_str(config), "--out", path_str(out)])
}

pub fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// True when both directories hold the same relative file names with equal bytes.
pub fn same_tree(a: &Path, b: &Path) -> bool {
    let fa = files_in(a);
    let fb = files_in(b);
    fa.len() == fb.len()
        && fa.iter().zip(&fb).all(|(x, y)| {
            x.strip_prefix(a).unwrap() == y.strip_prefix(b).unwrap()
                && std::fs::read(x).unwrap() == std::fs::read(y).unwrap()
        })
}
