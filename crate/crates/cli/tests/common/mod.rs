//! Helpers shared by the binary integration tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Command handle for the compiled binary under test.
pub fn kahs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kahs"))
}

/// Runs the binary with `args` and captures status plus both streams.
pub fn run_kahs(args: &[&str]) -> Output {
    kahs().args(args).output().expect("binary launches")
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

pub fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exits normally")
}

/// Writes a deterministic textured square image; the xor term breaks the
/// separable structure so wavelet coefficients spread over many scales.
pub fn write_test_pgm(dir: &Path, name: &str, side: usize) -> PathBuf {
    let mut bytes = format!("P5\n{side} {side}\n255\n").into_bytes();
    for y in 0..side {
        for x in 0..side {
            bytes.push((((x * 7 + y * 13) ^ (x * y)) % 256) as u8);
        }
    }
    let path = dir.join(name);
    fs::write(&path, &bytes).expect("test image written");
    path
}

pub fn read_text(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn read_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Parses a CSV body into data rows, skipping the header line.
pub fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}
