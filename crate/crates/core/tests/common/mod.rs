#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vidsum::ingest::Frame;
use vidsum::synthetic::{four_scenes, segmented_video, write_png_sequence};

pub const FRAMES_PER_SCENE: usize = 5;
pub const WIDTH: usize = 96;
pub const HEIGHT: usize = 72;

pub fn vidsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vidsum"))
        .args(args)
        .output()
        .expect("vidsum binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = vidsum(args);
    assert!(
        out.status.success(),
        "vidsum {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Four textured segments of five frames each, written as PNGs.
pub fn fixture_frames(seed: u64) -> Vec<Frame> {
    segmented_video(&four_scenes(), FRAMES_PER_SCENE, WIDTH, HEIGHT, seed)
}

pub fn write_fixture(dir: &Path, seed: u64) -> Vec<Frame> {
    let frames = fixture_frames(seed);
    write_png_sequence(dir, &frames).unwrap();
    frames
}

/// Trains the fixture codebook (8 words) from `frames` with the CLI.
pub fn train(frames: &Path, out: &Path) {
    ok(&["train", "--frames", s(frames), "--sample", "10", "--G", "8", "--seed", "42", "-o", s(out)]);
}

/// A user summary holding the middle frame of every segment.
pub fn write_user_summary(dir: &Path, frames: &[Frame]) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    for seg in 0..4 {
        let f = &frames[seg * FRAMES_PER_SCENE + 2];
        f.to_rgb_image().save(dir.join(format!("u_{seg}.png"))).unwrap();
    }
    dir.to_path_buf()
}

pub fn summarise(frames: &Path, codebook: &Path, out: &Path, extra: &[&str]) -> serde_json::Value {
    let mut args = vec!["summarise", "--frames", s(frames), "--codebook", s(codebook), "--tau", "0.3", "-o", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
    read_json(&out.join("summary.json"))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
