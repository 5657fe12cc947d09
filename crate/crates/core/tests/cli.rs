mod common;

use common::*;
use tempfile::TempDir;
use vidsum::ingest::Frame;

struct Fixture {
    tmp: TempDir,
    frames: Vec<Frame>,
}

impl Fixture {
    fn new() -> Self {
        let tmp = TempDir::new().unwrap();
        let frames = write_fixture(&tmp.path().join("clip"), 7);
        train(&tmp.path().join("clip"), &tmp.path().join("cb.json"));
        Fixture { tmp, frames }
    }

    fn path(&self, rel: &str) -> std::path::PathBuf {
        self.tmp.path().join(rel)
    }
}

#[test]
fn summarise_finds_one_keyframe_per_segment() {
    let fx = Fixture::new();
    let m = summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("out"), &[]);
    let kfs = m["keyframes"].as_array().unwrap();
    let segments: Vec<u64> = kfs
        .iter()
        .map(|k| k["frame_index"].as_u64().unwrap() / FRAMES_PER_SCENE as u64)
        .collect();
    assert_eq!(segments, [0, 1, 2, 3]);
    assert_eq!(m["video_id"], "clip");
    assert_eq!(m["config"]["G"], 8);
    for k in kfs {
        let img = k["image"].as_str().unwrap();
        assert!(fx.path("out").join(img).is_file());
        assert!(k["source_frame_ref"].as_str().unwrap().starts_with("frame_"));
    }
}

#[test]
fn summarise_is_deterministic() {
    let fx = Fixture::new();
    summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("a"), &[]);
    summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("b"), &[]);
    for entry in std::fs::read_dir(fx.path("a")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(fx.path("a").join(&name)).unwrap();
        let b = std::fs::read(fx.path("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
    }
}

#[test]
fn missing_codebook_is_an_input_error() {
    let fx = Fixture::new();
    let missing = fx.path("nope.json");
    let out = vidsum(&["summarise", "--frames", s(&fx.path("clip")), "--codebook", s(&missing), "--tau", "0.3", "-o", s(&fx.path("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.json"), "{err}");
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = vidsum(&["summarise", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn alpha_one_matches_texture_only_run() {
    let fx = Fixture::new();
    summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("bot"), &[]);
    summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("cat"), &["--alpha", "1.0"]);
    assert_eq!(
        std::fs::read(fx.path("bot/summary.json")).unwrap(),
        std::fs::read(fx.path("cat/summary.json")).unwrap()
    );
}

#[test]
fn colour_fusion_also_segments_the_fixture() {
    let fx = Fixture::new();
    let m = summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("cat"), &["--alpha", "0.5"]);
    assert_eq!(m["N_as"], 4);
}

#[test]
fn evaluate_scores_perfect_user_summary() {
    let fx = Fixture::new();
    summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("auto/clip"), &[]);
    write_user_summary(&fx.path("users/clip/u1"), &fx.frames);
    ok(&[
        "evaluate", "--auto", s(&fx.path("auto")), "--users", s(&fx.path("users")),
        "--codebook", s(&fx.path("cb.json")), "--delta", "0.3", "-o", s(&fx.path("rep")),
    ]);
    let r = read_json(&fx.path("rep/report.json"));
    assert_eq!(r["mean"]["F"], 1.0);
    assert_eq!(r["per_video"][0]["per_user"][0]["N_m"], 4);
    let csv = std::fs::read_to_string(fx.path("rep/report.csv")).unwrap();
    assert!(csv.starts_with("video_id,user_id,N_m,N_nm,N_as,N_u,acc,err,precision,recall,F,detected,R_c"));
}

#[test]
fn evaluate_missing_user_directory_names_the_video() {
    let fx = Fixture::new();
    summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("auto/clip"), &[]);
    std::fs::create_dir_all(fx.path("users")).unwrap();
    let out = vidsum(&[
        "evaluate", "--auto", s(&fx.path("auto")), "--users", s(&fx.path("users")),
        "--codebook", s(&fx.path("cb.json")), "--delta", "0.3", "-o", s(&fx.path("rep")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clip"));
}

#[test]
fn long_mode_detection_and_storyboard() {
    let fx = Fixture::new();
    let m = summarise(&fx.path("clip"), &fx.path("cb.json"), &fx.path("auto/clip"), &["--storyboard"]);
    assert_eq!(m["storyboard"]["storyboard_duration_s"], 1.0);
    assert_eq!(m["storyboard"]["R_c"], 80.0);
    assert_eq!(m["keyframes"][0]["display_duration_s"], 0.25);

    let ts: Vec<f64> = m["keyframes"].as_array().unwrap().iter().map(|k| k["timestamp_s"].as_f64().unwrap()).collect();
    // windows are inclusive: a keyframe exactly on the start edge counts
    let hit = format!("video_id,start_s,end_s\nclip,{},{}\n", ts[1], ts[1] + 0.5);
    std::fs::write(fx.path("hit.csv"), hit).unwrap();
    // a window strictly between two keyframes
    let miss = format!("clip,{},{}\n", ts[0] + 0.25, ts[0] + 0.5);
    std::fs::write(fx.path("miss.csv"), miss).unwrap();

    ok(&["evaluate", "--auto", s(&fx.path("auto")), "--ground-truth", s(&fx.path("hit.csv")), "-o", s(&fx.path("r1"))]);
    ok(&["evaluate", "--auto", s(&fx.path("auto")), "--ground-truth", s(&fx.path("miss.csv")), "-o", s(&fx.path("r2"))]);
    let r1 = read_json(&fx.path("r1/report.json"));
    let r2 = read_json(&fx.path("r2/report.json"));
    assert_eq!(r1["detection_accuracy"], 1.0);
    assert_eq!(r2["detection_accuracy"], 0.0);
    assert_eq!(r1["mean_Rc"], 80.0);
}

#[test]
fn two_video_evaluation() {
    let fx = Fixture::new();
    let other = write_fixture(&fx.path("videos/b"), 11);
    std::fs::rename(fx.path("clip"), fx.path("videos/a")).unwrap();
    for v in ["a", "b"] {
        summarise(&fx.path(&format!("videos/{v}")), &fx.path("cb.json"), &fx.path(&format!("auto/{v}")), &[]);
    }
    write_user_summary(&fx.path("users/a/u1"), &fx.frames);
    // second user only picked two segments
    let u2 = write_user_summary(&fx.path("users/a/u2"), &fx.frames);
    std::fs::remove_file(u2.join("u_1.png")).unwrap();
    std::fs::remove_file(u2.join("u_3.png")).unwrap();
    write_user_summary(&fx.path("users/b/u1"), &other);
    std::fs::write(fx.path("gt.csv"), "a,0,4\nb,100,200\n").unwrap();

    ok(&[
        "evaluate", "--auto", s(&fx.path("auto")), "--users", s(&fx.path("users")),
        "--ground-truth", s(&fx.path("gt.csv")), "--codebook", s(&fx.path("cb.json")),
        "--delta", "0.3", "-o", s(&fx.path("rep")),
    ]);
    let r = read_json(&fx.path("rep/report.json"));
    let pv = r["per_video"].as_array().unwrap();
    assert_eq!(pv.len(), 2);
    assert_eq!(pv[0]["video_id"], "a");
    // user 2: N_m=2, N_nm=2, N_u=2 -> acc 1, err 1, P 0.5, R 1, F 2/3
    let u2 = &pv[0]["per_user"][1];
    assert_eq!((u2["N_m"].as_u64(), u2["N_nm"].as_u64(), u2["N_u"].as_u64()), (Some(2), Some(2), Some(2)));
    assert_eq!(u2["err"], 1.0);
    let f_a = (1.0 + 2.0 / 3.0) / 2.0;
    assert!((pv[0]["F_P"].as_f64().unwrap() - f_a).abs() < 1e-12);
    assert!((r["mean"]["F"].as_f64().unwrap() - (f_a + 1.0) / 2.0).abs() < 1e-12);
    assert_eq!(pv[0]["detected"], true);
    assert_eq!(pv[1]["detected"], false);
    assert_eq!(r["detection_accuracy"], 0.5);
    let csv = std::fs::read_to_string(fx.path("rep/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 2 + 1);
    assert!(csv.lines().last().unwrap().starts_with("ALL,mean,"));
}

#[test]
fn single_point_sweep_matches_standalone_runs() {
    let fx = Fixture::new();
    std::fs::create_dir_all(fx.path("videos")).unwrap();
    std::fs::rename(fx.path("clip"), fx.path("videos/clip")).unwrap();
    summarise(&fx.path("videos/clip"), &fx.path("cb.json"), &fx.path("auto/clip"), &["--alpha", "0.7"]);
    write_user_summary(&fx.path("users/clip/u1"), &fx.frames);
    let u2 = write_user_summary(&fx.path("users/clip/u2"), &fx.frames);
    std::fs::remove_file(u2.join("u_0.png")).unwrap();
    ok(&[
        "evaluate", "--auto", s(&fx.path("auto")), "--users", s(&fx.path("users")),
        "--codebook", s(&fx.path("cb.json")), "--delta", "0.3", "--alpha", "0.7", "-o", s(&fx.path("rep")),
    ]);
    ok(&[
        "sweep", "--videos", s(&fx.path("videos")), "--codebook", s(&fx.path("cb.json")),
        "--tau", "0.3", "--alpha", "0.7", "--users", s(&fx.path("users")), "--delta", "0.3",
        "-o", s(&fx.path("sweep.csv")),
    ]);
    let r = read_json(&fx.path("rep/report.json"));
    let sw = read_json(&fx.path("sweep.json"));
    let row = &sw["rows"][0];
    assert_eq!(row["F_mean"], r["mean"]["F"]);
    assert_eq!(row["acc_mean"], r["mean"]["acc"]);
    assert_eq!(row["mean_Rc"], r["mean_Rc"]);
    assert_eq!(sw["config"]["tau_grid"], serde_json::json!([0.3]));
}

#[test]
fn alpha_grid_sweep_has_one_row_per_point() {
    let fx = Fixture::new();
    std::fs::create_dir_all(fx.path("videos")).unwrap();
    std::fs::rename(fx.path("clip"), fx.path("videos/clip")).unwrap();
    write_user_summary(&fx.path("users/clip/u1"), &fx.frames);
    ok(&[
        "sweep", "--videos", s(&fx.path("videos")), "--codebook", s(&fx.path("cb.json")),
        "--tau", "0.3", "--alpha", "0:0.1:1", "--users", s(&fx.path("users")), "--delta", "0.3",
        "--jobs", "2", "-o", s(&fx.path("sweep.csv")),
    ]);
    let csv = std::fs::read_to_string(fx.path("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tau,alpha,F_mean,acc_mean,err_mean,detection_accuracy,mean_Rc,best");
    assert_eq!(lines.len(), 12);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",true")).count(), 1);
}

#[test]
fn empty_grid_is_an_input_error() {
    let fx = Fixture::new();
    let out = vidsum(&[
        "sweep", "--videos", s(fx.tmp.path()), "--codebook", s(&fx.path("cb.json")),
        "--tau", "", "--ground-truth", "gt.csv", "-o", s(&fx.path("sweep.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_is_deterministic() {
    let fx = Fixture::new();
    train(&fx.path("clip"), &fx.path("cb2.json"));
    assert_eq!(
        std::fs::read(fx.path("cb.json")).unwrap(),
        std::fs::read(fx.path("cb2.json")).unwrap()
    );
    let cb = read_json(&fx.path("cb.json"));
    assert_eq!(cb["G"], 8);
    assert_eq!(cb["D"], 15);
    assert_eq!(cb["config"]["sample"], 10);
}

#[test]
fn training_with_too_few_distinct_descriptors_fails() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("halves");
    std::fs::create_dir_all(&dir).unwrap();
    // black left half, white right half: only a handful of distinct blocks
    let mut img = image::RgbImage::new(96, 72);
    for (x, _, p) in img.enumerate_pixels_mut() {
        *p = if x < 48 { image::Rgb([0, 0, 0]) } else { image::Rgb([255, 255, 255]) };
    }
    img.save(dir.join("f0.png")).unwrap();
    let out = vidsum(&["train", "--frames", s(&dir), "--sample", "1", "--G", "8", "-o", s(&tmp.path().join("cb.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("distinct"));
    assert!(!tmp.path().join("cb.json").exists());
}

#[test]
fn raw_stream_needs_geometry() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("v.rgb");
    std::fs::write(&raw, vec![0u8; 12]).unwrap();
    let out = vidsum(&["summarise", "--frames", s(&raw), "--codebook", "cb.json", "--tau", "0.3", "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--width"));
}

#[test]
fn uniform_frames_fail_in_the_noise_filter() {
    let fx = Fixture::new();
    let dir = fx.path("flat");
    std::fs::create_dir_all(&dir).unwrap();
    for i in 0..3 {
        Frame::filled(96, 72, [40, 40, 40]).unwrap().to_rgb_image().save(dir.join(format!("f{i}.png"))).unwrap();
    }
    let out = vidsum(&["summarise", "--frames", s(&dir), "--codebook", s(&fx.path("cb.json")), "--tau", "0.3", "-o", s(&fx.path("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("noise") && err.contains("3 frames"), "{err}");
}
