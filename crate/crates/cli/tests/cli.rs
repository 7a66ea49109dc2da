use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn segmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmatch")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Writes a small zero-noise config into `dir` and returns its path.
fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    let text = r#"{
        "seed": 2,
        "generator": {"k_objects": 3, "m_scenes": 4},
        "render": {"train_views": 3, "test_views": 4},
        "eval": {"frame_stride": 2}
    }"#;
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn stage_commands_reproduce_run_full() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let (staged, full) = (dir.path().join("staged"), dir.path().join("full"));
    let staged_s = staged.to_str().unwrap();
    for args in [
        vec!["generate"],
        vec!["embed", "--stage", "1"],
        vec!["match"],
        vec!["prune-merge"],
        vec!["train-phi2"],
        vec!["infer"],
        vec!["eval"],
    ] {
        let mut all = vec!["--config", cfg, "--out", staged_s];
        all.extend(args.iter());
        let o = segmatch(&all);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = segmatch(&["--config", cfg, "--out", full.to_str().unwrap(), "--workers", "1", "run-full"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2D segmentation"));
    assert_eq!(fs::read(staged.join("report.json")).unwrap(), fs::read(full.join("report.json")).unwrap());

    // Single-image mode gives the mask the infer stage wrote.
    let mask = dir.path().join("mask.json");
    let o = segmatch(&[
        "--config",
        cfg,
        "infer",
        "--image",
        full.join("dataset/scene_0/test_frames/0.img.json").to_str().unwrap(),
        "--features",
        full.join("step4_phi2/table.json").to_str().unwrap(),
        "--mask-out",
        mask.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(mask).unwrap(), fs::read(full.join("inference/scene_0/frame_0.mask.json")).unwrap());
}

#[test]
fn ablation_writes_into_variant_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("abl");
    let o = segmatch(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "ablate", "--variant", "no-matching"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("no-matching/report.txt").exists());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"prune": {"alpha": -1}}"#).unwrap();
    assert_eq!(code(&segmatch(&["--config", bad.to_str().unwrap(), "generate"])), 2);
    fs::write(&bad, r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(code(&segmatch(&["--config", bad.to_str().unwrap(), "generate"])), 2);
    assert_eq!(code(&segmatch(&["--config", dir.path().join("absent.json").to_str().unwrap(), "generate"])), 2);
    assert_eq!(code(&segmatch(&["--workers", "0", "generate"])), 2);
    assert_eq!(code(&segmatch(&["ablate", "--variant", "nonsense"])), 2);
    assert_eq!(code(&segmatch(&["match", "--eps-node", "-0.5"])), 2);
}

#[test]
fn missing_artifacts_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = segmatch(&["--out", dir.path().to_str().unwrap(), "match"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("match"));
}
