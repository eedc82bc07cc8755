use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use segprop_core::dataset::{decode_label_image, frame_file_name};
use segprop_core::model::NUM_CLASSES;
use segprop_core::segprop::{vote_file_name, write_vote_file};
use segprop_core::{LabelMap, Palette, VoteGrid};

fn segprop(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_segprop"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str]) -> String {
    let out = segprop(args);
    assert!(out.status.success(), "segprop {args:?} failed");
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    segprop(args).status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic sequence with keyframes every 8 frames.
fn synth(root: &Path, frames: usize, seed: u64) -> PathBuf {
    let dir = root.join("seq");
    ok(&[
        "synth",
        "--width",
        "40",
        "--height",
        "32",
        "--frames",
        &frames.to_string(),
        "--sprites",
        "2",
        "--seed",
        &seed.to_string(),
        "--label-stride",
        "8",
        "--out",
        s(&dir),
    ]);
    dir
}

fn read_labels(dir: &Path, frames: usize) -> Vec<LabelMap> {
    (0..frames)
        .map(|t| decode_label_image(&dir.join(frame_file_name(t)), &Palette::standard(), 0).unwrap())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn propagate_default_path_writes_labels_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth(tmp.path(), 17, 1);
    let out = tmp.path().join("out");
    ok(&[
        "propagate",
        "--manifest",
        s(&seq.join("manifest.json")),
        "--f",
        "2",
        "--iterations",
        "3",
        "--out",
        s(&out),
    ]);

    let labels = read_labels(&out.join("labels"), 17);
    let gt = read_labels(&seq.join("gt"), 17);
    for k in [0, 8, 16] {
        assert_eq!(labels[k], gt[k], "keyframe {k} must pass through");
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["f"], 2);
    assert_eq!(report["config"]["iterations"], 3);
    assert_eq!(report["keyframes"], serde_json::json!([0, 8, 16]));
    assert_eq!(report["iterations"].as_array().unwrap().len(), 3);

    let text = ok(&[
        "evaluate",
        "--pred",
        s(&out.join("labels")),
        "--gt",
        s(&seq.join("gt")),
        "--out",
        s(&tmp.path().join("eval.json")),
    ]);
    assert!(text.contains("mean"));
    let eval = read_json(&tmp.path().join("eval.json"));
    assert!(eval["mean_f"].as_f64().unwrap() > 0.8, "{}", eval["mean_f"]);
}

#[test]
fn zero_iterations_is_a_single_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth(tmp.path(), 9, 2);
    let out = tmp.path().join("out");
    ok(&[
        "propagate",
        "--manifest",
        s(&seq.join("manifest.json")),
        "--iterations",
        "0",
        "--out",
        s(&out),
    ]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["iterations"], serde_json::json!([]));
    assert_eq!(report["frames"].as_array().unwrap().len(), 7);
}

#[test]
fn dominant_external_votes_reproduce_them() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = 9;
    let seq = synth(tmp.path(), frames, 3);
    let gt = read_labels(&seq.join("gt"), frames);
    let votes = tmp.path().join("votes");
    std::fs::create_dir(&votes).unwrap();
    for g in &gt {
        let mut grid = VoteGrid::new(g.width(), g.height(), NUM_CLASSES);
        for y in 0..g.height() {
            for x in 0..g.width() {
                grid.add(x, y, g.get(x, y), 1.0);
            }
        }
        write_vote_file(&votes.join(vote_file_name(g.frame_index)), &grid).unwrap();
    }
    let out = tmp.path().join("out");
    let provider = format!("external:{}@100", s(&votes));
    ok(&[
        "propagate",
        "--manifest",
        s(&seq.join("manifest.json")),
        "--provider",
        &provider,
        "--out",
        s(&out),
    ]);
    assert_eq!(read_labels(&out.join("labels"), frames), gt);
}

#[test]
fn evaluating_ground_truth_against_itself_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth(tmp.path(), 5, 4);
    let gt = seq.join("gt");
    let report = tmp.path().join("r.json");
    let text = ok(&["evaluate", "--pred", s(&gt), "--gt", s(&gt), "--out", s(&report)]);
    assert!(text.contains("1.000"));
    assert_eq!(read_json(&report)["mean_f"], 1.0);
}

#[test]
fn same_seed_gives_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth(tmp.path(), 9, 5);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "propagate",
            "--manifest",
            s(&seq.join("manifest.json")),
            "--seed",
            "7",
            "--out",
            s(&out),
        ]);
        (
            read_labels(&out.join("labels"), 9),
            std::fs::read(out.join("report.json")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn dry_run_validates_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth(tmp.path(), 9, 6);
    let manifest = seq.join("manifest.json");
    let out = tmp.path().join("out");
    ok(&["propagate", "--manifest", s(&manifest), "--dry-run", "--out", s(&out)]);
    assert!(!out.exists());

    std::fs::remove_file(seq.join("flow").join("000004_bwd.flo")).unwrap();
    assert_eq!(code(&["propagate", "--manifest", s(&manifest), "--dry-run"]), 3);
    assert_eq!(code(&["propagate", "--manifest", s(&manifest), "--out", s(&out)]), 3);
}

#[test]
fn invalid_inputs_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = synth(tmp.path(), 9, 7);
    let manifest = seq.join("manifest.json");
    let out = tmp.path().join("out");
    let m = s(&manifest);
    let o = s(&out);
    assert_eq!(
        code(&["propagate", "--manifest", "/nonexistent/manifest.json", "--out", o]),
        2
    );
    assert_eq!(code(&["propagate", "--manifest", m, "--f", "0", "--out", o]), 2);
    assert_eq!(
        code(&["propagate", "--manifest", m, "--weights", "flow=-1", "--out", o]),
        2
    );
    assert_eq!(code(&["propagate", "--manifest", m, "--eps-fb", "soon", "--out", o]), 2);
    assert_eq!(
        code(&["propagate", "--manifest", m, "--provider", "oracle", "--out", o]),
        2
    );
    std::fs::remove_file(seq.join("labels").join(frame_file_name(8))).unwrap();
    assert_eq!(code(&["propagate", "--manifest", m, "--out", o]), 2);
    assert!(!out.exists());
    assert_eq!(
        code(&["evaluate", "--pred", s(tmp.path()), "--gt", s(&seq.join("gt"))]),
        2
    );
}

#[test]
fn ablation_on_a_synthetic_scene_decays_with_stride() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    ok(&[
        "synth",
        "--width",
        "64",
        "--height",
        "48",
        "--frames",
        "101",
        "--label-stride",
        "25",
        "--out",
        s(&seq),
    ]);
    let out = tmp.path().join("abl");
    let text = ok(&[
        "ablate",
        "--manifest",
        s(&seq.join("manifest.json")),
        "--gt",
        s(&seq.join("gt")),
        "--strides",
        "25,50,100",
        "--out",
        s(&out),
    ]);
    assert_eq!(text.lines().count(), 4, "{text}");
    let table = read_json(&out.join("ablation.json"));
    let means: Vec<f64> = table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["report"]["mean_f"].as_f64().unwrap())
        .collect();
    assert_eq!(means.len(), 3);
    assert!(means.windows(2).all(|w| w[0] >= w[1]), "{means:?}");

    // Without dense ground truth only hidden keyframes are scored, so the
    // densest stride has nothing to score.
    let text = ok(&[
        "ablate",
        "--manifest",
        s(&seq.join("manifest.json")),
        "--strides",
        "25,100",
        "--out",
        s(&out),
    ]);
    assert!(text.lines().nth(1).unwrap().contains('-'), "{text}");
}

#[test]
fn synth_from_spec_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = segprop_core::synth::SceneSpec::translating_rectangles(24, 16, 4, 1, 9);
    let path = tmp.path().join("scene.json");
    std::fs::write(&path, spec.to_json().unwrap()).unwrap();
    let out = tmp.path().join("seq");
    ok(&["synth", "--spec", s(&path), "--label-stride", "3", "--out", s(&out)]);
    let written = segprop_core::synth::SceneSpec::load(&out.join("scene.json")).unwrap();
    assert_eq!(written, spec);
    let keyframes = segprop_core::dataset::discover_keyframes(&out.join("labels")).unwrap();
    assert_eq!(keyframes, vec![0, 3]);
}
