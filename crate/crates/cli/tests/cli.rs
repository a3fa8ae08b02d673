use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const FAST: &str = r#"{"schema":"handsyn/design-config/1",
 "stage1":{"max_evals":600},"stage2":{"max_evals":600},"stage3":{"max_evals":600},
 "manifold":{"posture_steps":20,"torque_steps":6}}"#;

fn handsyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handsyn")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Example problem with 3 grasps plus a cheap config.
fn example(dir: &Path) {
    let out = handsyn(&["--quiet", "example", "--out", s(dir), "--grasps", "3", "--seed", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(dir.join("fast.json"), FAST).unwrap();
}

fn optimize(dir: &Path, out: &Path, extra: &[&str]) -> Output {
    let (h, g, c) = (dir.join("hand.json"), dir.join("grasps.json"), dir.join("fast.json"));
    let mut args = vec!["--quiet", "optimize", "--hand", s(&h), "--grasps", s(&g), "--config", s(&c), "--out", s(out)];
    args.extend_from_slice(extra);
    handsyn(&args)
}

#[test]
fn validate_accepts_the_example_and_warns_about_openings() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let (h, g) = (dir.path().join("hand.json"), dir.path().join("grasps.json"));
    let out = handsyn(&["validate", "--hand", s(&h), "--grasps", s(&g)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["grasps"], 3);
    assert_eq!(v["openings"], 3);
    let diags = v["diagnostics"].as_array().unwrap();
    assert_eq!(diags.len(), 3);
    assert!(diags.iter().all(|d| d["severity"] == "warning" && d["message"].as_str().unwrap().contains("no opening pair")));
}

#[test]
fn zero_friction_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let g = dir.path().join("grasps.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&g).unwrap()).unwrap();
    v["grasps"][1]["contacts"][0]["mu"] = 0.0.into();
    std::fs::write(&g, v.to_string()).unwrap();
    let h = dir.path().join("hand.json");
    let out = handsyn(&["validate", "--hand", s(&h), "--grasps", s(&g)]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v.to_string().contains("nonpositive friction coefficient"));

    let out = optimize(dir.path(), &dir.path().join("run"), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("nope.json");
    let out = handsyn(&["validate", "--hand", s(&h), "--grasps", s(&h)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stage_two_needs_stage_one() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let out = optimize(dir.path(), &dir.path().join("run"), &["--stage", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing f_trq^min"));
    let csv = std::fs::read_to_string(dir.path().join("run/metrics.csv")).unwrap();
    assert!(csv.contains("2,f_inter,,mm,0,0,failed"));
}

#[test]
fn staged_runs_match_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let (full, staged) = (dir.path().join("full"), dir.path().join("staged"));
    assert!(optimize(dir.path(), &full, &[]).status.success());
    for stage in ["1", "2", "3"] {
        assert!(optimize(dir.path(), &staged, &["--stage", stage]).status.success());
    }
    for f in ["stage1.json", "stage2.json", "stage3.json", "metrics.csv", "parameters.csv", "report.json"] {
        assert_eq!(std::fs::read(full.join(f)).unwrap(), std::fs::read(staged.join(f)).unwrap(), "{f}");
    }
    // rerunning stage 1 drops the results that depended on the old one
    assert!(optimize(dir.path(), &staged, &["--stage", "1", "--seed", "9"]).status.success());
    assert!(staged.join("stage1.json").exists());
    assert!(!staged.join("stage2.json").exists());
    assert!(!staged.join("stage3.json").exists());
}

#[test]
fn same_seed_gives_identical_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(optimize(dir.path(), &a, &["--seed", "5"]).status.success());
    assert!(optimize(dir.path(), &b, &["--seed", "5"]).status.success());
    for run in [&a, &b] {
        let out = handsyn(&["--quiet", "sample-manifolds", "--run", s(run)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().filter(|n| n.to_string_lossy().starts_with("manifold_")).count() == 4);
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n:?}");
    }
    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains("grasps excluded)") || r.contains("grasp excluded)")));
}

#[test]
fn manifolds_need_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let run = dir.path().join("run");
    assert!(optimize(dir.path(), &run, &["--stage", "1"]).status.success());
    let out = handsyn(&["sample-manifolds", "--run", s(&run)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage-2"));
    let out = handsyn(&["sample-manifolds", "--run", s(&run), "--grid", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn grid_override_changes_resolution() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let run = dir.path().join("run");
    assert!(optimize(dir.path(), &run, &[]).status.success());
    assert!(handsyn(&["--quiet", "sample-manifolds", "--run", s(&run), "--grid", "10,4"]).status.success());
    let csv = std::fs::read_to_string(run.join("manifold_thumb_torque.csv")).unwrap();
    // 4 steps per tendon; the thumb chain is driven by 2 tendons
    let samples = csv.lines().filter(|l| l.starts_with("sample,")).count();
    assert!(samples > 0 && samples <= 16, "{samples}");
}

#[test]
fn example_writes_reference_hands() {
    let dir = tempfile::tempdir().unwrap();
    for case in ["1", "2", "3"] {
        let out_dir = dir.path().join(case);
        let out = handsyn(&["--quiet", "example", "--out", s(&out_dir), "--case", case]);
        assert!(out.status.success());
        let v: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("hand.json")).unwrap()).unwrap();
        assert_eq!(v["schema"], "handsyn/hand-model/1");
        assert_eq!(v["design_case"], format!("case{case}"));
    }
    let out = handsyn(&["example", "--out", s(dir.path()), "--case", "4"]);
    assert_eq!(out.status.code(), Some(1));
}
