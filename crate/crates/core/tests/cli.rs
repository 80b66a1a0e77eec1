use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_marginbn"));
    cmd.env_remove("MARGINBN_LOG");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Feature 1 copies the class most of the time; feature 2 is noise.
fn toy_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("label,a,b\n");
    for m in 0..24 {
        let c = m % 2 + 1;
        let a = if m % 6 == 0 { 3 - c } else { c };
        let b = m / 3 % 2 + 1;
        text.push_str(&format!("{c},{a},{b}\n"));
    }
    let path = dir.join("toy.csv");
    fs::write(&path, text).unwrap();
    path
}

/// 150 uniform samples over eight ternary variables: hard enough that the
/// search cannot finish within a second.
fn hard_csv(dir: &Path) -> PathBuf {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("c,f1,f2,f3,f4,f5,f6,f7\n");
    for _ in 0..150 {
        let row: Vec<String> = (0..8).map(|_| rng.random_range(1..=3).to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join("hard.csv");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn learn_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let out = tmp.path().join("run");
    let res = run(&[
        "learn",
        "--score",
        "sm",
        "--gamma-p",
        "0.9",
        "--max-parents",
        "2",
        "--time-limit",
        "7200",
        "-o",
        s(&out),
        s(&data),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "model.json",
        "solve.json",
        "structure.dot",
        "run_config.json",
        "summary.txt",
        "eval.json",
        "columns.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("gap=0.00%"));
    assert!(summary.contains("status=optimal"));
    assert_eq!(summary, stdout(&res));
    let solve: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["status"], "optimal");
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(config["command"], "learn");
    assert_eq!(config["learn"]["score"], "sm");
    assert_eq!(config["learn"]["max_parents"], 2);
    assert!((config["learn"]["gamma"].as_f64().unwrap() - 9f64.ln()).abs() < 1e-12);
    assert!(fs::read_to_string(out.join("structure.dot"))
        .unwrap()
        .contains("\"label\""));
}

#[test]
fn identical_runs_give_identical_files() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let res = run(&["learn", "--score", "sbm", "-o", s(out), s(&data)]);
        assert_eq!(res.status.code(), Some(0));
    }
    for f in ["model.json", "solve.json", "structure.dot", "summary.txt", "eval.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    // run_config.json records the output-independent inputs only.
    assert_eq!(
        fs::read(a.join("run_config.json")).unwrap(),
        fs::read(b.join("run_config.json")).unwrap()
    );
}

#[test]
fn mdl_ignores_gamma_with_a_warning() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let out = tmp.path().join("mdl");
    let res = run(&["learn", "--score", "mdl", "--gamma-p", "0.9", "-o", s(&out), s(&data)]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stderr).contains("ignored"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("score=mdl"));
    assert!(!summary.contains("gamma="));
}

#[test]
fn timeout_reports_nonzero_gap() {
    let tmp = TempDir::new().unwrap();
    let data = hard_csv(tmp.path());
    let out = tmp.path().join("t");
    let res = run(&["learn", "--time-limit", "1", "-o", s(&out), s(&data)]);
    assert_eq!(res.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("status=feasible-timeout"), "{summary}");
    assert!(!summary.contains("gap=0.00%"));
    assert!(out.join("model.json").exists());
}

#[test]
fn no_incumbent_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let data = hard_csv(tmp.path());
    let out = tmp.path().join("n");
    let res = run(&["learn", "--time-limit", "0.000001", "-o", s(&out), s(&data)]);
    assert_eq!(res.status.code(), Some(2));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("status=no-incumbent"));
    assert!(summary.contains("gap=inf%"));
    assert!(!out.join("model.json").exists());
}

#[test]
fn evaluate_reloads_the_bundle() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let out = tmp.path().join("m");
    assert_eq!(run(&["learn", "-o", s(&out), s(&data)]).status.code(), Some(0));
    let ev = tmp.path().join("e");
    let res = run(&[
        "evaluate",
        "--model",
        s(&out.join("model.json")),
        "-o",
        s(&ev),
        s(&data),
    ]);
    assert_eq!(res.status.code(), Some(0));
    // Evaluating on the training data reproduces the resubstitution report.
    assert_eq!(
        fs::read(out.join("eval.json")).unwrap(),
        fs::read(ev.join("eval.json")).unwrap()
    );
    assert!(stdout(&res).contains("accuracy="));
}

#[test]
fn cross_validate_prints_fold_table_and_pooled_accuracy() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let out = tmp.path().join("cv");
    let res = run(&[
        "cross-validate",
        "--folds",
        "4",
        "--p-grid",
        "0.6,0.9",
        "--k-grid",
        "1",
        "--inner-folds",
        "3",
        "--seed",
        "7",
        "-o",
        s(&out),
        s(&data),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = stdout(&res);
    assert!(text.starts_with("command=cross-validate"));
    assert_eq!(
        text.lines()
            .filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        4
    );
    assert!(text.contains("accuracy="));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 4);
    assert!(out.join("folds.json").exists());
}

#[test]
fn export_milp_writes_mps_without_solving() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let mps = tmp.path().join("nested").join("model.mps");
    let res = run(&[
        "export-milp",
        "--score",
        "sbm",
        "--max-parents",
        "1",
        "-o",
        s(&mps),
        s(&data),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let text = fs::read_to_string(&mps).unwrap();
    for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
        assert!(text.lines().any(|l| l.starts_with(section)), "missing {section}");
    }
    assert!(text.contains("MARKER"));
}

#[test]
fn class_column_by_name() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("late.csv");
    let mut text = String::from("a,b,label\n");
    for m in 0..12 {
        text.push_str(&format!("{},{},{}\n", m % 2 + 1, m / 2 % 2 + 1, m % 2 + 1));
    }
    fs::write(&path, text).unwrap();
    let out = tmp.path().join("o");
    let res = run(&["learn", "--class-column", "label", "-o", s(&out), s(&path)]);
    assert_eq!(res.status.code(), Some(0));
    assert!(fs::read_to_string(out.join("structure.dot"))
        .unwrap()
        .contains("\"label\" [shape=doublecircle]"));
}

#[test]
fn usage_and_input_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let out = tmp.path().join("x");
    assert_eq!(run(&["learn", "--bogus", s(&data)]).status.code(), Some(1));
    assert_eq!(run(&["learn"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&["learn", "-o", s(&out), s(&tmp.path().join("missing.csv"))])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["learn", "--time-limit", "0", "-o", s(&out), s(&data)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["learn", "--gamma-p", "1.5", "-o", s(&out), s(&data)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["learn", "--gamma", "1", "--gamma-p", "0.9", s(&data)])
            .status
            .code(),
        Some(1)
    );
    let res = run(&["learn", "--class-column", "nope", "-o", s(&out), s(&data)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope"));
}

#[test]
fn unwritable_output_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let res = run(&["learn", "-o", s(&blocker.join("sub")), s(&data)]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert!(stdout(&run(&["learn", "--help"])).contains("--gamma-p"));
}

#[test]
fn in_process_entry_point_matches_binary() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path());
    let out = tmp.path().join("ip");
    let code = marginbn::cli::run(["marginbn", "learn", "-o", s(&out), s(&data)]);
    assert_eq!(code, 0);
    assert!(out.join("model.json").exists());
    assert_eq!(marginbn::cli::run(["marginbn", "--no-such-flag"]), 1);
}
