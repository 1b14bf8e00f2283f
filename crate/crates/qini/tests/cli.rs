//! End-to-end tests of the binary: file contracts, exit codes, the
//! simulate -> scores -> path -> bootstrap round trip, and byte-identical
//! reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qini() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qini"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = qini().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p
}

#[test]
fn path_on_a_single_row_frame() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(
        tmp.path(),
        "frame.csv",
        "tau_1,cost_1,score_1\n2.0,1.0,2.0\n",
    );
    run_ok(&[
        "path",
        "--input",
        input.to_str().unwrap(),
        "--b-max",
        "10",
        "--grid",
        "4",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let events = read(&tmp.path().join("path_events.csv"));
    let mut lines = events.lines();
    assert_eq!(
        lines.next().unwrap(),
        "event_index,unit_id,arm,spend,gain,is_upgrade"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("0,0,1,"), "{row}");
    assert!(row.ends_with("false"));
    assert_eq!(lines.next(), None);
    let curve = read(&tmp.path().join("curve.csv"));
    assert_eq!(curve.lines().count(), 5);
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn missing_header_exits_2_and_names_the_column() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(tmp.path(), "frame.csv", "tau_1,cost_1\n2.0,1.0\n");
    let out = qini()
        .args(["path", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing column score_1"), "{stderr}");
}

#[test]
fn unparseable_cell_exits_2_and_names_row_and_column() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(
        tmp.path(),
        "frame.csv",
        "tau_1,cost_1,score_1\n2.0,1.0,2.0\n1.0,oops,0.5\n",
    );
    let out = qini()
        .args(["path", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 2"), "{stderr}");
    assert!(stderr.contains("cost_1"), "{stderr}");
}

#[test]
fn constraint_violation_exits_3() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(
        tmp.path(),
        "frame.csv",
        "tau_1,cost_1,score_1\n2.0,-1.0,2.0\n",
    );
    let out = qini()
        .args(["path", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("cost"), "{stderr}");
}

#[test]
fn arm_mask_equals_reduced_file() {
    let tmp = TempDir::new().unwrap();
    // Two-arm frame; masking to arm 1 must reproduce the one-arm run.
    let two = write_file(
        tmp.path(),
        "two.csv",
        "tau_1,tau_2,cost_1,cost_2,score_1,score_2\n\
         2.0,3.0,1.0,3.0,2.0,3.0\n\
         0.5,-1.0,0.5,1.0,0.4,-0.9\n",
    );
    let one = write_file(
        tmp.path(),
        "one.csv",
        "tau_1,cost_1,score_1\n2.0,1.0,2.0\n0.5,0.5,0.4\n",
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    run_ok(&[
        "path",
        "--input",
        two.to_str().unwrap(),
        "--arms",
        "1",
        "--b-max",
        "5",
        "--out",
        out_a.to_str().unwrap(),
    ]);
    run_ok(&[
        "path",
        "--input",
        one.to_str().unwrap(),
        "--b-max",
        "5",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&out_a.join("path_events.csv")),
        read(&out_b.join("path_events.csv"))
    );
    assert_eq!(read(&out_a.join("curve.csv")), read(&out_b.join("curve.csv")));
}

#[test]
fn identical_masks_warn_with_exit_4_but_write_the_zero_curve() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(
        tmp.path(),
        "frame.csv",
        "tau_1,tau_2,cost_1,cost_2,score_1,score_2\n\
         2.0,3.0,1.0,3.0,2.0,3.0\n\
         0.5,1.0,0.5,1.0,0.4,0.9\n\
         1.5,0.2,0.7,1.1,1.4,0.3\n\
         0.9,2.0,0.6,2.0,1.0,2.1\n",
    );
    let out = qini()
        .args([
            "diff",
            "--input",
            input.to_str().unwrap(),
            "--arms",
            "1,2",
            "--arms",
            "2,1",
            "--replicates",
            "4",
            "--out",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let diff = read(&tmp.path().join("diff_ci.csv"));
    for line in diff.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn diff_usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(
        tmp.path(),
        "frame.csv",
        "tau_1,cost_1,score_1\n2.0,1.0,2.0\n",
    );
    let out = qini()
        .args(["diff", "--input", input.to_str().unwrap(), "--arms", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_round_trip_composes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    run_ok(&["simulate", "--units", "200", "--seed", "3", "--out", dir]);
    let data = tmp.path().join("data.csv");
    assert_eq!(
        read(&data).lines().next().unwrap(),
        "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,w,y,c1,c2,tau1_true,tau2_true"
    );
    run_ok(&[
        "scores",
        "--input",
        data.to_str().unwrap(),
        "--ipw",
        "0.3333333333333333,0.3333333333333333,0.3333333333333334",
        "--out",
        dir,
    ]);
    let scores = tmp.path().join("scores.csv");
    assert_eq!(
        read(&scores).lines().next().unwrap(),
        "tau_1,tau_2,cost_1,cost_2,score_1,score_2"
    );
    run_ok(&[
        "path",
        "--input",
        scores.to_str().unwrap(),
        "--b-max",
        "0.4",
        "--out",
        dir,
    ]);
    run_ok(&[
        "bootstrap",
        "--input",
        scores.to_str().unwrap(),
        "--b-max",
        "0.4",
        "--grid",
        "8",
        "--replicates",
        "16",
        "--out",
        dir,
    ]);
    let ci = read(&tmp.path().join("curve_ci.csv"));
    assert_eq!(ci.lines().next().unwrap(), "spend,gain,std_err,ci_lo,ci_hi");
    assert_eq!(ci.lines().count(), 9);
    run_ok(&[
        "diff",
        "--input",
        scores.to_str().unwrap(),
        "--baseline",
        "--b-max",
        "0.4",
        "--grid",
        "8",
        "--replicates",
        "16",
        "--out",
        dir,
    ]);
    assert_eq!(
        read(&tmp.path().join("diff_ci.csv")).lines().next().unwrap(),
        "spend,diff,std_err,ci_lo,ci_hi"
    );
}

#[test]
fn aipw_scores_from_files_match_ipw_under_null_nuisance() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let input = write_file(
        tmp.path(),
        "obs.csv",
        "w,y\n0,1.0\n1,-2.0\n2,3.0\n1,0.5\n",
    );
    let mu = write_file(
        tmp.path(),
        "mu.csv",
        "mu_0,mu_1,mu_2\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n",
    );
    let e = write_file(
        tmp.path(),
        "e.csv",
        "e_0,e_1,e_2\n0.5,0.25,0.25\n0.5,0.25,0.25\n0.5,0.25,0.25\n0.5,0.25,0.25\n",
    );
    let folds = write_file(tmp.path(), "folds.csv", "fold\n0\n1\n0\n1\n");
    let out_a = tmp.path().join("aipw");
    run_ok(&[
        "scores",
        "--input",
        input.to_str().unwrap(),
        "--aipw",
        mu.to_str().unwrap(),
        e.to_str().unwrap(),
        folds.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    let out_b = tmp.path().join("ipw");
    run_ok(&[
        "scores",
        "--input",
        input.to_str().unwrap(),
        "--ipw",
        "0.5,0.25,0.25",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&out_a.join("scores.csv")),
        read(&out_b.join("scores.csv"))
    );
    let _ = dir;
}

#[test]
fn threads_env_var_is_honored() {
    let tmp = TempDir::new().unwrap();
    let input = write_file(
        tmp.path(),
        "frame.csv",
        "tau_1,cost_1,score_1\n2.0,1.0,2.0\n1.0,0.5,0.9\n0.7,0.3,0.8\n1.1,0.9,1.2\n",
    );
    let ok = qini()
        .env("QINI_PATH_THREADS", "2")
        .args([
            "bootstrap",
            "--input",
            input.to_str().unwrap(),
            "--replicates",
            "4",
            "--out",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let manifest = read(&tmp.path().join("manifest.json"));
    assert!(manifest.contains("\"threads\": 2"), "{manifest}");

    let bad = qini()
        .env("QINI_PATH_THREADS", "lots")
        .args(["bootstrap", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    run_ok(&["simulate", "--units", "120", "--seed", "9", "--out", dir]);
    run_ok(&[
        "scores",
        "--input",
        tmp.path().join("data.csv").to_str().unwrap(),
        "--ipw",
        "0.3333333333333333,0.3333333333333333,0.3333333333333334",
        "--out",
        dir,
    ]);
    let scores = tmp.path().join("scores.csv");
    let mut outputs = Vec::new();
    for (sub, threads) in [("t1", "1"), ("t1b", "1"), ("t4", "4")] {
        let out_dir = tmp.path().join(sub);
        run_ok(&[
            "bootstrap",
            "--input",
            scores.to_str().unwrap(),
            "--b-max",
            "0.4",
            "--grid",
            "6",
            "--replicates",
            "32",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        outputs.push(read(&out_dir.join("curve_ci.csv")));
    }
    assert_eq!(outputs[0], outputs[1], "rerun differs");
    assert_eq!(outputs[0], outputs[2], "thread count changes output");
}
