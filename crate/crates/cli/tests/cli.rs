use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qemc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qemc"))
        .args(args)
        .env_remove("QEMC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn data_lines(file: &str) -> Vec<String> {
    std::fs::read_to_string(file)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

fn read_json(file: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap()
}

#[test]
fn generate_k4() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "k4.txt");
    let o = qemc(&["generate", "--nodes", "4", "--degree", "3", "--out", &out]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("N = 4, M = 6"));
    assert_eq!(data_lines(&out).len(), 6);
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("# qemc "));
}

#[test]
fn generate_odd_degree_sum_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = qemc(&["generate", "--nodes", "5", "--degree", "3", "--out", &path(&dir, "g.txt")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("even"));
    assert!(!Path::new(&path(&dir, "g.txt")).exists());
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.txt"), path(&dir, "b.txt"));
    for out in [&a, &b] {
        assert!(qemc(&["generate", "--nodes", "16", "--degree", "9", "--seed", "7", "--out", out]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn seed_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.txt"), path(&dir, "b.txt"));
    assert!(qemc(&["generate", "--nodes", "12", "--degree", "3", "--seed", "42", "--out", &a]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_qemc"))
        .args(["generate", "--nodes", "12", "--degree", "3", "--out", &b])
        .env("QEMC_SEED", "42")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn solve_k4_reaches_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "run.json");
    let o = qemc(&[
        "solve", "--graph", "k4", "--layers", "1", "--step-size", "0.99", "--iters", "300", "--target", "3.7", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("final best cut 4"));
    assert!(stdout(&o).contains("iterations to 3.7:"));
    let v = read_json(&out);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let exp = &v["experiments"][0];
    assert_eq!(exp["kind"], "solve");
    assert_eq!(exp["config"]["optimizer"]["step_size"], 0.99);
    let best = exp["result"]["record"]["iterations"].as_array().unwrap().last().unwrap()["best_cut"].clone();
    assert_eq!(best, 4.0);
}

#[test]
fn solve_echoes_three_n_squared_shots() {
    let dir = tempfile::tempdir().unwrap();
    let graph = path(&dir, "g16.txt");
    assert!(qemc(&["generate", "--nodes", "16", "--degree", "3", "--out", &graph]).status.success());
    let out = path(&dir, "run.json");
    let o = qemc(&["solve", "--graph", &graph, "--layers", "2", "--step-size", "0.5", "--iters", "5", "--shots", "3n2", "--out", &out]);
    assert!(o.status.success());
    assert_eq!(read_json(&out)["experiments"][0]["config"]["optimizer"]["shots"], 768);
}

#[test]
fn solve_replays_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    for out in [&a, &b] {
        let o = qemc(&["solve", "--graph", "c8", "--layers", "2", "--step-size", "0.3", "--iters", "20", "--shots", "200", "--seed", "5", "--out", out]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn solve_rejects_zero_blue() {
    let dir = tempfile::tempdir().unwrap();
    let o = qemc(&["solve", "--graph", "k4", "--layers", "1", "--step-size", "0.5", "--iters", "3", "--blue", "0", "--out", &path(&dir, "r.json")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_scan_blue_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let (out, svg) = (path(&dir, "r.json"), path(&dir, "r.svg"));
    let o = qemc(&["solve", "--graph", "k3_3", "--layers", "2", "--step-size", "0.5", "--iters", "30", "--scan-blue", "--out", &out, "--plot", &svg]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("best blue count"));
    assert_eq!(read_json(&out)["experiments"][0]["result"]["per_blue_count"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qemc(&["solve", "--graph", "k4"]).status.code(), Some(1));
    assert_eq!(qemc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qemc(&["exhaustive", "--graph", "no-such-graph"]).status.code(), Some(1));
    assert!(qemc(&["--help"]).status.success());
}

#[test]
fn unwritable_output_exits_two() {
    let o = qemc(&["generate", "--nodes", "4", "--degree", "3", "--out", "/nonexistent-dir/x/g.txt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exhaustive_k4() {
    let o = qemc(&["exhaustive", "--graph", "k4"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.lines().next(), Some("4"));
    let witness = s.lines().nth(1).unwrap().trim_start_matches("witness ");
    assert_eq!(witness.len(), 4);
    assert_eq!(witness.matches('1').count(), 2);
}

#[test]
fn gw_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let graph = path(&dir, "g.txt");
    assert!(qemc(&["generate", "--nodes", "12", "--degree", "3", "--out", &graph]).status.success());
    let out = path(&dir, "gw.csv");
    assert!(qemc(&["gw", "--graph", &graph, "--trials", "10", "--out", &out]).status.success());
    let lines = data_lines(&out);
    assert_eq!(lines[0], "trial,cut,relaxation_value,converged");
    assert_eq!(lines.len(), 11);
}

#[test]
fn grid_is_nine_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "grid.csv");
    let o = qemc(&["grid", "--graph", "c6", "--layers", "1,3,5", "--steps", "0.5,0.7,0.9", "--trials", "1", "--iters", "10", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "layers,step_size,trial,final_best_cut");
    assert_eq!(lines.len(), 10);
}

#[test]
fn results_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for (jobs, out) in [("1", &a), ("4", &b)] {
        let o = qemc(&["--jobs", jobs, "grid", "--graph", "c8", "--layers", "1,2", "--steps", "0.3,0.6", "--trials", "3", "--iters", "15", "--out", out]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn scaling_layers_on_k4() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "s.csv");
    let o = qemc(&[
        "scaling", "--graph", "k4", "--axis", "layers", "--targets", "3.7", "--step-size", "0.99", "--layer-candidates", "1,2,3", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&out), vec!["num_nodes,axis,minimal_value,reached", "4,layers,1,true"]);
}

#[test]
fn study_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (out, json) = (path(&dir, "c.csv"), path(&dir, "s.json"));
    let o = qemc(&[
        "study", "--instances", "2", "--nodes", "8", "--degree", "3", "--layers", "2", "--step-size", "0.5", "--iters", "10",
        "--qemc-trials", "2", "--gw-trials", "2", "--out", &out, "--json", &json,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&out).len(), 1 + 4 * 10);
    assert_eq!(read_json(&json)["experiments"][0]["result"]["instances"].as_array().unwrap().len(), 2);
}
