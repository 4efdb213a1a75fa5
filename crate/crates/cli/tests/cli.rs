use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_falsitav");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// results.csv without the trailing wall_ms column.
fn results_without_timing(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn monitor_prints_robustness_and_verdict() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.csv"), "time,x\n0,1\n1,3\n2,-1\n3,2\n").unwrap();
    let o = run(dir.path(), &["monitor", "--formula", "always x >= -2", "--trace", "t.csv", "--boolean"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0].parse::<f64>().unwrap(), 1.0);
    assert_eq!(lines[1], "true");

    fs::write(dir.path().join("phi.stl"), "eventually_[0,1] x > 2").unwrap();
    let o = run(dir.path(), &["monitor", "--formula", "phi.stl", "--trace", "t.csv", "--index", "1", "--boolean"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0].parse::<f64>().unwrap(), 1.0);
    assert_eq!(lines[1], "true");
}

#[test]
fn monitor_reports_parse_errors() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.csv"), "time,x\n0,1\n").unwrap();
    let o = run(dir.path(), &["monitor", "--formula", "always (x >=", "--trace", "t.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    let o = run(dir.path(), &["monitor", "--formula", "speed > 1", "--trace", "t.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("speed"), "{}", stderr(&o));
}

#[test]
fn cagen_generates_and_verifies() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--seed", "3", "cagen", "--strength", "2", "--domains", "3,3,3,2", "--out", "ca.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(dir.path(), &["cagen", "verify", "--in", "ca.csv", "--strength", "2", "--domains", "3,3,3,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "COVERED");

    let text = fs::read_to_string(dir.path().join("ca.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    fs::write(dir.path().join("short.csv"), lines.join("\n") + "\n").unwrap();
    let o = run(dir.path(), &["cagen", "verify", "--in", "short.csv", "--strength", "2", "--domains", "3,3,3,2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!stdout(&o).trim().is_empty());
    assert!(stderr(&o).contains("missing"));
}

#[test]
fn cagen_to_stdout_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = run(dir.path(), &["--seed", "9", "cagen", "--domains", "4,4,3,3,2"]);
    let b = run(dir.path(), &["--seed", "9", "cagen", "--domains", "4,4,3,3,2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--out-dir", "out", "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("samples=601 collision=false"), "{out}");
    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(trace.starts_with("time,v_ego,ego_x,ego_y"), "{}", &trace[..60]);
    assert_eq!(trace.lines().count(), 602);
}

#[test]
fn experiment_with_one_simulation_writes_one_row() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"strategies": ["ur"], "trials": 1, "budget": 1, "per_case_cap": 1, "horizon": 5}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["--out-dir", "res", "experiment", "--config", "cfg.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 2, "{results}");
    assert!(lines[0].starts_with("trial,strategy,sim_index,"));
    assert!(lines[0].ends_with("robustness,objective,wall_ms"));
    for f in ["summary.csv", "histogram.csv", "trials.csv"] {
        assert!(dir.path().join("res").join(f).is_file(), "{f}");
    }
    assert!(stdout(&o).contains("ur,1,"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"trials": 2, "sa": {"t0": "hot"}}"#).unwrap();
    let o = run(dir.path(), &["experiment", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sa.t0"), "{}", stderr(&o));

    fs::write(dir.path().join("typo.json"), r#"{"trails": 2}"#).unwrap();
    let o = run(dir.path(), &["experiment", "--config", "typo.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

#[test]
fn falsify_mode_exits_2_on_violation() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("blind.json"),
        r#"{"base_miss_rate": 1.0, "contrast_table": []}"#,
    )
    .unwrap();
    let o = run(
        dir.path(),
        &[
            "falsify", "--mode", "falsify", "--strategy", "ur", "--trials", "1", "--budget", "5", "--per-case-cap", "5",
            "--perception", "blind.json", "--horizon", "20",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).contains("requirement violated"));
    assert!(dir.path().join("results.csv").is_file());
}

#[test]
fn external_simulator_matches_built_in() {
    let dir = TempDir::new().unwrap();
    let common = ["falsify", "--strategy", "ur", "--trials", "1", "--budget", "3", "--per-case-cap", "3", "--horizon", "10"];
    let mut internal: Vec<&str> = common.to_vec();
    internal.extend(["--out", "internal.csv"]);
    let o = run(dir.path(), &internal);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut external: Vec<&str> = common.to_vec();
    external.extend(["--out", "external.csv", "--sut-exec", BIN]);
    for a in ["simulate", "--bind-stdin", "--horizon", "10", "--trace-out", "-"] {
        external.extend(["--sut-arg", a]);
    }
    let o = run(dir.path(), &external);
    assert!(o.status.success(), "{}", stderr(&o));

    let a = results_without_timing(&dir.path().join("internal.csv"));
    let b = results_without_timing(&dir.path().join("external.csv"));
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
}

#[test]
fn jobs_do_not_change_results() {
    let dir = TempDir::new().unwrap();
    let base = ["falsify", "--strategy", "ca-sa", "--strategy", "ur", "--trials", "2", "--budget", "60", "--horizon", "8"];
    let mut one: Vec<&str> = vec!["--jobs", "1"];
    one.extend(base);
    one.extend(["--out", "one.csv"]);
    let mut four: Vec<&str> = vec!["--jobs", "4"];
    four.extend(base);
    four.extend(["--out", "four.csv"]);
    assert!(run(dir.path(), &one).status.success());
    assert!(run(dir.path(), &four).status.success());
    assert_eq!(results_without_timing(&dir.path().join("one.csv")), results_without_timing(&dir.path().join("four.csv")));
}

#[test]
fn ode_bench_landscape_and_single_run() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--out-dir", "ode", "ode-bench", "--grid-step", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("points=25 "), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("ode/ode_landscape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);

    let o = run(dir.path(), &["--out-dir", "ode", "ode-bench", "--x0", "0,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).trim().parse::<f64>().is_ok());
    assert!(dir.path().join("ode/ode_trace.csv").is_file());

    let o = run(dir.path(), &["--out-dir", "ode", "ode-bench", "--x0", "-1.5,-1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).trim().parse::<f64>().unwrap() < 0.0);
    let o = run(dir.path(), &["ode-bench", "--x0", "1,2,3"]);
    assert_eq!(o.status.code(), Some(1));
}
