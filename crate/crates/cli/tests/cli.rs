use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nnlab");

const SMOOTHED: &str = r#"
version = 1
metric = "interval"
lo = [-1.0]
hi = [1.0]
label = "threshold"
theta = 0.0
process = "smoothed"
sigma = 0.1
horizon = 400
trials = 2
seed = 5
audits = ["mlp", "packing", "delta_tail", "decomposition", "rate_bound"]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_audit_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMOOTHED);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let sim = run(&["simulate", "--config", &cfg, "--out", out_s, "--format", "json"]);
    assert_eq!(code(&sim), 0, "{}", stdout(&sim));
    assert!(out.join("trace_0000.csv").exists());
    assert!(out.join("trace_0001.csv").exists());
    let first = fs::read_to_string(out.join("reports.json")).unwrap();
    assert_eq!(stdout(&sim).lines().filter(|l| l.starts_with("PASS")).count(), 5);

    let aud = run(&["audit", "--config", &cfg, "--out", out_s, "--format", "json"]);
    assert_eq!(code(&aud), 0, "{}", stdout(&aud));
    assert_eq!(fs::read_to_string(out.join("reports.json")).unwrap(), first);

    let rep = run(&["report", "--out", out_s, "--format", "json"]);
    assert_eq!(code(&rep), 0);
    assert_eq!(fs::read_to_string(out.join("reports.json")).unwrap(), first);
}

#[test]
fn flag_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMOOTHED);
    let out = dir.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "1",
        "--horizon",
        "50",
        "--seed",
        "9",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(out.join("trace_0000.csv").exists());
    assert!(!out.join("trace_0001.csv").exists());
    assert!(out.join("reports.csv").exists());
    let rows = fs::read_to_string(out.join("trace_0000.csv")).unwrap().lines().count();
    assert_eq!(rows, 51);
}

#[test]
fn tampered_trace_fails_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMOOTHED);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out", out_s])), 0);

    let path = out.join("trace_0000.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let truth = header.iter().position(|h| *h == "truth").unwrap();
    let mut cells: Vec<String> = lines[5].split(',').map(str::to_string).collect();
    cells[truth] = if cells[truth] == "0" { "1".into() } else { "0".into() };
    lines[5] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let aud = run(&["audit", "--config", &cfg, "--out", out_s]);
    assert_eq!(code(&aud), 1, "{}", stdout(&aud));
    assert!(stdout(&aud).contains("FAIL decomposition"));
}

#[test]
fn failed_stored_report_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let reports = r#"[{"audit":"mlp","pass":false,"observed":2.0,"bound":1.0,"slack":0.0,"witnesses":["ball 3"]}]"#;
    fs::write(dir.path().join("reports.json"), reports).unwrap();
    let o = run(&["report", "--out", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 1);
    assert!(dir.path().join("reports.csv").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.toml", &format!("{SMOOTHED}\nbogus_key = 3\n"));
    let o = run(&["simulate", "--config", &unknown, "--out", dir.path().join("o1").to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let koch = write_config(
        dir.path(),
        "k.toml",
        r#"
version = 1
metric = "euclidean"
lo = [0.0, 0.0]
hi = [1.0, 1.0]
label = "koch"
process = "worst-general"
horizon = 10
audits = []
"#,
    );
    let o = run(&["simulate", "--config", &koch, "--out", dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let missing = dir.path().join("missing.toml");
    let o = run(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let o = run(&["simulate", "--config", &unknown, "--format", "xml"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn worst_threshold_run_is_all_mistakes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.toml",
        r#"
version = 1
metric = "interval"
lo = [-1.0]
hi = [1.0]
label = "threshold"
theta = 0.0
process = "worst-threshold"
horizon = 100
audits = ["mlp", "influence"]
"#,
    );
    let o = run(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("N=100 median_rate=1 "), "{s}");
    assert!(s.contains("SKIP influence"));
}

#[test]
fn geometry_and_covertree_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMOOTHED);
    let out = dir.path().join("g");
    let o = run(&["geometry", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("geometry.json").exists());

    let out = dir.path().join("c");
    let o = run(&["covertree", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(out.join("covertree.txt").exists());
    assert!(stdout(&o).contains("delta_tail"));
}
