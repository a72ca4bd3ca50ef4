use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_catastrophe"));
    cmd.env_remove("CATASTROPHE_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid json")
}

#[test]
fn rate_table_for_jk() {
    let o = run(&[
        "rate", "--which", "Jk", "--lambda", "1", "--mu", "1", "--alpha", "1", "--k", "1",
        "--x-grid", "0:3:0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 7);
    let at = |x: f64| -> f64 {
        rows.iter()
            .map(|r| {
                r.split(',')
                    .map(|v| v.parse::<f64>().unwrap())
                    .collect::<Vec<_>>()
            })
            .find(|v| v[0] == x)
            .unwrap()[1]
    };
    assert!((at(1.5) - 1.147918).abs() < 1e-6);
}

#[test]
fn exact_at_time_zero_is_point_mass() {
    let o = run(&["exact", "--t", "0", "--init", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for line in stdout(&o).lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let p: f64 = cols[1].parse().unwrap();
        assert_eq!(p, if cols[0] == "4" { 1.0 } else { 0.0 });
    }
}

#[test]
fn missing_required_flag_prints_usage() {
    let o = run(&["exact", "--init", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage:"));
    let o = run(&["rate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn errors_are_one_line_with_distinct_codes() {
    let config = run(&["exact", "--t", "1", "--lambda=-1"]);
    assert_eq!(config.status.code(), Some(2));
    let solver = run(&["exact", "--t", "100", "--n-states", "20"]);
    assert_eq!(solver.status.code(), Some(3));
    for o in [&config, &solver] {
        let err = stderr(o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error: kind="));
    }
    assert!(stderr(&config).contains("lambda"));

    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("out.csv");
    let io = run(&[
        "bounds",
        "--which",
        "poisson-lower",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(io.status.code(), Some(4));
    assert!(stderr(&io).starts_with("error: kind=io"));
}

#[test]
fn json_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec![
            "verify", "--mode", "curve", "--x", "1.5", "--t-grid", "10,20,40",
        ],
        vec![
            "verify", "--mode", "is", "--x", "1.5", "--t-grid", "20", "--n", "500", "--seed", "3",
        ],
        vec![
            "simulate",
            "--horizon",
            "5",
            "--replicas",
            "200",
            "--seed",
            "9",
        ],
        vec![
            "couple",
            "--horizon",
            "5",
            "--x0",
            "1",
            "--y0",
            "4",
            "--seed",
            "2",
        ],
        vec!["exact", "--t", "3", "--init", "1", "--threshold", "8"],
    ] {
        let mut first = args.clone();
        first.extend(["--format", "json"]);
        let a = run(&first);
        assert!(a.status.success(), "{}", stderr(&a));
        let a = json(&a);
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(&cfg_path, a["config"].to_string()).unwrap();
        let b = run(&[
            args[0],
            "--config",
            cfg_path.to_str().unwrap(),
            "--format",
            "json",
        ]);
        assert!(b.status.success(), "{}", stderr(&b));
        assert_eq!(a, json(&b), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"which": "I1", "lambda": 1.0, "mu": 3.0, "x_grid": "1:1:1"}"#,
    )
    .unwrap();
    let o = run(&[
        "rate",
        "--config",
        cfg.to_str().unwrap(),
        "--mu",
        "1",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["config"]["mu"], 1.0);
    assert!((v["result"][0]["rate"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-15);

    std::fs::write(&cfg, r#"{"which": "I1", "bogus": 1}"#).unwrap();
    let o = run(&["rate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "bounds",
            "--which",
            "catastrophe-sum",
            "--a",
            "0.1",
            "--v",
            "1",
            "--delta",
            "1",
            "--phi",
            "10",
        ])
        .env("CATASTROPHE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let log_bound: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((log_bound - (-10.0 * 10f64.ln() + 2.0)).abs() < 1e-12);
    let entries = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(entries, 1);
}

#[test]
fn worker_count_does_not_change_results() {
    let base = [
        "verify", "--mode", "lln", "--a", "0.5", "--t-grid", "50,200", "--n", "400", "--eps", "0.8",
    ];
    let mut one = base.to_vec();
    one.extend(["--workers", "1"]);
    let mut four = base.to_vec();
    four.extend(["--workers", "4"]);
    let (a, b) = (run(&one), run(&four));
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_numbers_round_trip() {
    let o = run(&[
        "verify", "--mode", "sandwich", "--a", "2", "--x", "1", "--t-grid", "4,8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("T,threshold,window,clamped,log_lower,log_upper"));
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let lower: f64 = cols[4].parse().unwrap();
        assert_eq!(format!("{lower:.16e}"), cols[4]);
    }
}

#[test]
fn single_path_outputs() {
    let o = run(&[
        "simulate",
        "--horizon",
        "3",
        "--init",
        "2",
        "--sampler",
        "decomposed",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("time,state\n"));
    assert!(text.lines().nth(1).unwrap().ends_with(",2"));

    let o = run(&[
        "couple",
        "--horizon",
        "3",
        "--x0",
        "0",
        "--y0",
        "5",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    assert!(json(&o)["result"]["max_discrepancy"].as_u64().unwrap() <= 5);
    assert!(Path::new(env!("CARGO_BIN_EXE_catastrophe")).exists());
}
