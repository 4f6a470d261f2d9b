use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use interpol::io::read_log;
use interpol::{estimate, EstimateReport, EstimatorConfig, FixedTarget, Sampler, Scenario};
use tempfile::TempDir;

fn interpol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interpol"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = interpol(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn simulate(dir: &TempDir, name: &str, seed: &str) -> String {
    let path = p(dir, name);
    ok(&[
        "simulate",
        "--seed",
        seed,
        "--n",
        "400",
        "--stay-prob",
        "0.8",
        "--output",
        &path,
    ]);
    path
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, "a.jsonl", "9");
    let b = simulate(&dir, "b.jsonl", "9");
    let c = simulate(&dir, "c.jsonl", "10");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 400);
}

#[test]
fn evaluate_matches_in_memory_estimate() {
    let dir = TempDir::new().unwrap();
    let log = simulate(&dir, "log.jsonl", "3");
    let out = ok(&[
        "evaluate",
        "--input",
        &log,
        "--family",
        "interpol",
        "--window",
        "2",
        "--exponent",
        "1.4",
    ]);
    let report: EstimateReport = serde_json::from_slice(&out.stdout).unwrap();

    let records = read_log(&log).unwrap();
    let s = Scenario::toy(0.8, Sampler::IdentityOrUniform).unwrap();
    let curve = interpol::power_curve(s.user.true_curve(), 1.4).unwrap();
    let direct = estimate(
        &records,
        &FixedTarget(s.target.clone()),
        &EstimatorConfig::interpol(2, curve),
    )
    .unwrap();
    assert!((report.point_estimate - direct.point_estimate).abs() <= 1e-12);
    assert!((report.std_error - direct.std_error).abs() <= 1e-12);
    assert_eq!(report.n, 400);
    assert!(report.per_query_sums.is_none());

    // the in-memory dataset from the same seed gives the same answer
    let generated = interpol::generate_dataset(&s, 400, 3).unwrap();
    assert_eq!(generated, records);
}

#[test]
fn evaluate_with_policy_file_and_per_query_sums() {
    let dir = TempDir::new().unwrap();
    let log = simulate(&dir, "log.jsonl", "4");
    let policy = p(&dir, "policy.json");
    fs::write(&policy, "[7, 0, 3, 1, 5, 6, 8, 9, 2, 4]").unwrap();
    let out = ok(&[
        "evaluate",
        "--input",
        &log,
        "--policy",
        &policy,
        "--family",
        "ipm",
        "--per-query",
    ]);
    let report: EstimateReport = serde_json::from_slice(&out.stdout).unwrap();
    let sums = report.per_query_sums.unwrap();
    assert_eq!(sums.len(), 400);
    let mean = sums.iter().sum::<f64>() / 400.0;
    assert!((mean - report.point_estimate).abs() < 1e-12);
}

fn write_log_without_propensities(path: &Path) {
    fs::write(
        path,
        "{\"query_id\":\"a\",\"ranking\":[6,0,3,1,4,8,9,7,5,2],\"clicks\":[0,0,0,1,0,0,0,1,0,0]}\n\
         {\"query_id\":\"b\",\"ranking\":[6,0,3,1,4,8,9,7,5,2],\"clicks\":[0,0,0,0,1,0,0,0,0,0]}\n",
    )
    .unwrap();
}

#[test]
fn pbm_needs_no_propensities_but_interpol_does() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("bare.jsonl");
    write_log_without_propensities(&log);
    let log = log.to_str().unwrap();
    let out = ok(&["evaluate", "--input", log, "--family", "pbm"]);
    let report: EstimateReport = serde_json::from_slice(&out.stdout).unwrap();
    // item 1 stays at rank 3; item 7 moves 7 -> 0 (1 / 0.3); item 4 moves 4 -> 9 (0.1 / 0.6)
    let expect = (1.0 + 1.0 / 0.3 + 0.1 / 0.6) / 2.0;
    assert!((report.point_estimate - expect).abs() < 1e-12);

    let out = interpol(&[
        "evaluate", "--input", log, "--family", "interpol", "--window", "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("propensities"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = p(&dir, "bad.jsonl");
    fs::write(
        &bad,
        "{\"query_id\":\"a\",\"ranking\":[0,1],\"clicks\":[0,1,0]}\n",
    )
    .unwrap();
    let out = interpol(&["evaluate", "--input", &bad, "--family", "pbm"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    // item 1 shown at rank 0 matches the target but has zero propensity there
    let unsupported = p(&dir, "unsupported.jsonl");
    fs::write(
        &unsupported,
        "{\"query_id\":\"a\",\"ranking\":[1,0],\"clicks\":[1,0],\"propensities\":[[1.0,0.0],[0.0,1.0]]}\n",
    )
    .unwrap();
    let policy = p(&dir, "policy.json");
    fs::write(&policy, "{\"a\": [1, 0]}").unwrap();
    let cfg = p(&dir, "k2.toml");
    fs::write(
        &cfg,
        "[scenario]\nk = 2\nrelevance = [1.0, 1.0]\ntrue_curve = [1.0, 0.5]\nlogging_ranking = [0, 1]\ntarget_ranking = [1, 0]\n",
    )
    .unwrap();
    let out = interpol(&[
        "--config",
        &cfg,
        "evaluate",
        "--input",
        &unsupported,
        "--policy",
        &policy,
        "--family",
        "ipm",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = interpol(&[
        "simulate",
        "--seed",
        "1",
        "--stay-prob",
        "0.05",
        "--output",
        &p(&dir, "x"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1/K"));

    // --seed is mandatory
    let out = interpol(&["grid", "--output", &p(&dir, "g.csv")]);
    assert_eq!(out.status.code(), Some(2));
    let out = interpol(&[
        "grid",
        "--seed",
        "1",
        "--windows",
        "0,-1",
        "--output",
        &p(&dir, "g.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.windows"));
}

#[test]
fn grid_csv_is_deterministic_across_workers_and_plots() {
    let dir = TempDir::new().unwrap();
    let args = |out: &str, workers: &'static str| {
        vec![
            "grid".to_string(),
            "--seed".into(),
            "11".into(),
            "--exponents".into(),
            "1.0,1.8".into(),
            "--stay-probs".into(),
            "0.5,0.95".into(),
            "--windows".into(),
            "0,2,10".into(),
            "--n".into(),
            "200".into(),
            "--replications".into(),
            "10".into(),
            "--workers".into(),
            workers.into(),
            "--output".into(),
            out.to_string(),
        ]
    };
    let a = p(&dir, "a.csv");
    let b = p(&dir, "b.csv");
    ok(&args(&a, "1").iter().map(String::as_str).collect::<Vec<_>>());
    ok(&args(&b, "4").iter().map(String::as_str).collect::<Vec<_>>());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "exponent,stay_prob,window,n,replications,mean_estimate,true_value,bias,variance,mse"
    );
    assert_eq!(lines.count(), 12);

    let svg = p(&dir, "fig.svg");
    ok(&[
        "plot",
        "--input",
        &a,
        "--output",
        &svg,
        "--x",
        "window",
        "--y",
        "bias,variance",
        "--exponent",
        "1.8",
        "--stay-prob",
        "0.95",
    ]);
    let doc = fs::read_to_string(&svg).unwrap();
    assert_eq!(doc.matches("<polyline").count(), 2);
    let out = interpol(&["plot", "--input", &a, "--output", &svg, "--exponent", "7"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn oracle_on_small_scenario() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "k3.toml");
    fs::write(
        &cfg,
        "[scenario]\nk = 3\nstay_prob = 0.8\nsampler = \"cyclic-shift\"\nrelevance = [1.0, 0.0, 0.0]\n\
         true_curve = [1.0, 0.6, 0.3]\nlogging_ranking = [0, 1, 2]\ntarget_ranking = [0, 1, 2]\n\
         [estimator]\nwindow = 2\nexponent = 2.0\n",
    )
    .unwrap();
    let out = ok(&["--config", &cfg, "oracle"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["expected_estimate"].as_f64().unwrap() - 1.3).abs() < 1e-12);
    assert_eq!(v["true_value"].as_f64().unwrap(), 1.0);

    let out = ok(&["--config", &cfg, "oracle", "--exponent", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["expected_estimate"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    // the default ten-item scenario is too large to enumerate
    let out = interpol(&["oracle"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let grid = interpol::config::parse_config(&fs::read_to_string(root.join("grid.toml")).unwrap())
        .unwrap();
    assert_eq!(grid.experiment_grid(2022).cell_count(), 792);
    let cfg = root.join("oracle_k3.toml");
    let out = ok(&["--config", cfg.to_str().unwrap(), "oracle"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["expected_estimate"].as_f64().unwrap() - 0.8897918255023933).abs() < 1e-12);
}
