use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn persuasion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persuasion"))
        .args(args)
        .env_remove("PERSUASION_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "one-line error expected, got {text:?}");
    text.trim_end().to_string()
}

fn column(csv: &str, index: usize) -> Vec<String> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').nth(index).unwrap().to_string())
        .collect()
}

#[test]
fn oracle_reports_the_second_period_exactly() {
    let sb = scenario("seller_buyer.json");
    let out = stdout(&persuasion(&[
        "oracle",
        sb.to_str().unwrap(),
        "--alpha",
        "1.39",
        "--horizon",
        "2",
    ]));
    assert_eq!(out.lines().next(), Some("t,adoption_exact,sender_utility_exact"));
    assert_eq!(column(&out, 1), ["1.000000000000", "0.700000000000"]);
}

#[test]
fn persistent_designs_stay_adopted() {
    for name in ["seller_buyer_full.json", "speed_limit.json"] {
        let path = scenario(name);
        let out = stdout(&persuasion(&["oracle", path.to_str().unwrap(), "--horizon", "20"]));
        assert!(column(&out, 1).iter().all(|v| v == "1.000000000000"), "{name}: {out}");
    }
}

#[test]
fn errors_are_single_lines_with_categories() {
    let sb = scenario("seller_buyer.json");
    let sb = sb.to_str().unwrap();
    let cases: [(&[&str], i32, &str); 6] = [
        (&["simulate", sb, "--alpha", "1", "--horizon", "3"], 1, "error[alpha]"),
        (&["oracle", sb, "--alpha", "0.5"], 1, "error[alpha]"),
        (&["oracle", "/nonexistent/scenario.json"], 1, "error[io]"),
        (
            &["sweep", sb, "--param", "alpha", "--grid", "2:1:0.1"],
            1,
            "error[usage]",
        ),
        (&["frobnicate"], 2, "error[usage]"),
        (&["oracle", sb, "--alpha", "abc"], 2, "error[usage]"),
    ];
    for (args, code, prefix) in cases {
        let out = persuasion(args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let line = stderr_line(&out);
        assert!(line.starts_with(prefix), "{args:?}: {line}");
    }
}

#[test]
fn malformed_scenarios_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    let out = persuasion(&["solve", bad_json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error[parse]"));

    let bad_prior = dir.path().join("prior.json");
    let text = fs::read_to_string(scenario("seller_buyer.json"))
        .unwrap()
        .replace("7/10", "6/10");
    fs::write(&bad_prior, text).unwrap();
    let out = persuasion(&["solve", bad_prior.to_str().unwrap()]);
    assert!(stderr_line(&out).starts_with("error[scenario]"));
}

#[test]
fn epsilon_sweep_needs_the_revealing_preferred_shape() {
    let sl = scenario("speed_limit.json");
    let out = persuasion(&[
        "sweep",
        sl.to_str().unwrap(),
        "--param",
        "epsilon",
        "--grid",
        "0:0.2:0.1",
        "--reps",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error[shape]"));
}

#[test]
fn solve_reports_the_split_design() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("solve.json");
    let sb = scenario("seller_buyer.json");
    stdout(&persuasion(&[
        "solve",
        sb.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(report["matrix_exact"], serde_json::json!([["1", "0"], ["3/7", "4/7"]]));
    assert_eq!(report["value_exact"], "3/5");
    assert_eq!(report["mu_star_exact"], "1/2");
    let verdict = &report["verdict"];
    assert_eq!(verdict["classification"], "SwitchRisk");
    assert_eq!(verdict["alpha_below_threshold"], true);
    let close = |v: &serde_json::Value, want: f64| (v.as_f64().unwrap() - want).abs() < 1e-12;
    assert!(close(&report["x"], 3.0 / 7.0));
    assert!(close(&report["e"], 0.6));
    assert!(close(&verdict["alpha_hat"], 1.4));
    assert!(close(&verdict["adoption_bound"], 0.5));
}

#[test]
fn every_shipped_scenario_runs() {
    let dir = fs::read_dir(scenario("")).unwrap();
    let mut seen = 0;
    for entry in dir {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let p = path.to_str().unwrap();
        stdout(&persuasion(&["solve", p]));
        stdout(&persuasion(&["oracle", p, "--horizon", "6"]));
        let csv = stdout(&persuasion(&["simulate", p, "--horizon", "6", "--reps", "500"]));
        assert_eq!(csv.lines().count(), 7);
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn simulation_output_is_byte_identical_across_runs_and_workers() {
    let sb = scenario("seller_buyer.json");
    let args = [
        "simulate",
        sb.to_str().unwrap(),
        "--horizon",
        "30",
        "--reps",
        "3000",
        "--seed",
        "7",
    ];
    let first = stdout(&persuasion(&args));
    let again = stdout(&persuasion(&args));
    assert_eq!(first, again);
    for workers in ["1", "3"] {
        let out = Command::new(env!("CARGO_BIN_EXE_persuasion"))
            .args(args)
            .env("PERSUASION_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(stdout(&out), first, "PERSUASION_WORKERS={workers}");
        let mut flagged = args.to_vec();
        flagged.extend(["--workers", workers]);
        assert_eq!(stdout(&persuasion(&flagged)), first, "--workers {workers}");
    }
    let sweep = [
        "sweep",
        sb.to_str().unwrap(),
        "--param",
        "alpha",
        "--grid",
        "1.2:2:0.4",
        "--horizon",
        "20",
        "--reps",
        "2000",
    ];
    assert_eq!(stdout(&persuasion(&sweep)), stdout(&persuasion(&sweep)));
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let sb = scenario("seller_buyer.json");
    let out = persuasion(&[
        "simulate",
        sb.to_str().unwrap(),
        "--horizon",
        "40",
        "--reps",
        "2000",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(stdout(&out).is_empty());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("t,adoption_estimate,adoption_stderr,period_sender_utility_estimate,period_sender_utility_stderr")
    );
    assert_eq!(text.lines().count(), 41);
    assert!(!text.contains('\r'));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    for key in ["lifetime_plug_in", "lifetime_pathwise", "terminal_adoption"] {
        assert!(summary[key]["mean"].is_number(), "{key}");
    }
    assert!(summary["truncation_bound"].as_f64().unwrap() > 0.0);
    assert!(summary.get("workers").is_none());
}

#[test]
fn numeric_and_string_literals_agree() {
    // Reformatting a scenario with numbers instead of strings gives identical output.
    let dir = tempfile::tempdir().unwrap();
    let numeric = dir.path().join("numeric.json");
    let text = fs::read_to_string(scenario("seller_buyer.json"))
        .unwrap()
        .replace("\"3/10\"", "0.3")
        .replace("\"7/10\"", "0.7");
    fs::write(&numeric, text).unwrap();
    let a = stdout(&persuasion(&[
        "oracle",
        scenario("seller_buyer.json").to_str().unwrap(),
        "--horizon",
        "8",
    ]));
    let b = stdout(&persuasion(&["oracle", numeric.to_str().unwrap(), "--horizon", "8"]));
    assert_eq!(a, b);
}

#[test]
fn solve_classifies_the_shipped_scenarios() {
    for (name, want) in [
        ("seller_buyer.json", "SwitchRisk"),
        ("seller_buyer_full.json", "Persists"),
        ("speed_limit.json", "Persists"),
        ("all_revealing.json", "EventuallyPersists"),
    ] {
        let out = stdout(&persuasion(&["solve", scenario(name).to_str().unwrap()]));
        let report: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(report["verdict"]["classification"], want, "{name}");
    }
    let out = stdout(&persuasion(&["solve", scenario("speed_limit.json").to_str().unwrap()]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["value_exact"], "3/5");
}

#[test]
fn epsilon_grid_endpoints_match_direct_simulation() {
    let common = ["--horizon", "50", "--reps", "5000", "--seed", "3"];
    let sb = scenario("seller_buyer.json");
    let mut args = vec!["sweep", sb.to_str().unwrap(), "--param", "epsilon", "--grid", "0:1:1"];
    args.extend(common);
    let sweep = stdout(&persuasion(&args));
    let rows: Vec<Vec<&str>> = sweep.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for (row, name) in rows.iter().zip(["seller_buyer.json", "seller_buyer_full.json"]) {
        let path = scenario(name);
        let mut args = vec!["simulate", path.to_str().unwrap()];
        args.extend(common);
        let sim = stdout(&persuasion(&args));
        let last: Vec<&str> = sim.lines().last().unwrap().split(',').collect();
        assert_eq!(&row[1..3], &last[1..3], "{name}: adoption");
        assert_eq!(&row[5..7], &last[3..5], "{name}: pathwise utility");
    }
}

#[test]
fn budget_errors_suggest_a_smaller_horizon() {
    let sb = scenario("seller_buyer.json");
    let out = persuasion(&["oracle", sb.to_str().unwrap(), "--horizon", "50", "--budget", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let line = stderr_line(&out);
    assert!(
        line.starts_with("error[budget]") && line.contains("smaller horizon"),
        "{line}"
    );
}

#[test]
fn reserialized_scenarios_simulate_identically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["seller_buyer.json", "three_signal.json"] {
        let original = scenario(name);
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&original).unwrap()).unwrap();
        let copy = dir.path().join(name);
        fs::write(&copy, serde_json::to_string(&value).unwrap()).unwrap();
        let run = |p: &Path| {
            stdout(&persuasion(&[
                "simulate",
                p.to_str().unwrap(),
                "--horizon",
                "40",
                "--reps",
                "2000",
            ]))
        };
        assert_eq!(run(&original), run(&copy), "{name}");
    }
}
