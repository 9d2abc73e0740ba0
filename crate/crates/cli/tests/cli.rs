mod common;

use std::fs;
use std::process::Command;

use common::{mcse, ok, pitch_csv, snapshot};

const SMALL_SIM: &[&str] = &[
    "simulate",
    "--agent",
    "softmax",
    "--sigma",
    "30,60,0.2",
    "--lambda",
    "4",
    "--n",
    "6",
    "--seed",
    "3",
    "--resolution",
    "20",
];

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in [
        "simulate",
        "estimate",
        "experiment",
        "sweep",
        "baseball",
        "plot",
        "validate-config",
    ] {
        assert!(text.contains(cmd), "missing {cmd} in\n{text}");
    }
}

#[test]
fn simulate_then_estimate_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL_SIM);
    for f in ["observations.csv", "states.jsonl", "truth.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let obs = fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 7);
    assert!(obs.starts_with("obs_index,state_id,x,y"));

    let obs_path = dir.path().join("observations.csv");
    let obs_arg = obs_path.to_str().unwrap();
    ok(
        dir.path(),
        &[
            "estimate",
            "--observations",
            obs_arg,
            "--method",
            "mcse",
            "--m",
            "30",
            "--resolution",
            "20",
        ],
    );
    let trace = fs::read_to_string(dir.path().join("mcse-trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7);
    let header = trace.lines().next().unwrap();
    assert!(
        header.contains("jd_if_truth_known") && header.contains("resampled_flag"),
        "{header}"
    );
    // A truth file was found, so every row has a JD.
    assert!(trace.lines().skip(1).all(|l| !l.ends_with(',')));

    let est: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mcse-estimate.json")).unwrap()).unwrap();
    assert!(est["sigma_x"].as_f64().unwrap() > 0.0);
    assert!(est["final_jd"].as_f64().is_some());

    ok(
        dir.path(),
        &[
            "estimate",
            "--observations",
            obs_arg,
            "--no-truth",
            "--method",
            "jeeds",
            "--sigma-levels",
            "5",
            "--lambda-levels",
            "4",
            "--resolution",
            "20",
        ],
    );
    let trace = fs::read_to_string(dir.path().join("jeeds-trace.csv")).unwrap();
    assert!(trace.lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        r#"{"n": 9, "seed": 4, "agent": "rational", "sigma": "50,50,0", "resolution": 20.0}"#,
    )
    .unwrap();
    let cfg_arg = cfg.to_str().unwrap();
    ok(dir.path(), &["simulate", "--config", cfg_arg]);
    let obs = fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 10);
    ok(dir.path(), &["simulate", "--config", cfg_arg, "--n", "4"]);
    let obs = fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 5);

    fs::write(&cfg, r#"{"n": 9, "typo": 1}"#).unwrap();
    assert_eq!(
        mcse(dir.path(), &["simulate", "--config", cfg_arg]).status.code(),
        Some(2)
    );
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_mcse"))
        .args(SMALL_SIM)
        .env("MCSE_OUT_DIR", &target)
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(target.join("observations.csv").exists());
    assert!(!dir.path().join("observations.csv").exists());
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let code = |args: &[&str]| mcse(dir.path(), args).status.code();
    assert_eq!(
        code(&["estimate", "--observations", missing.to_str().unwrap()]),
        Some(3)
    );
    assert_eq!(code(&["simulate", "--sigma", "1,2"]), Some(2));
    assert_eq!(code(&["simulate", "--sigma", "30,30,1.0"]), Some(2));
    assert_eq!(code(&["simulate", "--agent", "juggler"]), Some(2));
    assert_eq!(code(&["no-such-command"]), Some(2));
}

#[test]
fn validate_config_checks_each_kind() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("exp.json");
    fs::write(&good, r#"{"n_observations": 10, "repetitions": 2}"#).unwrap();
    let out = ok(dir.path(), &["validate-config", good.to_str().unwrap()]);
    assert!(!out.stdout.is_empty());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_observations": 0}"#).unwrap();
    assert_eq!(
        mcse(dir.path(), &["validate-config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let filter = dir.path().join("filter.json");
    fs::write(&filter, r#"{"m": 10, "r": 1.5}"#).unwrap();
    let args = ["validate-config", filter.to_str().unwrap(), "--kind", "filter"];
    assert_eq!(mcse(dir.path(), &args).status.code(), Some(2));
}

#[test]
fn baseball_reports_each_pitcher() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pitches.csv");
    fs::write(
        &input,
        pitch_csv(
            &[
                ("111", [0.5, 0.6, 0.1]),
                ("222", [0.7, 0.5, -0.2]),
                ("333", [0.5, 0.5, 0.0]),
            ],
            110,
            1,
        ),
    )
    .unwrap();
    let input_arg = input.to_str().unwrap();
    let args = [
        "baseball",
        "--input",
        input_arg,
        "--m",
        "40",
        "--resolution",
        "0.25",
        "--min-count",
        "100",
    ];
    ok(dir.path(), &args);
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("baseball.json")).unwrap()).unwrap();
    assert_eq!(reports.len(), 3 * 2);
    for r in &reports {
        assert_eq!(r["n_pitches"], 110);
        assert_eq!(r["gv_unit"], "ft^4");
        let p = r["strike_zone_prob"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    let files = snapshot(dir.path());
    assert!(files.keys().any(|k| k.starts_with("ellipses-") && k.ends_with(".svg")));

    let args = ["baseball", "--input", input_arg, "--min-count", "500"];
    assert_eq!(mcse(dir.path(), &args).status.code(), Some(3));
}

#[test]
fn plot_renders_traces() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL_SIM);
    let obs = dir.path().join("observations.csv");
    ok(
        dir.path(),
        &[
            "estimate",
            "--observations",
            obs.to_str().unwrap(),
            "--method",
            "jeeds",
            "--sigma-levels",
            "5",
            "--lambda-levels",
            "4",
            "--resolution",
            "20",
        ],
    );
    let trace = dir.path().join("jeeds-trace.csv");
    ok(
        dir.path(),
        &[
            "plot",
            "--trace",
            trace.to_str().unwrap(),
            "--label",
            "grid",
            "--output",
            "t.svg",
        ],
    );
    let svg = fs::read_to_string(dir.path().join("t.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("data-series=\"grid\""));
    assert_eq!(mcse(dir.path(), &["plot"]).status.code(), Some(2));
}
