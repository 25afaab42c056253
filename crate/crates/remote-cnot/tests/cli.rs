//! CLI-level integration tests: command behavior, exit codes, output
//! determinism, and a couple of smoke tests against the real binary.

use std::collections::BTreeMap;
use std::process::Command;

use remote_cnot::cli::{
    cmd_check, cmd_enumerate, cmd_epr_chain, cmd_sample, cmd_sweep, parse_config, parse_echo,
    CliError, CliMode, RunSpec, SweepSpec,
};

fn spec(mode: CliMode, overrides: &[(&str, &str)]) -> RunSpec {
    let pairs: Vec<(String, String)> = overrides
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    parse_config(mode, None, &pairs).unwrap()
}

#[test]
fn check_passes_on_ideal_noise() {
    let out = cmd_check(&spec(CliMode::Check, &[]), false).unwrap();
    assert_eq!(out.exit_code, 0);
    let record = out.record.unwrap();
    assert!((record.success_probability - 1.0).abs() < 1e-12);
    assert!(record.worst_fidelity >= 1.0 - 1e-10);
}

#[test]
fn check_passes_on_noisy_parameters_with_reduced_success() {
    let out = cmd_check(
        &spec(
            CliMode::Check,
            &[
                ("eta_abs", "0.9"),
                ("zeta_abs", "0.8"),
                ("delta", "0.3"),
                ("k_plus_re", "0.1"),
                ("k_d_re", "0.2"),
            ],
        ),
        false,
    )
    .unwrap();
    assert_eq!(out.exit_code, 0);
    let record = out.record.unwrap();
    assert!(record.success_probability < 1.0);
    assert!(record.worst_fidelity >= 1.0 - 1e-10);
}

#[test]
fn corrupted_extraction_fails_the_check() {
    let out = cmd_check(&spec(CliMode::Check, &[]), true).unwrap();
    assert_eq!(out.exit_code, 1);
    assert!(out.record.unwrap().worst_fidelity < 1.0 - 1e-10);
}

#[test]
fn single_point_sweep_matches_check() {
    let mut s = spec(CliMode::Sweep, &[("eta_abs", "0.9"), ("k_d_im", "0.2")]);
    s.sweep = Some(SweepSpec {
        param: "eta_abs".into(),
        min: 0.9,
        max: 0.9,
        steps: 1,
    });
    let sweep_out = cmd_sweep(&s).unwrap();
    let csv = sweep_out.csv.unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "value,success_probability,mean_attempts,worst_fidelity"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let check_out = cmd_check(&spec(CliMode::Check, &[("eta_abs", "0.9"), ("k_d_im", "0.2")]), false)
        .unwrap();
    let record = check_out.record.unwrap();
    assert_eq!(row[0].parse::<f64>().unwrap(), 0.9);
    assert_eq!(row[1].parse::<f64>().unwrap(), record.success_probability);
    assert_eq!(row[3].parse::<f64>().unwrap(), record.worst_fidelity);
}

#[test]
fn k_d_sweep_is_monotone_with_perfect_fidelity() {
    let mut s = spec(CliMode::Sweep, &[]);
    s.sweep = Some(SweepSpec {
        param: "k_d_re".into(),
        min: 0.0,
        max: 0.5,
        steps: 6,
    });
    let out = cmd_sweep(&s).unwrap();
    assert_eq!(out.exit_code, 0);
    let csv = out.csv.unwrap();
    let mut prev = f64::INFINITY;
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[1] <= prev + 1e-12, "success probability not monotone");
        prev = cols[1];
        assert!((cols[3] - 1.0).abs() <= 1e-10, "fidelity broke during sweep");
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn sweep_over_unknown_parameter_is_a_usage_error() {
    let mut s = spec(CliMode::Sweep, &[]);
    s.sweep = Some(SweepSpec {
        param: "bogus".into(),
        min: 0.0,
        max: 1.0,
        steps: 2,
    });
    assert!(matches!(cmd_sweep(&s), Err(CliError::Usage(_))));
}

#[test]
fn sample_mode_reports_z_scores_and_passes() {
    let out = cmd_sample(&spec(
        CliMode::Sample,
        &[
            ("trials", "2000"),
            ("seed", "12"),
            ("eta_abs", "0.85"),
            ("k_d_re", "0.25"),
            ("input", "basis:3"),
        ],
    ))
    .unwrap();
    assert_eq!(out.exit_code, 0);
    let record = out.record.unwrap();
    let z = record.z_scores.unwrap();
    assert!(z.contains_key("success"));
    assert!(z.contains_key("attempts_mean"));
    assert!(z.values().all(|v| v.abs() <= 4.0));
    assert!(record.worst_fidelity >= 1.0 - 1e-10);
}

#[test]
fn enumerate_mode_reports_exact_statistics() {
    let out = cmd_enumerate(&spec(
        CliMode::Enumerate,
        &[("k_d_re", "0.3"), ("input", "bell-ancilla")],
    ))
    .unwrap();
    assert_eq!(out.exit_code, 0);
    let record = out.record.unwrap();
    // pure transfer leak: success probability 1/(1+|k_d|^2)
    assert!((record.success_probability - 1.0 / 1.09).abs() < 1e-12);
    assert!(record.worst_fidelity >= 1.0 - 1e-10);
    assert!(out.dump.is_some());
}

#[test]
fn output_is_deterministic_up_to_wall_time() {
    let run = || {
        let out = cmd_sample(&spec(
            CliMode::Sample,
            &[("trials", "500"), ("seed", "3"), ("eta_abs", "0.9")],
        ))
        .unwrap();
        let mut v = serde_json::to_value(out.record.unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_s");
        serde_json::to_string_pretty(&v).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn echo_in_output_reproduces_the_spec() {
    let s = spec(
        CliMode::Sample,
        &[("trials", "100"), ("delta", "0.7"), ("input", "random")],
    );
    let out = cmd_sample(&s).unwrap();
    let echo: BTreeMap<String, String> = out.record.unwrap().config;
    let reparsed = parse_echo(&echo).unwrap();
    assert_eq!(reparsed, s);
}

#[test]
fn epr_chain_passes_and_rejects_short_chains() {
    let out = cmd_epr_chain(&spec(CliMode::EprChain, &[("node_count", "3")])).unwrap();
    assert_eq!(out.exit_code, 0);
    let record = out.record.unwrap();
    let links = record.link_fidelities.unwrap();
    assert_eq!(links.len(), 2);
    assert!(links.iter().any(|l| l.kind == "horizontal"));
    assert!(links.iter().any(|l| l.kind == "vertical"));
    for l in &links {
        assert!(l.fidelity >= 1.0 - 1e-10);
    }

    let mut short = spec(CliMode::EprChain, &[]);
    short.node_count = 2;
    assert!(matches!(cmd_epr_chain(&short), Err(CliError::Usage(_))));
}

// Smoke tests against the real binary.

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_remote-cnot"))
}

#[test]
fn binary_check_exits_zero_and_emits_json() {
    let out = binary().arg("check").output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["success_probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["config"]["mode"], serde_json::json!("check"));
}

#[test]
fn binary_usage_errors_exit_two() {
    let out = binary()
        .args(["sweep", "--sweep-param", "bogus", "--sweep-min", "0", "--sweep-max", "1", "--sweep-steps", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = binary()
        .args(["check", "--eta-abs", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta_abs"));
}

#[test]
fn binary_corrupt_extraction_exits_one() {
    let out = binary()
        .args(["check", "--corrupt-extraction"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn binary_dump_state_writes_restorable_json() {
    let dir = std::env::temp_dir().join(format!("remote-cnot-dump-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("state.json");
    let out = binary()
        .args(["enumerate", "--input", "basis:2"])
        .arg("--dump-state")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let dump: remote_cnot::qstate::StateDump =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let state = dump.restore().unwrap();
    // CNOT image of basis:2 = |a1>|d0> is |a1>|d1>
    let expected = remote_cnot::verify::basis_input(1, 1);
    assert!(
        (remote_cnot::qstate::fidelity(&state, &expected).unwrap() - 1.0).abs() < 1e-10
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn binary_sweep_csv_to_stdout() {
    let out = binary()
        .args([
            "sweep",
            "--sweep-param",
            "zeta_abs",
            "--sweep-min",
            "0.5",
            "--sweep-max",
            "1.0",
            "--sweep-steps",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("value,success_probability,mean_attempts,worst_fidelity\n"));
    assert_eq!(text.lines().count(), 4);
}
