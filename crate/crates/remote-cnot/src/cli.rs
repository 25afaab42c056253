//! Command-line front end.
//!
//! Subcommands: `check` (exact process verification), `sample` (Monte Carlo
//! trials vs exact probabilities), `enumerate` (exact branch enumeration of
//! one input), `sweep` (one noise parameter swept, CSV output), `epr-chain`
//! (single-atom-per-node entanglement chain demo).
//!
//! Configuration comes from a flat `key=value` file and/or long flags with
//! the same names; flags win. Every run echoes its full configuration in
//! the JSON output, and parsing that echo reproduces the run exactly.
//! Output is deterministic for a fixed configuration (the `wall_time_s`
//! field is the one exception).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{DeviceError, NoiseModel};
use crate::protocol::{
    share_epr_chain, EprLinkKind, ProtocolConfig, ProtocolError, RunMode,
};
use crate::qstate::{QstateError, RandomSource, StateDump, StateVector};
use crate::verify::{
    attempt_probabilities, basis_input, bell_ancilla_input, enumerate_branches,
    kept_branch_fidelity, process_check_with, random_qubit_input, sampled_vs_exact, CheckOptions,
    VerifyError,
};

/// Post-selected outputs must match the reference gate at least this well,
/// or the binary exits nonzero.
pub const FIDELITY_GATE: f64 = 1.0 - 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("`{key}` out of range: {message}")]
    OutOfRange { key: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    State(#[from] QstateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliMode {
    Check,
    Sample,
    Enumerate,
    Sweep,
    EprChain,
}

impl CliMode {
    fn as_key(self) -> &'static str {
        match self {
            CliMode::Check => "check",
            CliMode::Sample => "sample",
            CliMode::Enumerate => "enumerate",
            CliMode::Sweep => "sweep",
            CliMode::EprChain => "epr-chain",
        }
    }

    fn from_key(s: &str) -> Option<Self> {
        match s {
            "check" => Some(CliMode::Check),
            "sample" => Some(CliMode::Sample),
            "enumerate" => Some(CliMode::Enumerate),
            "sweep" => Some(CliMode::Sweep),
            "epr-chain" => Some(CliMode::EprChain),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSelector {
    Basis(usize),
    Random,
    BellAncilla,
}

impl InputSelector {
    fn as_key(self) -> String {
        match self {
            InputSelector::Basis(k) => format!("basis:{k}"),
            InputSelector::Random => "random".into(),
            InputSelector::BellAncilla => "bell-ancilla".into(),
        }
    }

    fn from_key(s: &str) -> Option<Self> {
        if let Some(rest) = s.strip_prefix("basis:") {
            let k: usize = rest.parse().ok()?;
            if k < 4 {
                return Some(InputSelector::Basis(k));
            }
            return None;
        }
        match s {
            "random" => Some(InputSelector::Random),
            "bell-ancilla" => Some(InputSelector::BellAncilla),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub steps: u32,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: CliMode,
    pub eta_abs: f64,
    pub eta_arg: f64,
    pub zeta_abs: f64,
    pub zeta_arg: f64,
    pub delta: f64,
    pub k_plus_re: f64,
    pub k_plus_im: f64,
    pub k_d_re: f64,
    pub k_d_im: f64,
    pub detector_efficiency: f64,
    pub trials: u64,
    pub seed: u64,
    pub max_retries: u32,
    pub input: InputSelector,
    pub sweep: Option<SweepSpec>,
    pub node_count: usize,
}

impl RunSpec {
    pub fn defaults(mode: CliMode) -> Self {
        Self {
            mode,
            eta_abs: 1.0,
            eta_arg: 0.0,
            zeta_abs: 1.0,
            zeta_arg: 0.0,
            delta: 0.0,
            k_plus_re: 0.0,
            k_plus_im: 0.0,
            k_d_re: 0.0,
            k_d_im: 0.0,
            detector_efficiency: 1.0,
            trials: 10_000,
            seed: 0,
            max_retries: 100,
            input: InputSelector::Basis(2),
            sweep: None,
            node_count: 3,
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel, CliError> {
        Ok(NoiseModel::new(
            Complex64::from_polar(self.eta_abs, self.eta_arg),
            Complex64::from_polar(self.zeta_abs, self.zeta_arg),
            self.delta,
            Complex64::new(self.k_plus_re, self.k_plus_im),
            Complex64::new(self.k_d_re, self.k_d_im),
            self.detector_efficiency,
        )?)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |message: String| CliError::BadValue {
            key: key.to_string(),
            message,
        };
        let parse_f64 = |value: &str| -> Result<f64, CliError> {
            value
                .parse::<f64>()
                .map_err(|e| bad(format!("`{value}` is not a number ({e})")))
        };
        match key {
            "mode" => {
                self.mode = CliMode::from_key(value)
                    .ok_or_else(|| bad(format!("`{value}` is not a mode")))?
            }
            "eta_abs" => self.eta_abs = parse_f64(value)?,
            "eta_arg" => self.eta_arg = parse_f64(value)?,
            "zeta_abs" => self.zeta_abs = parse_f64(value)?,
            "zeta_arg" => self.zeta_arg = parse_f64(value)?,
            "delta" => self.delta = parse_f64(value)?,
            "k_plus_re" => self.k_plus_re = parse_f64(value)?,
            "k_plus_im" => self.k_plus_im = parse_f64(value)?,
            "k_d_re" => self.k_d_re = parse_f64(value)?,
            "k_d_im" => self.k_d_im = parse_f64(value)?,
            "detector_efficiency" => self.detector_efficiency = parse_f64(value)?,
            "trials" => {
                self.trials = value
                    .parse()
                    .map_err(|e| bad(format!("`{value}` is not a count ({e})")))?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|e| bad(format!("`{value}` is not a seed ({e})")))?
            }
            "max_retries" => {
                self.max_retries = value
                    .parse()
                    .map_err(|e| bad(format!("`{value}` is not a count ({e})")))?
            }
            "input" => {
                self.input = InputSelector::from_key(value).ok_or_else(|| {
                    bad(format!(
                        "`{value}` is not an input (basis:0..3 | random | bell-ancilla)"
                    ))
                })?
            }
            "sweep_param" => {
                let sweep = self.sweep.get_or_insert_with(|| SweepSpec {
                    param: String::new(),
                    min: 0.0,
                    max: 0.0,
                    steps: 1,
                });
                sweep.param = value.to_string();
            }
            "sweep_min" => {
                let v = parse_f64(value)?;
                self.sweep
                    .get_or_insert_with(|| SweepSpec {
                        param: String::new(),
                        min: 0.0,
                        max: 0.0,
                        steps: 1,
                    })
                    .min = v;
            }
            "sweep_max" => {
                let v = parse_f64(value)?;
                self.sweep
                    .get_or_insert_with(|| SweepSpec {
                        param: String::new(),
                        min: 0.0,
                        max: 0.0,
                        steps: 1,
                    })
                    .max = v;
            }
            "sweep_steps" => {
                let v: u32 = value
                    .parse()
                    .map_err(|e| bad(format!("`{value}` is not a count ({e})")))?;
                self.sweep
                    .get_or_insert_with(|| SweepSpec {
                        param: String::new(),
                        min: 0.0,
                        max: 0.0,
                        steps: 1,
                    })
                    .steps = v;
            }
            "node_count" => {
                self.node_count = value
                    .parse()
                    .map_err(|e| bad(format!("`{value}` is not a count ({e})")))?
            }
            _ => return Err(CliError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let range = |key: &str, v: f64, lo: f64, hi: f64, lo_open: bool| -> Result<(), CliError> {
            let ok = v <= hi && if lo_open { v > lo } else { v >= lo };
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::OutOfRange {
                    key: key.to_string(),
                    message: format!(
                        "{v} not in {}{lo}, {hi}]",
                        if lo_open { "(" } else { "[" }
                    ),
                })
            }
        };
        range("eta_abs", self.eta_abs, 0.0, 1.0, false)?;
        range("zeta_abs", self.zeta_abs, 0.0, 1.0, false)?;
        range(
            "detector_efficiency",
            self.detector_efficiency,
            0.0,
            1.0,
            true,
        )?;
        if self.trials < 1 {
            return Err(CliError::OutOfRange {
                key: "trials".into(),
                message: "need at least 1".into(),
            });
        }
        if self.max_retries < 1 {
            return Err(CliError::OutOfRange {
                key: "max_retries".into(),
                message: "need at least 1".into(),
            });
        }
        if let Some(sweep) = &self.sweep {
            if sweep.param.is_empty() {
                return Err(CliError::Usage(
                    "sweep requested without sweep_param".into(),
                ));
            }
            if sweep.steps < 1 {
                return Err(CliError::OutOfRange {
                    key: "sweep_steps".into(),
                    message: "need at least 1".into(),
                });
            }
        }
        Ok(())
    }

    /// Canonical `key=value` echo; parsing it reproduces this spec exactly.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("mode", self.mode.as_key().to_string());
        put("eta_abs", format!("{}", self.eta_abs));
        put("eta_arg", format!("{}", self.eta_arg));
        put("zeta_abs", format!("{}", self.zeta_abs));
        put("zeta_arg", format!("{}", self.zeta_arg));
        put("delta", format!("{}", self.delta));
        put("k_plus_re", format!("{}", self.k_plus_re));
        put("k_plus_im", format!("{}", self.k_plus_im));
        put("k_d_re", format!("{}", self.k_d_re));
        put("k_d_im", format!("{}", self.k_d_im));
        put(
            "detector_efficiency",
            format!("{}", self.detector_efficiency),
        );
        put("trials", format!("{}", self.trials));
        put("seed", format!("{}", self.seed));
        put("max_retries", format!("{}", self.max_retries));
        put("input", self.input.as_key());
        put("node_count", format!("{}", self.node_count));
        if let Some(sweep) = &self.sweep {
            put("sweep_param", sweep.param.clone());
            put("sweep_min", format!("{}", sweep.min));
            put("sweep_max", format!("{}", sweep.max));
            put("sweep_steps", format!("{}", sweep.steps));
        }
        map
    }
}

/// Parse a flat `key=value` config file ('#' comments and blank lines
/// allowed), then apply flag overrides on top.
pub fn parse_config(
    mode: CliMode,
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunSpec, CliError> {
    let mut spec = RunSpec::defaults(mode);
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::BadValue {
                key: format!("line {}", lineno + 1),
                message: format!("`{line}` is not key=value"),
            })?;
            spec.apply(key.trim(), value.trim())?;
        }
    }
    spec.mode = mode; // the subcommand wins over a mode= line
    for (key, value) in overrides {
        spec.apply(key, value)?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Parse a previously emitted config echo.
pub fn parse_echo(echo: &BTreeMap<String, String>) -> Result<RunSpec, CliError> {
    let mode = echo
        .get("mode")
        .and_then(|m| CliMode::from_key(m))
        .ok_or_else(|| CliError::Usage("echo lacks a mode".into()))?;
    let mut spec = RunSpec::defaults(mode);
    for (key, value) in echo {
        spec.apply(key, value)?;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkFidelity {
    pub control_node: usize,
    pub partner_node: usize,
    pub kind: String,
    pub fidelity: f64,
}

/// One JSON record per run. Deterministic for a fixed config except for
/// `wall_time_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub config: BTreeMap<String, String>,
    pub success_probability: f64,
    pub mean_attempts: f64,
    pub worst_fidelity: f64,
    pub detector_record_spread: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_scores: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_fidelities: Option<Vec<LinkFidelity>>,
    pub wall_time_s: f64,
}

fn build_input(spec: &RunSpec) -> StateVector {
    match spec.input {
        InputSelector::Basis(k) => basis_input(k / 2, k % 2),
        // dedicated stream, far away from the per-trial streams
        InputSelector::Random => {
            random_qubit_input(&mut RandomSource::with_stream(spec.seed, 1_000_003))
        }
        InputSelector::BellAncilla => bell_ancilla_input(),
    }
}

pub struct CmdOutput {
    pub record: Option<OutputRecord>,
    pub csv: Option<String>,
    pub dump: Option<StateDump>,
    pub exit_code: i32,
}

/// Exact process verification; exit 0 iff the worst post-selected fidelity
/// meets the gate. `corrupt` is the negative-control hook.
pub fn cmd_check(spec: &RunSpec, corrupt: bool) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let noise = spec.noise_model()?;
    let report = process_check_with(
        &noise,
        &CheckOptions {
            corrupt_extraction: corrupt,
            ..CheckOptions::default()
        },
    )?;
    let ok = report.worst_fidelity >= FIDELITY_GATE;
    let record = OutputRecord {
        config: spec.echo(),
        success_probability: report.success_probability,
        mean_attempts: 1.0 / report.success_probability,
        worst_fidelity: report.worst_fidelity,
        detector_record_spread: report.detector_record_spread,
        z_scores: None,
        link_fidelities: None,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CmdOutput {
        dump: report.basis_images.first().cloned(),
        record: Some(record),
        csv: None,
        exit_code: if ok { 0 } else { 1 },
    })
}

/// Monte Carlo trials against the exact enumeration.
pub fn cmd_sample(spec: &RunSpec) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let noise = spec.noise_model()?;
    let input = build_input(spec);
    let report = sampled_vs_exact(&input, &noise, spec.trials, spec.seed)?;
    let branches = enumerate_branches(&input, &noise)?;
    let exact = attempt_probabilities(&branches);
    let spread = kept_branch_fidelity(&input, &branches)?.spread;

    let mut z_scores = BTreeMap::new();
    for c in &report.categories {
        z_scores.insert(c.name.clone(), c.z);
    }
    z_scores.insert("attempts_mean".into(), report.attempts_z);

    let ok = report.worst_fidelity >= FIDELITY_GATE;
    let record = OutputRecord {
        config: spec.echo(),
        success_probability: exact.success,
        mean_attempts: report.mean_attempts,
        worst_fidelity: report.worst_fidelity,
        detector_record_spread: spread,
        z_scores: Some(z_scores),
        link_fidelities: None,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let dump = branches
        .iter()
        .find(|b| b.outcome == crate::protocol::AttemptOutcome::Success)
        .map(|b| b.conditional_state.dump());
    Ok(CmdOutput {
        record: Some(record),
        csv: None,
        dump,
        exit_code: if ok { 0 } else { 1 },
    })
}

/// Exact branch enumeration of one input.
pub fn cmd_enumerate(spec: &RunSpec) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let noise = spec.noise_model()?;
    let input = build_input(spec);
    let branches = enumerate_branches(&input, &noise)?;
    let exact = attempt_probabilities(&branches);
    let kept = kept_branch_fidelity(&input, &branches)?;

    let ok = kept.worst >= FIDELITY_GATE;
    let record = OutputRecord {
        config: spec.echo(),
        success_probability: exact.success,
        mean_attempts: if exact.success > 0.0 {
            1.0 / exact.success
        } else {
            f64::INFINITY
        },
        worst_fidelity: kept.worst,
        detector_record_spread: kept.spread,
        z_scores: None,
        link_fidelities: None,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let dump = branches
        .iter()
        .find(|b| b.outcome == crate::protocol::AttemptOutcome::Success)
        .map(|b| b.conditional_state.dump());
    Ok(CmdOutput {
        record: Some(record),
        csv: None,
        dump,
        exit_code: if ok { 0 } else { 1 },
    })
}

/// Set one noise parameter of a spec by its config key.
fn with_param(spec: &RunSpec, name: &str, value: f64) -> Result<RunSpec, CliError> {
    let mut out = spec.clone();
    match name {
        "eta_abs" => out.eta_abs = value,
        "eta_arg" => out.eta_arg = value,
        "zeta_abs" => out.zeta_abs = value,
        "zeta_arg" => out.zeta_arg = value,
        "delta" => out.delta = value,
        "k_plus_re" => out.k_plus_re = value,
        "k_plus_im" => out.k_plus_im = value,
        "k_d_re" => out.k_d_re = value,
        "k_d_im" => out.k_d_im = value,
        "detector_efficiency" => out.detector_efficiency = value,
        _ => {
            return Err(CliError::Usage(format!(
                "sweep over unknown parameter `{name}`"
            )))
        }
    }
    out.validate()?;
    Ok(out)
}

/// Sweep one noise parameter; one CSV row per point.
pub fn cmd_sweep(spec: &RunSpec) -> Result<CmdOutput, CliError> {
    let sweep = spec
        .sweep
        .clone()
        .ok_or_else(|| CliError::Usage("sweep mode needs a sweep axis".into()))?;
    let mut csv = String::from("value,success_probability,mean_attempts,worst_fidelity\n");
    let mut all_ok = true;
    for k in 0..sweep.steps {
        let value = if sweep.steps == 1 {
            sweep.min
        } else {
            sweep.min + (sweep.max - sweep.min) * k as f64 / (sweep.steps - 1) as f64
        };
        let point = with_param(spec, &sweep.param, value)?;
        let noise = point.noise_model()?;
        let report = process_check_with(&noise, &CheckOptions::default())?;
        all_ok &= report.worst_fidelity >= FIDELITY_GATE;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            value,
            report.success_probability,
            1.0 / report.success_probability,
            report.worst_fidelity
        ));
    }
    Ok(CmdOutput {
        record: None,
        csv: Some(csv),
        dump: None,
        exit_code: if all_ok { 0 } else { 1 },
    })
}

/// Entanglement chain demo; exact (enumerated) per-link statistics.
pub fn cmd_epr_chain(spec: &RunSpec) -> Result<CmdOutput, CliError> {
    if spec.node_count < 3 {
        return Err(CliError::Usage(format!(
            "epr-chain needs node_count >= 3, got {}",
            spec.node_count
        )));
    }
    let started = Instant::now();
    let config = ProtocolConfig {
        noise: spec.noise_model()?,
        max_retries: spec.max_retries,
        mode: RunMode::Enumerate,
        include_ancilla: true,
    };
    let report = share_epr_chain(spec.node_count, &config)?;
    let links: Vec<LinkFidelity> = report
        .links
        .iter()
        .map(|l| LinkFidelity {
            control_node: l.control_node,
            partner_node: l.partner_node,
            kind: match l.kind {
                EprLinkKind::Horizontal => "horizontal".into(),
                EprLinkKind::Vertical => "vertical".into(),
            },
            fidelity: l.fidelity,
        })
        .collect();
    let worst = links.iter().map(|l| l.fidelity).fold(1.0, f64::min);
    let p = report.success_probability.unwrap_or(f64::NAN);
    // expected total attempts: one geometric retry loop per link
    let mean_attempts = report
        .links
        .iter()
        .map(|l| 1.0 / l.success_probability.unwrap_or(f64::NAN))
        .sum();
    let record = OutputRecord {
        config: spec.echo(),
        success_probability: p,
        mean_attempts,
        worst_fidelity: worst,
        detector_record_spread: 0.0,
        z_scores: None,
        link_fidelities: Some(links),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CmdOutput {
        dump: Some(report.state.dump()),
        record: Some(record),
        csv: None,
        exit_code: if worst >= FIDELITY_GATE { 0 } else { 1 },
    })
}

#[derive(Parser, Debug)]
#[command(
    name = "remote-cnot",
    about = "Heralded remote CNOT between two atoms over noisy photon channels: \
             exact oracle, Monte Carlo sampler, parameter sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact process verification over basis, random and entangled inputs.
    Check(CommonArgs),
    /// Monte Carlo trials compared against exact branch probabilities.
    Sample(CommonArgs),
    /// Exact branch enumeration for a single input.
    Enumerate(CommonArgs),
    /// Sweep one noise parameter and emit CSV.
    Sweep(CommonArgs),
    /// Entanglement-distribution chain with one atom per node.
    EprChain(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// key=value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eta_abs: Option<f64>,
    #[arg(long)]
    eta_arg: Option<f64>,
    #[arg(long)]
    zeta_abs: Option<f64>,
    #[arg(long)]
    zeta_arg: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    k_plus_re: Option<f64>,
    #[arg(long)]
    k_plus_im: Option<f64>,
    #[arg(long)]
    k_d_re: Option<f64>,
    #[arg(long)]
    k_d_im: Option<f64>,
    #[arg(long)]
    detector_efficiency: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Input selector: basis:0..3 | random | bell-ancilla.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    sweep_param: Option<String>,
    #[arg(long)]
    sweep_min: Option<f64>,
    #[arg(long)]
    sweep_max: Option<f64>,
    #[arg(long)]
    sweep_steps: Option<u32>,
    #[arg(long)]
    node_count: Option<usize>,
    /// Write the representative final state as JSON to this path.
    #[arg(long)]
    dump_state: Option<PathBuf>,
    /// Write CSV output here instead of stdout (sweep mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Negative-control hook: sabotage the extraction table; check must
    /// exit nonzero.
    #[arg(long, hide = true)]
    corrupt_extraction: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push_f64 = |key: &str, v: &Option<f64>| {
            if let Some(v) = v {
                out.push((key.to_string(), format!("{v}")));
            }
        };
        push_f64("eta_abs", &self.eta_abs);
        push_f64("eta_arg", &self.eta_arg);
        push_f64("zeta_abs", &self.zeta_abs);
        push_f64("zeta_arg", &self.zeta_arg);
        push_f64("delta", &self.delta);
        push_f64("k_plus_re", &self.k_plus_re);
        push_f64("k_plus_im", &self.k_plus_im);
        push_f64("k_d_re", &self.k_d_re);
        push_f64("k_d_im", &self.k_d_im);
        push_f64("detector_efficiency", &self.detector_efficiency);
        if let Some(v) = self.trials {
            out.push(("trials".into(), v.to_string()));
        }
        if let Some(v) = self.seed {
            out.push(("seed".into(), v.to_string()));
        }
        if let Some(v) = self.max_retries {
            out.push(("max_retries".into(), v.to_string()));
        }
        if let Some(v) = &self.input {
            out.push(("input".into(), v.clone()));
        }
        if let Some(v) = &self.sweep_param {
            out.push(("sweep_param".into(), v.clone()));
        }
        if let Some(v) = self.sweep_min {
            out.push(("sweep_min".into(), format!("{v}")));
        }
        if let Some(v) = self.sweep_max {
            out.push(("sweep_max".into(), format!("{v}")));
        }
        if let Some(v) = self.sweep_steps {
            out.push(("sweep_steps".into(), v.to_string()));
        }
        if let Some(v) = self.node_count {
            out.push(("node_count".into(), v.to_string()));
        }
        out
    }
}

fn execute(mode: CliMode, args: &CommonArgs) -> Result<CmdOutput, CliError> {
    let spec = parse_config(mode, args.config.as_deref(), &args.overrides())?;
    match mode {
        CliMode::Check => cmd_check(&spec, args.corrupt_extraction),
        CliMode::Sample => cmd_sample(&spec),
        CliMode::Enumerate => cmd_enumerate(&spec),
        CliMode::Sweep => cmd_sweep(&spec),
        CliMode::EprChain => cmd_epr_chain(&spec),
    }
}

/// Entry point used by the binary. Exit codes: 0 success, 1 the
/// fidelity contract failed, 2 usage or configuration error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (mode, args) = match &cli.command {
        Command::Check(a) => (CliMode::Check, a),
        Command::Sample(a) => (CliMode::Sample, a),
        Command::Enumerate(a) => (CliMode::Enumerate, a),
        Command::Sweep(a) => (CliMode::Sweep, a),
        Command::EprChain(a) => (CliMode::EprChain, a),
    };
    match execute(mode, args) {
        Ok(output) => {
            if let Some(record) = &output.record {
                println!(
                    "{}",
                    serde_json::to_string_pretty(record).expect("record serializes")
                );
            }
            if let Some(csv) = &output.csv {
                match &args.out {
                    Some(path) => {
                        if let Err(e) = std::fs::write(path, csv) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return 2;
                        }
                    }
                    None => {
                        print!("{csv}");
                        let _ = std::io::stdout().flush();
                    }
                }
            }
            if let (Some(path), Some(dump)) = (&args.dump_state, &output.dump) {
                let json = serde_json::to_string_pretty(dump).expect("dump serializes");
                if let Err(e) = std::fs::write(path, json) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 2;
                }
            }
            output.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Verify(_) | CliError::Protocol(_) => 1,
                _ => 2,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_ideal() {
        let spec = parse_config(CliMode::Check, None, &[]).unwrap();
        let noise = spec.noise_model().unwrap();
        assert_eq!(noise, NoiseModel::ideal());
        assert_eq!(spec.trials, 10_000);
        assert_eq!(spec.seed, 0);
        assert_eq!(spec.max_retries, 100);
    }

    #[test]
    fn out_of_range_magnitude_names_the_key() {
        let err = parse_config(
            CliMode::Check,
            None,
            &[("eta_abs".into(), "1.2".into())],
        )
        .unwrap_err();
        match err {
            CliError::OutOfRange { key, .. } => assert_eq!(key, "eta_abs"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_reported() {
        let err = parse_config(CliMode::Check, None, &[("bogus".into(), "1".into())]).unwrap_err();
        assert!(matches!(err, CliError::UnknownKey(k) if k == "bogus"));
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("remote-cnot-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.txt");
        std::fs::write(&path, "# comment\ndelta = 0.3\nseed=4\n").unwrap();
        let spec = parse_config(
            CliMode::Sample,
            Some(&path),
            &[("delta".into(), "0.5".into())],
        )
        .unwrap();
        assert_eq!(spec.delta, 0.5);
        assert_eq!(spec.seed, 4);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn echo_round_trips() {
        let mut spec = RunSpec::defaults(CliMode::Sweep);
        spec.eta_abs = 0.7;
        spec.eta_arg = -0.3;
        spec.k_plus_im = 0.125;
        spec.trials = 777;
        spec.input = InputSelector::BellAncilla;
        spec.sweep = Some(SweepSpec {
            param: "k_d_re".into(),
            min: 0.0,
            max: 0.5,
            steps: 6,
        });
        let parsed = parse_echo(&spec.echo()).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn bad_number_is_reported_with_key() {
        let err = parse_config(
            CliMode::Check,
            None,
            &[("delta".into(), "fast".into())],
        )
        .unwrap_err();
        assert!(matches!(err, CliError::BadValue { key, .. } if key == "delta"));
    }
}
