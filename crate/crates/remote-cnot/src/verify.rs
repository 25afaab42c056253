//! Independent verification oracles.
//!
//! [`ideal_cnot`] applies the target gate as a bare index permutation, with
//! no shared machinery with the protocol. [`enumerate_branches`] propagates
//! exact amplitudes through every measurement fork of a single attempt.
//! [`process_check`] combines the two over a battery of inputs (basis
//! states, random superpositions, an entangled-ancilla input) and reports
//! the worst post-selected fidelity; [`sampled_vs_exact`] cross-checks the
//! Monte Carlo sampler against the enumerated probabilities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{DetectorPort, NoiseModel};
use crate::linalg::{C0, C1};
use crate::protocol::{
    standard_layout, AttemptBranch, AttemptEvent, AttemptOutcome, Protocol, ProtocolError,
};
use crate::qstate::{
    attach_ancilla, fidelity, AncillaTable, QstateError, RandomSource, StateDump, StateVector,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    State(#[from] QstateError),
    #[error("input has weight {0:.3e} outside the (a, d) gate subspace")]
    Precondition(f64),
}

const GATE_TOL: f64 = 1e-9;

/// The reference gate: interchange the target atom's Zeeman amplitudes
/// exactly where the control atom sits in `|a_1>`. Identity on the photon
/// and on any ancilla subsystems. Applied as a bare index permutation.
pub fn ideal_cnot(input: &StateVector) -> Result<StateVector, VerifyError> {
    let layout = input.layout().clone();
    let alpha = layout.position("alpha")?;
    let beta = layout.position("beta")?;
    let stray = input.subsystem_weight("alpha", |k| k > 1)?
        + input.subsystem_weight("beta", |k| k > 1)?;
    if stray > GATE_TOL {
        return Err(VerifyError::Precondition(stray));
    }
    let beta_stride = layout.stride_at(beta);
    let mut out = vec![C0; input.amplitudes().len()];
    for (flat, a) in input.amplitudes().iter().enumerate() {
        if *a == C0 {
            continue;
        }
        let alpha_idx = layout.index_at(flat, alpha);
        let beta_idx = layout.index_at(flat, beta);
        let target = if alpha_idx == 1 && beta_idx < 2 {
            // control |a_1>, target in level d: flip the target Zeeman index
            if beta_idx == 0 {
                flat + beta_stride
            } else {
                flat - beta_stride
            }
        } else {
            flat
        };
        out[target] = *a;
    }
    Ok(StateVector::from_amplitudes(&layout, out)?)
}

fn level_image(
    input: &StateVector,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<StateVector, VerifyError> {
    let layout = input.layout().clone();
    let alpha = layout.position("alpha")?;
    let beta = layout.position("beta")?;
    let stray = input.subsystem_weight("alpha", |k| k > 1)?
        + input.subsystem_weight("beta", |k| k > 1)?;
    if stray > GATE_TOL {
        return Err(VerifyError::Precondition(stray));
    }
    let a_stride = layout.stride_at(alpha);
    let b_stride = layout.stride_at(beta);
    let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut out = vec![C0; input.amplitudes().len()];
    for (flat, a) in input.amplitudes().iter().enumerate() {
        if *a == C0 {
            continue;
        }
        for (la, lb) in [first, second] {
            out[flat + 2 * la * a_stride + 2 * lb * b_stride] += w * a;
        }
    }
    Ok(StateVector::from_amplitudes(&layout, out)?)
}

/// The ideal intermediate after the first transmission:
/// `|a_i>|d_j> -> (|a_i>|d_j> + |b_i>|e_j>)/sqrt 2`, built directly from the
/// input amplitudes.
pub fn post_t1_image(input: &StateVector) -> Result<StateVector, VerifyError> {
    level_image(input, (0, 0), (1, 1))
}

/// The ideal level-entangled state after both transmissions and
/// post-selection: `|a_i>|d_j> -> (|b_i>|e_j> + |a_i>|f_j>)/sqrt 2`.
pub fn entangled_image(input: &StateVector) -> Result<StateVector, VerifyError> {
    level_image(input, (1, 1), (0, 2))
}

/// Hand-expanded post-click amplitudes of one noisy transmission applied to
/// a pure `|b_i>|d_j>` component, up to overall normalization: the
/// transferred amplitude (target in e) and the left-behind amplitude
/// (target still in d). Uses the effective couplings
/// `eta~ = eta/sqrt(1+|k+|^2)`, `zeta~ = zeta/(sqrt(1+|k+|^2) sqrt(1+|kd|^2))`
/// that the normalized scattering convention introduces; the detector
/// record flips the sign of the erroneous `k_plus` term only.
pub fn expected_noisy_t1_amplitudes(
    noise: &NoiseModel,
    port: DetectorPort,
) -> (Complex64, Complex64) {
    let n_plus = (1.0 + noise.k_plus.norm_sqr()).sqrt();
    let n_d = (1.0 + noise.k_d.norm_sqr()).sqrt();
    let zeta_eff = noise.zeta / (n_plus * n_d);
    let eta_eff = noise.eta / n_plus;
    let phase = Complex64::from_polar(1.0, -noise.delta);
    let sign = match port {
        DetectorPort::D1 => -1.0,
        DetectorPort::D2 => 1.0,
    };
    let transferred = zeta_eff * phase;
    let left_behind = zeta_eff * noise.k_d * phase + sign * eta_eff * noise.k_plus;
    (transferred, left_behind)
}

/// One measurement-outcome path with its exact probability and conditional
/// state.
#[derive(Debug, Clone)]
pub struct BranchRecord {
    pub events: Vec<AttemptEvent>,
    pub probability: f64,
    pub conditional_state: StateVector,
    pub outcome: AttemptOutcome,
}

impl From<AttemptBranch> for BranchRecord {
    fn from(b: AttemptBranch) -> Self {
        Self {
            events: b.events,
            probability: b.probability,
            conditional_state: b.state,
            outcome: b.outcome,
        }
    }
}

/// Exact amplitude propagation through every measurement fork of a single
/// attempt. No random sampling; branch probabilities over a complete
/// enumeration sum to one.
pub fn enumerate_branches(
    input: &StateVector,
    noise: &NoiseModel,
) -> Result<Vec<BranchRecord>, VerifyError> {
    let protocol = Protocol::with_default_registers(noise.clone())?;
    Ok(protocol
        .enumerate_attempt(input)?
        .into_iter()
        .map(BranchRecord::from)
        .collect())
}

/// Per-attempt outcome probabilities extracted from an enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptProbabilities {
    pub success: f64,
    pub loss_t1: f64,
    pub loss_t2: f64,
    pub beta_in_d: f64,
    /// Unconditional probability that the first transmission clicks D1.
    pub t1_click_d1: f64,
    /// Unconditional probability that the second transmission clicks D1.
    pub t2_click_d1: f64,
}

pub fn attempt_probabilities(branches: &[BranchRecord]) -> AttemptProbabilities {
    let mut p = AttemptProbabilities {
        success: 0.0,
        loss_t1: 0.0,
        loss_t2: 0.0,
        beta_in_d: 0.0,
        t1_click_d1: 0.0,
        t2_click_d1: 0.0,
    };
    for b in branches {
        match b.outcome {
            AttemptOutcome::Success => p.success += b.probability,
            AttemptOutcome::LossT1 => p.loss_t1 += b.probability,
            AttemptOutcome::LossT2 => p.loss_t2 += b.probability,
            AttemptOutcome::BetaFoundInD => p.beta_in_d += b.probability,
        }
        for ev in &b.events {
            match ev {
                AttemptEvent::Click {
                    transmission: 1,
                    detector: DetectorPort::D1,
                } => p.t1_click_d1 += b.probability,
                AttemptEvent::Click {
                    transmission: 2,
                    detector: DetectorPort::D1,
                } => p.t2_click_d1 += b.probability,
                _ => {}
            }
        }
    }
    p
}

/// Basis input `|a_i>|d_j>` on the standard layout.
pub fn basis_input(i: usize, j: usize) -> StateVector {
    StateVector::basis_state(&standard_layout(), &[i, j, 0]).expect("qubit indices in range")
}

/// Random normalized superposition over the four gate basis states.
pub fn random_qubit_input(rng: &mut RandomSource) -> StateVector {
    let layout = standard_layout();
    let mut amps = vec![C0; layout.total_dim()];
    let mut norm = 0.0;
    let mut coeffs = [C0; 4];
    for c in &mut coeffs {
        *c = Complex64::new(rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0);
        norm += c.norm_sqr();
    }
    let scale = 1.0 / norm.sqrt();
    for (k, c) in coeffs.iter().enumerate() {
        let (i, j) = (k / 2, k % 2);
        amps[layout.flat_index(&[i, j, 0]).unwrap()] = c * scale;
    }
    StateVector::from_amplitudes(&layout, amps).expect("finite amplitudes")
}

/// Control qubit maximally entangled with an external ancilla qubit:
/// `(|a_0>|0> + |a_1>|1>)/sqrt 2`, target in `|d_0>`.
pub fn bell_ancilla_input() -> StateVector {
    let layout = standard_layout();
    let plus = {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut amps = vec![C0; layout.total_dim()];
        amps[layout.flat_index(&[0, 0, 0]).unwrap()] = h;
        amps[layout.flat_index(&[1, 0, 0]).unwrap()] = h;
        StateVector::from_amplitudes(&layout, amps).unwrap()
    };
    let alpha_pos = layout.position("alpha").unwrap();
    let rows: Vec<Vec<Complex64>> = (0..layout.total_dim())
        .map(|flat| {
            let z = layout.index_at(flat, alpha_pos) % 2;
            let mut row = vec![C0; 2];
            row[z] = C1;
            row
        })
        .collect();
    attach_ancilla(&plus, &[("ancilla", 2)], &AncillaTable::PerIndex(rows))
        .expect("well-formed ancilla table")
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub random_inputs: usize,
    pub seed: u64,
    pub corrupt_extraction: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            random_inputs: 8,
            seed: 7,
            corrupt_extraction: false,
        }
    }
}

/// Summary of an exact process verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessReport {
    /// Post-selected output states for the four basis inputs.
    pub basis_images: Vec<StateDump>,
    /// Minimum post-selected fidelity against the reference gate over all
    /// inputs and all success branches.
    pub worst_fidelity: f64,
    /// Exact per-attempt success probability (input-independent).
    pub success_probability: f64,
    /// Largest fidelity deficit between any two success branches of one
    /// input - how much the detector records leak into the output.
    pub detector_record_spread: f64,
}

/// Enumerate the attempt on the four basis inputs, a batch of seeded random
/// superpositions and the entangled-ancilla input; compare every success
/// branch against [`ideal_cnot`].
pub fn process_check(noise: &NoiseModel) -> Result<ProcessReport, VerifyError> {
    process_check_with(noise, &CheckOptions::default())
}

pub fn process_check_with(
    noise: &NoiseModel,
    options: &CheckOptions,
) -> Result<ProcessReport, VerifyError> {
    let protocol = Protocol::with_default_registers(noise.clone())?
        .with_corrupted_extraction(options.corrupt_extraction);

    let mut inputs = vec![
        basis_input(0, 0),
        basis_input(0, 1),
        basis_input(1, 0),
        basis_input(1, 1),
    ];
    let mut rng = RandomSource::new(options.seed);
    for _ in 0..options.random_inputs {
        inputs.push(random_qubit_input(&mut rng));
    }
    inputs.push(bell_ancilla_input());

    let mut worst_fidelity = 1.0f64;
    let mut spread = 0.0f64;
    let mut success_probability = f64::NAN;
    let mut basis_images = Vec::new();

    for (n, input) in inputs.iter().enumerate() {
        let reference = ideal_cnot(input)?;
        let branches: Vec<BranchRecord> = protocol
            .enumerate_attempt(input)?
            .into_iter()
            .map(BranchRecord::from)
            .collect();
        let success: Vec<&BranchRecord> = branches
            .iter()
            .filter(|b| b.outcome == AttemptOutcome::Success)
            .collect();
        let p: f64 = success.iter().map(|b| b.probability).sum();
        if success_probability.is_nan() {
            success_probability = p;
        }
        for b in &success {
            worst_fidelity = worst_fidelity.min(fidelity(&b.conditional_state, &reference)?);
        }
        for (k, x) in success.iter().enumerate() {
            for y in &success[k + 1..] {
                spread = spread
                    .max(1.0 - fidelity(&x.conditional_state, &y.conditional_state)?);
            }
        }
        if n < 4 {
            if let Some(b) = success.first() {
                basis_images.push(b.conditional_state.dump());
            }
        }
    }

    Ok(ProcessReport {
        basis_images,
        worst_fidelity,
        success_probability,
        detector_record_spread: spread,
    })
}

/// Worst post-selected fidelity and inter-branch spread of an enumeration's
/// success branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeptFidelity {
    pub worst: f64,
    /// Largest fidelity deficit between any two success branches.
    pub spread: f64,
}

pub fn kept_branch_fidelity(
    input: &StateVector,
    branches: &[BranchRecord],
) -> Result<KeptFidelity, VerifyError> {
    let reference = ideal_cnot(input)?;
    let success: Vec<&BranchRecord> = branches
        .iter()
        .filter(|b| b.outcome == AttemptOutcome::Success)
        .collect();
    let mut worst = 1.0f64;
    let mut spread = 0.0f64;
    for b in &success {
        worst = worst.min(fidelity(&b.conditional_state, &reference)?);
    }
    for (k, x) in success.iter().enumerate() {
        for y in &success[k + 1..] {
            spread = spread.max(1.0 - fidelity(&x.conditional_state, &y.conditional_state)?);
        }
    }
    Ok(KeptFidelity { worst, spread })
}

/// Per-trial record of a sampled run.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub attempts: u32,
    pub exhausted: bool,
    pub first_outcome: AttemptOutcome,
    pub t1_click: Option<DetectorPort>,
    pub t2_click: Option<DetectorPort>,
    pub final_fidelity: Option<f64>,
}

fn run_one_trial(
    protocol: &Protocol,
    input: &StateVector,
    reference: &StateVector,
    max_retries: u32,
    seed: u64,
    stream: u64,
) -> Result<TrialRecord, VerifyError> {
    let mut rng = RandomSource::with_stream(seed, stream);
    let result = protocol.run_sampled(input, max_retries, &mut rng);
    let (attempts, history, final_fidelity, exhausted) = match result {
        Ok(res) => {
            let f = fidelity(&res.final_state, reference)?;
            (res.attempts, res.history, Some(f), false)
        }
        Err(ProtocolError::RetriesExhausted { attempts, history }) => {
            (attempts, history, None, true)
        }
        Err(e) => return Err(e.into()),
    };
    // classify the first attempt (events up to the first restoration)
    let first: Vec<&AttemptEvent> = history
        .iter()
        .take_while(|e| !matches!(e, AttemptEvent::Restored))
        .collect();
    let mut first_outcome = AttemptOutcome::Success;
    let mut t1_click = None;
    let mut t2_click = None;
    for ev in first {
        match ev {
            AttemptEvent::Loss { transmission: 1 } => first_outcome = AttemptOutcome::LossT1,
            AttemptEvent::Loss { transmission: 2 } => first_outcome = AttemptOutcome::LossT2,
            AttemptEvent::BetaFoundInD => first_outcome = AttemptOutcome::BetaFoundInD,
            AttemptEvent::Click {
                transmission: 1,
                detector,
            } => t1_click = Some(*detector),
            AttemptEvent::Click {
                transmission: 2,
                detector,
            } => t2_click = Some(*detector),
            _ => {}
        }
    }
    Ok(TrialRecord {
        attempts,
        exhausted,
        first_outcome,
        t1_click,
        t2_click,
        final_fidelity,
    })
}

/// Run `trials` independent sampled runs, one split random stream per trial
/// index, so results do not depend on scheduling.
#[cfg(feature = "parallel")]
pub fn run_trials_parallel(
    protocol: &Protocol,
    input: &StateVector,
    reference: &StateVector,
    max_retries: u32,
    trials: u64,
    seed: u64,
) -> Result<Vec<TrialRecord>, VerifyError> {
    (0..trials)
        .into_par_iter()
        .map(|t| run_one_trial(protocol, input, reference, max_retries, seed, t))
        .collect()
}

pub fn run_trials_sequential(
    protocol: &Protocol,
    input: &StateVector,
    reference: &StateVector,
    max_retries: u32,
    trials: u64,
    seed: u64,
) -> Result<Vec<TrialRecord>, VerifyError> {
    (0..trials)
        .map(|t| run_one_trial(protocol, input, reference, max_retries, seed, t))
        .collect()
}

fn run_trials(
    protocol: &Protocol,
    input: &StateVector,
    reference: &StateVector,
    max_retries: u32,
    trials: u64,
    seed: u64,
) -> Result<Vec<TrialRecord>, VerifyError> {
    #[cfg(feature = "parallel")]
    {
        run_trials_parallel(protocol, input, reference, max_retries, trials, seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_trials_sequential(protocol, input, reference, max_retries, trials, seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryStat {
    pub name: String,
    pub expected_probability: f64,
    pub observed: u64,
    pub samples: u64,
    pub z: f64,
}

/// Sampled-vs-exact comparison report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleReport {
    pub trials: u64,
    pub total_attempts: u64,
    pub exhausted_trials: u64,
    /// First-attempt outcome and click frequencies against the enumerated
    /// probabilities (binomial z-scores).
    pub categories: Vec<CategoryStat>,
    pub mean_attempts: f64,
    /// Geometric-distribution mean implied by the exact per-attempt success
    /// probability, and the z-score of the observed mean against it.
    pub expected_mean_attempts: f64,
    pub attempts_z: f64,
    pub max_z: f64,
    /// Worst sampled post-selected fidelity against the reference gate.
    pub worst_fidelity: f64,
}

fn binomial_z(observed: u64, samples: u64, p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0); // enumeration roundoff can leave p a hair past 1
    let n = samples as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    if sigma == 0.0 {
        if observed as f64 == n * p {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (observed as f64 - n * p) / sigma
    }
}

/// Run the protocol `trials` times in sampling mode and compare the
/// empirical first-attempt frequencies and the attempt-count distribution
/// against the exact enumeration.
pub fn sampled_vs_exact(
    input: &StateVector,
    noise: &NoiseModel,
    trials: u64,
    seed: u64,
) -> Result<SampleReport, VerifyError> {
    assert!(trials >= 1, "need at least one trial");
    let protocol = Protocol::with_default_registers(noise.clone())?;
    let reference = ideal_cnot(input)?;
    let exact = attempt_probabilities(&enumerate_branches(input, noise)?);
    let records = run_trials(&protocol, input, &reference, 100, trials, seed)?;

    let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    let categories_spec: Vec<(&str, f64, u64)> = vec![
        (
            "success",
            exact.success,
            count(&|r| r.first_outcome == AttemptOutcome::Success),
        ),
        (
            "loss_t1",
            exact.loss_t1,
            count(&|r| r.first_outcome == AttemptOutcome::LossT1),
        ),
        (
            "loss_t2",
            exact.loss_t2,
            count(&|r| r.first_outcome == AttemptOutcome::LossT2),
        ),
        (
            "beta_in_d",
            exact.beta_in_d,
            count(&|r| r.first_outcome == AttemptOutcome::BetaFoundInD),
        ),
        (
            "t1_click_d1",
            exact.t1_click_d1,
            count(&|r| r.t1_click == Some(DetectorPort::D1)),
        ),
        (
            "t2_click_d1",
            exact.t2_click_d1,
            count(&|r| r.t2_click == Some(DetectorPort::D1)),
        ),
    ];
    let categories: Vec<CategoryStat> = categories_spec
        .into_iter()
        .map(|(name, p, observed)| CategoryStat {
            name: name.to_string(),
            expected_probability: p,
            observed,
            samples: trials,
            z: binomial_z(observed, trials, p),
        })
        .collect();

    let total_attempts: u64 = records.iter().map(|r| r.attempts as u64).sum();
    let mean_attempts = total_attempts as f64 / trials as f64;
    let p = exact.success;
    let (expected_mean, attempts_z) = if p > 0.0 {
        let mean = 1.0 / p;
        let sigma = ((1.0 - p) / (p * p) / trials as f64).sqrt();
        let z = if sigma == 0.0 {
            if (mean_attempts - mean).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (mean_attempts - mean) / sigma
        };
        (mean, z)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    let max_z = categories
        .iter()
        .map(|c| c.z.abs())
        .fold(attempts_z.abs(), f64::max);
    let worst_fidelity = records
        .iter()
        .filter_map(|r| r.final_fidelity)
        .fold(1.0, f64::min);

    Ok(SampleReport {
        trials,
        total_attempts,
        exhausted_trials: records.iter().filter(|r| r.exhausted).count() as u64,
        categories,
        mean_attempts,
        expected_mean_attempts: expected_mean,
        attempts_z,
        max_z,
        worst_fidelity,
    })
}
