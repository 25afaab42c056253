//! The heralded remote-CNOT state machine.
//!
//! One attempt is: backup-encode the control atom, transmit a photon,
//! symmetrize (swap the control atom's working levels and shelve the target
//! atom's transferred population), transmit a second photon, post-select on
//! the target atom having left its ground level, then extract the gate by
//! local measurements and pulses. Photon loss or a failed post-selection
//! collapses no qubit information: a level measurement plus pi pulses
//! restores both atoms to their starting configuration and the attempt
//! repeats.
//!
//! Errors enter only through the photon path ([`NoiseModel`]); single-atom
//! pulses and measurements are treated as ideal. The kept branch of the
//! protocol implements the CNOT exactly for every admissible noise value -
//! error amplitudes either cancel by the two-transmission symmetrization or
//! sit entirely on components the post-selection projects out.
//!
//! Every measurement fork is available in two forms: a `*_branches` method
//! returning the complete weighted branch list (used by the exact
//! enumeration in [`crate::verify`]) and a sampling wrapper drawing one
//! branch from a [`RandomSource`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{
    alpha_scatter, beta_scatter, channel, detect_branches, inject_photon, level_projector,
    pulse_pi, pulse_pi_half, sign_flip, zeeman_selective_swap, zeeman_swap, AlphaLevel, BetaLevel,
    ChannelKraus, DetectOutcome, DetectorPort, DeviceError, NoiseModel, ZeemanIndex, ATOM_DIM,
    PHOTON_DIM,
};
use crate::linalg::{C0, C1};
use crate::qstate::{
    measure_subspaces, Branching, LocalOperator, Projector, QstateError, RandomSource,
    RegisterLayout, StateVector,
};

/// Weight tolerance for structural preconditions (population found outside
/// the subspace a stage expects).
pub const PRECONDITION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    State(#[from] QstateError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("photon register must be in vacuum (stray weight {0:.3e})")]
    PhotonNotVacuum(f64),
    #[error("control atom must be entirely in its ground level a (stray weight {0:.3e})")]
    AlphaNotInLevelA(f64),
    #[error("target atom must be entirely in its ground level d (stray weight {0:.3e})")]
    BetaNotInLevelD(f64),
    #[error("storage level f is already occupied (weight {0:.3e}); symmetrization would collide")]
    StorageLevelOccupied(f64),
    #[error("state has weight {0:.3e} outside the extraction subspace")]
    OutsideExtractionSubspace(f64),
    #[error("input carries subsystems beyond (alpha, beta, photon); set include_ancilla")]
    UnexpectedAncilla,
    #[error("retries exhausted after {attempts} attempts")]
    RetriesExhausted {
        attempts: u32,
        history: Vec<AttemptEvent>,
    },
    #[error("no branch of the attempt succeeds under this noise model")]
    NoSuccessfulBranch,
    #[error("entanglement chain needs at least 3 nodes, got {0}")]
    ChainTooShort(usize),
}

/// Default register labels for a single control/target pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registers {
    pub alpha: String,
    pub beta: String,
    pub photon: String,
}

impl Default for Registers {
    fn default() -> Self {
        Self {
            alpha: "alpha".into(),
            beta: "beta".into(),
            photon: "photon".into(),
        }
    }
}

/// Layout of the standard run: control atom, target atom, photon.
pub fn standard_layout() -> RegisterLayout {
    RegisterLayout::new(&[("alpha", ATOM_DIM), ("beta", ATOM_DIM), ("photon", PHOTON_DIM)])
        .expect("static layout")
}

/// One entry of an attempt's measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptEvent {
    Click {
        transmission: u8,
        detector: DetectorPort,
    },
    Loss {
        transmission: u8,
    },
    BetaFoundInD,
    AlphaQnd(AlphaLevel),
    BetaQnd(BetaLevel),
    Restored,
}

/// How measurement outcomes are resolved during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    Sample { seed: u64 },
    Enumerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub noise: NoiseModel,
    pub max_retries: u32,
    pub mode: RunMode,
    /// Allow subsystems beyond (alpha, beta, photon); they ride along
    /// untouched.
    pub include_ancilla: bool,
}

impl ProtocolConfig {
    pub fn new(noise: NoiseModel) -> Self {
        Self {
            noise,
            max_retries: 100,
            mode: RunMode::Sample { seed: 0 },
            include_ancilla: false,
        }
    }

    pub fn enumerate(noise: NoiseModel) -> Self {
        Self {
            mode: RunMode::Enumerate,
            ..Self::new(noise)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub final_state: StateVector,
    pub attempts: u32,
    pub history: Vec<AttemptEvent>,
    /// Exact per-attempt success probability; `Enumerate` mode only.
    pub success_probability_per_attempt: Option<f64>,
}

/// Terminal classification of one attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptOutcome {
    Success,
    LossT1,
    LossT2,
    BetaFoundInD,
}

/// One fully resolved measurement path through a single attempt.
#[derive(Debug, Clone)]
pub struct AttemptBranch {
    pub outcome: AttemptOutcome,
    pub probability: f64,
    pub events: Vec<AttemptEvent>,
    pub state: StateVector,
}

/// Result of one sampled transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmitOutcome {
    Click(DetectorPort),
    Loss,
}

/// The protocol with its operators prebuilt for a fixed register naming and
/// noise model. All methods are `&self`; distinct trials can share one
/// instance across threads.
#[derive(Debug, Clone)]
pub struct Protocol {
    regs: Registers,
    noise: NoiseModel,
    corrupt_extraction: bool,

    inject: LocalOperator,
    scatter_a: LocalOperator,
    kraus: ChannelKraus,
    scatter_b: LocalOperator,
    flip_b: LocalOperator,
    encode: LocalOperator,
    sym_alpha: LocalOperator,
    sym_beta: LocalOperator,
    swap_a1b1: LocalOperator,
    swap_a0b0: LocalOperator,
    zswap_e: LocalOperator,
    zswap_f: LocalOperator,
    pm_pulse: LocalOperator,
    flip_a: LocalOperator,
    move_e_d: LocalOperator,
    move_f_d: LocalOperator,
    move_b_a: LocalOperator,
    p_alpha: [Projector; 2],
    p_beta: [Projector; 3],
    p_postselect: [Projector; 2],
}

impl Protocol {
    pub fn new(regs: Registers, noise: NoiseModel) -> Result<Self, ProtocolError> {
        noise.validate()?;
        let a = regs.alpha.as_str();
        let b = regs.beta.as_str();
        let ph = regs.photon.as_str();
        let p_beta_not_d = Projector::on_indices("not-d", b, ATOM_DIM, &[2, 3, 4, 5])?;
        Ok(Self {
            inject: inject_photon(ph),
            scatter_a: alpha_scatter(a, ph, &noise),
            kraus: channel(ph, &noise),
            scatter_b: beta_scatter(b, ph, &noise),
            flip_b: sign_flip(a, AlphaLevel::B),
            encode: pulse_pi_half(a, AlphaLevel::A, AlphaLevel::B)?,
            sym_alpha: pulse_pi(a, AlphaLevel::A, AlphaLevel::B)?,
            sym_beta: pulse_pi(b, BetaLevel::F, BetaLevel::E)?,
            swap_a1b1: zeeman_selective_swap(a, AlphaLevel::A, AlphaLevel::B, ZeemanIndex::One)?,
            swap_a0b0: zeeman_selective_swap(a, AlphaLevel::A, AlphaLevel::B, ZeemanIndex::Zero)?,
            zswap_e: zeeman_swap(b, BetaLevel::E),
            zswap_f: zeeman_swap(b, BetaLevel::F),
            pm_pulse: pulse_pi_half(b, BetaLevel::E, BetaLevel::F)?,
            flip_a: sign_flip(a, AlphaLevel::A),
            move_e_d: pulse_pi(b, BetaLevel::E, BetaLevel::D)?,
            move_f_d: pulse_pi(b, BetaLevel::F, BetaLevel::D)?,
            move_b_a: pulse_pi(a, AlphaLevel::B, AlphaLevel::A)?,
            p_alpha: [
                level_projector("a", a, AlphaLevel::A),
                level_projector("b", a, AlphaLevel::B),
            ],
            p_beta: [
                level_projector("d", b, BetaLevel::D),
                level_projector("e", b, BetaLevel::E),
                level_projector("f", b, BetaLevel::F),
            ],
            p_postselect: [level_projector("d", b, BetaLevel::D), p_beta_not_d],
            regs,
            noise,
            corrupt_extraction: false,
        })
    }

    pub fn with_default_registers(noise: NoiseModel) -> Result<Self, ProtocolError> {
        Self::new(Registers::default(), noise)
    }

    /// Test hook: drop the sign correction of the extraction table. Used as
    /// a negative control - the process check must catch it.
    pub fn with_corrupted_extraction(mut self, corrupt: bool) -> Self {
        self.corrupt_extraction = corrupt;
        self
    }

    pub fn registers(&self) -> &Registers {
        &self.regs
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn stray(&self, state: &StateVector, label: &str, allowed: &[usize]) -> Result<f64, ProtocolError> {
        Ok(state.subsystem_weight(label, |k| !allowed.contains(&k))?)
    }

    fn require_photon_vacuum(&self, state: &StateVector) -> Result<(), ProtocolError> {
        let w = self.stray(state, &self.regs.photon, &[0])?;
        if w > PRECONDITION_TOL {
            return Err(ProtocolError::PhotonNotVacuum(w));
        }
        Ok(())
    }

    /// Split the control qubit evenly over levels a and b (pi/2 pulse).
    /// The Zeeman content is duplicated, not copied: a later collapse onto
    /// either level still holds the full qubit.
    pub fn backup_encode(&self, state: &StateVector) -> Result<StateVector, ProtocolError> {
        let w = self.stray(state, &self.regs.alpha, &[0, 1])?;
        if w > PRECONDITION_TOL {
            return Err(ProtocolError::AlphaNotInLevelA(w));
        }
        Ok(state.apply(&self.encode)?)
    }

    /// Complete branch list of one transmission: photon injection,
    /// scattering off the control atom, the lossy channel, scattering off
    /// the target atom, detection. Click branches have the photon absorbed
    /// and the detector-dependent sign already fixed; every loss-like
    /// branch (channel jump, undetected photon) is a `Loss`.
    pub fn transmit_branches(
        &self,
        state: &StateVector,
    ) -> Result<Vec<(TransmitOutcome, f64, StateVector)>, ProtocolError> {
        self.require_photon_vacuum(state)?;
        let flying = state.apply(&self.inject)?.apply(&self.scatter_a)?;

        let mut out = Vec::new();
        for jump in [&self.kraus.jump_plus, &self.kraus.jump_minus] {
            let jumped = flying.apply(jump)?;
            let p = jumped.norm_sqr();
            if p > crate::qstate::PRUNE_EPS {
                out.push((TransmitOutcome::Loss, p, jumped.normalized()?));
            }
        }
        let kept = flying.apply(&self.kraus.no_jump)?;
        let p_kept = kept.norm_sqr();
        if p_kept > crate::qstate::PRUNE_EPS {
            let arrived = kept.normalized()?.apply(&self.scatter_b)?;
            for (outcome, q, collapsed) in
                detect_branches(&arrived, &self.regs.photon, &self.noise)?
            {
                match outcome {
                    DetectOutcome::Click(port) => {
                        let fixed = if port == DetectorPort::D1 {
                            collapsed.apply(&self.flip_b)?
                        } else {
                            collapsed
                        };
                        out.push((TransmitOutcome::Click(port), p_kept * q, fixed));
                    }
                    DetectOutcome::NoClick => {
                        out.push((TransmitOutcome::Loss, p_kept * q, collapsed));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Sampled transmission.
    pub fn transmit(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
    ) -> Result<(StateVector, TransmitOutcome), ProtocolError> {
        let branches = self.transmit_branches(state)?;
        let (outcome, s) = pick(branches, rng);
        Ok((s, outcome))
    }

    /// Swap the control atom's working levels and shelve transferred target
    /// population from e to f, so the second transmission hits the
    /// complementary amplitudes.
    pub fn symmetrize(&self, state: &StateVector) -> Result<StateVector, ProtocolError> {
        self.require_photon_vacuum(state)?;
        let w = self.stray(state, &self.regs.beta, &[0, 1, 2, 3])?;
        if w > PRECONDITION_TOL {
            return Err(ProtocolError::StorageLevelOccupied(w));
        }
        Ok(state.apply(&self.sym_alpha)?.apply(&self.sym_beta)?)
    }

    /// Post-selection fork: measure whether the target atom is still in its
    /// ground level d. `true` = kept (all error-contaminated components are
    /// projected out), `false` = restore and retry.
    pub fn postselect_branches(
        &self,
        state: &StateVector,
    ) -> Result<Vec<(bool, f64, StateVector)>, ProtocolError> {
        let branches = measure_subspaces(state, &self.p_postselect, Branching::Exhaustive)?;
        Ok(branches
            .into_iter()
            .map(|b| (b.outcome == 1, b.probability, b.state))
            .collect())
    }

    pub fn postselect_beta_not_d(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
    ) -> Result<(StateVector, bool), ProtocolError> {
        let (kept, s) = pick(self.postselect_branches(state)?, rng);
        Ok((s, kept))
    }

    fn extraction_precondition(&self, state: &StateVector) -> Result<(), ProtocolError> {
        let mut w = self.stray(state, &self.regs.photon, &[0])?;
        w += self.stray(state, &self.regs.alpha, &[0, 1, 2, 3])?;
        w += self.stray(state, &self.regs.beta, &[2, 3, 4, 5])?;
        if w > PRECONDITION_TOL {
            return Err(ProtocolError::OutsideExtractionSubspace(w));
        }
        Ok(())
    }

    /// Diagonal measurement of the control atom: interchange `a1 <-> b1`,
    /// measure the energy level, undo the interchange. Outcome `A` means
    /// the atom was found in span{a0, b1}; outcome `B` in span{a1, b0}.
    /// The matching Zeeman interchange on the target atom (on e for `A`,
    /// on f for `B`) is already applied to the returned states.
    pub fn diagonal_branches(
        &self,
        state: &StateVector,
    ) -> Result<Vec<(AlphaLevel, f64, StateVector)>, ProtocolError> {
        self.extraction_precondition(state)?;
        let swapped = state.apply(&self.swap_a1b1)?;
        let mut out = Vec::new();
        for b in measure_subspaces(&swapped, &self.p_alpha, Branching::Exhaustive)? {
            let unswapped = b.state.apply(&self.swap_a1b1)?;
            let (level, zswap) = match b.outcome {
                0 => (AlphaLevel::A, &self.zswap_e),
                _ => (AlphaLevel::B, &self.zswap_f),
            };
            out.push((level, b.probability, unswapped.apply(zswap)?));
        }
        Ok(out)
    }

    /// Measure which +/- combination of the target levels e and f holds the
    /// population: a pi/2 pulse folds `(e - f)` onto level e and `(e + f)`
    /// onto level f, then the energy is measured. The returned states keep
    /// the pulsed frame (population sits in the named pure level).
    pub fn beta_pm_branches(
        &self,
        state: &StateVector,
    ) -> Result<Vec<(BetaLevel, f64, StateVector)>, ProtocolError> {
        let pulsed = state.apply(&self.pm_pulse)?;
        let mut out = Vec::new();
        for b in measure_subspaces(&pulsed, &self.p_beta, Branching::Exhaustive)? {
            match b.outcome {
                0 => return Err(ProtocolError::OutsideExtractionSubspace(b.probability)),
                1 => out.push((BetaLevel::E, b.probability, b.state)),
                _ => out.push((BetaLevel::F, b.probability, b.state)),
            }
        }
        Ok(out)
    }

    /// Outcome-indexed pulse table closing the extraction: fix the sign the
    /// minus-subspace outcome introduced, fold the measured diagonal back
    /// onto level a, and return the target population to level d. Every
    /// outcome combination lands exactly on the CNOT image.
    pub fn extraction_finish(
        &self,
        state: &StateVector,
        diagonal: AlphaLevel,
        pm: BetaLevel,
    ) -> Result<StateVector, ProtocolError> {
        let mut s = state.clone();
        if pm == BetaLevel::E && !self.corrupt_extraction {
            s = s.apply(&self.flip_a)?;
        }
        s = match diagonal {
            AlphaLevel::A => s.apply(&self.swap_a1b1)?,
            _ => s.apply(&self.swap_a0b0)?,
        };
        s = match pm {
            BetaLevel::E => s.apply(&self.move_e_d)?,
            _ => s.apply(&self.move_f_d)?,
        };
        let stray =
            self.stray(&s, &self.regs.alpha, &[0, 1])? + self.stray(&s, &self.regs.beta, &[0, 1])?;
        if stray > PRECONDITION_TOL {
            return Err(ProtocolError::OutsideExtractionSubspace(stray));
        }
        Ok(s)
    }

    /// Sampled diagonal extraction; returns the final state and the two QND
    /// records.
    pub fn diagonal_extraction(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
    ) -> Result<(StateVector, Vec<AttemptEvent>), ProtocolError> {
        let (diag, s) = pick(self.diagonal_branches(state)?, rng);
        let (pm, s) = pick(self.beta_pm_branches(&s)?, rng);
        let done = self.extraction_finish(&s, diag, pm)?;
        Ok((done, vec![AttemptEvent::AlphaQnd(diag), AttemptEvent::BetaQnd(pm)]))
    }

    /// Complete branch list of restoration after a failure: measure both
    /// atoms' energy levels (the Zeeman qubits are untouched - the photons
    /// never learned about them), then pi-pulse each atom back to its
    /// ground level.
    pub fn restore_branches(
        &self,
        state: &StateVector,
    ) -> Result<Vec<(AlphaLevel, BetaLevel, f64, StateVector)>, ProtocolError> {
        self.require_photon_vacuum(state)?;
        let mut out = Vec::new();
        for a in measure_subspaces(state, &self.p_alpha, Branching::Exhaustive)? {
            let (alpha_level, fixed_a) = match a.outcome {
                0 => (AlphaLevel::A, a.state),
                _ => (AlphaLevel::B, a.state.apply(&self.move_b_a)?),
            };
            for b in measure_subspaces(&fixed_a, &self.p_beta, Branching::Exhaustive)? {
                let (beta_level, fixed_b) = match b.outcome {
                    0 => (BetaLevel::D, b.state),
                    1 => (BetaLevel::E, b.state.apply(&self.move_e_d)?),
                    _ => (BetaLevel::F, b.state.apply(&self.move_f_d)?),
                };
                out.push((alpha_level, beta_level, a.probability * b.probability, fixed_b));
            }
        }
        Ok(out)
    }

    /// Sampled restoration.
    pub fn restore(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
    ) -> Result<(StateVector, Vec<AttemptEvent>), ProtocolError> {
        let branches = self.restore_branches(state)?;
        let ((a, b), s) = pick(
            branches
                .into_iter()
                .map(|(a, b, p, s)| ((a, b), p, s))
                .collect(),
            rng,
        );
        Ok((s, vec![AttemptEvent::AlphaQnd(a), AttemptEvent::BetaQnd(b)]))
    }

    fn sample_attempt(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
        extract: bool,
    ) -> Result<(AttemptOutcome, Vec<AttemptEvent>, StateVector), ProtocolError> {
        let mut events = Vec::new();
        let s = self.backup_encode(state)?;

        let (s, t1) = self.transmit(&s, rng)?;
        match t1 {
            TransmitOutcome::Loss => {
                events.push(AttemptEvent::Loss { transmission: 1 });
                return Ok((AttemptOutcome::LossT1, events, s));
            }
            TransmitOutcome::Click(d) => events.push(AttemptEvent::Click {
                transmission: 1,
                detector: d,
            }),
        }

        let s = self.symmetrize(&s)?;
        let (s, t2) = self.transmit(&s, rng)?;
        match t2 {
            TransmitOutcome::Loss => {
                events.push(AttemptEvent::Loss { transmission: 2 });
                return Ok((AttemptOutcome::LossT2, events, s));
            }
            TransmitOutcome::Click(d) => events.push(AttemptEvent::Click {
                transmission: 2,
                detector: d,
            }),
        }

        let (s, kept) = self.postselect_beta_not_d(&s, rng)?;
        if !kept {
            events.push(AttemptEvent::BetaFoundInD);
            return Ok((AttemptOutcome::BetaFoundInD, events, s));
        }
        if !extract {
            return Ok((AttemptOutcome::Success, events, s));
        }
        let (s, ext_events) = self.diagonal_extraction(&s, rng)?;
        events.extend(ext_events);
        Ok((AttemptOutcome::Success, events, s))
    }

    fn enumerate_attempt_impl(
        &self,
        input: &StateVector,
        extract: bool,
    ) -> Result<Vec<AttemptBranch>, ProtocolError> {
        let mut out = Vec::new();
        let encoded = self.backup_encode(input)?;
        for (o1, p1, s1) in self.transmit_branches(&encoded)? {
            let d1 = match o1 {
                TransmitOutcome::Loss => {
                    out.push(AttemptBranch {
                        outcome: AttemptOutcome::LossT1,
                        probability: p1,
                        events: vec![AttemptEvent::Loss { transmission: 1 }],
                        state: s1,
                    });
                    continue;
                }
                TransmitOutcome::Click(d) => d,
            };
            let ev1 = AttemptEvent::Click {
                transmission: 1,
                detector: d1,
            };
            let sym = self.symmetrize(&s1)?;
            for (o2, p2, s2) in self.transmit_branches(&sym)? {
                let d2 = match o2 {
                    TransmitOutcome::Loss => {
                        out.push(AttemptBranch {
                            outcome: AttemptOutcome::LossT2,
                            probability: p1 * p2,
                            events: vec![ev1, AttemptEvent::Loss { transmission: 2 }],
                            state: s2,
                        });
                        continue;
                    }
                    TransmitOutcome::Click(d) => d,
                };
                let ev2 = AttemptEvent::Click {
                    transmission: 2,
                    detector: d2,
                };
                for (kept, p3, s3) in self.postselect_branches(&s2)? {
                    let p = p1 * p2 * p3;
                    if !kept {
                        out.push(AttemptBranch {
                            outcome: AttemptOutcome::BetaFoundInD,
                            probability: p,
                            events: vec![ev1, ev2, AttemptEvent::BetaFoundInD],
                            state: s3,
                        });
                        continue;
                    }
                    if !extract {
                        out.push(AttemptBranch {
                            outcome: AttemptOutcome::Success,
                            probability: p,
                            events: vec![ev1, ev2],
                            state: s3,
                        });
                        continue;
                    }
                    for (diag, p4, s4) in self.diagonal_branches(&s3)? {
                        for (pm, p5, s5) in self.beta_pm_branches(&s4)? {
                            let done = self.extraction_finish(&s5, diag, pm)?;
                            out.push(AttemptBranch {
                                outcome: AttemptOutcome::Success,
                                probability: p * p4 * p5,
                                events: vec![
                                    ev1,
                                    ev2,
                                    AttemptEvent::AlphaQnd(diag),
                                    AttemptEvent::BetaQnd(pm),
                                ],
                                state: done,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// All measurement paths of a single attempt with their exact
    /// probabilities. Failure branches carry their pre-restoration states.
    pub fn enumerate_attempt(&self, input: &StateVector) -> Result<Vec<AttemptBranch>, ProtocolError> {
        self.enumerate_attempt_impl(input, true)
    }

    /// Same, but stopping after post-selection (no extraction); the success
    /// branches hold the level-entangled intermediate states.
    pub fn enumerate_attempt_no_extraction(
        &self,
        input: &StateVector,
    ) -> Result<Vec<AttemptBranch>, ProtocolError> {
        self.enumerate_attempt_impl(input, false)
    }

    fn validate_run_input(
        &self,
        input: &StateVector,
        include_ancilla: bool,
    ) -> Result<(), ProtocolError> {
        if !include_ancilla && input.layout().subsystems().len() != 3 {
            return Err(ProtocolError::UnexpectedAncilla);
        }
        let w = self.stray(input, &self.regs.alpha, &[0, 1])?;
        if w > PRECONDITION_TOL {
            return Err(ProtocolError::AlphaNotInLevelA(w));
        }
        let w = self.stray(input, &self.regs.beta, &[0, 1])?;
        if w > PRECONDITION_TOL {
            return Err(ProtocolError::BetaNotInLevelD(w));
        }
        self.require_photon_vacuum(input)
    }

    /// Sampled run with an externally supplied random stream.
    pub fn run_sampled(
        &self,
        input: &StateVector,
        max_retries: u32,
        rng: &mut RandomSource,
    ) -> Result<ProtocolResult, ProtocolError> {
        self.run_sampled_impl(input, max_retries, rng, true)
    }

    fn run_sampled_impl(
        &self,
        input: &StateVector,
        max_retries: u32,
        rng: &mut RandomSource,
        extract: bool,
    ) -> Result<ProtocolResult, ProtocolError> {
        let mut history = Vec::new();
        let mut state = input.clone();
        for attempt in 1..=max_retries {
            let (outcome, events, s) = self.sample_attempt(&state, rng, extract)?;
            history.extend(events);
            if outcome == AttemptOutcome::Success {
                return Ok(ProtocolResult {
                    final_state: s,
                    attempts: attempt,
                    history,
                    success_probability_per_attempt: None,
                });
            }
            let (restored, events) = self.restore(&s, rng)?;
            history.extend(events);
            history.push(AttemptEvent::Restored);
            state = restored;
        }
        Err(ProtocolError::RetriesExhausted {
            attempts: max_retries,
            history,
        })
    }

    fn run_enumerate_impl(
        &self,
        input: &StateVector,
        extract: bool,
    ) -> Result<ProtocolResult, ProtocolError> {
        let branches = self.enumerate_attempt_impl(input, extract)?;
        let p: f64 = branches
            .iter()
            .filter(|b| b.outcome == AttemptOutcome::Success)
            .map(|b| b.probability)
            .sum();
        let first = branches
            .into_iter()
            .find(|b| b.outcome == AttemptOutcome::Success)
            .ok_or(ProtocolError::NoSuccessfulBranch)?;
        Ok(ProtocolResult {
            final_state: first.state,
            attempts: 1,
            history: first.events,
            success_probability_per_attempt: Some(p),
        })
    }

    /// Full run under a configuration; see [`run`].
    pub fn run_config(
        &self,
        input: &StateVector,
        config: &ProtocolConfig,
    ) -> Result<ProtocolResult, ProtocolError> {
        self.run_config_impl(input, config, true)
    }

    fn run_config_impl(
        &self,
        input: &StateVector,
        config: &ProtocolConfig,
        extract: bool,
    ) -> Result<ProtocolResult, ProtocolError> {
        self.validate_run_input(input, config.include_ancilla)?;
        match config.mode {
            RunMode::Enumerate => self.run_enumerate_impl(input, extract),
            RunMode::Sample { seed } => {
                let mut rng = RandomSource::new(seed);
                self.run_sampled_impl(input, config.max_retries, &mut rng, extract)
            }
        }
    }
}

fn pick<T>(branches: Vec<(T, f64, StateVector)>, rng: &mut RandomSource) -> (T, StateVector) {
    let weights: Vec<f64> = branches.iter().map(|b| b.1).collect();
    let k = rng.choose(&weights);
    let (t, _, s) = branches
        .into_iter()
        .nth(k)
        .expect("measurement fork produced no branches");
    (t, s)
}

/// Run the full gate: repeated attempts with restoration on failure, up to
/// `config.max_retries`. On success the final state is the exact CNOT image
/// of the input on the Zeeman qubits, whatever the noise parameters.
pub fn run(input: &StateVector, config: &ProtocolConfig) -> Result<ProtocolResult, ProtocolError> {
    Protocol::with_default_registers(config.noise.clone())?.run_config(input, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EprLinkKind {
    /// Entanglement between the Zeeman qubits of the pair.
    Horizontal,
    /// Entanglement between the energy levels of the pair.
    Vertical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EprLink {
    pub control_node: usize,
    pub partner_node: usize,
    pub kind: EprLinkKind,
    pub fidelity: f64,
    /// Exact per-attempt success probability of this link
    /// (`Enumerate` mode only).
    pub success_probability: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EprChainReport {
    pub state: StateVector,
    pub links: Vec<EprLink>,
    pub total_attempts: u32,
    /// Product of per-link per-attempt success probabilities
    /// (`Enumerate` mode only).
    pub success_probability: Option<f64>,
}

/// Entanglement-distribution chain where every node is a single atom.
///
/// Odd-index nodes act as senders: each is prepared in `(|a0> - |a1>)/sqrt 2`,
/// runs a full CNOT with its left neighbour (creating a horizontal
/// Zeeman-Zeeman pair) and then the level-entangling prefix of the protocol
/// with its right neighbour (creating a vertical level-level pair without
/// touching any Zeeman amplitude). All CNOT links run before the vertical
/// links so each receiving atom is still in its ground level when targeted.
pub fn share_epr_chain(
    node_count: usize,
    config: &ProtocolConfig,
) -> Result<EprChainReport, ProtocolError> {
    if node_count < 3 {
        return Err(ProtocolError::ChainTooShort(node_count));
    }
    let labels: Vec<String> = (0..node_count).map(|i| format!("node{i}")).collect();
    let mut subs: Vec<(&str, usize)> = labels.iter().map(|l| (l.as_str(), ATOM_DIM)).collect();
    subs.push(("photon", PHOTON_DIM));
    let layout = RegisterLayout::new(&subs)?;

    let sqrt_half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut factors: Vec<Vec<Complex64>> = (0..node_count)
        .map(|i| {
            let mut v = vec![C0; ATOM_DIM];
            if i % 2 == 1 {
                v[0] = sqrt_half;
                v[1] = -sqrt_half;
            } else {
                v[0] = C1;
            }
            v
        })
        .collect();
    factors.push(vec![C1, C0, C0]);
    let mut state = StateVector::product_state(&layout, &factors)?;

    let link_config = ProtocolConfig {
        include_ancilla: true,
        ..config.clone()
    };
    let mut total_attempts = 0;
    let mut success_probability: Option<f64> = match config.mode {
        RunMode::Enumerate => Some(1.0),
        RunMode::Sample { .. } => None,
    };
    let mut links = Vec::new();
    let mut stream = 0u64;

    let run_link = |state: &StateVector, sender: usize, partner: usize, extract: bool, stream: u64|
     -> Result<ProtocolResult, ProtocolError> {
        let proto = Protocol::new(
            Registers {
                alpha: labels[sender].clone(),
                beta: labels[partner].clone(),
                photon: "photon".into(),
            },
            config.noise.clone(),
        )?;
        match link_config.mode {
            RunMode::Enumerate => {
                proto.validate_run_input(state, true)?;
                proto.run_enumerate_impl(state, extract)
            }
            RunMode::Sample { seed } => {
                proto.validate_run_input(state, true)?;
                let mut rng = RandomSource::with_stream(seed, stream);
                proto.run_sampled_impl(state, link_config.max_retries, &mut rng, extract)
            }
        }
    };

    for k in (1..node_count).step_by(2) {
        let res = run_link(&state, k, k - 1, true, stream)?;
        stream += 1;
        total_attempts += res.attempts;
        if let (Some(total), Some(p)) = (success_probability, res.success_probability_per_attempt)
        {
            success_probability = Some(total * p);
        }
        state = res.final_state;
        links.push(EprLink {
            control_node: k,
            partner_node: k - 1,
            kind: EprLinkKind::Horizontal,
            fidelity: 0.0,
            success_probability: res.success_probability_per_attempt,
        });
    }
    for k in (1..node_count).step_by(2) {
        if k + 1 >= node_count {
            continue;
        }
        let res = run_link(&state, k, k + 1, false, stream)?;
        stream += 1;
        total_attempts += res.attempts;
        if let (Some(total), Some(p)) = (success_probability, res.success_probability_per_attempt)
        {
            success_probability = Some(total * p);
        }
        state = res.final_state;
        links.push(EprLink {
            control_node: k,
            partner_node: k + 1,
            kind: EprLinkKind::Vertical,
            fidelity: 0.0,
            success_probability: res.success_probability_per_attempt,
        });
    }

    let norm = state.norm_sqr();
    for link in &mut links {
        let proj = match link.kind {
            EprLinkKind::Horizontal => horizontal_pair_projector(
                &labels[link.control_node],
                &labels[link.partner_node],
            )?,
            EprLinkKind::Vertical => vertical_pair_projector(
                &labels[link.control_node],
                &labels[link.partner_node],
            )?,
        };
        link.fidelity = proj.weight(&state)? / norm;
    }

    Ok(EprChainReport {
        state,
        links,
        total_attempts,
        success_probability,
    })
}

/// Projector onto "the pair's Zeeman indices form the Bell pattern
/// `(|00> - |11>)/sqrt 2`", level-agnostic on both atoms.
fn horizontal_pair_projector(a: &str, b: &str) -> Result<Projector, QstateError> {
    let sqrt_half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let dim = ATOM_DIM * ATOM_DIM;
    let mut vectors = Vec::new();
    for la in 0..3 {
        for lb in 0..3 {
            let mut v = vec![C0; dim];
            v[(la * 2) * ATOM_DIM + lb * 2] = sqrt_half;
            v[(la * 2 + 1) * ATOM_DIM + lb * 2 + 1] = -sqrt_half;
            vectors.push(v);
        }
    }
    Projector::from_span("horizontal-pair", vec![a.to_string(), b.to_string()], &vectors)
}

/// Projector onto "the pair's levels form the pattern
/// `(|b>|e> + |a>|f>)/sqrt 2`", Zeeman-agnostic on both atoms.
fn vertical_pair_projector(a: &str, b: &str) -> Result<Projector, QstateError> {
    let sqrt_half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let dim = ATOM_DIM * ATOM_DIM;
    let mut vectors = Vec::new();
    for za in 0..2 {
        for zb in 0..2 {
            let mut v = vec![C0; dim];
            v[(2 + za) * ATOM_DIM + 2 + zb] = sqrt_half; // |b,za>|e,zb>
            v[za * ATOM_DIM + 4 + zb] = sqrt_half; // |a,za>|f,zb>
            vectors.push(v);
        }
    }
    Projector::from_span("vertical-pair", vec![a.to_string(), b.to_string()], &vectors)
}
