//! Physical building blocks: atomic level structure, local pulses, photon
//! bases, dispersive scattering maps, lossy channels and detectors.
//!
//! Both atoms have three energy levels with a twofold Zeeman degeneracy, so
//! each atom register has dimension 6 (index = level * 2 + zeeman). The
//! photon register has dimension 3: vacuum plus the two channel modes. The
//! symmetric/antisymmetric combinations `|+> = (|m1>+|m2>)/sqrt(2)` and
//! `|-> = (|m1>-|m2>)/sqrt(2)` are the working basis of the transmission:
//! an atom in the first level scatters the photon into `|+>` untouched,
//! while the second level sends it (ideally) into `|->`.
//!
//! Every factory here returns a [`LocalOperator`] or a small set of jump
//! operators; none of them samples randomness except [`detect`]. All pulses
//! and basis changes are unitary to 1e-12; scattering maps are unitary on
//! the enlarged register; channel and detection pieces form complete jump
//! families, so no probability is ever lost.
//!
//! Error parameterization ([`NoiseModel`]):
//! - `eta`, `zeta`: complex attenuation of the `|+>` / `|->` channel modes
//!   (no-jump amplitudes; the lost weight becomes a photon-loss jump).
//! - `k_plus`: erroneous `|+>` admixture scattered by the second atom level
//!   when the dispersive phase is off from pi.
//! - `k_d`: failed target-atom transfer amplitude (population left behind).
//! - `delta`: detector-basis misalignment phase.
//! - `detector_efficiency`: probability that a present photon clicks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, add_outer, kron, C0, C1};
use crate::qstate::{LocalOperator, Projector, QstateError, RandomSource, StateVector, PRUNE_EPS};

pub const ATOM_DIM: usize = 6;
pub const PHOTON_DIM: usize = 3;

/// Energy levels of the control atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaLevel {
    A,
    B,
    C,
}

/// Energy levels of the target atom. `F` is the shelving level used to
/// protect transferred population during the second transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaLevel {
    D,
    E,
    F,
}

/// Zeeman (magnetic) sublevel; this is where the qubit lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeemanIndex {
    Zero,
    One,
}

impl ZeemanIndex {
    pub fn index(self) -> usize {
        match self {
            ZeemanIndex::Zero => 0,
            ZeemanIndex::One => 1,
        }
    }
}

/// Common trait for the two atoms' level enums. Pulse factories are generic
/// over it, which also pins both pulse levels to the same atom at compile
/// time.
pub trait AtomLevel: Copy + Eq + std::fmt::Debug {
    fn index(self) -> usize;
}

impl AtomLevel for AlphaLevel {
    fn index(self) -> usize {
        match self {
            AlphaLevel::A => 0,
            AlphaLevel::B => 1,
            AlphaLevel::C => 2,
        }
    }
}

impl AtomLevel for BetaLevel {
    fn index(self) -> usize {
        match self {
            BetaLevel::D => 0,
            BetaLevel::E => 1,
            BetaLevel::F => 2,
        }
    }
}

/// Flat index of `(level, zeeman)` within a 6-dimensional atom register.
pub fn atom_index(level: impl AtomLevel, z: ZeemanIndex) -> usize {
    level.index() * 2 + z.index()
}

/// Photon register basis: vacuum and the two channel modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonMode {
    Vac,
    M1,
    M2,
}

impl PhotonMode {
    pub fn index(self) -> usize {
        match self {
            PhotonMode::Vac => 0,
            PhotonMode::M1 => 1,
            PhotonMode::M2 => 2,
        }
    }

    pub fn ket(self) -> [Complex64; 3] {
        let mut v = [C0; 3];
        v[self.index()] = C1;
        v
    }
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn vac_ket() -> [Complex64; 3] {
    PhotonMode::Vac.ket()
}

/// `(|m1> + |m2>)/sqrt(2)` - the mode the first atom level always produces.
pub fn plus_ket() -> [Complex64; 3] {
    [C0, Complex64::new(SQRT_HALF, 0.0), Complex64::new(SQRT_HALF, 0.0)]
}

/// `(|m1> - |m2>)/sqrt(2)`.
pub fn minus_ket() -> [Complex64; 3] {
    [C0, Complex64::new(SQRT_HALF, 0.0), Complex64::new(-SQRT_HALF, 0.0)]
}

/// Detector eigenstates behind the final beam splitter, misaligned by the
/// phase `delta`. The mirror alignment is calibrated so that, combined with
/// the sign-free scattering convention of [`alpha_scatter`], a D1 click is
/// the record that needs the sign of the control atom's second level fixed.
pub fn detector_kets(delta: f64) -> ([Complex64; 3], [Complex64; 3]) {
    let plus = plus_ket();
    let minus = minus_ket();
    let phase = Complex64::from_polar(1.0, delta);
    let mut d1 = [C0; 3];
    let mut d2 = [C0; 3];
    for k in 0..3 {
        d1[k] = (plus[k] - phase * minus[k]) * SQRT_HALF;
        d2[k] = (plus[k] + phase * minus[k]) * SQRT_HALF;
    }
    (d1, d2)
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("pulse needs two distinct levels")]
    SameLevel,
    #[error("dispersive interaction cannot target the vacuum mode")]
    VacuumMode,
    #[error("dispersive phase {phi} is degenerate: no |-> component is produced")]
    DegeneratePhase { phi: f64 },
    #[error("zero detuning")]
    ZeroDetuning,
    #[error("noise model out of range: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    State(#[from] QstateError),
}

/// The parameterized error family of one transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub eta: Complex64,
    pub zeta: Complex64,
    pub delta: f64,
    pub k_plus: Complex64,
    pub k_d: Complex64,
    pub detector_efficiency: f64,
}

impl NoiseModel {
    /// No attenuation, no scattering errors, aligned detectors, unit
    /// efficiency.
    pub fn ideal() -> Self {
        Self {
            eta: C1,
            zeta: C1,
            delta: 0.0,
            k_plus: C0,
            k_d: C0,
            detector_efficiency: 1.0,
        }
    }

    pub fn new(
        eta: Complex64,
        zeta: Complex64,
        delta: f64,
        k_plus: Complex64,
        k_d: Complex64,
        detector_efficiency: f64,
    ) -> Result<Self, DeviceError> {
        let m = Self {
            eta,
            zeta,
            delta,
            k_plus,
            k_d,
            detector_efficiency,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let finite = |c: Complex64| c.re.is_finite() && c.im.is_finite();
        if !finite(self.eta) || !finite(self.zeta) || !finite(self.k_plus) || !finite(self.k_d) {
            return Err(DeviceError::InvalidNoise("non-finite parameter".into()));
        }
        if !self.delta.is_finite() {
            return Err(DeviceError::InvalidNoise("non-finite delta".into()));
        }
        if self.eta.norm() > 1.0 + 1e-12 {
            return Err(DeviceError::InvalidNoise(format!(
                "|eta| = {} exceeds 1",
                self.eta.norm()
            )));
        }
        if self.zeta.norm() > 1.0 + 1e-12 {
            return Err(DeviceError::InvalidNoise(format!(
                "|zeta| = {} exceeds 1",
                self.zeta.norm()
            )));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(DeviceError::InvalidNoise(format!(
                "detector_efficiency = {} outside (0, 1]",
                self.detector_efficiency
            )));
        }
        Ok(())
    }
}

/// Dispersive-interaction parameters: coupling g, detuning, interaction
/// time. The conditional phase is `g^2 T / detuning`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveParams {
    pub coupling: f64,
    pub detuning: f64,
    pub interaction_time: f64,
}

/// Conditional phase accumulated over the interaction time.
pub fn phase_from_dispersive(p: &DispersiveParams) -> Result<f64, DeviceError> {
    if p.detuning == 0.0 {
        return Err(DeviceError::ZeroDetuning);
    }
    let phi = p.coupling * p.coupling * p.interaction_time / p.detuning;
    if !phi.is_finite() {
        return Err(DeviceError::InvalidNoise("non-finite phase".into()));
    }
    Ok(phi)
}

/// `|+>`-admixture produced by the second atom level when the dispersive
/// phase is `phi` instead of pi, with the beam splitter calibrated so the
/// first level always emits `|+>`. The emitted photon is
/// `e^{i phi/2} (cos(phi/2) |+> + i sin(phi/2) |->)`, so the ratio is
/// `k = (e^{i phi} + 1) / (e^{i phi} - 1)`. Singular at phi = 0 (mod 2 pi),
/// where no `|->` component exists.
pub fn k_plus_from_phase(phi: f64) -> Result<Complex64, DeviceError> {
    let e = Complex64::from_polar(1.0, phi);
    let denom = e - C1;
    if denom.norm() < 1e-9 {
        return Err(DeviceError::DegeneratePhase { phi });
    }
    Ok((e + C1) / denom)
}

fn expect_op(targets: Vec<String>, matrix: Vec<Complex64>, unitary: bool) -> LocalOperator {
    LocalOperator::new(targets, matrix, unitary).expect("operator valid by construction")
}

/// Linear pi/2 pulse between two levels of one atom, identical on both
/// Zeeman sublevels: `|x> -> (|x>+|y>)/sqrt(2)`, `|y> -> (|y>-|x>)/sqrt(2)`.
pub fn pulse_pi_half<L: AtomLevel>(target: &str, x: L, y: L) -> Result<LocalOperator, DeviceError> {
    if x == y {
        return Err(DeviceError::SameLevel);
    }
    let mut m = linalg::identity(ATOM_DIM);
    let s = Complex64::new(SQRT_HALF, 0.0);
    for z in 0..2 {
        let xi = x.index() * 2 + z;
        let yi = y.index() * 2 + z;
        m[xi * ATOM_DIM + xi] = s;
        m[yi * ATOM_DIM + xi] = s;
        m[xi * ATOM_DIM + yi] = -s;
        m[yi * ATOM_DIM + yi] = s;
    }
    Ok(expect_op(vec![target.to_string()], m, true))
}

/// Linear pi pulse: `|x> -> |y>`, `|y> -> -|x>`, Zeeman-independent.
pub fn pulse_pi<L: AtomLevel>(target: &str, x: L, y: L) -> Result<LocalOperator, DeviceError> {
    if x == y {
        return Err(DeviceError::SameLevel);
    }
    let mut m = linalg::identity(ATOM_DIM);
    for z in 0..2 {
        let xi = x.index() * 2 + z;
        let yi = y.index() * 2 + z;
        m[xi * ATOM_DIM + xi] = C0;
        m[yi * ATOM_DIM + yi] = C0;
        m[yi * ATOM_DIM + xi] = C1;
        m[xi * ATOM_DIM + yi] = -C1;
    }
    Ok(expect_op(vec![target.to_string()], m, true))
}

/// Interchange the two Zeeman amplitudes of one level, identity elsewhere.
pub fn zeeman_swap<L: AtomLevel>(target: &str, level: L) -> LocalOperator {
    let mut m = linalg::identity(ATOM_DIM);
    let i0 = level.index() * 2;
    let i1 = i0 + 1;
    m[i0 * ATOM_DIM + i0] = C0;
    m[i1 * ATOM_DIM + i1] = C0;
    m[i0 * ATOM_DIM + i1] = C1;
    m[i1 * ATOM_DIM + i0] = C1;
    expect_op(vec![target.to_string()], m, true)
}

/// Sign flip of one level (both Zeeman sublevels), identity elsewhere.
pub fn sign_flip<L: AtomLevel>(target: &str, level: L) -> LocalOperator {
    let mut m = linalg::identity(ATOM_DIM);
    for z in 0..2 {
        let i = level.index() * 2 + z;
        m[i * ATOM_DIM + i] = -C1;
    }
    expect_op(vec![target.to_string()], m, true)
}

/// Interchange `|x_z> <-> |y_z>` for a single Zeeman index, identity
/// elsewhere. This deliberately breaks the horizontal symmetry; it is the
/// diagonal-selection pulse of the extraction step.
pub fn zeeman_selective_swap<L: AtomLevel>(
    target: &str,
    x: L,
    y: L,
    z: ZeemanIndex,
) -> Result<LocalOperator, DeviceError> {
    if x == y {
        return Err(DeviceError::SameLevel);
    }
    let mut m = linalg::identity(ATOM_DIM);
    let xi = x.index() * 2 + z.index();
    let yi = y.index() * 2 + z.index();
    m[xi * ATOM_DIM + xi] = C0;
    m[yi * ATOM_DIM + yi] = C0;
    m[xi * ATOM_DIM + yi] = C1;
    m[yi * ATOM_DIM + xi] = C1;
    Ok(expect_op(vec![target.to_string()], m, true))
}

/// Projector onto one level of an atom register (both Zeeman sublevels).
pub fn level_projector<L: AtomLevel>(label: &str, target: &str, level: L) -> Projector {
    let i = level.index() * 2;
    Projector::on_indices(label, target, ATOM_DIM, &[i, i + 1])
        .expect("projector valid by construction")
}

/// Conditional phase `e^{i phi}` on (atom in `level`) x (photon in `mode`),
/// identity elsewhere. This is the raw dispersive interaction in the
/// physical-mode picture; the scattering maps fold it into the +/- basis.
pub fn dispersive_phase<L: AtomLevel>(
    atom: &str,
    level: L,
    photon: &str,
    mode: PhotonMode,
    phi: f64,
) -> Result<LocalOperator, DeviceError> {
    if mode == PhotonMode::Vac {
        return Err(DeviceError::VacuumMode);
    }
    let n = ATOM_DIM * PHOTON_DIM;
    let mut m = linalg::identity(n);
    let phase = Complex64::from_polar(1.0, phi);
    for z in 0..2 {
        let i = (level.index() * 2 + z) * PHOTON_DIM + mode.index();
        m[i * n + i] = phase;
    }
    Ok(expect_op(vec![atom.to_string(), photon.to_string()], m, true))
}

/// Unitary photon-mode basis change `|m1> -> |+>`, `|m2> -> |->`.
pub fn pm_basis_change(photon: &str) -> LocalOperator {
    let mut m = vec![C0; 9];
    add_outer(3, &mut m, C1, &vac_ket(), &vac_ket());
    add_outer(3, &mut m, C1, &plus_ket(), &PhotonMode::M1.ket());
    add_outer(3, &mut m, C1, &minus_ket(), &PhotonMode::M2.ket());
    expect_op(vec![photon.to_string()], m, true)
}

/// Unitary basis change `|m1> -> |D1>`, `|m2> -> |D2>` for misalignment
/// `delta`.
pub fn detector_basis_change(photon: &str, delta: f64) -> LocalOperator {
    let (d1, d2) = detector_kets(delta);
    let mut m = vec![C0; 9];
    add_outer(3, &mut m, C1, &vac_ket(), &vac_ket());
    add_outer(3, &mut m, C1, &d1, &PhotonMode::M1.ket());
    add_outer(3, &mut m, C1, &d2, &PhotonMode::M2.ket());
    expect_op(vec![photon.to_string()], m, true)
}

/// Fresh-photon injection: `|vac> -> |+>` (unitary completion on the rest of
/// the photon space; it is only ever applied to vacuum).
pub fn inject_photon(photon: &str) -> LocalOperator {
    let mut m = vec![C0; 9];
    add_outer(3, &mut m, C1, &plus_ket(), &vac_ket());
    add_outer(3, &mut m, -C1, &vac_ket(), &plus_ket());
    add_outer(3, &mut m, C1, &minus_ket(), &minus_ket());
    expect_op(vec![photon.to_string()], m, true)
}

/// Photon mode swap `|m1> <-> |m2>` (equivalently a sign flip of `|->`).
pub fn photon_mode_swap(photon: &str) -> LocalOperator {
    let mut m = vec![C0; 9];
    add_outer(3, &mut m, C1, &vac_ket(), &vac_ket());
    add_outer(3, &mut m, C1, &PhotonMode::M2.ket(), &PhotonMode::M1.ket());
    add_outer(3, &mut m, C1, &PhotonMode::M1.ket(), &PhotonMode::M2.ket());
    expect_op(vec![photon.to_string()], m, true)
}

fn projector_on_levels(levels: &[usize]) -> Vec<Complex64> {
    let mut m = vec![C0; ATOM_DIM * ATOM_DIM];
    for &l in levels {
        for z in 0..2 {
            let i = l * 2 + z;
            m[i * ATOM_DIM + i] = C1;
        }
    }
    m
}

/// Scattering of the photon off the control atom, expressed directly in the
/// +/- photon basis with the calibration that level `a` always produces
/// `|+>`. Level `b` rotates `|+>` into
/// `(|-> + k_plus |+>) / sqrt(1 + |k_plus|^2)`; the orthogonal completion
/// makes the whole map unitary. Levels `a` and `c` leave the photon alone.
/// Both Zeeman sublevels are treated identically. Targets: `[alpha, photon]`.
pub fn alpha_scatter(alpha: &str, photon: &str, noise: &NoiseModel) -> LocalOperator {
    let k = noise.k_plus;
    let n = (1.0 + k.norm_sqr()).sqrt();
    let mut u_b = vec![C0; 9];
    add_outer(3, &mut u_b, C1, &vac_ket(), &vac_ket());
    add_outer(3, &mut u_b, k / n, &plus_ket(), &plus_ket());
    add_outer(3, &mut u_b, C1 / n, &minus_ket(), &plus_ket());
    add_outer(3, &mut u_b, C1 / n, &plus_ket(), &minus_ket());
    add_outer(3, &mut u_b, -k.conj() / n, &minus_ket(), &minus_ket());

    let mut m = kron(ATOM_DIM, &projector_on_levels(&[0, 2]), PHOTON_DIM, &linalg::identity(3));
    linalg::add_assign(
        &mut m,
        &kron(ATOM_DIM, &projector_on_levels(&[1]), PHOTON_DIM, &u_b),
    );
    expect_op(vec![alpha.to_string(), photon.to_string()], m, true)
}

/// Scattering of the photon off the target atom, including the surrounding
/// pi/2 pulses: `|+>|d_i>` is untouched, `|->|d_i>` goes to
/// `|-> (k_d |d_i> + |e_i>) / sqrt(1 + |k_d|^2)` (unitary completion on the
/// `(d, e)` block), the shelving level `f` and the vacuum are untouched.
/// Targets: `[beta, photon]`.
pub fn beta_scatter(beta: &str, photon: &str, noise: &NoiseModel) -> LocalOperator {
    let k = noise.k_d;
    let n = (1.0 + k.norm_sqr()).sqrt();
    // atom action on the |-> component: rotation on (d, e), identity on f
    let mut u_de = projector_on_levels(&[2]);
    for z in 0..2 {
        let di = z; // level d = 0
        let ei = 2 + z; // level e = 1
        u_de[di * ATOM_DIM + di] = k / n;
        u_de[ei * ATOM_DIM + di] = C1 / n;
        u_de[di * ATOM_DIM + ei] = C1 / n;
        u_de[ei * ATOM_DIM + ei] = -k.conj() / n;
    }

    let mut passthrough = vec![C0; 9];
    add_outer(3, &mut passthrough, C1, &vac_ket(), &vac_ket());
    add_outer(3, &mut passthrough, C1, &plus_ket(), &plus_ket());
    let mut minus_only = vec![C0; 9];
    add_outer(3, &mut minus_only, C1, &minus_ket(), &minus_ket());

    let mut m = kron(ATOM_DIM, &linalg::identity(ATOM_DIM), PHOTON_DIM, &passthrough);
    linalg::add_assign(&mut m, &kron(ATOM_DIM, &u_de, PHOTON_DIM, &minus_only));
    expect_op(vec![beta.to_string(), photon.to_string()], m, true)
}

/// Jump decomposition of one channel traversal. The no-jump piece
/// attenuates `|+>` by eta and `|->` by zeta; each jump operator absorbs the
/// photon from one channel into the vacuum, carrying the lost weight. The
/// three pieces satisfy `K0^d K0 + L+^d L+ + L-^d L- = I`, so branch
/// probabilities always sum to one.
#[derive(Debug, Clone)]
pub struct ChannelKraus {
    pub no_jump: LocalOperator,
    pub jump_plus: LocalOperator,
    pub jump_minus: LocalOperator,
}

pub fn channel(photon: &str, noise: &NoiseModel) -> ChannelKraus {
    let mut k0 = vec![C0; 9];
    add_outer(3, &mut k0, C1, &vac_ket(), &vac_ket());
    add_outer(3, &mut k0, noise.eta, &plus_ket(), &plus_ket());
    add_outer(3, &mut k0, noise.zeta, &minus_ket(), &minus_ket());

    let loss_plus = (1.0 - noise.eta.norm_sqr()).max(0.0).sqrt();
    let loss_minus = (1.0 - noise.zeta.norm_sqr()).max(0.0).sqrt();
    let mut lp = vec![C0; 9];
    add_outer(3, &mut lp, Complex64::new(loss_plus, 0.0), &vac_ket(), &plus_ket());
    let mut lm = vec![C0; 9];
    add_outer(3, &mut lm, Complex64::new(loss_minus, 0.0), &vac_ket(), &minus_ket());

    ChannelKraus {
        no_jump: expect_op(vec![photon.to_string()], k0, false),
        jump_plus: expect_op(vec![photon.to_string()], lp, false),
        jump_minus: expect_op(vec![photon.to_string()], lm, false),
    }
}

/// Which detector fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorPort {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectOutcome {
    Click(DetectorPort),
    NoClick,
}

/// Complete branch list for photon detection: project onto the detector
/// basis, weight clicks by the detector efficiency, and absorb the photon
/// (register returns to vacuum) in every branch. An inefficient detector
/// absorbs the photon without a record; that and a photon already in the
/// vacuum both surface as `NoClick`. Several entries may share the
/// `NoClick` label - they are distinct physical branches.
pub fn detect_branches(
    state: &StateVector,
    photon: &str,
    noise: &NoiseModel,
) -> Result<Vec<(DetectOutcome, f64, StateVector)>, DeviceError> {
    let (d1, d2) = detector_kets(noise.delta);
    let span = |label: &str, v: &[Complex64; 3]| {
        Projector::from_span(label, vec![photon.to_string()], &[v.to_vec()])
    };
    let p_d1 = span("D1", &d1)?;
    let p_d2 = span("D2", &d2)?;
    let p_vac = span("vac", &vac_ket())?;

    let absorb = |v: &[Complex64; 3]| {
        let mut m = vec![C0; 9];
        add_outer(3, &mut m, C1, &vac_ket(), v);
        expect_op(vec![photon.to_string()], m, false)
    };
    let eff = noise.detector_efficiency;

    let mut out = Vec::new();
    let mut push = |outcome: DetectOutcome, p: f64, s: StateVector| {
        if p > PRUNE_EPS {
            out.push((outcome, p, s));
        }
    };
    for (port, proj, ket) in [
        (DetectorPort::D1, &p_d1, &d1),
        (DetectorPort::D2, &p_d2, &d2),
    ] {
        let projected = proj.apply(state)?;
        let p = projected.norm_sqr();
        if p <= PRUNE_EPS {
            continue;
        }
        let collapsed = projected.normalized()?.apply(&absorb(ket))?;
        push(DetectOutcome::Click(port), eff * p, collapsed.clone());
        push(DetectOutcome::NoClick, (1.0 - eff) * p, collapsed);
    }
    let vac_projected = p_vac.apply(state)?;
    let p = vac_projected.norm_sqr();
    if p > PRUNE_EPS {
        push(DetectOutcome::NoClick, p, vac_projected.normalized()?);
    }
    Ok(out)
}

/// Sampled photon detection; collapses and renormalizes, photon absorbed.
pub fn detect(
    state: &StateVector,
    photon: &str,
    noise: &NoiseModel,
    rng: &mut RandomSource,
) -> Result<(DetectOutcome, StateVector), DeviceError> {
    let branches = detect_branches(state, photon, noise)?;
    let weights: Vec<f64> = branches.iter().map(|(_, p, _)| *p).collect();
    let k = rng.choose(&weights);
    let (outcome, _, state) = branches.into_iter().nth(k).expect("non-empty branch list");
    Ok((outcome, state))
}
