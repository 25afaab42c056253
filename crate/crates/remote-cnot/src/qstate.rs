//! Dense pure-state engine over small labeled composite Hilbert spaces.
//!
//! A [`RegisterLayout`] names an ordered list of subsystems; a
//! [`StateVector`] holds the complex amplitudes over their row-major tensor
//! product. Operations never mutate in place - they return new states - so
//! values can be moved or shared across threads freely. Squared norms below
//! one are legal: non-unitary maps (attenuation, jump operators) shrink the
//! norm and the lost weight is the jump probability; collapse renormalizes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, C0, C1};

/// Complex probability amplitude.
pub type Amplitude = Complex64;

/// Tolerance for unitarity and idempotence checks.
pub const UNITARY_TOL: f64 = 1e-12;
/// Tolerance for projector-family completeness and probability sums.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Tolerance for end-to-end branch probability sums.
pub const BRANCH_SUM_TOL: f64 = 1e-9;
/// Measurement branches below this probability are dropped.
pub const PRUNE_EPS: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum QstateError {
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("basis index {index} out of range for subsystem `{subsystem}` (dim {dim})")]
    IndexOutOfRange {
        subsystem: String,
        index: usize,
        dim: usize,
    },
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("subsystem `{label}` has dimension {dim}; need at least 2")]
    BadDimension { label: String, dim: usize },
    #[error("layout must contain at least one subsystem")]
    EmptyLayout,
    #[error("expected {expected} indices/amplitudes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operator matrix spans dimension {got} but its targets span {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator flagged unitary fails U\u{2020}U = I beyond {UNITARY_TOL:.0e}")]
    NotUnitary,
    #[error("repeated target `{0}` in operator")]
    RepeatedTarget(String),
    #[error("state layouts differ")]
    LayoutMismatch,
    #[error("zero-norm state")]
    ZeroNorm,
    #[error("projector family mixes different targets")]
    ProjectorFamilyMismatch,
    #[error("projector family is not pairwise orthogonal (residual {residual:.3e})")]
    NonOrthogonalProjectors { residual: f64 },
    #[error("projector family incomplete on the state (residual weight {residual:.3e})")]
    IncompleteProjectors { residual: f64 },
    #[error("span vectors are not orthonormal (residual {residual:.3e})")]
    NonOrthonormalSpan { residual: f64 },
    #[error("malformed ancilla table: {0}")]
    MalformedAncillaTable(String),
    #[error("non-finite amplitude produced")]
    NonFinite,
}

/// Ordered list of `(label, dimension)` subsystems defining the tensor
/// structure. Flat indices are row-major over this order, so the last
/// subsystem varies fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    subsystems: Vec<(String, usize)>,
}

impl RegisterLayout {
    pub fn new(subsystems: &[(&str, usize)]) -> Result<Self, QstateError> {
        if subsystems.is_empty() {
            return Err(QstateError::EmptyLayout);
        }
        let mut seen: Vec<&str> = Vec::new();
        for (label, dim) in subsystems {
            if *dim < 2 {
                return Err(QstateError::BadDimension {
                    label: label.to_string(),
                    dim: *dim,
                });
            }
            if seen.contains(label) {
                return Err(QstateError::DuplicateLabel(label.to_string()));
            }
            seen.push(label);
        }
        Ok(Self {
            subsystems: subsystems
                .iter()
                .map(|(l, d)| (l.to_string(), *d))
                .collect(),
        })
    }

    pub fn subsystems(&self) -> &[(String, usize)] {
        &self.subsystems
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|(_, d)| d).product()
    }

    pub fn position(&self, label: &str) -> Result<usize, QstateError> {
        self.subsystems
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| QstateError::UnknownSubsystem(label.to_string()))
    }

    pub fn dim(&self, label: &str) -> Result<usize, QstateError> {
        Ok(self.subsystems[self.position(label)?].1)
    }

    /// Row-major stride of the subsystem at `pos`.
    pub fn stride_at(&self, pos: usize) -> usize {
        self.subsystems[pos + 1..].iter().map(|(_, d)| d).product()
    }

    pub fn flat_index(&self, indices: &[usize]) -> Result<usize, QstateError> {
        if indices.len() != self.subsystems.len() {
            return Err(QstateError::LengthMismatch {
                expected: self.subsystems.len(),
                got: indices.len(),
            });
        }
        let mut flat = 0;
        for (k, ((label, dim), idx)) in self.subsystems.iter().zip(indices).enumerate() {
            if idx >= dim {
                return Err(QstateError::IndexOutOfRange {
                    subsystem: label.clone(),
                    index: *idx,
                    dim: *dim,
                });
            }
            flat += idx * self.stride_at(k);
        }
        Ok(flat)
    }

    /// Per-subsystem indices of a flat index.
    pub fn decode(&self, flat: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.subsystems.len());
        let mut rem = flat;
        for k in 0..self.subsystems.len() {
            let stride = self.stride_at(k);
            out.push(rem / stride);
            rem %= stride;
        }
        out
    }

    /// Sub-index of the subsystem at `pos` within a flat index.
    pub fn index_at(&self, flat: usize, pos: usize) -> usize {
        (flat / self.stride_at(pos)) % self.subsystems[pos].1
    }

    /// New layout with extra subsystems appended.
    pub fn extended(&self, extra: &[(&str, usize)]) -> Result<Self, QstateError> {
        let mut all: Vec<(&str, usize)> = self
            .subsystems
            .iter()
            .map(|(l, d)| (l.as_str(), *d))
            .collect();
        all.extend_from_slice(extra);
        Self::new(&all)
    }
}

/// An operator acting on one or more named subsystems: `I x ... x M x ... x I`
/// with `M` given row-major over the product of the target dimensions, in
/// target order. `unitary` is a declared property checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    targets: Vec<String>,
    dim: usize,
    matrix: Vec<Complex64>,
    unitary: bool,
}

impl LocalOperator {
    pub fn new(
        targets: Vec<String>,
        matrix: Vec<Complex64>,
        unitary: bool,
    ) -> Result<Self, QstateError> {
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(QstateError::RepeatedTarget(t.clone()));
            }
        }
        let dim = (0..).find(|d| d * d >= matrix.len()).unwrap_or(0);
        if dim * dim != matrix.len() || dim == 0 {
            return Err(QstateError::LengthMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        if matrix.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QstateError::NonFinite);
        }
        if unitary {
            let gram = linalg::matmul(dim, &linalg::adjoint(dim, &matrix), &matrix);
            if linalg::max_abs_diff(&gram, &linalg::identity(dim)) > UNITARY_TOL {
                return Err(QstateError::NotUnitary);
            }
        }
        Ok(Self {
            targets,
            dim,
            matrix,
            unitary,
        })
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// `self` composed after `first` (same targets, same order).
    pub fn after(&self, first: &LocalOperator) -> Result<LocalOperator, QstateError> {
        if self.targets != first.targets || self.dim != first.dim {
            return Err(QstateError::ProjectorFamilyMismatch);
        }
        LocalOperator::new(
            self.targets.clone(),
            linalg::matmul(self.dim, &self.matrix, &first.matrix),
            self.unitary && first.unitary,
        )
    }
}

/// Pure state: layout plus flat amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Unit-norm computational basis ket with the given per-subsystem indices.
    pub fn basis_state(layout: &RegisterLayout, indices: &[usize]) -> Result<Self, QstateError> {
        let flat = layout.flat_index(indices)?;
        let mut amps = vec![C0; layout.total_dim()];
        amps[flat] = C1;
        Ok(Self {
            layout: layout.clone(),
            amps,
        })
    }

    pub fn from_amplitudes(
        layout: &RegisterLayout,
        amps: Vec<Complex64>,
    ) -> Result<Self, QstateError> {
        if amps.len() != layout.total_dim() {
            return Err(QstateError::LengthMismatch {
                expected: layout.total_dim(),
                got: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QstateError::NonFinite);
        }
        Ok(Self {
            layout: layout.clone(),
            amps,
        })
    }

    /// Product state from one amplitude vector per subsystem.
    pub fn product_state(
        layout: &RegisterLayout,
        factors: &[Vec<Complex64>],
    ) -> Result<Self, QstateError> {
        if factors.len() != layout.subsystems().len() {
            return Err(QstateError::LengthMismatch {
                expected: layout.subsystems().len(),
                got: factors.len(),
            });
        }
        for ((label, dim), f) in layout.subsystems().iter().zip(factors) {
            if f.len() != *dim {
                return Err(QstateError::IndexOutOfRange {
                    subsystem: label.clone(),
                    index: f.len(),
                    dim: *dim,
                });
            }
        }
        let total = layout.total_dim();
        let mut amps = vec![C1; total];
        for (flat, amp) in amps.iter_mut().enumerate() {
            let idx = layout.decode(flat);
            for (k, f) in factors.iter().enumerate() {
                *amp *= f[idx[k]];
            }
        }
        Self::from_amplitudes(layout, amps)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, indices: &[usize]) -> Result<Complex64, QstateError> {
        Ok(self.amps[self.layout.flat_index(indices)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self, QstateError> {
        let n = self.norm_sqr();
        if n <= 0.0 || !n.is_finite() {
            return Err(QstateError::ZeroNorm);
        }
        let scale = 1.0 / n.sqrt();
        Ok(Self {
            layout: self.layout.clone(),
            amps: self.amps.iter().map(|a| a * scale).collect(),
        })
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64, QstateError> {
        if self.layout != other.layout {
            return Err(QstateError::LayoutMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Apply `I x ... x M x ... x I`. Unitary operators preserve the squared
    /// norm to machine precision.
    pub fn apply(&self, op: &LocalOperator) -> Result<Self, QstateError> {
        let positions: Vec<usize> = op
            .targets()
            .iter()
            .map(|t| self.layout.position(t))
            .collect::<Result<_, _>>()?;
        let dims: Vec<usize> = positions.iter().map(|&p| self.layout.subsystems[p].1).collect();
        let span: usize = dims.iter().product();
        if span != op.dim() {
            return Err(QstateError::DimensionMismatch {
                expected: span,
                got: op.dim(),
            });
        }
        let strides: Vec<usize> = positions.iter().map(|&p| self.layout.stride_at(p)).collect();
        // offset of the j-th joint target index, row-major in target order
        let mut offsets = vec![0usize; span];
        for (j, off) in offsets.iter_mut().enumerate() {
            let mut rem = j;
            for k in (0..dims.len()).rev() {
                *off += (rem % dims[k]) * strides[k];
                rem /= dims[k];
            }
        }
        let total = self.amps.len();
        let mut out = vec![C0; total];
        let m = op.matrix();
        for base in 0..total {
            if (0..positions.len()).any(|k| !(base / strides[k]).is_multiple_of(dims[k])) {
                continue;
            }
            for r in 0..span {
                let mut acc = C0;
                for c in 0..span {
                    let e = m[r * span + c];
                    if e != C0 {
                        acc += e * self.amps[base + offsets[c]];
                    }
                }
                out[base + offsets[r]] = acc;
            }
        }
        Self::from_amplitudes(&self.layout, out)
    }

    /// Total squared amplitude on basis states whose sub-index for `label`
    /// satisfies the predicate.
    pub fn subsystem_weight(
        &self,
        label: &str,
        pred: impl Fn(usize) -> bool,
    ) -> Result<f64, QstateError> {
        let pos = self.layout.position(label)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(flat, _)| pred(self.layout.index_at(*flat, pos)))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    pub fn dump(&self) -> StateDump {
        StateDump {
            layout: self.layout.subsystems.clone(),
            amplitudes: self
                .amps
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != C0)
                .map(|(i, a)| (i, a.re, a.im))
                .collect(),
        }
    }
}

/// Serializable sparse dump: layout descriptor plus `(index, re, im)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub layout: Vec<(String, usize)>,
    pub amplitudes: Vec<(usize, f64, f64)>,
}

impl StateDump {
    pub fn restore(&self) -> Result<StateVector, QstateError> {
        let subs: Vec<(&str, usize)> = self.layout.iter().map(|(l, d)| (l.as_str(), *d)).collect();
        let layout = RegisterLayout::new(&subs)?;
        let mut amps = vec![C0; layout.total_dim()];
        for (i, re, im) in &self.amplitudes {
            if *i >= amps.len() {
                return Err(QstateError::LengthMismatch {
                    expected: amps.len(),
                    got: *i,
                });
            }
            amps[*i] = Complex64::new(*re, *im);
        }
        StateVector::from_amplitudes(&layout, amps)
    }
}

/// `|<x|y>|^2 / (|x|^2 |y|^2)`: squared overlap of the normalized states.
/// Insensitive to global phase and overall scale.
pub fn fidelity(x: &StateVector, y: &StateVector) -> Result<f64, QstateError> {
    let nx = x.norm_sqr();
    let ny = y.norm_sqr();
    if nx <= 0.0 || ny <= 0.0 {
        return Err(QstateError::ZeroNorm);
    }
    let overlap = x.inner(y)?;
    Ok((overlap.norm_sqr() / (nx * ny)).min(1.0))
}

/// How a new ancilla block correlates with the existing register.
///
/// `Product` attaches the same ancilla amplitude vector to every existing
/// basis state. `PerIndex` gives one (unit-norm) ancilla vector per existing
/// flat index, which can entangle the ancilla with the old register without
/// changing any existing weights.
pub enum AncillaTable {
    Product(Vec<Complex64>),
    PerIndex(Vec<Vec<Complex64>>),
}

/// Extend the register with ancilla subsystems appended after the existing
/// ones. Existing amplitudes are redistributed over the ancilla block by the
/// table's unit-norm rows, so the old register's weights are untouched.
pub fn attach_ancilla(
    state: &StateVector,
    ancilla: &[(&str, usize)],
    table: &AncillaTable,
) -> Result<StateVector, QstateError> {
    let layout = state.layout().extended(ancilla)?;
    let anc_dim: usize = ancilla.iter().map(|(_, d)| d).product();
    let old_dim = state.amplitudes().len();

    let row_ok = |row: &[Complex64]| -> Result<(), QstateError> {
        if row.len() != anc_dim {
            return Err(QstateError::MalformedAncillaTable(format!(
                "row has {} amplitudes, ancilla block spans {}",
                row.len(),
                anc_dim
            )));
        }
        let n: f64 = row.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > COMPLETENESS_TOL {
            return Err(QstateError::MalformedAncillaTable(format!(
                "row norm^2 = {n}; rows must be unit norm"
            )));
        }
        Ok(())
    };
    match table {
        AncillaTable::Product(row) => row_ok(row)?,
        AncillaTable::PerIndex(rows) => {
            if rows.len() != old_dim {
                return Err(QstateError::MalformedAncillaTable(format!(
                    "{} rows for {} basis states",
                    rows.len(),
                    old_dim
                )));
            }
            for row in rows {
                row_ok(row)?;
            }
        }
    }

    let mut amps = vec![C0; layout.total_dim()];
    for (i, a) in state.amplitudes().iter().enumerate() {
        if *a == C0 {
            continue;
        }
        let row = match table {
            AncillaTable::Product(row) => row,
            AncillaTable::PerIndex(rows) => &rows[i],
        };
        for (j, t) in row.iter().enumerate() {
            amps[i * anc_dim + j] = a * t;
        }
    }
    StateVector::from_amplitudes(&layout, amps)
}

/// Orthogonal projector on one or more named subsystems.
#[derive(Debug, Clone)]
pub struct Projector {
    pub label: String,
    op: LocalOperator,
}

impl Projector {
    /// Diagonal projector keeping the listed basis indices of one subsystem.
    pub fn on_indices(
        label: &str,
        target: &str,
        dim: usize,
        kept: &[usize],
    ) -> Result<Self, QstateError> {
        let mut m = vec![C0; dim * dim];
        for &k in kept {
            if k >= dim {
                return Err(QstateError::IndexOutOfRange {
                    subsystem: target.to_string(),
                    index: k,
                    dim,
                });
            }
            m[k * dim + k] = C1;
        }
        Ok(Self {
            label: label.to_string(),
            op: LocalOperator::new(vec![target.to_string()], m, false)?,
        })
    }

    /// Rank-k projector onto the span of orthonormal joint vectors over the
    /// given targets (row-major in target order).
    pub fn from_span(
        label: &str,
        targets: Vec<String>,
        vectors: &[Vec<Complex64>],
    ) -> Result<Self, QstateError> {
        let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
        if dim == 0 {
            return Err(QstateError::LengthMismatch {
                expected: 1,
                got: 0,
            });
        }
        let mut worst = 0.0f64;
        for (i, u) in vectors.iter().enumerate() {
            for (j, v) in vectors.iter().enumerate() {
                let dot: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                let expect = if i == j { C1 } else { C0 };
                worst = worst.max((dot - expect).norm());
            }
        }
        if worst > COMPLETENESS_TOL {
            return Err(QstateError::NonOrthonormalSpan { residual: worst });
        }
        let mut m = vec![C0; dim * dim];
        for v in vectors {
            linalg::add_outer(dim, &mut m, C1, v, v);
        }
        Ok(Self {
            label: label.to_string(),
            op: LocalOperator::new(targets, m, false)?,
        })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector, QstateError> {
        state.apply(&self.op)
    }

    pub fn targets(&self) -> &[String] {
        self.op.targets()
    }

    pub fn matrix(&self) -> &[Complex64] {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Squared norm of the projection: the absolute outcome probability when
    /// the state is normalized.
    pub fn weight(&self, state: &StateVector) -> Result<f64, QstateError> {
        Ok(self.apply(state)?.norm_sqr())
    }
}

/// One measurement branch: which projector fired, with what probability, and
/// the collapsed (renormalized) state.
#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    pub outcome: usize,
    pub probability: f64,
    pub state: StateVector,
}

/// How a measurement resolves: draw one branch from a seeded stream, or keep
/// every branch with its exact probability.
pub enum Branching<'a> {
    Sample(&'a mut RandomSource),
    Exhaustive,
}

/// Projective measurement over an orthogonal projector family.
///
/// The family must be pairwise orthogonal and complete on the state's
/// support (both within [`COMPLETENESS_TOL`]). Branch probabilities are the
/// squared norms of the projections; collapsed states are renormalized.
/// In sampling mode exactly one branch is returned, chosen by
/// cumulative-probability inversion over half-open intervals.
pub fn measure_subspaces(
    state: &StateVector,
    projectors: &[Projector],
    branching: Branching,
) -> Result<Vec<MeasurementBranch>, QstateError> {
    if projectors.is_empty() {
        return Err(QstateError::EmptyLayout);
    }
    let t0 = projectors[0].targets();
    let dim = projectors[0].dim();
    if projectors
        .iter()
        .any(|p| p.targets() != t0 || p.dim() != dim)
    {
        return Err(QstateError::ProjectorFamilyMismatch);
    }
    let mut worst = 0.0f64;
    for (i, p) in projectors.iter().enumerate() {
        for q in &projectors[i + 1..] {
            let prod = linalg::matmul(dim, p.matrix(), q.matrix());
            worst = worst.max(prod.iter().map(|a| a.norm()).fold(0.0, f64::max));
        }
    }
    if worst > COMPLETENESS_TOL {
        return Err(QstateError::NonOrthogonalProjectors { residual: worst });
    }

    let projected: Vec<StateVector> = projectors
        .iter()
        .map(|p| p.apply(state))
        .collect::<Result<_, _>>()?;
    // completeness on the state: the projections must reassemble it
    let mut residual = 0.0f64;
    for (flat, a) in state.amplitudes().iter().enumerate() {
        let sum: Complex64 = projected.iter().map(|s| s.amplitudes()[flat]).sum();
        residual += (sum - a).norm_sqr();
    }
    let norm = state.norm_sqr();
    if residual.sqrt() > COMPLETENESS_TOL * norm.sqrt().max(1.0) {
        return Err(QstateError::IncompleteProjectors {
            residual: residual.sqrt(),
        });
    }

    let probs: Vec<f64> = projected.iter().map(|s| s.norm_sqr()).collect();
    let branch = |outcome: usize| -> Result<MeasurementBranch, QstateError> {
        Ok(MeasurementBranch {
            outcome,
            probability: probs[outcome],
            state: projected[outcome].normalized()?,
        })
    };
    match branching {
        Branching::Exhaustive => (0..projectors.len())
            .filter(|&k| probs[k] > PRUNE_EPS)
            .map(branch)
            .collect(),
        Branching::Sample(rng) => {
            let k = rng.choose(&probs);
            Ok(vec![branch(k)?])
        }
    }
}

/// Seedable deterministic random stream. `split` derives an independent
/// stream from the same seed, so parallel trials stay reproducible
/// regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn split(&self, stream: u64) -> Self {
        Self::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Cumulative-probability inversion over half-open intervals
    /// `[low, high)`. Weights need not be normalized.
    pub fn choose(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (k, w) in weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = k;
            if u < acc {
                return k;
            }
        }
        last
    }
}
