//! Simulator for a heralded remote CNOT between two three-level atoms
//! connected by noisy single-photon channels.
//!
//! The gate acts on the Zeeman (magnetic sublevel) qubits of a control atom
//! and a target atom. Quantum information is backup-encoded across two
//! energy levels of the control atom, carried between the atoms by single
//! photons that scatter dispersively off both, and recovered by local
//! measurements and pulses. Channel attenuation, dispersive-phase errors,
//! imperfect target transfer and detector misalignment are all filtered by
//! a single post-selection step: the kept branch implements the CNOT
//! exactly, and photon loss only costs a retry.
//!
//! Module map:
//! - [`qstate`]: dense pure-state engine over small labeled registers.
//! - [`devices`]: pulses, beam-splitter bases, scattering maps, channels,
//!   detectors - operator factories parameterized by a [`devices::NoiseModel`].
//! - [`protocol`]: the full state machine (encode, two transmissions,
//!   symmetrization, post-selection, diagonal extraction, restoration).
//! - [`verify`]: independent oracles - ideal CNOT reference, exact branch
//!   enumeration, process checks, sampled-vs-exact statistics.
//! - [`cli`]: command-line front end emitting JSON/CSV.

pub mod cli;
pub mod devices;
pub mod protocol;
pub mod qstate;
pub mod verify;

pub(crate) mod linalg;
