//! Amplitude-exact simulation of multimode bosonic Fock states moving through
//! linear optical elements.
//!
//! The state representation is a sparse map from occupation-number basis
//! vectors to complex amplitudes, and every optical element acts by rewriting
//! creation operators, so interference effects (Hong-Ou-Mandel cancellation,
//! entanglement swapping) come out of the algebra exactly rather than from
//! sampling. The crate bundles:
//!
//! - [`fock`] — sparse states over (spatial mode × polarization) slots and the
//!   creation-operator ladder algebra.
//! - [`elements`] — 50/50 beamsplitters, polarizing beamsplitters and
//!   polarization-basis rotations as unitary rewrites.
//! - [`measure`] — non-number-resolving detector clicks, coincidence patterns,
//!   conditional ensembles and Bell-state fidelities.
//! - [`protocol`] — the end-to-end entanglement-concentration scheme: two
//!   identically prepared non-maximally entangled pairs interfere on two
//!   beamsplitters and a two-detector coincidence heralds a singlet pair on
//!   the surviving output modes, without ever detecting those photons.
//! - [`oracle`] — an independent permanent-based amplitude computation used to
//!   cross-validate the rewrite engine.
//! - [`dsl`] — parser and validator for the `.loc` circuit description files.
//! - [`report`] — deterministic JSON/CSV reports for the command line tools.
//!
//! ```
//! use loqsim::protocol::{ProtocolConfig, run};
//! use loqsim::measure::BellKind;
//!
//! let config = ProtocolConfig::new(BellKind::PhiPlus, std::f64::consts::FRAC_PI_4);
//! let result = run(&config).unwrap();
//! assert!((result.success_probability - 0.25).abs() < 1e-12);
//! ```

pub mod dsl;
pub mod elements;
pub mod fock;
pub mod measure;
pub mod oracle;
pub mod protocol;
pub mod report;

pub use fock::{FockBasisVector, FockError, ModeId, ModeSet, Polarization, PureState};
pub use measure::BellKind;
