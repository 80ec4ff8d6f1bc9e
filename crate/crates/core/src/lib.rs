//! Monte Carlo harness for comparing enterprise multi-agent architectures.
//!
//! The crate is organised bottom-up:
//!
//! * [`taskgen`] draws the seeded enterprise task population and the stress subset.
//! * [`architectures`] holds the architecture profiles, ablations, sweep variants and
//!   capability-contract validation.
//! * [`outcome`] is the per-trial stochastic outcome model.
//! * [`metrics`] aggregates trials into run-level summaries.
//! * [`calibration`] fits free coefficients against published aggregates.
//! * [`experiments`] wires configuration, runs the four experiments and emits reports.
//!
//! Every stochastic draw comes from a substream keyed by `(seed, stream key, task id)`,
//! so results do not depend on worker count or scheduling.

pub mod architectures;
pub mod calibration;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod outcome;
pub mod rng;
pub mod taskgen;

pub use error::{Error, Result};
