//! Spectral laboratory for Schrodinger equations with time-dependent,
//! spatially localized potentials.
//!
//! The crate evolves wavefunctions on periodic boxes with a split-step
//! Fourier integrator, realizes functional calculus of the dilation
//! generator `A = (x.p + p.x)/2`, and evaluates the propagation
//! observables whose growth and decay rates the diagnostics check:
//! kinetic-energy growth caps, incoming/outgoing wave regularity,
//! phase-space energy bounds, and local-decay rates.
//!
//! Start with the runnable examples (`cargo run --release --example ...`)
//! or the `propwave` binary (`run`, `list-scenarios`, `check-config`).

pub mod calculus;
pub mod config;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod potential;
pub mod propagate;
pub mod report;

pub use error::{Error, Result};
pub use grid::{Grid, Representation, WaveFunction};
pub use potential::{AssumptionReport, CenterMotion, Envelope, PotentialSpec, TimeModulation};
pub use propagate::{Schedule, Trajectory};
