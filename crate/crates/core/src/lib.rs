//! Phase dynamics of decaying two-mode and multimode bosonic systems whose
//! emitted particles are observed through beam splitters.
//!
//! The crate is organized around a few layers:
//!
//! - [`bloch`]: sphere geometry and the detector points of every setup.
//! - [`distribution`]: conditional distributions over the Bloch sphere.
//! - [`detstat`]: exact detection statistics, including linear and circular chains.
//! - [`trajectory`]: quantum-jump Monte Carlo over detection histories.
//! - [`fock`]: a truncated Fock-space verifier for the sphere calculus.
//! - [`cli`]: the `phaselab` command-line front end.

pub mod bloch;
pub mod cli;
pub mod detstat;
pub mod distribution;
pub mod error;
pub mod fock;
pub mod numeric;
pub mod trajectory;

pub use bloch::{
    CouplingMode, CouplingSpec, DetectorChannel, DetectorSetup, ModeLabel, SphericalDirection,
    UnitVector3,
};
pub use distribution::{BaseMeasure, PhaseDistribution};
pub use error::{Error, Result};
