//! Simulation and numerical verification for the multiple Poisson–Dirichlet
//! diffusion and its finite-dimensional Wright–Fisher approximations.
//!
//! The crate is organized bottom-up:
//!
//! * [`simplex`]: state spaces and the maps `S`, `S^-1` and the per-mark ranking.
//! * [`sampling`]: Dirichlet, Poisson–Dirichlet and multiple Poisson–Dirichlet
//!   samplers on reproducible ChaCha streams.
//! * [`sde`]: Euler–Maruyama integration of Wright–Fisher diffusions on a simplex.
//! * [`timechange`]: random clocks, time-changed drivers and skew-product assembly.
//! * [`generators`]: exact evaluation of every generator on the power-sum algebra.
//! * [`verify`]: exact and Monte-Carlo checks that produce [`verify::TestReport`]s.

pub mod error;
pub mod generators;
pub mod sampling;
pub mod sde;
pub mod simplex;
pub mod timechange;
pub mod verify;

pub use error::{Error, Result};
pub use sampling::SeedSpec;
pub use simplex::{
    FlatSimplexPoint, KingmanPoint, OrderedMassVector, SimplexPoint, ThetaParams, TOLERANCES,
};
