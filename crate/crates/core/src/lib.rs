//! Restless multi-armed bandit tooling for evaluating Whittle-index rankings.
//!
//! The crate covers the two-state arm model, index computation, a cohort
//! simulator, estimation of observed models from trajectories, the ranking
//! error metrics and the random-policy baseline. The `rmab` binary wraps the
//! same functions in `simulate`, `evaluate` and `baseline` subcommands.

pub mod baseline;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod ranking;
pub mod simulator;
pub mod whittle;

pub use error::{Error, Result};
pub use model::{ArmId, DiscountFactor, TransitionModel};
pub use ranking::Ranking;
pub use whittle::{IndexSolver, WhittleEntry};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
