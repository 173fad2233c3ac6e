//! Elimination-order probabilities for the three- and four-player gambler's
//! ruin: exact chain solves, monotone Jacobi bounds, reference tables,
//! barycentric interpolation, Monte Carlo, ICM regression, asymptotics and
//! prize-pool chops.

pub mod asymptotics;
pub mod chop;
pub mod cli;
pub mod dd;
pub mod error;
pub mod exact;
pub mod interp;
pub mod jacobi;
pub mod lattice;
pub mod model;
pub mod montecarlo;
pub mod regression;
pub mod skyline;
pub mod table;

pub use error::{Error, Result};
pub use model::{CapitalVector, EliminationOrder, Engine, OrderDistribution, PayoutSchedule};
