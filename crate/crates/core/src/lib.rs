//! Heuristic ground-state search for Ising / QUBO problems.
//!
//! The pipeline first prunes spins whose optimal direction follows from the
//! graph alone, then searches the remaining problem by relaxing the choice
//! of sign domain to continuous angles and descending a loss with an
//! adaptive-moment optimizer. Baselines, instance generators, quality
//! metrics and instance I/O live alongside.

pub mod baselines;
pub mod domain_selection;
pub mod error;
pub mod generators;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pruning;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Coupling, FlipSet, IsingModel, Spin, SpinConfig};
