//! Redundancy planning for master-worker distributed computing.
//!
//! Models job compute time when `N` parallel tasks are grouped into batches
//! and redundantly assigned to `N` workers. Provides Monte Carlo simulation
//! for arbitrary batching plans, closed-form mean/CoV expressions for
//! balanced non-overlapping plans under shifted-exponential and Pareto
//! service times, and search over the diversity-parallelism spectrum for the
//! redundancy level optimizing either metric. A trace front end replays the
//! same experiment on empirical task-runtime data.

pub mod analytics;
pub mod assignment;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod optimizer;
pub mod sim_engine;
pub mod traces;

pub use error::{Error, Result};
