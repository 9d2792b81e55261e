//! Particle swarm optimizer in which classical and modern variants are
//! settings. Each particle carries its own trajectory coefficients,
//! sociometry and constraint handler.

pub mod config;
pub mod engine;
pub mod initialization;
pub mod memory;
pub mod output;
pub mod problems;
pub mod sociometry;
pub mod stochastic;
pub mod termination;
pub mod trajectory;

pub use config::RunConfig;
pub use engine::{run, run_on, run_with_registry, RunResult, Swarm};
