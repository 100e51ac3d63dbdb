//! Discrete-event CPU scheduling simulator with a Double DQN scheduling
//! agent and classical baselines (FCFS, SJF, RR).
//!
//! Layout:
//! - [`workload`]: seeded synthetic task generation and CSV round-trip
//! - [`sim`]: the tick-based scheduling environment (step/reset/metrics)
//! - [`baselines`]: FCFS/SJF/RR expressed over the simulator's action space
//! - [`nn`]: small dense MLP with manual backprop, SGD/Adam, checkpoints
//! - [`agent`]: replay buffer, epsilon-greedy Double DQN, training loop

pub mod agent;
pub mod baselines;
pub mod error;
pub mod nn;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
