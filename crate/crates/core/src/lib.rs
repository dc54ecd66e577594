//! Phase-space Q-function dynamics for quantum measurement.
//!
//! The crate compiles polynomial bosonic Hamiltonians into generalized
//! Fokker-Planck equations for the Husimi Q-function, samples
//! forward-backward stochastic trajectories from them, and checks every
//! result against a truncated Fock-space oracle.

pub mod bell;
pub mod cli;
pub mod dynamics;
pub mod fock_oracle;
pub mod measurement;
pub mod output;
pub mod phase_space;
pub mod rng;
pub mod symbolic;
