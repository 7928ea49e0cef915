//! Surveillance-evasion games on obstacle maps.
//!
//! The crate covers the level-set visibility machinery, an explicit upwind
//! solver for the two-player value function, local pursuit policies for the
//! discrete multi-player game, Monte Carlo tree search over those policies,
//! and a batch harness that sweeps starting positions.

pub mod engine;
pub mod error;
pub mod geometry;
pub mod hji;
pub mod io;
pub mod mcts;
pub mod strategies;
pub mod visibility;

pub use error::{Error, Result};
