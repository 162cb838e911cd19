//! Self-play reinforcement learning for two-player zero-sum games with a
//! closed-form KL- and entropy-regularized policy improvement and
//! lambda-return action-value targets.

pub mod analysis;
pub mod approx;
pub mod config;
pub mod error;
pub mod games;
pub mod regopt;
pub mod returns;
pub mod rng;
pub mod search;
pub mod selfplay;

pub use error::{Error, Result};
