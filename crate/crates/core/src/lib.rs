//! Closed-loop bird's-eye-view driving simulator built around a dual
//! fast/slow planning architecture.
//!
//! The fast pathway samples candidate trajectories from a Gaussian latent
//! and scores them with a multi-term cost model. A Laplace residual model
//! turns scoring error into an uncertainty signal, and a threshold
//! arbitrator escalates to the slow pathway, which produces planning-state
//! bits and meta-actions that gate and reweight a replanning pass through
//! cross-attention feedback on the ego token.

pub mod arbitration;
pub mod config;
pub mod error;
pub mod fast;
pub mod fusion;
pub mod harness;
pub mod reward;
pub mod slow;
pub mod suite;
pub mod uncertainty;
pub mod world;

pub use config::Config;
pub use error::Error;
