//! Continual self-training of speech enhancement models via bootstrapped
//! remixing.
//!
//! A teacher separates in-domain mixtures into speech and noise estimates;
//! the noise estimates are shuffled across the batch and added back to the
//! speech estimates, and a student learns to undo these new mixtures. The
//! teacher is refreshed from the student as training goes on.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
mod seed;
pub mod selftrain;
pub mod signal;

pub use error::{Error, Result};
pub use scalar::Scalar;
