//! Random discrete measures on countable spaces: Dirichlet process
//! posteriors, bracketing entropy for the class of all indicators, weighted
//! empirical processes and their Gaussian limits, plus a Monte Carlo harness
//! that checks the associated limit theorems at desk scale.

pub mod bracketing;
pub mod dirichlet;
pub mod error;
pub mod harness;
pub mod local_empirical;
pub mod measures;
pub mod processes;
pub mod rng;

pub use error::{Error, Result};
pub use measures::{AtomId, DiscreteMeasure, WeightSeq};
