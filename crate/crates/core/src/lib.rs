//! Method-of-moments label models for binary weak supervision.
//!
//! The crate covers the full loop: an exactly enumerated Ising ground truth
//! ([`ising`]), accuracy estimators from labelled and unlabelled votes
//! ([`estimators`]), naive-Bayes inference ([`label_model`]), the exact
//! four-term error decomposition and bound evaluators ([`analysis`]), the
//! Monte-Carlo harness ([`experiments`]) and a keyword-source text pipeline
//! ([`ws`]).

pub mod analysis;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod ising;
pub mod label_model;
pub mod seeds;
pub mod ws;

pub use data::{SourceMatrix, StateCounts};
pub use error::{Error, Result};
pub use ising::{IsingModel, ModelDiagnostics};
