//! Language identification with a random forest over character n-gram
//! count vectors.
//!
//! The pipeline is: [`corpus`] loads labeled sentences and splits them,
//! [`features`] learns an n-gram vocabulary from the training split and
//! vectorizes text, [`forest`] trains and persists the classifier,
//! [`metrics`] scores a test split, and [`generalize`] measures how often
//! out-of-distribution text is assigned to a target class.

pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod forest;
pub mod generalize;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
