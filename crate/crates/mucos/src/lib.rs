//! Knowledge-graph completion with density-based multi-context sampling.
//!
//! The pipeline: parse tab-separated triple files into an immutable
//! [`kg::GraphIndex`], extract head/relation/tail contexts pruned to the
//! densest neighbors ([`sampler`]), feed them as token sequences to a
//! trainable encoder-classifier ([`model`]), rank predictions ([`eval`]) and
//! compare the sampled strategy against the full-context baseline both
//! analytically and by wall clock ([`cost`]).

pub mod cost;
pub mod eval;
pub mod kg;
pub mod model;
pub mod sampler;
pub mod synth;

mod error;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Which triple slot the model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Predict r for (h, ?, t).
    Relation,
    /// Predict t for (h, r, ?).
    Tail,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relation" => Ok(Task::Relation),
            "tail" => Ok(Task::Tail),
            other => Err(Error::config(format!(
                "unknown task '{other}' (expected 'relation' or 'tail')"
            ))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Relation => write!(f, "relation"),
            Task::Tail => write!(f, "tail"),
        }
    }
}
