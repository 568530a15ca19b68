// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod domain;
pub mod falsify;
pub mod network;
pub mod numeric;
pub mod pipeline;
pub mod refinement;
pub mod report;
pub mod search;
pub mod transformers;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use domain::{AbstractElement, BoundPair, NeuronId};
pub use numeric::{Interval, LinExpr, NumericError, Plane, Sense};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("{what}: expected {expected} values, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("neuron {0} does not exist")]
    UnknownNeuron(usize),
    #[error("true label and adversary label are both {0}")]
    SameLabel(usize),
    #[error("log input box has lower bound {0}, which is not positive")]
    LogDomain(f64),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
