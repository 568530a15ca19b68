//! Numeric substrate: intervals, sparse linear expressions, planes, an exact
//! three-variable LP and low-degree root finding.

mod interval;
mod linexpr;
mod lp;
mod plane;
mod roots;

use thiserror::Error;

pub use interval::Interval;
pub use linexpr::LinExpr;
pub use lp::{solve_lp3, solve_lp_line, LpError, Sample};
pub use plane::{Plane, Sense};
pub use roots::{roots_in_range, roots_quadratic_in_range, roots_quartic_in_range};

/// Absolute slack added to every sound bound to absorb floating-point error.
pub const SOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("interval bound is NaN")]
    NanBound,
    #[error("inverted interval [{lo}, {hi}]")]
    InvertedInterval { lo: f64, hi: f64 },
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("expression references neuron {index}, but only neurons below {bound} exist")]
    ForwardReference { index: usize, bound: usize },
    #[error("plane ({a}, {b}, {c}) has a non-finite component")]
    NonFinitePlane { a: f64, b: f64, c: f64 },
}
