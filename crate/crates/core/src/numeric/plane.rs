use serde::{Deserialize, Serialize};

use super::{LinExpr, NumericError};

/// A plane `z = a·x + b·y + c` bounding a two-input surface from one side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Plane {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, NumericError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(NumericError::NonFinitePlane { a, b, c });
        }
        Ok(Self { a, b, c })
    }

    pub const fn constant(c: f64) -> Self {
        Self { a: 0.0, b: 0.0, c }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }

    pub fn shifted(&self, dc: f64) -> Plane {
        Plane {
            c: self.c + dc,
            ..*self
        }
    }

    pub fn negated(&self) -> Plane {
        Plane {
            a: -self.a,
            b: -self.b,
            c: -self.c,
        }
    }

    /// The plane as an expression over neurons `x` and `y`.
    pub fn to_expr(&self, x: usize, y: usize) -> LinExpr {
        LinExpr::planar(x, self.a, y, self.b, self.c)
    }

    /// Coefficient-wise weighted sum `Σ wₖ·planeₖ`.
    pub fn combine(planes: &[Plane], weights: &[f64]) -> Plane {
        debug_assert_eq!(planes.len(), weights.len());
        planes
            .iter()
            .zip(weights)
            .fold(Plane::constant(0.0), |acc, (p, &w)| Plane {
                a: acc.a + w * p.a,
                b: acc.b + w * p.b,
                c: acc.c + w * p.c,
            })
    }
}

/// Which side of a quantity a bound constrains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Lower,
    Upper,
}

impl Sense {
    pub fn flip(self) -> Sense {
        match self {
            Sense::Lower => Sense::Upper,
            Sense::Upper => Sense::Lower,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sense::Lower => 0,
            Sense::Upper => 1,
        }
    }
}
