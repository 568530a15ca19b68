use serde::{Deserialize, Serialize};

use super::NumericError;

/// A sparse linear expression `Σ cᵢ·xᵢ + constant` over neuron indices.
///
/// Terms are kept sorted by index with no duplicates and no zero
/// coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    /// Builds an expression from arbitrary `(index, coeff)` pairs, summing
    /// repeated indices.
    pub fn from_terms<I>(terms: I, constant: f64) -> Self
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut terms: Vec<(usize, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Self {
            terms: merged,
            constant,
        }
    }

    /// `a·x + b·y + c` for two neurons, as used by bounding planes.
    pub fn planar(x: usize, a: f64, y: usize, b: f64, c: f64) -> Self {
        Self::from_terms([(x, a), (y, b)], c)
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn coeff(&self, index: usize) -> f64 {
        self.terms
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.terms[pos].1)
            .unwrap_or(0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.last().map(|&(i, _)| i)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Fails if the expression references a neuron at or after `bound`.
    pub fn check_refs_below(&self, bound: usize) -> Result<(), NumericError> {
        match self.max_index() {
            Some(i) if i >= bound => Err(NumericError::ForwardReference { index: i, bound }),
            _ => Ok(()),
        }
    }

    /// Evaluates with `values[i]` as the value of neuron `i`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * values[i])
    }

    pub fn scaled(&self, k: f64) -> LinExpr {
        if k == 0.0 {
            return LinExpr::constant(0.0);
        }
        LinExpr {
            terms: self.terms.iter().map(|&(i, c)| (i, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    /// `self + k·other`.
    pub fn add_scaled(&self, other: &LinExpr, k: f64) -> LinExpr {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut a, mut b) = (self.terms.iter().peekable(), other.terms.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, ci)), Some(&&(j, cj))) => {
                    if i < j {
                        out.push((i, ci));
                        a.next();
                    } else if j < i {
                        out.push((j, k * cj));
                        b.next();
                    } else {
                        out.push((i, ci + k * cj));
                        a.next();
                        b.next();
                    }
                }
                (Some(&&(i, ci)), None) => {
                    out.push((i, ci));
                    a.next();
                }
                (None, Some(&&(j, cj))) => {
                    out.push((j, k * cj));
                    b.next();
                }
                (None, None) => break,
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        LinExpr {
            terms: out,
            constant: self.constant + k * other.constant,
        }
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add_scaled(other, -1.0)
    }
}
