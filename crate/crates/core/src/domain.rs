//! The polyhedral abstract domain.
//!
//! Every neuron carries a lower and an upper linear expression over earlier
//! neurons together with a concrete interval. Input neurons carry constant
//! expressions equal to their interval endpoints, so backsubstitution
//! bottoms out at the inputs without a separate concretization step.

use serde::{Deserialize, Serialize};

use crate::numeric::{Interval, LinExpr, Sense};
use crate::Error;

/// Position of a neuron in the global topological ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId(pub usize);

impl NeuronId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Lower and upper linear bounds of one neuron plus its interval box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: LinExpr,
    pub upper: LinExpr,
    pub interval: Interval,
}

impl BoundPair {
    pub fn expr(&self, sense: Sense) -> &LinExpr {
        match sense {
            Sense::Lower => &self.lower,
            Sense::Upper => &self.upper,
        }
    }
}

/// Replacement bound expressions for selected neurons, indexed by neuron.
///
/// Entries past the end of the slice, and `None` entries, fall back to the
/// element's own bounds.
pub type Overrides<'a> = &'a [Option<[LinExpr; 2]>];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AbstractElement {
    bounds: Vec<BoundPair>,
    input_count: usize,
}

impl AbstractElement {
    /// An element whose first neurons are inputs constrained by `boxes`.
    pub fn with_inputs<I>(boxes: I) -> Self
    where
        I: IntoIterator<Item = Interval>,
    {
        let bounds: Vec<BoundPair> = boxes
            .into_iter()
            .map(|iv| BoundPair {
                lower: LinExpr::constant(iv.lo()),
                upper: LinExpr::constant(iv.hi()),
                interval: iv,
            })
            .collect();
        let input_count = bounds.len();
        Self {
            bounds,
            input_count,
        }
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn inputs(&self) -> impl Iterator<Item = NeuronId> {
        (0..self.input_count).map(NeuronId)
    }

    pub fn bounds(&self, id: NeuronId) -> &BoundPair {
        &self.bounds[id.0]
    }

    pub fn interval(&self, id: NeuronId) -> Interval {
        self.bounds[id.0].interval
    }

    pub fn all_bounds(&self) -> &[BoundPair] {
        &self.bounds
    }

    fn check_id(&self, id: NeuronId) -> Result<(), Error> {
        if id.0 < self.bounds.len() {
            Ok(())
        } else {
            Err(Error::UnknownNeuron(id.0))
        }
    }

    /// Appends a neuron bounded by `lower` and `upper`.
    ///
    /// The box is obtained by backsubstituting both expressions and, when a
    /// `hint` is given (for example the range of the activation), intersecting
    /// with it.
    pub fn push(
        &mut self,
        lower: LinExpr,
        upper: LinExpr,
        hint: Option<Interval>,
    ) -> Result<NeuronId, Error> {
        let id = self.bounds.len();
        lower.check_refs_below(id)?;
        upper.check_refs_below(id)?;
        // Full backsubstitution, tightened by evaluating the expressions over
        // the predecessor boxes directly (which can win after relaxations
        // whose linear faces leave the activation's range).
        let lo = self
            .backsubstitute(&lower, Sense::Lower)
            .max(self.one_step(&lower).lo());
        let hi = self
            .backsubstitute(&upper, Sense::Upper)
            .min(self.one_step(&upper).hi());
        let mut interval = Interval::new(lo.min(hi), hi.max(lo))?;
        if let Some(h) = hint {
            if let Some(tight) = interval.intersect(&h) {
                interval = tight;
            }
        }
        self.bounds.push(BoundPair {
            lower,
            upper,
            interval,
        });
        Ok(NeuronId(id))
    }

    /// Appends a neuron with explicitly supplied box. The caller vouches for
    /// the box being sound.
    pub fn push_with_box(
        &mut self,
        lower: LinExpr,
        upper: LinExpr,
        interval: Interval,
    ) -> Result<NeuronId, Error> {
        let id = self.bounds.len();
        lower.check_refs_below(id)?;
        upper.check_refs_below(id)?;
        self.bounds.push(BoundPair {
            lower,
            upper,
            interval,
        });
        Ok(NeuronId(id))
    }

    /// Sound bound on `expr`: a lower bound for [`Sense::Lower`], an upper
    /// bound for [`Sense::Upper`].
    pub fn backsubstitute(&self, expr: &LinExpr, sense: Sense) -> f64 {
        self.backsubstitute_with(expr, sense, &[]).0
    }

    /// Backsubstitution with per-neuron replacement bounds.
    ///
    /// Also returns the accumulated coefficient each neuron had when it was
    /// substituted; its sign tells which side was used.
    pub fn backsubstitute_with(
        &self,
        expr: &LinExpr,
        sense: Sense,
        overrides: Overrides<'_>,
    ) -> (f64, Vec<f64>) {
        let width = expr.max_index().map_or(0, |i| i + 1);
        let mut acc = vec![0.0; width];
        for &(i, c) in expr.terms() {
            acc[i] += c;
        }
        let mut constant = expr.constant_term();
        let mut magnitude = constant.abs();
        for j in (0..width).rev() {
            let coef = acc[j];
            if coef == 0.0 {
                continue;
            }
            let side = if (coef > 0.0) == (sense == Sense::Lower) {
                Sense::Lower
            } else {
                Sense::Upper
            };
            let e = match overrides.get(j) {
                Some(Some(pair)) => &pair[side.index()],
                _ => self.bounds[j].expr(side),
            };
            let term = coef * e.constant_term();
            constant += term;
            magnitude += term.abs();
            for &(i, c) in e.terms() {
                acc[i] += coef * c;
            }
        }
        // Rounding of the accumulated sums stays far below this margin.
        let slack = magnitude * 64.0 * f64::EPSILON;
        let bound = match sense {
            Sense::Lower => constant - slack,
            Sense::Upper => constant + slack,
        };
        (bound, acc)
    }

    /// Interval image of `expr` over the boxes of the neurons it references.
    pub fn one_step(&self, expr: &LinExpr) -> Interval {
        Interval::sum_of_products(
            expr.terms()
                .iter()
                .map(|&(i, c)| (c, &self.bounds[i].interval)),
            expr.constant_term(),
        )
    }

    /// Both bounds of `expr` as an interval.
    pub fn bound_interval(&self, expr: &LinExpr) -> Interval {
        let lo = self.backsubstitute(expr, Sense::Lower);
        let hi = self.backsubstitute(expr, Sense::Upper);
        Interval::hull_of(lo, hi)
    }

    /// Appends `weights · inputs + bias`, one neuron per row of `weights`
    /// (row-major, `bias.len()` rows by `inputs.len()` columns).
    pub fn affine(
        &mut self,
        inputs: &[NeuronId],
        weights: &[f64],
        bias: &[f64],
    ) -> Result<Vec<NeuronId>, Error> {
        if weights.len() != bias.len() * inputs.len() {
            return Err(Error::DimensionMismatch {
                what: "affine weights",
                expected: bias.len() * inputs.len(),
                got: weights.len(),
            });
        }
        for &id in inputs {
            self.check_id(id)?;
        }
        let cols = inputs.len();
        let mut out = Vec::with_capacity(bias.len());
        for (r, &b) in bias.iter().enumerate() {
            let row = &weights[r * cols..(r + 1) * cols];
            let expr = LinExpr::from_terms(inputs.iter().zip(row).map(|(id, &w)| (id.0, w)), b);
            out.push(self.push(expr.clone(), expr, None)?);
        }
        Ok(out)
    }

    /// Sound lower bound on `z_t − z_i`.
    pub fn objective_lower_bound(&self, t: NeuronId, i: NeuronId) -> Result<f64, Error> {
        self.check_id(t)?;
        self.check_id(i)?;
        if t == i {
            return Err(Error::SameLabel(t.0));
        }
        Ok(self.backsubstitute(&difference(t, i), Sense::Lower))
    }
}

/// The expression `z_t − z_i`.
pub fn difference(t: NeuronId, i: NeuronId) -> LinExpr {
    LinExpr::from_terms([(t.0, 1.0), (i.0, -1.0)], 0.0)
}
