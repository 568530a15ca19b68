use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::NumericError;

/// A closed interval `[lo, hi]` of reals.
///
/// Arithmetic rounds outward by one ulp on each side, so the exact result of
/// the real-number operation is always contained in the returned interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, NumericError> {
        if lo.is_nan() || hi.is_nan() {
            return Err(NumericError::NanBound);
        }
        if lo > hi {
            return Err(NumericError::InvertedInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Builds an interval from two endpoints in either order.
    pub fn hull_of(a: f64, b: f64) -> Self {
        debug_assert!(!a.is_nan() && !b.is_nan());
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn centered(center: f64, radius: f64) -> Result<Self, NumericError> {
        if radius < 0.0 {
            return Err(NumericError::NegativeRadius(radius));
        }
        Self::new(center - radius, center + radius)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Clamps `v` into the interval.
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// Widens both ends by `slack`.
    pub fn widen(&self, slack: f64) -> Interval {
        Interval {
            lo: self.lo - slack,
            hi: self.hi + slack,
        }
    }

    pub fn scale(&self, k: f64) -> Interval {
        outward(self.lo * k, self.hi * k)
    }

    /// Image of `Σ kᵢ·Iᵢ + constant`.
    pub fn sum_of_products<'a, I>(terms: I, constant: f64) -> Interval
    where
        I: IntoIterator<Item = (f64, &'a Interval)>,
    {
        let mut lo = constant;
        let mut hi = constant;
        let mut magnitude = constant.abs();
        for (k, iv) in terms {
            if k >= 0.0 {
                lo += k * iv.lo;
                hi += k * iv.hi;
            } else {
                lo += k * iv.hi;
                hi += k * iv.lo;
            }
            magnitude += k.abs() * iv.lo.abs().max(iv.hi.abs());
        }
        // Accumulated rounding of n terms stays below n·ε·Σ|kᵢ·Iᵢ|; a fixed
        // multiple of the magnitude covers the sums that occur in practice.
        let slack = magnitude * 8.0 * f64::EPSILON;
        outward(lo - slack, hi + slack)
    }
}

fn outward(a: f64, b: f64) -> Interval {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Interval {
        lo: lo.next_down(),
        hi: hi.next_up(),
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        outward(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, rhs: Interval) -> Interval {
        outward(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        outward(lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = NumericError;

    fn try_from((lo, hi): (f64, f64)) -> Result<Self, Self::Error> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}
