//! Closed-form bounds for single-input activations.
//!
//! Each function appends one neuron to the element and returns its id. The
//! emitted lines are shifted outward by a small slack so that rounding in
//! their evaluation cannot make them unsound.

use crate::domain::{AbstractElement, NeuronId};
use crate::numeric::{Interval, LinExpr, SOUND_SLACK};
use crate::Error;

/// Threshold that keeps the square's lower face non-negative.
pub const SQUARE_DELTA: f64 = 1e-5;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

fn tanh_prime(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// A line `slope·x + intercept` over neuron `x`.
fn line(x: NeuronId, slope: f64, intercept: f64) -> LinExpr {
    LinExpr::from_terms([(x.index(), slope)], intercept)
}

fn slack(scale: f64) -> f64 {
    SOUND_SLACK * scale.abs().max(1.0)
}

/// Chord/tangent bounds for an S-shaped activation (convex below zero,
/// concave above).
fn s_shaped(
    elem: &mut AbstractElement,
    x: NeuronId,
    f: fn(f64) -> f64,
    df: fn(f64) -> f64,
    range: Interval,
) -> Result<NeuronId, Error> {
    let b = elem.interval(x);
    let (l, u) = (b.lo(), b.hi());
    let (fl, fu) = (f(l), f(u));
    let eps = slack(fl.abs().max(fu.abs()));
    let hint = Interval::new(fl - eps, fu + eps)?
        .intersect(&range)
        .unwrap_or(range);
    if u - l < 1e-12 {
        let lower = LinExpr::constant(fl - eps);
        let upper = LinExpr::constant(fu + eps);
        return elem.push(lower, upper, Some(hint));
    }
    let chord = (fu - fl) / (u - l);
    let tangent = df(l).min(df(u));
    let (lower, upper) = if l >= 0.0 {
        (
            line(x, chord, fl - chord * l - eps),
            line(x, tangent, fu - tangent * u + eps),
        )
    } else if u <= 0.0 {
        (
            line(x, tangent, fl - tangent * l - eps),
            line(x, chord, fu - chord * u + eps),
        )
    } else {
        (
            line(x, tangent, fl - tangent * l - eps),
            line(x, tangent, fu - tangent * u + eps),
        )
    };
    elem.push(lower, upper, Some(hint))
}

pub fn sigmoid_transformer(elem: &mut AbstractElement, x: NeuronId) -> Result<NeuronId, Error> {
    s_shaped(elem, x, sigmoid, sigmoid_prime, Interval::new(0.0, 1.0)?)
}

pub fn tanh_transformer(elem: &mut AbstractElement, x: NeuronId) -> Result<NeuronId, Error> {
    s_shaped(elem, x, f64::tanh, tanh_prime, Interval::new(-1.0, 1.0)?)
}

/// ReLU with the lower face chosen between `0` and `x` by smaller area.
pub fn relu_transformer(elem: &mut AbstractElement, x: NeuronId) -> Result<NeuronId, Error> {
    let b = elem.interval(x);
    let (l, u) = (b.lo(), b.hi());
    let hint = Some(Interval::new(0.0, u.max(0.0))?);
    if u <= 0.0 {
        return elem.push(LinExpr::constant(0.0), LinExpr::constant(0.0), hint);
    }
    if l >= 0.0 {
        return elem.push(LinExpr::var(x.index()), LinExpr::var(x.index()), hint);
    }
    let k = u / (u - l);
    let lower = if u > -l {
        LinExpr::var(x.index())
    } else {
        LinExpr::constant(0.0)
    };
    let upper = line(x, k, -k * l + slack(u));
    elem.push(lower, upper, hint)
}

/// Lower and upper lines `(slope, intercept)` for `x²` on `[l, u]`.
pub fn square_bounds(l: f64, u: f64, delta: f64) -> ((f64, f64), (f64, f64)) {
    let upper = (u + l, -u * l);
    let rd = delta.sqrt();
    let lower = if l <= rd && -rd <= u {
        (0.0, 0.0)
    } else if 3.0 * l * l + 2.0 * l * u - u * u <= 4.0 * delta && rd <= l {
        let p = l + (l * l - delta).sqrt();
        (2.0 * p, -p * p)
    } else if 3.0 * u * u + 2.0 * u * l - l * l <= 4.0 * delta && u <= -delta {
        let p = u - (u * u - delta).sqrt();
        (2.0 * p, -p * p)
    } else {
        let m = 0.5 * (u + l);
        (u + l, -m * m)
    };
    (lower, upper)
}

pub fn square_transformer(
    elem: &mut AbstractElement,
    x: NeuronId,
    delta: f64,
) -> Result<NeuronId, Error> {
    let b = elem.interval(x);
    let (l, u) = (b.lo(), b.hi());
    let ((ls, li), (us, ui)) = square_bounds(l, u, delta);
    let top = l.abs().max(u.abs());
    let eps = slack(top * top);
    let lo_hint = if l <= 0.0 && 0.0 <= u {
        0.0
    } else {
        (l * l).min(u * u)
    };
    let hint = Interval::new((lo_hint - eps).max(0.0), top * top + eps)?;
    let lower = if ls == 0.0 && li == 0.0 {
        LinExpr::constant(0.0)
    } else {
        line(x, ls, li - eps)
    };
    elem.push(lower, line(x, us, ui + eps), Some(hint))
}

/// Lower and upper lines `(slope, intercept)` for `log x` on `[l, u]`,
/// `l > 0`.
pub fn log_bounds(l: f64, u: f64) -> ((f64, f64), (f64, f64)) {
    if u - l <= 1e-12 * l {
        let v = l.ln();
        return ((0.0, v), (0.0, u.ln()));
    }
    let chord = (u / l).ln() / (u - l);
    let lower = (chord, l.ln() - chord * l);
    let m = 0.5 * (u + l);
    let upper = (1.0 / m, m.ln() - 1.0);
    (lower, upper)
}

pub fn log_transformer(elem: &mut AbstractElement, x: NeuronId) -> Result<NeuronId, Error> {
    let b = elem.interval(x);
    let (l, u) = (b.lo(), b.hi());
    if !(l > 0.0) {
        return Err(Error::LogDomain(l));
    }
    let ((ls, li), (us, ui)) = log_bounds(l, u);
    let eps = slack(l.ln().abs().max(u.ln().abs()));
    let hint = Interval::new(l.ln() - eps, u.ln() + eps)?;
    elem.push(line(x, ls, li - eps), line(x, us, ui + eps), Some(hint))
}

/// Square with constant faces only: the interval image of `x²`.
pub fn square_interval(elem: &mut AbstractElement, x: NeuronId) -> Result<NeuronId, Error> {
    let b = elem.interval(x);
    let (l, u) = (b.lo(), b.hi());
    let top = l.abs().max(u.abs());
    let lo = if l <= 0.0 && 0.0 <= u {
        0.0
    } else {
        (l * l).min(u * u)
    };
    let eps = slack(top * top);
    let iv = Interval::new((lo - eps).max(0.0), top * top + eps)?;
    elem.push_with_box(LinExpr::constant(iv.lo()), LinExpr::constant(iv.hi()), iv)
}

/// Log with constant faces only.
pub fn log_interval(elem: &mut AbstractElement, x: NeuronId) -> Result<NeuronId, Error> {
    let b = elem.interval(x);
    if !(b.lo() > 0.0) {
        return Err(Error::LogDomain(b.lo()));
    }
    let eps = slack(b.lo().ln().abs().max(b.hi().ln().abs()));
    let iv = Interval::new(b.lo().ln() - eps, b.hi().ln() + eps)?;
    elem.push_with_box(LinExpr::constant(iv.lo()), LinExpr::constant(iv.hi()), iv)
}
