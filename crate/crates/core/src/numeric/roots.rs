//! Real roots of low-degree polynomials restricted to an interval.
//!
//! Quartics go through the eigenvalues of the companion matrix with one
//! Newton polish step. The result is cross-checked against a bracketing
//! solver that isolates roots between the critical points of the
//! polynomial; when the two disagree (clustered or nearly double roots) the
//! bracketing result wins.

use nalgebra::Matrix4;

use super::Interval;

/// Relative tolerance used when deciding whether a root sits on the range
/// boundary or whether a critical point touches zero.
const EDGE_TOL: f64 = 1e-12;

/// Real roots of `c2·t² + c1·t + c0` inside `range`, ascending.
pub fn roots_quadratic_in_range(c2: f64, c1: f64, c0: f64, range: Interval) -> Vec<f64> {
    let mut roots = quadratic_roots(c2, c1, c0);
    for r in roots.iter_mut() {
        *r = newton_polish(&[c0, c1, c2], *r);
    }
    filter_range(roots, range)
}

/// Real roots of `c4·t⁴ + c3·t³ + c2·t² + c1·t + c0` inside `range`,
/// ascending.
pub fn roots_quartic_in_range(
    c4: f64,
    c3: f64,
    c2: f64,
    c1: f64,
    c0: f64,
    range: Interval,
) -> Vec<f64> {
    let coeffs = trim(&[c0, c1, c2, c3, c4]);
    if coeffs.len() < 5 {
        return filter_range(bracketed_roots(&coeffs, range), range);
    }
    let bracketed = filter_range(bracketed_roots(&coeffs, range), range);
    match companion_roots(&coeffs) {
        Some(roots) => {
            let companion = filter_range(roots, range);
            if agrees(&companion, &bracketed, &coeffs) {
                companion
            } else {
                bracketed
            }
        }
        None => bracketed,
    }
}

/// Real roots of an arbitrary polynomial (ascending coefficients) inside
/// `range`, found by isolating monotone pieces between critical points.
pub fn roots_in_range(coeffs: &[f64], range: Interval) -> Vec<f64> {
    let coeffs = trim(coeffs);
    filter_range(bracketed_roots(&coeffs, range), range)
}

fn trim(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut v = coeffs.to_vec();
    while v.len() > 1 && v.last().is_some_and(|c| c.abs() <= 1e-14 * scale) {
        v.pop();
    }
    v
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Magnitude of the terms of `p(t)`, used to judge residuals.
fn term_scale(coeffs: &[f64], t: f64) -> f64 {
    let at = t.abs().max(1.0);
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * at.powi(k as i32))
        .sum()
}

fn newton_polish(coeffs: &[f64], t: f64) -> f64 {
    let d = derivative(coeffs);
    let f = horner(coeffs, t);
    let df = horner(&d, t);
    if df == 0.0 || !df.is_finite() {
        return t;
    }
    let next = t - f / df;
    if next.is_finite() && horner(coeffs, next).abs() <= f.abs() {
        next
    } else {
        t
    }
}

fn quadratic_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c2.abs().max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if c2.abs() <= 1e-14 * scale {
        if c1 == 0.0 {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let disc_scale = c1 * c1 + (4.0 * c2 * c0).abs();
    if disc < 0.0 {
        if -disc <= 1e-14 * disc_scale {
            return vec![-c1 / (2.0 * c2)];
        }
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (c1 + c1.signum() * sq);
    let q = if c1 == 0.0 { -0.5 * sq } else { q };
    if q == 0.0 {
        return vec![0.0];
    }
    let mut r = vec![q / c2, c0 / q];
    r.sort_by(f64::total_cmp);
    r
}

fn filter_range(roots: Vec<f64>, range: Interval) -> Vec<f64> {
    let tol = EDGE_TOL * range.lo().abs().max(range.hi().abs()).max(1.0);
    let mut out: Vec<f64> = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= range.lo() - tol && *r <= range.hi() + tol)
        .map(|r| range.clamp(r))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs().max(1.0));
    out
}

fn companion_roots(coeffs: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(coeffs.len(), 5);
    let lead = coeffs[4];
    let m = Matrix4::new(
        0.0,
        0.0,
        0.0,
        -coeffs[0] / lead,
        1.0,
        0.0,
        0.0,
        -coeffs[1] / lead,
        0.0,
        1.0,
        0.0,
        -coeffs[2] / lead,
        0.0,
        0.0,
        1.0,
        -coeffs[3] / lead,
    );
    let eig = m.try_schur(f64::EPSILON, 500)?.complex_eigenvalues();
    if eig.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return None;
    }
    Some(
        eig.iter()
            .filter(|z| z.im.abs() <= 1e-7 * z.re.abs().max(1.0))
            .map(|z| newton_polish(coeffs, z.re))
            .collect(),
    )
}

/// The companion result is trusted when it finds the same roots as the
/// bracketing solver and every root has a small residual.
fn agrees(companion: &[f64], bracketed: &[f64], coeffs: &[f64]) -> bool {
    companion.len() == bracketed.len()
        && companion
            .iter()
            .zip(bracketed)
            .all(|(a, b)| (a - b).abs() <= 1e-8 * a.abs().max(1.0))
        && companion
            .iter()
            .all(|&r| horner(coeffs, r).abs() <= 1e-9 * term_scale(coeffs, r))
}

fn bracketed_roots(coeffs: &[f64], range: Interval) -> Vec<f64> {
    match coeffs.len() {
        0 | 1 => Vec::new(),
        2 => {
            if coeffs[1] == 0.0 {
                Vec::new()
            } else {
                vec![-coeffs[0] / coeffs[1]]
            }
        }
        3 => quadratic_roots(coeffs[2], coeffs[1], coeffs[0])
            .into_iter()
            .map(|r| newton_polish(coeffs, r))
            .collect(),
        _ => {
            let d = derivative(coeffs);
            let mut knots = vec![range.lo()];
            knots.extend(
                filter_range(bracketed_roots(&trim(&d), range), range)
                    .into_iter()
                    .filter(|&c| c > range.lo() && c < range.hi()),
            );
            knots.push(range.hi());

            let mut roots = Vec::new();
            for (idx, &k) in knots.iter().enumerate() {
                let v = horner(coeffs, k);
                let touching = v.abs() <= EDGE_TOL * term_scale(coeffs, k);
                let interior_knot = idx > 0 && idx + 1 < knots.len();
                if v == 0.0 || (interior_knot && touching) {
                    roots.push(k);
                }
            }
            for w in knots.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (horner(coeffs, a), horner(coeffs, b));
                if fa != 0.0 && fb != 0.0 && fa.signum() != fb.signum() {
                    roots.push(bisect(coeffs, a, b, fa));
                }
            }
            roots
        }
    }
}

fn bisect(coeffs: &[f64], mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = horner(coeffs, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
