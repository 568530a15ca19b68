//! Exact solvers for the tiny linear programs that fit bounding planes to
//! sampled surface points.
//!
//! For the lower sense the program is
//!
//! ```text
//! maximize   Σᵢ (a·xᵢ + b·yᵢ + c)
//! subject to a·xᵢ + b·yᵢ + c ≤ zᵢ   for every sample i
//! ```
//!
//! which is the same as minimizing the summed gap between the samples and
//! the plane. The upper sense is the mirror image. The program has three
//! free variables, so we solve its dual (three equality rows, one column per
//! sample) with a dense two-phase simplex and read the plane off the final
//! basis.

use thiserror::Error;

use super::{Plane, Sense};

/// A sampled surface point `(x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample set is degenerate (collinear or coincident points)")]
    Degenerate,
    #[error("sample contains a non-finite coordinate")]
    NonFinite,
    #[error("simplex did not converge within {0} pivots")]
    IterationLimit(usize),
}

const PIVOT_TOL: f64 = 1e-12;
const COLLINEAR_TOL: f64 = 1e-18;

/// Solves the three-variable plane-fitting program exactly.
///
/// Returns [`LpError::Degenerate`] when the `(x, y)` projections of the
/// samples are collinear, in which case the optimum is not a unique plane.
pub fn solve_lp3(samples: &[Sample], sense: Sense) -> Result<Plane, LpError> {
    if samples.len() < 3 {
        return Err(LpError::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    if samples
        .iter()
        .any(|s| !(s.x.is_finite() && s.y.is_finite() && s.z.is_finite()))
    {
        return Err(LpError::NonFinite);
    }
    match sense {
        Sense::Lower => solve_lower(samples),
        Sense::Upper => {
            let mirrored: Vec<Sample> = samples
                .iter()
                .map(|s| Sample::new(s.x, s.y, -s.z))
                .collect();
            solve_lower(&mirrored).map(|p| p.negated())
        }
    }
}

fn solve_lower(samples: &[Sample]) -> Result<Plane, LpError> {
    let n = samples.len() as f64;
    let (mx, my, mz) = samples.iter().fold((0.0, 0.0, 0.0), |(a, b, c), s| {
        (a + s.x / n, b + s.y / n, c + s.z / n)
    });
    let scale = samples
        .iter()
        .map(|s| (s.x - mx).abs().max((s.y - my).abs()))
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(LpError::Degenerate);
    }

    // Centered, unit-scaled coordinates keep the tableau well conditioned; the
    // centroid then sits at the origin.
    let pts: Vec<[f64; 3]> = samples
        .iter()
        .map(|s| [(s.x - mx) / scale, (s.y - my) / scale, s.z - mz])
        .collect();

    let (sxx, syy, sxy) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| {
        (a + p[0] * p[0], b + p[1] * p[1], c + p[0] * p[1])
    });
    if sxx * syy - sxy * sxy <= COLLINEAR_TOL * (sxx + syy).powi(2) {
        return Err(LpError::Degenerate);
    }

    let basis = DualSimplex::new(&pts).solve()?;
    let rows = [pts[basis[0]], pts[basis[1]], pts[basis[2]]];
    let [ua, vb, wc] = solve3(
        [
            [rows[0][0], rows[0][1], 1.0],
            [rows[1][0], rows[1][1], 1.0],
            [rows[2][0], rows[2][1], 1.0],
        ],
        [rows[0][2], rows[1][2], rows[2][2]],
    )
    .ok_or(LpError::Degenerate)?;

    let a = ua / scale;
    let b = vb / scale;
    let c = wc + mz - a * mx - b * my;
    Plane::new(a, b, c).map_err(|_| LpError::Degenerate)
}

/// Dense tableau for `min Σ zᵢ·μᵢ  s.t.  Σ μᵢ·(uᵢ, vᵢ, 1) = (0, 0, 1), μ ≥ 0`.
struct DualSimplex {
    n: usize,
    /// Three rows of `n` real columns, three artificial columns and the rhs.
    rows: [Vec<f64>; 3],
    costs: Vec<f64>,
    basis: [usize; 3],
}

impl DualSimplex {
    fn new(pts: &[[f64; 3]]) -> Self {
        let n = pts.len();
        let width = n + 4;
        let mut rows = [vec![0.0; width], vec![0.0; width], vec![0.0; width]];
        for (j, p) in pts.iter().enumerate() {
            rows[0][j] = p[0];
            rows[1][j] = p[1];
            rows[2][j] = 1.0;
        }
        for (r, row) in rows.iter_mut().enumerate() {
            row[n + r] = 1.0;
        }
        rows[2][n + 3] = 1.0;
        Self {
            n,
            rows,
            costs: pts.iter().map(|p| p[2]).collect(),
            basis: [n, n + 1, n + 2],
        }
    }

    fn solve(mut self) -> Result<[usize; 3], LpError> {
        let n = self.n;
        let limit = 50 * n + 1000;

        let phase1: Vec<f64> = (0..n + 3).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
        self.run(&phase1, n + 3, limit)?;

        // Pivot any artificial that is still basic (at level zero) out of the
        // basis; a row with no usable real column means the data are rank
        // deficient.
        for r in 0..3 {
            if self.basis[r] >= n {
                let col = (0..n)
                    .filter(|&j| !self.basis.contains(&j))
                    .max_by(|&a, &b| self.rows[r][a].abs().total_cmp(&self.rows[r][b].abs()));
                match col {
                    Some(j) if self.rows[r][j].abs() > PIVOT_TOL => self.pivot(r, j),
                    _ => return Err(LpError::Degenerate),
                }
            }
        }

        let phase2 = self.costs.clone();
        self.run(&phase2, n, limit)?;
        Ok(self.basis)
    }

    /// Runs simplex iterations for `costs` over columns `0..active`.
    ///
    /// Uses Dantzig's rule and falls back to Bland's rule after a streak of
    /// degenerate pivots so the method cannot cycle.
    fn run(&mut self, costs: &[f64], active: usize, limit: usize) -> Result<(), LpError> {
        let rhs = self.n + 3;
        let mut degenerate_streak = 0usize;
        for _ in 0..limit {
            let cb = [
                costs.get(self.basis[0]).copied().unwrap_or(0.0),
                costs.get(self.basis[1]).copied().unwrap_or(0.0),
                costs.get(self.basis[2]).copied().unwrap_or(0.0),
            ];
            let reduced = |j: usize| {
                costs[j]
                    - cb[0] * self.rows[0][j]
                    - cb[1] * self.rows[1][j]
                    - cb[2] * self.rows[2][j]
            };
            let bland = degenerate_streak > 20;
            let mut entering = None;
            let mut best = -PIVOT_TOL;
            for j in 0..active {
                if self.basis.contains(&j) {
                    continue;
                }
                let rj = reduced(j);
                if rj < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = rj;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..3 {
                let a = self.rows[r][j];
                if a > PIVOT_TOL {
                    let ratio = self.rows[r][rhs].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-15
                                || (ratio <= lratio + 1e-15 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            // The dual objective is bounded below because the primal is
            // feasible (c can always be taken very negative).
            let Some((r, ratio)) = leave else {
                return Err(LpError::Degenerate);
            };
            if ratio <= 1e-15 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, j);
        }
        Err(LpError::IterationLimit(limit))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (q, row) in self.rows.iter_mut().enumerate() {
            if q == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = j;
    }
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
pub(crate) fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut out = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in row + 1..3 {
            acc -= m[row][k] * out[k];
        }
        out[row] = acc / m[row][row];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// The one-dimensional analogue of [`solve_lp3`]: the best line
/// `z = slope·t + intercept` below (or above) the points `(t, z)`.
///
/// The optimum is the edge of the lower convex hull spanning the mean of the
/// `t` values. Returns `(slope, intercept)`.
pub fn solve_lp_line(points: &[(f64, f64)], sense: Sense) -> Result<(f64, f64), LpError> {
    if points.len() < 2 {
        return Err(LpError::TooFewSamples {
            needed: 2,
            got: points.len(),
        });
    }
    if points
        .iter()
        .any(|&(t, z)| !(t.is_finite() && z.is_finite()))
    {
        return Err(LpError::NonFinite);
    }
    let sign = match sense {
        Sense::Lower => 1.0,
        Sense::Upper => -1.0,
    };
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(t, z)| (t, sign * z)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mean = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    if pts[0].0 == pts[pts.len() - 1].0 {
        return Err(LpError::Degenerate);
    }

    // Lower hull by monotone chain; among equal t keep only the lowest z.
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if hull.last().is_some_and(|q| q.0 == p.0) {
            continue;
        }
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mean = mean.clamp(hull[0].0, hull[hull.len() - 1].0);
    let k = hull
        .windows(2)
        .position(|w| w[0].0 <= mean && mean <= w[1].0)
        .unwrap_or(0);
    let (p, q) = (hull[k], hull[k + 1]);
    let slope = (q.1 - p.1) / (q.0 - p.0);
    let intercept = p.1 - slope * p.0;
    Ok((sign * slope, sign * intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Vertex enumeration: every feasible plane through three lifted samples.
    fn oracle_lower(samples: &[Sample]) -> Option<(Plane, f64)> {
        let mut best: Option<(Plane, f64)> = None;
        let n = samples.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let s = [samples[i], samples[j], samples[k]];
                    let Some([a, b, c]) = solve3(
                        [
                            [s[0].x, s[0].y, 1.0],
                            [s[1].x, s[1].y, 1.0],
                            [s[2].x, s[2].y, 1.0],
                        ],
                        [s[0].z, s[1].z, s[2].z],
                    ) else {
                        continue;
                    };
                    let plane = Plane { a, b, c };
                    let feasible = samples
                        .iter()
                        .all(|p| plane.eval(p.x, p.y) <= p.z + 1e-9 * (1.0 + p.z.abs()));
                    if !feasible {
                        continue;
                    }
                    let obj: f64 = samples.iter().map(|p| plane.eval(p.x, p.y)).sum();
                    if best.is_none_or(|(_, b)| obj > b) {
                        best = Some((plane, obj));
                    }
                }
            }
        }
        best
    }

    fn objective(p: &Plane, samples: &[Sample]) -> f64 {
        samples.iter().map(|s| p.eval(s.x, s.y)).sum()
    }

    #[test]
    fn exact_plane_recovered() {
        let samples: Vec<Sample> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.3, 0.7), (2.0, -1.0)]
            .iter()
            .map(|&(x, y)| Sample::new(x, y, 2.0 * x + 3.0 * y + 1.0))
            .collect();
        for sense in [Sense::Lower, Sense::Upper] {
            let p = solve_lp3(&samples, sense).unwrap();
            assert!((p.a - 2.0).abs() < 1e-9, "{p:?}");
            assert!((p.b - 3.0).abs() < 1e-9, "{p:?}");
            assert!((p.c - 1.0).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn collinear_samples_are_degenerate() {
        let samples: Vec<Sample> = (0..5)
            .map(|i| {
                let t = i as f64;
                Sample::new(t, 2.0 * t + 1.0, t * t)
            })
            .collect();
        assert_eq!(solve_lp3(&samples, Sense::Lower), Err(LpError::Degenerate));
        assert!(matches!(
            solve_lp3(&samples[..2], Sense::Lower),
            Err(LpError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn matches_vertex_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.random_range(3..=12);
            let samples: Vec<Sample> = (0..n)
                .map(|_| {
                    let x = rng.random_range(-2.0..2.0);
                    let y = rng.random_range(-2.0..2.0);
                    Sample::new(x, y, rng.random_range(-1.0..1.0) + x * y)
                })
                .collect();
            let plane = solve_lp3(&samples, Sense::Lower).unwrap();
            let (_, best) = oracle_lower(&samples).unwrap();
            let got = objective(&plane, &samples);
            assert!(
                (got - best).abs() <= 1e-9 * best.abs().max(1.0),
                "{got} vs {best}"
            );
            for s in &samples {
                assert!(plane.eval(s.x, s.y) <= s.z + 1e-9);
            }
        }
    }

    #[test]
    fn upper_sense_mirrors_lower() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<Sample> = (0..40)
            .map(|_| {
                let x = rng.random_range(-1.0..1.0);
                let y = rng.random_range(-1.0..1.0);
                Sample::new(x, y, (x * y).sin())
            })
            .collect();
        let up = solve_lp3(&samples, Sense::Upper).unwrap();
        for s in &samples {
            assert!(up.eval(s.x, s.y) >= s.z - 1e-9);
        }
        let mirrored: Vec<Sample> = samples
            .iter()
            .map(|s| Sample::new(s.x, s.y, -s.z))
            .collect();
        let low = solve_lp3(&mirrored, Sense::Lower).unwrap();
        assert!((objective(&up, &samples) + objective(&low, &mirrored)).abs() < 1e-9);
    }

    #[test]
    fn large_instances_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Sample> = (0..20_000)
            .map(|_| {
                let x = rng.random_range(0.4..1.6);
                let y = rng.random_range(-0.79..0.62);
                Sample::new(x, y, y.tanh() / (1.0 + (-x).exp()))
            })
            .collect();
        let p = solve_lp3(&samples, Sense::Lower).unwrap();
        let worst = samples
            .iter()
            .map(|s| p.eval(s.x, s.y) - s.z)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-9, "violation {worst}");
    }

    #[test]
    fn line_lp_picks_hull_edge_under_mean() {
        let pts = [(0.0, 0.0), (1.0, -1.0), (2.0, 0.0), (3.0, 3.0)];
        let (m, q) = solve_lp_line(&pts, Sense::Lower).unwrap();
        // mean t = 1.5 lies on the hull edge (1,-1)-(2,0)
        assert!((m - 1.0).abs() < 1e-12 && (q + 2.0).abs() < 1e-12);
        let (m, q) = solve_lp_line(&pts, Sense::Upper).unwrap();
        // upper hull edge spanning 1.5 is (0,0)-(3,3)
        assert!((m - 1.0).abs() < 1e-12 && q.abs() < 1e-12);
        assert_eq!(
            solve_lp_line(&[(1.0, 0.0), (1.0, 2.0)], Sense::Lower),
            Err(LpError::Degenerate)
        );
    }
}
