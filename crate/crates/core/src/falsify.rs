//! Searching a region for a concrete input with a different prediction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{argmax, ModelSpec};
use crate::{Error, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyConfig {
    /// Random points tried before local search.
    pub samples: usize,
    /// Coordinate-descent sweeps from the best random point.
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for FalsifyConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            sweeps: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub input: Vec<f64>,
    pub predicted: usize,
    /// `z_label − max_{i≠label} z_i` at `input`; negative or a tie.
    pub margin: f64,
}

/// `z_label` minus the best competing logit.
pub fn margin(logits: &[f64], label: usize) -> f64 {
    let rival = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    logits[label] - rival
}

struct Search<'a> {
    model: &'a ModelSpec,
    label: usize,
}

impl Search<'_> {
    fn score(&self, x: &[f64]) -> Result<(f64, Option<Counterexample>), Error> {
        let logits = self.model.logits(x)?;
        let m = margin(&logits, self.label);
        let predicted = argmax(&logits);
        let hit = (predicted != self.label).then(|| Counterexample {
            input: x.to_vec(),
            predicted,
            margin: m,
        });
        Ok((m, hit))
    }
}

/// Random sampling (uniform points and box vertices) followed by coordinate
/// descent on the margin. Returns the first input found whose prediction is
/// not `label`.
pub fn falsify(
    model: &ModelSpec,
    region: &[Interval],
    label: usize,
    cfg: &FalsifyConfig,
) -> Result<Option<Counterexample>, Error> {
    if label >= model.num_classes() {
        return Err(Error::Format(format!("label {label} out of range")));
    }
    let s = Search { model, label };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let free: Vec<usize> = (0..region.len())
        .filter(|&i| !region[i].is_point())
        .collect();
    let mut best: Vec<f64> = region.iter().map(Interval::mid).collect();
    let (mut best_m, hit) = s.score(&best)?;
    if hit.is_some() || free.is_empty() {
        return Ok(hit);
    }
    let mut x = best.clone();
    for n in 0..cfg.samples {
        for &i in &free {
            let r = region[i];
            x[i] = if n % 2 == 0 {
                rng.random_range(r.lo()..=r.hi())
            } else if rng.random_bool(0.5) {
                r.lo()
            } else {
                r.hi()
            };
        }
        let (m, hit) = s.score(&x)?;
        if hit.is_some() {
            return Ok(hit);
        }
        if m < best_m {
            best_m = m;
            best.clone_from(&x);
        }
    }
    let mut step: Vec<f64> = free.iter().map(|&i| region[i].width() / 4.0).collect();
    for _ in 0..cfg.sweeps {
        let mut moved = false;
        for (fi, &i) in free.iter().enumerate() {
            let r = region[i];
            let cur = best[i];
            for cand in [r.lo(), r.hi(), cur - step[fi], cur + step[fi]] {
                let cand = cand.clamp(r.lo(), r.hi());
                if cand == cur {
                    continue;
                }
                best[i] = cand;
                let (m, hit) = s.score(&best)?;
                if hit.is_some() {
                    return Ok(hit);
                }
                if m < best_m {
                    best_m = m;
                    moved = true;
                    break;
                }
                best[i] = cur;
            }
        }
        if !moved {
            step.iter_mut().for_each(|v| *v /= 2.0);
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, Matrix, MODEL_FORMAT};

    /// Logits `(x₀ + x₁, 1)`: class 0 wins exactly when `x₀ + x₁ > 1`.
    fn boundary_model() -> ModelSpec {
        ModelSpec {
            format: MODEL_FORMAT.into(),
            input_dim: 2,
            frames: 1,
            preprocess: None,
            layers: vec![Layer::Affine {
                weights: Matrix::new(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap(),
                bias: vec![0.0, 1.0],
            }],
        }
    }

    fn boxes(c: [f64; 2], r: f64) -> Vec<Interval> {
        c.iter()
            .map(|&v| Interval::centered(v, r).unwrap())
            .collect()
    }

    #[test]
    fn finds_crossing_of_known_boundary() {
        let m = boundary_model();
        let cx = falsify(&m, &boxes([0.7, 0.7], 0.3), 0, &FalsifyConfig::default())
            .unwrap()
            .expect("region crosses x0 + x1 = 1");
        assert_eq!(cx.predicted, 1);
        assert!(cx.input[0] + cx.input[1] <= 1.0);
    }

    #[test]
    fn point_region_has_no_counterexample() {
        let m = boundary_model();
        assert!(
            falsify(&m, &boxes([0.7, 0.7], 0.0), 0, &FalsifyConfig::default())
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn region_away_from_boundary_has_none() {
        let m = boundary_model();
        assert!(
            falsify(&m, &boxes([1.0, 1.0], 0.3), 0, &FalsifyConfig::default())
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn margin_uses_best_rival() {
        assert_eq!(margin(&[1.0, 3.0, 2.0], 1), 1.0);
        assert_eq!(margin(&[1.0, 3.0, 2.0], 0), -2.0);
    }
}
