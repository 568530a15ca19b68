//! Learning convex combinations of candidate planes.
//!
//! Every binary neuron carries five lower and five upper candidate planes.
//! The bound on `z_t − z_i` is piecewise linear in the mixing weights, so it
//! is maximized by gradient steps on unconstrained logits pushed through a
//! softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::difference;
use crate::network::{Abstraction, BinarySite};
use crate::numeric::Sense;
use crate::transformers::{CandidateSet, N_CANDIDATES};
use crate::{Error, LinExpr, Plane};

pub type Weights = [f64; N_CANDIDATES];

/// Per site, per sense (lower, upper), the five logits.
pub type Logits = Vec<[Weights; 2]>;

pub fn softmax(raw: &Weights) -> Weights {
    let m = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Weights = std::array::from_fn(|k| (raw[k] - m).exp());
    let s: f64 = e.iter().sum();
    std::array::from_fn(|k| e[k] / s)
}

/// Pulls a gradient with respect to softmax outputs back to the logits.
pub fn softmax_backward(lambda: &Weights, grad: &Weights) -> Weights {
    let dot: f64 = lambda.iter().zip(grad).map(|(l, g)| l * g).sum();
    std::array::from_fn(|k| lambda[k] * (grad[k] - dot))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub raw: Logits,
}

impl LambdaParams {
    pub fn zeros(sites: usize) -> Self {
        Self {
            raw: vec![[[0.0; N_CANDIDATES]; 2]; sites],
        }
    }

    /// Logits drawn from `Uniform[-1, 1]`.
    pub fn uniform(sites: usize, rng: &mut impl Rng) -> Self {
        let mut draw = || std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        Self {
            raw: (0..sites).map(|_| [draw(), draw()]).collect(),
        }
    }

    /// Logits concentrated on the whole-region plane.
    pub fn vertex0(sites: usize) -> Self {
        let mut w = [0.0; N_CANDIDATES];
        w[0] = VERTEX_LOGIT;
        Self {
            raw: vec![[w; 2]; sites],
        }
    }

    pub fn normalized(&self, site: usize, sense: Sense) -> Weights {
        softmax(&self.raw[site][sense.index()])
    }
}

/// Puts about `4e-6` of the mass off the first candidate.
const VERTEX_LOGIT: f64 = 14.0;

/// The λ-weighted lower and upper planes.
pub fn combined_bounds(c: &CandidateSet, lower: &Weights, upper: &Weights) -> (Plane, Plane) {
    (
        Plane::combine(&c.lower, lower),
        Plane::combine(&c.upper, upper),
    )
}

/// The bound on `z_t − z_i` as a function of the mixing weights.
pub struct Objective<'a> {
    abs: &'a Abstraction,
    expr: LinExpr,
}

impl<'a> Objective<'a> {
    pub fn new(abs: &'a Abstraction, true_label: usize, adversary: usize) -> Result<Self, Error> {
        let n = abs.outputs.len();
        for l in [true_label, adversary] {
            if l >= n {
                return Err(Error::Format(format!(
                    "label {l} out of range for {n} classes"
                )));
            }
        }
        if true_label == adversary {
            return Err(Error::SameLabel(true_label));
        }
        Ok(Self {
            abs,
            expr: difference(abs.outputs[true_label], abs.outputs[adversary]),
        })
    }

    fn planes(&self, lambda: &LambdaParams) -> Vec<[Plane; 2]> {
        self.abs
            .sites
            .iter()
            .enumerate()
            .map(|(s, site)| {
                let (lo, hi) = combined_bounds(
                    &site.candidates,
                    &lambda.normalized(s, Sense::Lower),
                    &lambda.normalized(s, Sense::Upper),
                );
                [lo, hi]
            })
            .collect()
    }

    fn overrides(&self, planes: &[[Plane; 2]]) -> Vec<Option<[LinExpr; 2]>> {
        let mut ov = vec![None; self.abs.element.len()];
        for (site, p) in self.abs.sites.iter().zip(planes) {
            let (x, y) = (site.x.index(), site.y.index());
            ov[site.neuron.index()] = Some([p[0].to_expr(x, y), p[1].to_expr(x, y)]);
        }
        ov
    }

    /// Lower bound on `z_t − z_i` with the base planes already stored in the
    /// element.
    pub fn base_bound(&self) -> f64 {
        self.abs.element.backsubstitute(&self.expr, Sense::Lower)
    }

    pub fn bound(&self, lambda: &LambdaParams) -> f64 {
        let ov = self.overrides(&self.planes(lambda));
        self.abs
            .element
            .backsubstitute_with(&self.expr, Sense::Lower, &ov)
            .0
    }

    /// `−bound`; negative means the label is ruled out.
    pub fn loss(&self, lambda: &LambdaParams) -> f64 {
        -self.bound(lambda)
    }

    /// Loss and its gradient with respect to the logits.
    ///
    /// The bound equals the objective evaluated at the point where every
    /// neuron takes the value of the face backsubstitution chose for it, so
    /// the derivative in a site's plane is its accumulated coefficient times
    /// the plane's partial derivatives at that point.
    pub fn loss_and_grad(&self, lambda: &LambdaParams) -> (f64, Logits) {
        let planes = self.planes(lambda);
        let ov = self.overrides(&planes);
        let elem = &self.abs.element;
        let (bound, acc) = elem.backsubstitute_with(&self.expr, Sense::Lower, &ov);
        let side = |j: usize| {
            if acc[j] >= 0.0 {
                Sense::Lower
            } else {
                Sense::Upper
            }
        };
        let mut v = vec![0.0; acc.len()];
        for j in 0..acc.len() {
            let s = side(j);
            let e = match &ov[j] {
                Some(pair) => &pair[s.index()],
                None => elem.bounds(crate::NeuronId(j)).expr(s),
            };
            v[j] = e.eval(&v);
        }
        let grad = self
            .abs
            .sites
            .iter()
            .enumerate()
            .map(|(s, site)| site_grad(site, s, lambda, &acc, &v, side))
            .collect();
        (-bound, grad)
    }
}

fn site_grad(
    site: &BinarySite,
    s: usize,
    lambda: &LambdaParams,
    acc: &[f64],
    v: &[f64],
    side: impl Fn(usize) -> Sense,
) -> [Weights; 2] {
    let mut out = [[0.0; N_CANDIDATES]; 2];
    let j = site.neuron.index();
    if j >= acc.len() || acc[j] == 0.0 {
        return out;
    }
    let sense = side(j);
    let (vx, vy) = (v[site.x.index()], v[site.y.index()]);
    let planes = site.candidates.planes(sense);
    // d(loss)/dλ_k = −acc_j · plane_k(v_x, v_y)
    let g: Weights = std::array::from_fn(|k| -acc[j] * planes[k].eval(vx, vy));
    out[sense.index()] = softmax_backward(&lambda.normalized(s, sense), &g);
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    #[default]
    Gd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaInit {
    #[default]
    Uniform,
    Vertex0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub max_epoch: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub optimizer: Optimizer,
    pub init: LambdaInit,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            max_epoch: 100,
            lr: 100.0,
            lr_decay: 0.98,
            optimizer: Optimizer::default(),
            init: LambdaInit::default(),
            seed: 0,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.max_epoch == 0 {
            return Err(Error::Format("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Format("learning rate must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Format(
                "learning-rate decay must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome for one adversary label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelResult {
    pub label: usize,
    /// Best lower bound on `z_t − z_label` found.
    pub bound: f64,
    /// Optimization epochs run; 0 when the base planes already sufficed.
    pub epochs: usize,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub certified: bool,
    pub labels: Vec<LabelResult>,
}

fn adversaries(abs: &Abstraction, true_label: usize) -> Result<Vec<usize>, Error> {
    let n = abs.outputs.len();
    if true_label >= n {
        return Err(Error::Format(format!(
            "label {true_label} out of range for {n} classes"
        )));
    }
    Ok((0..n).filter(|&i| i != true_label).collect())
}

/// Certification with the whole-region planes only. Bounds for every label
/// are reported.
pub fn certify_lp(abs: &Abstraction, true_label: usize) -> Result<Verdict, Error> {
    let mut labels = Vec::new();
    for i in adversaries(abs, true_label)? {
        let bound = Objective::new(abs, true_label, i)?.base_bound();
        labels.push(LabelResult {
            label: i,
            bound,
            epochs: 0,
            certified: bound > 0.0,
        });
    }
    Ok(Verdict {
        certified: labels.iter().all(|l| l.certified),
        labels,
    })
}

struct Adam {
    m: Logits,
    v: Logits,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(sites: usize) -> Self {
        Self {
            m: vec![[[0.0; N_CANDIDATES]; 2]; sites],
            v: vec![[[0.0; N_CANDIDATES]; 2]; sites],
            t: 0,
        }
    }

    fn step(&mut self, raw: &mut Logits, grad: &Logits, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for s in 0..raw.len() {
            for d in 0..2 {
                for k in 0..N_CANDIDATES {
                    let g = grad[s][d][k];
                    let m = &mut self.m[s][d][k];
                    let v = &mut self.v[s][d][k];
                    *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                    *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                    raw[s][d][k] -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}

/// Optimizes the weights for one adversary label.
pub fn optimize_label(
    abs: &Abstraction,
    true_label: usize,
    adversary: usize,
    cfg: &OptConfig,
) -> Result<LabelResult, Error> {
    cfg.validate()?;
    let obj = Objective::new(abs, true_label, adversary)?;
    let base = obj.base_bound();
    let mut result = LabelResult {
        label: adversary,
        bound: base,
        epochs: 0,
        certified: base > 0.0,
    };
    if result.certified {
        return Ok(result);
    }
    let sites = abs.sites.len();
    let mut lambda = match cfg.init {
        LambdaInit::Uniform => {
            let seed = cfg.seed ^ (adversary as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            LambdaParams::uniform(sites, &mut ChaCha8Rng::seed_from_u64(seed))
        }
        LambdaInit::Vertex0 => LambdaParams::vertex0(sites),
    };
    let mut adam = Adam::new(sites);
    let mut lr = cfg.lr;
    for epoch in 1..=cfg.max_epoch {
        let (loss, grad) = obj.loss_and_grad(&lambda);
        result.epochs = epoch;
        result.bound = result.bound.max(-loss);
        if loss < 0.0 {
            result.certified = true;
            break;
        }
        match cfg.optimizer {
            Optimizer::Gd => {
                for (r, g) in lambda.raw.iter_mut().zip(&grad) {
                    for d in 0..2 {
                        for k in 0..N_CANDIDATES {
                            r[d][k] -= lr * g[d][k];
                        }
                    }
                }
            }
            Optimizer::Adam => adam.step(&mut lambda.raw, &grad, lr),
        }
        lr *= cfg.lr_decay;
    }
    Ok(result)
}

/// Tries every adversary label in turn and stops at the first one that
/// cannot be ruled out.
pub fn certify_opt(
    abs: &Abstraction,
    true_label: usize,
    cfg: &OptConfig,
) -> Result<Verdict, Error> {
    let mut labels = Vec::new();
    for i in adversaries(abs, true_label)? {
        let r = optimize_label(abs, true_label, i, cfg)?;
        let ok = r.certified;
        labels.push(r);
        if !ok {
            return Ok(Verdict {
                certified: false,
                labels,
            });
        }
    }
    Ok(Verdict {
        certified: true,
        labels,
    })
}
