//! End-to-end certification of one input region, and batch execution.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::network::{abstract_forward, ForwardConfig, ModelSpec, PreprocMode, ThreatModel};
use crate::refinement::{certify_lp, certify_opt, OptConfig, Verdict};
use crate::transformers::SynthConfig;
use crate::{AbstractElement, Error};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Whole-region planes only.
    #[default]
    Lp,
    /// Learned combinations of the five candidates.
    Opt,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub method: Method,
    pub synth: SynthConfig,
    pub opt: OptConfig,
    pub preprocess: PreprocMode,
}

impl CertifyConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.opt.seed = seed;
        self
    }

    fn forward(&self) -> ForwardConfig {
        ForwardConfig {
            synth: self.synth,
            all_candidates: self.method == Method::Opt,
            preprocess: self.preprocess,
        }
    }
}

/// Certifies that every point of `element`'s input region is classified as
/// `label`.
pub fn certify_element(
    model: &ModelSpec,
    element: AbstractElement,
    label: usize,
    cfg: &CertifyConfig,
) -> Result<Verdict, Error> {
    let abs = abstract_forward(model, element, &cfg.forward())?;
    match cfg.method {
        Method::Lp => certify_lp(&abs, label),
        Method::Opt => certify_opt(&abs, label, &cfg.opt),
    }
}

pub fn certify_input(
    model: &ModelSpec,
    input: &[f64],
    label: usize,
    threat: &ThreatModel,
    cfg: &CertifyConfig,
) -> Result<Verdict, Error> {
    let element = threat.build_input_element(model, input)?;
    certify_element(model, element, label, cfg)
}

/// Runs `f(0..n)` on up to `jobs` threads and returns the results in index
/// order.
pub fn run_batch<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every index ran"))
        .collect()
}
