//! Largest certifiable perturbation by binary search.

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub eps: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEps {
    /// Largest probed radius that certified; `lo` when even `lo` failed.
    pub eps: f64,
    /// False when `lo` itself did not certify.
    pub found: bool,
    pub probes: Vec<Probe>,
}

impl MaxEps {
    /// Checks the transcript against the answer: every certified probe is at
    /// most `eps` and every failed probe is above it.
    pub fn consistent(&self) -> bool {
        self.probes.iter().all(|p| {
            if p.certified {
                p.eps <= self.eps
            } else {
                p.eps > self.eps || !self.found
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for Bracket {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 0.5,
            tol: 1e-4,
        }
    }
}

/// Binary search assuming certification is monotone in the radius.
pub fn max_eps(
    bracket: Bracket,
    mut certify: impl FnMut(f64) -> Result<bool, Error>,
) -> Result<MaxEps, Error> {
    let Bracket {
        mut lo,
        mut hi,
        tol,
    } = bracket;
    if !(lo < hi) || !(tol > 0.0) || lo < 0.0 {
        return Err(Error::Format(format!(
            "invalid search bracket [{lo}, {hi}] with tolerance {tol}"
        )));
    }
    let mut probes = Vec::new();
    let mut probe = |eps: f64, probes: &mut Vec<Probe>| -> Result<bool, Error> {
        let certified = certify(eps)?;
        probes.push(Probe { eps, certified });
        Ok(certified)
    };
    if probe(hi, &mut probes)? {
        return Ok(MaxEps {
            eps: hi,
            found: true,
            probes,
        });
    }
    if !probe(lo, &mut probes)? {
        return Ok(MaxEps {
            eps: lo,
            found: false,
            probes,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut probes)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxEps {
        eps: lo,
        found: true,
        probes,
    })
}
