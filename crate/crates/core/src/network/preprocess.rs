//! Log-Mel front-end as a fixed chain of matrices and pointwise maps.
//!
//! Per frame: `y = M₁ s` (pre-emphasis, Hamming window, real and imaginary
//! DFT rows), `θ = y²`, `m = M₂ θ + δ` (Mel filterbank applied to both
//! halves), `features = log m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::model::Matrix;
use crate::transformers::{
    log_interval, log_transformer, square_interval, square_transformer, SQUARE_DELTA,
};
use crate::{AbstractElement, Error, NeuronId};

fn default_alpha() -> f64 {
    0.97
}

fn default_delta() -> f64 {
    SQUARE_DELTA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocSpec {
    pub frame_len: usize,
    pub stride: usize,
    pub n_mel: usize,
    pub sample_rate: f64,
    #[serde(default = "default_alpha")]
    pub pre_emphasis: f64,
    /// Added to every Mel energy before the log, and used as the square
    /// transformer's threshold.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub f_min: f64,
    /// Defaults to the Nyquist frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
}

/// How the square and log stages are abstracted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreprocMode {
    /// Linear faces from the dedicated square and log transformers.
    #[default]
    Polyhedral,
    /// Constant faces: plain interval arithmetic.
    Interval,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl PreprocSpec {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::Format(format!("preprocess: {msg}")));
        if self.frame_len < 2 {
            return bad("frame_len must be at least 2");
        }
        if self.stride == 0 {
            return bad("stride must be positive");
        }
        if self.n_mel == 0 {
            return bad("n_mel must be positive");
        }
        if !(self.sample_rate > 0.0) {
            return bad("sample_rate must be positive");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max()) {
            return bad("need 0 <= f_min < f_max");
        }
        Ok(())
    }

    pub fn f_max(&self) -> f64 {
        self.f_max.unwrap_or(self.sample_rate / 2.0)
    }

    /// Number of frequency bins, `frame_len / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    pub fn signal_len(&self, frames: usize) -> usize {
        (frames.max(1) - 1) * self.stride + self.frame_len
    }

    /// `2K × N`: rows `0..K` give the real part, rows `K..2K` the imaginary
    /// part of the DFT of the pre-emphasized, windowed frame.
    pub fn m1(&self) -> Matrix {
        let n = self.frame_len;
        let k = self.bins();
        let a = self.pre_emphasis;
        let window: Vec<f64> = (0..n)
            .map(|j| 0.54 - 0.46 * (2.0 * PI * j as f64 / (n - 1) as f64).cos())
            .collect();
        let mut m = Matrix::zeros(2 * k, n);
        for f in 0..k {
            for j in 0..n {
                let arg = 2.0 * PI * (f * j % n) as f64 / n as f64;
                let (re, im) = (window[j] * arg.cos(), -window[j] * arg.sin());
                // Pre-emphasis: e_j = s_j − α s_{j−1}, with e_0 = s_0.
                m.data[f * n + j] += re;
                m.data[(k + f) * n + j] += im;
                if j > 0 {
                    m.data[f * n + j - 1] -= a * re;
                    m.data[(k + f) * n + j - 1] -= a * im;
                }
            }
        }
        m
    }

    /// `n_mel × K` triangular filterbank on the HTK Mel scale.
    pub fn filterbank(&self) -> Matrix {
        let k = self.bins();
        let lo = hz_to_mel(self.f_min);
        let hi = hz_to_mel(self.f_max());
        let edges: Vec<f64> = (0..self.n_mel + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (self.n_mel + 1) as f64))
            .collect();
        let mut fb = Matrix::zeros(self.n_mel, k);
        for m in 0..self.n_mel {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for b in 0..k {
                let f = b as f64 * self.sample_rate / self.frame_len as f64;
                let w = if f > left && f <= centre {
                    (f - left) / (centre - left)
                } else if f > centre && f < right {
                    (right - f) / (right - centre)
                } else {
                    0.0
                };
                fb.data[m * k + b] = w;
            }
        }
        fb
    }

    /// `n_mel × 2K`: the filterbank repeated over real and imaginary squares.
    pub fn m2(&self) -> Matrix {
        let fb = self.filterbank();
        let k = self.bins();
        let mut m = Matrix::zeros(self.n_mel, 2 * k);
        for r in 0..self.n_mel {
            for b in 0..k {
                let w = fb.get(r, b);
                m.data[r * 2 * k + b] = w;
                m.data[r * 2 * k + k + b] = w;
            }
        }
        m
    }

    /// Concrete log-Mel features, one vector per frame.
    pub fn features(&self, signal: &[f64], frames: usize) -> Vec<Vec<f64>> {
        let m1 = self.m1();
        let m2 = self.m2();
        (0..frames)
            .map(|t| {
                let s = &signal[t * self.stride..t * self.stride + self.frame_len];
                let theta: Vec<f64> = m1.mul_vec(s).iter().map(|y| y * y).collect();
                m2.mul_vec(&theta)
                    .iter()
                    .map(|e| (e + self.delta).ln())
                    .collect()
            })
            .collect()
    }

    /// Pushes the front-end for every frame over `signal` (input neurons).
    /// Returns the feature neurons of each frame.
    pub fn abstract_features(
        &self,
        elem: &mut AbstractElement,
        signal: &[NeuronId],
        frames: usize,
        mode: PreprocMode,
    ) -> Result<Vec<Vec<NeuronId>>, Error> {
        let need = self.signal_len(frames);
        if signal.len() != need {
            return Err(Error::DimensionMismatch {
                what: "signal",
                expected: need,
                got: signal.len(),
            });
        }
        let m1 = self.m1();
        let m2 = self.m2();
        let zero1 = vec![0.0; m1.rows];
        let bias2 = vec![self.delta; m2.rows];
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let window = &signal[t * self.stride..t * self.stride + self.frame_len];
            let y = elem.affine(window, &m1.data, &zero1)?;
            let theta = y
                .iter()
                .map(|&v| match mode {
                    PreprocMode::Polyhedral => square_transformer(elem, v, self.delta),
                    PreprocMode::Interval => square_interval(elem, v),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let energy = elem.affine(&theta, &m2.data, &bias2)?;
            let feats = energy
                .iter()
                .map(|&v| match mode {
                    PreprocMode::Polyhedral => log_transformer(elem, v),
                    PreprocMode::Interval => log_interval(elem, v),
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(feats);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Interval;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn spec() -> PreprocSpec {
        PreprocSpec {
            frame_len: 16,
            stride: 8,
            n_mel: 4,
            sample_rate: 8000.0,
            pre_emphasis: 0.97,
            delta: 1e-5,
            f_min: 0.0,
            f_max: None,
        }
    }

    #[test]
    fn m1_power_matches_fft() {
        let p = spec();
        let n = p.frame_len;
        let m1 = p.m1();
        let k = p.bins();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fft = FftPlanner::new().plan_fft_forward(n);
        for _ in 0..50 {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut buf: Vec<Complex<f64>> = (0..n)
                .map(|j| {
                    let e = if j == 0 { s[0] } else { s[j] - 0.97 * s[j - 1] };
                    let w = 0.54 - 0.46 * (2.0 * PI * j as f64 / (n - 1) as f64).cos();
                    Complex::new(e * w, 0.0)
                })
                .collect();
            fft.process(&mut buf);
            let y = m1.mul_vec(&s);
            for b in 0..k {
                let ours = y[b] * y[b] + y[k + b] * y[k + b];
                let want = buf[b].norm_sqr();
                assert!(
                    (ours - want).abs() <= 1e-6 * want.max(1e-12),
                    "bin {b}: {ours} vs {want}"
                );
            }
        }
    }

    #[test]
    fn filterbank_is_nonnegative_and_covers_bands() {
        let fb = spec().filterbank();
        assert!(fb.data.iter().all(|&w| (0.0..=1.0).contains(&w)));
        for r in 0..fb.rows {
            assert!((0..fb.cols).any(|b| fb.get(r, b) > 0.0), "empty band {r}");
        }
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn point_signal_matches_concrete_features() {
        let p = spec();
        let frames = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Vec<f64> = (0..p.signal_len(frames))
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let want = p.features(&s, frames);
        let mut e = AbstractElement::with_inputs(s.iter().map(|&v| Interval::point(v)));
        let ids: Vec<NeuronId> = e.inputs().collect();
        let got = p
            .abstract_features(&mut e, &ids, frames, PreprocMode::Polyhedral)
            .unwrap();
        for t in 0..frames {
            for (id, w) in got[t].iter().zip(&want[t]) {
                let b = e.interval(*id);
                assert!(b.lo() - 1e-5 <= *w && *w <= b.hi() + 1e-5);
                assert!(b.width() < 1e-5, "width {}", b.width());
            }
        }
    }

    #[test]
    fn zero_signal_keeps_log_defined() {
        let p = spec();
        let n = p.signal_len(1);
        let mut e = AbstractElement::with_inputs(vec![Interval::new(-1e-4, 1e-4).unwrap(); n]);
        let ids: Vec<NeuronId> = e.inputs().collect();
        for mode in [PreprocMode::Polyhedral, PreprocMode::Interval] {
            let mut e = e.clone();
            assert!(p.abstract_features(&mut e, &ids, 1, mode).is_ok());
        }
        // The unperturbed zero signal too.
        e = AbstractElement::with_inputs(vec![Interval::point(0.0); n]);
        let out = p
            .abstract_features(&mut e, &ids, 1, PreprocMode::Polyhedral)
            .unwrap();
        let b = e.interval(out[0][0]);
        assert!(b.contains(1e-5f64.ln()));
    }

    #[test]
    fn polyhedral_features_no_wider_than_interval() {
        let p = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let n = p.signal_len(1);
            let boxes: Vec<Interval> = (0..n)
                .map(|_| Interval::centered(rng.random_range(-0.5..0.5), 0.01).unwrap())
                .collect();
            let base = AbstractElement::with_inputs(boxes);
            let ids: Vec<NeuronId> = base.inputs().collect();
            let mut a = base.clone();
            let fa = p
                .abstract_features(&mut a, &ids, 1, PreprocMode::Polyhedral)
                .unwrap();
            let mut b = base.clone();
            let fb = p
                .abstract_features(&mut b, &ids, 1, PreprocMode::Interval)
                .unwrap();
            for (x, y) in fa[0].iter().zip(&fb[0]) {
                assert!(a.interval(*x).width() <= b.interval(*y).width() + 1e-9);
            }
        }
    }
}
