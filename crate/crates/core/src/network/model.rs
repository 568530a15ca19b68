//! Model description and concrete execution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::preprocess::PreprocSpec;
use crate::transformers::sigmoid;
use crate::Error;

pub const MODEL_FORMAT: &str = "polycert-model/1";

/// A dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// The transpose as a fresh matrix.
    pub fn transposed(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// One LSTM layer. Kernels are `(input + hidden) × hidden`, with the input
/// rows first and the recurrent rows after them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub hidden: usize,
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_o: Matrix,
    pub w_c: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Output,
    Cell,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Output, Gate::Cell];
}

impl LstmLayer {
    pub fn kernel(&self, gate: Gate) -> (&Matrix, &[f64]) {
        match gate {
            Gate::Forget => (&self.w_f, &self.b_f),
            Gate::Input => (&self.w_i, &self.b_i),
            Gate::Output => (&self.w_o, &self.b_o),
            Gate::Cell => (&self.w_c, &self.b_c),
        }
    }

    fn validate(&self, input: usize) -> Result<(), Error> {
        for gate in Gate::ALL {
            let (w, b) = self.kernel(gate);
            if w.rows != input + self.hidden || w.cols != self.hidden {
                return Err(Error::DimensionMismatch {
                    what: "lstm kernel",
                    expected: (input + self.hidden) * self.hidden,
                    got: w.rows * w.cols,
                });
            }
            if w.data.len() != w.rows * w.cols {
                return Err(Error::DimensionMismatch {
                    what: "lstm kernel data",
                    expected: w.rows * w.cols,
                    got: w.data.len(),
                });
            }
            if b.len() != self.hidden {
                return Err(Error::DimensionMismatch {
                    what: "lstm bias",
                    expected: self.hidden,
                    got: b.len(),
                });
            }
        }
        Ok(())
    }

    /// Pre-activation of `gate` for input `x` and previous hidden state `h`.
    pub fn preactivation(&self, gate: Gate, x: &[f64], h: &[f64]) -> Vec<f64> {
        let (w, b) = self.kernel(gate);
        (0..self.hidden)
            .map(|j| {
                let xs: f64 = x.iter().enumerate().map(|(r, v)| v * w.get(r, j)).sum();
                let hs: f64 = h
                    .iter()
                    .enumerate()
                    .map(|(r, v)| v * w.get(x.len() + r, j))
                    .sum();
                b[j] + xs + hs
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Layer {
    Lstm(LstmLayer),
    /// `W · x + b` with `W` of shape `out × in`.
    #[serde(alias = "dense")]
    Affine {
        weights: Matrix,
        bias: Vec<f64>,
    },
    Relu,
}

/// A sequence classifier: optional speech front-end, LSTM layers over the
/// frame sequence, then affine/ReLU layers on the last hidden state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub format: String,
    /// Features per frame seen by the first LSTM layer.
    pub input_dim: usize,
    pub frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocSpec>,
    pub layers: Vec<Layer>,
}

/// Per-timestep values of one LSTM layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LstmTrace {
    pub c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

/// All intermediate values of a concrete run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub features: Vec<Vec<f64>>,
    pub lstm: Vec<LstmTrace>,
    pub logits: Vec<f64>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let model: ModelSpec = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "unsupported model format {:?}, expected {MODEL_FORMAT:?}",
                self.format
            )));
        }
        if self.frames == 0 {
            return Err(Error::Format("model must have at least one frame".into()));
        }
        if let Some(p) = &self.preprocess {
            p.validate()?;
            if p.n_mel != self.input_dim {
                return Err(Error::DimensionMismatch {
                    what: "mel bands vs input_dim",
                    expected: self.input_dim,
                    got: p.n_mel,
                });
            }
        }
        let mut width = self.input_dim;
        let mut seen_dense = false;
        for layer in &self.layers {
            match layer {
                Layer::Lstm(l) => {
                    if seen_dense {
                        return Err(Error::Format("lstm layer after a dense layer".into()));
                    }
                    l.validate(width)?;
                    width = l.hidden;
                }
                Layer::Affine { weights, bias } => {
                    seen_dense = true;
                    if weights.cols != width || weights.rows != bias.len() {
                        return Err(Error::DimensionMismatch {
                            what: "affine layer",
                            expected: width,
                            got: weights.cols,
                        });
                    }
                    if weights.data.len() != weights.rows * weights.cols {
                        return Err(Error::DimensionMismatch {
                            what: "affine weights data",
                            expected: weights.rows * weights.cols,
                            got: weights.data.len(),
                        });
                    }
                    width = weights.rows;
                }
                Layer::Relu => seen_dense = true,
            }
        }
        if width < 2 {
            return Err(Error::Format(
                "model must produce at least two logits".into(),
            ));
        }
        Ok(())
    }

    /// Number of raw input values one example carries.
    pub fn input_len(&self) -> usize {
        match &self.preprocess {
            Some(p) => p.signal_len(self.frames),
            None => self.frames * self.input_dim,
        }
    }

    pub fn num_classes(&self) -> usize {
        let mut width = self.input_dim;
        for layer in &self.layers {
            match layer {
                Layer::Lstm(l) => width = l.hidden,
                Layer::Affine { weights, .. } => width = weights.rows,
                Layer::Relu => {}
            }
        }
        width
    }

    /// Range of raw input indices that belong to frame `t`.
    pub fn frame_span(&self, t: usize) -> std::ops::Range<usize> {
        match &self.preprocess {
            Some(p) => t * p.stride..t * p.stride + p.frame_len,
            None => t * self.input_dim..(t + 1) * self.input_dim,
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<(), Error> {
        if input.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                what: "input",
                expected: self.input_len(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Runs the model and records every intermediate value.
    pub fn trace(&self, input: &[f64]) -> Result<Trace, Error> {
        self.check_input(input)?;
        let features: Vec<Vec<f64>> = match &self.preprocess {
            Some(p) => p.features(input, self.frames),
            None => input
                .chunks_exact(self.input_dim)
                .map(<[f64]>::to_vec)
                .collect(),
        };
        let mut seq = features.clone();
        let mut lstm = Vec::new();
        let mut vec: Option<Vec<f64>> = None;
        for layer in &self.layers {
            match layer {
                Layer::Lstm(l) => {
                    let mut h = vec![0.0; l.hidden];
                    let mut c = vec![0.0; l.hidden];
                    let mut tr = LstmTrace::default();
                    for x in &seq {
                        let f = l.preactivation(Gate::Forget, x, &h);
                        let i = l.preactivation(Gate::Input, x, &h);
                        let o = l.preactivation(Gate::Output, x, &h);
                        let g = l.preactivation(Gate::Cell, x, &h);
                        for j in 0..l.hidden {
                            c[j] = sigmoid(f[j]) * c[j] + sigmoid(i[j]) * g[j].tanh();
                            h[j] = sigmoid(o[j]) * c[j].tanh();
                        }
                        tr.c.push(c.clone());
                        tr.h.push(h.clone());
                    }
                    seq = tr.h.clone();
                    lstm.push(tr);
                }
                Layer::Affine { weights, bias } => {
                    let x = vec
                        .take()
                        .unwrap_or_else(|| seq.last().cloned().unwrap_or_default());
                    let y = weights.mul_vec(&x);
                    vec = Some(y.iter().zip(bias).map(|(a, b)| a + b).collect());
                }
                Layer::Relu => {
                    let x = vec
                        .take()
                        .unwrap_or_else(|| seq.last().cloned().unwrap_or_default());
                    vec = Some(x.iter().map(|v| v.max(0.0)).collect());
                }
            }
        }
        let logits = vec.unwrap_or_else(|| seq.last().cloned().unwrap_or_default());
        Ok(Trace {
            features,
            lstm,
            logits,
        })
    }

    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>, Error> {
        Ok(self.trace(input)?.logits)
    }

    pub fn predict(&self, input: &[f64]) -> Result<usize, Error> {
        Ok(argmax(&self.logits(input)?))
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}
