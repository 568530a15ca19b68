//! Perturbation regions around an input.

use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use crate::{AbstractElement, Error, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "eps", rename_all = "lowercase")]
pub enum Perturbation {
    /// Absolute radius per input value.
    Linf(f64),
    /// Radius relative to the signal's peak level, in decibels.
    Decibel(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    AllFrames,
    /// Zero-based frame index.
    Frame(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreatModel {
    pub kind: Perturbation,
    pub target: Target,
}

/// Peak level `max_i 20·log₁₀|s_i|`; `-inf` for the zero signal.
pub fn peak_db(signal: &[f64]) -> f64 {
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    20.0 * peak.log10()
}

/// Amplitude radius allowed by `eps_db` decibels relative to `signal`.
pub fn db_to_radius(eps_db: f64, signal: &[f64]) -> f64 {
    10f64.powf((eps_db + peak_db(signal)) / 20.0)
}

/// Inverse of [`db_to_radius`].
pub fn radius_to_db(radius: f64, signal: &[f64]) -> f64 {
    20.0 * radius.log10() - peak_db(signal)
}

impl ThreatModel {
    pub fn linf(eps: f64) -> Self {
        Self {
            kind: Perturbation::Linf(eps),
            target: Target::AllFrames,
        }
    }

    pub fn decibel(eps_db: f64) -> Self {
        Self {
            kind: Perturbation::Decibel(eps_db),
            target: Target::AllFrames,
        }
    }

    pub fn on_frame(mut self, frame: usize) -> Self {
        self.target = Target::Frame(frame);
        self
    }

    /// The same threat with a different magnitude.
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.kind = match self.kind {
            Perturbation::Linf(_) => Perturbation::Linf(eps),
            Perturbation::Decibel(_) => Perturbation::Decibel(eps),
        };
        self
    }

    pub fn eps(&self) -> f64 {
        match self.kind {
            Perturbation::Linf(e) | Perturbation::Decibel(e) => e,
        }
    }

    pub fn radius(&self, input: &[f64]) -> f64 {
        match self.kind {
            Perturbation::Linf(e) => e,
            Perturbation::Decibel(e) => db_to_radius(e, input),
        }
    }

    /// Per-value boxes of the region.
    pub fn input_boxes(&self, model: &ModelSpec, input: &[f64]) -> Result<Vec<Interval>, Error> {
        if input.len() != model.input_len() {
            return Err(Error::DimensionMismatch {
                what: "input",
                expected: model.input_len(),
                got: input.len(),
            });
        }
        let r = self.radius(input);
        if !(r >= 0.0) {
            return Err(Error::Format(format!(
                "perturbation radius {r} is not valid"
            )));
        }
        let span = match self.target {
            Target::AllFrames => 0..input.len(),
            Target::Frame(t) if t < model.frames => model.frame_span(t),
            Target::Frame(t) => {
                return Err(Error::Format(format!(
                    "frame {t} out of range for a {}-frame model",
                    model.frames
                )))
            }
        };
        input
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let r = if span.contains(&i) { r } else { 0.0 };
                Ok(Interval::centered(v, r)?)
            })
            .collect()
    }

    pub fn build_input_element(
        &self,
        model: &ModelSpec,
        input: &[f64],
    ) -> Result<AbstractElement, Error> {
        Ok(AbstractElement::with_inputs(
            self.input_boxes(model, input)?,
        ))
    }
}
