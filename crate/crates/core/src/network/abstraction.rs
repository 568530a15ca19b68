//! Unrolling a model into an abstract element.

use serde::{Deserialize, Serialize};

use super::model::{Gate, Layer, LstmLayer, ModelSpec};
use super::preprocess::PreprocMode;
use crate::numeric::Sense;
use crate::transformers::{
    apply_binary, candidates, relu_transformer, stream_seed, synthesize_plane, BinaryKind,
    CandidateSet, Region, SynthConfig,
};
use crate::{AbstractElement, Error, NeuronId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub synth: SynthConfig,
    /// Synthesize all five candidates per sense. When false only the
    /// whole-region plane is fitted and repeated.
    pub all_candidates: bool,
    pub preprocess: PreprocMode,
}

/// A neuron produced by a binary transformer, with its candidate planes.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySite {
    pub neuron: NeuronId,
    pub kind: BinaryKind,
    pub x: NeuronId,
    pub y: NeuronId,
    pub candidates: CandidateSet,
}

/// Neuron ids of one LSTM layer, indexed by timestep then unit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LstmIds {
    pub gates: Vec<[Vec<NeuronId>; 4]>,
    pub c: Vec<Vec<NeuronId>>,
    pub h: Vec<Vec<NeuronId>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    pub features: Vec<Vec<NeuronId>>,
    pub lstm: Vec<LstmIds>,
}

#[derive(Clone, Debug)]
pub struct Abstraction {
    pub element: AbstractElement,
    pub sites: Vec<BinarySite>,
    pub outputs: Vec<NeuronId>,
    pub layout: Layout,
}

struct Builder<'a> {
    elem: AbstractElement,
    sites: Vec<BinarySite>,
    cfg: &'a ForwardConfig,
}

impl Builder<'_> {
    fn binary(&mut self, kind: BinaryKind, x: NeuronId, y: NeuronId) -> Result<NeuronId, Error> {
        let region = Region::new(self.elem.interval(x), self.elem.interval(y));
        let neuron = self.elem.len() as u64;
        let cands = if self.cfg.all_candidates {
            candidates(kind, region, &self.cfg.synth, neuron)
        } else {
            let one = |sense| {
                let seed = stream_seed(self.cfg.synth.seed, neuron, 0, sense);
                let p = synthesize_plane(kind, region, 0, self.cfg.synth.n_samples, sense, seed);
                [p; 5]
            };
            CandidateSet {
                lower: one(Sense::Lower),
                upper: one(Sense::Upper),
            }
        };
        let id = apply_binary(&mut self.elem, kind, x, y, cands.lower[0], cands.upper[0])?;
        self.sites.push(BinarySite {
            neuron: id,
            kind,
            x,
            y,
            candidates: cands,
        });
        Ok(id)
    }

    fn lstm(&mut self, l: &LstmLayer, seq: &[Vec<NeuronId>]) -> Result<LstmIds, Error> {
        let hdim = l.hidden;
        let mut ids = LstmIds::default();
        for (t, x) in seq.iter().enumerate() {
            let prev_h: &[NeuronId] = if t == 0 { &[] } else { &ids.h[t - 1] };
            let mut inputs = x.clone();
            inputs.extend_from_slice(prev_h);
            let gates: [Vec<NeuronId>; 4] = {
                let mut out: [Vec<NeuronId>; 4] = Default::default();
                for (g, gate) in Gate::ALL.iter().enumerate() {
                    let (w, b) = l.kernel(*gate);
                    // The kernel is stored input-major; the affine transformer
                    // wants one row per output unit. At t = 0 the recurrent rows
                    // multiply a zero state and are skipped.
                    let rows = inputs.len();
                    let mut wt = Vec::with_capacity(hdim * rows);
                    for j in 0..hdim {
                        for r in 0..rows {
                            wt.push(w.get(r, j));
                        }
                    }
                    out[g] = self.elem.affine(&inputs, &wt, b)?;
                }
                out
            };
            let [f, i, o, g] = &gates;
            let q = (0..hdim)
                .map(|j| self.binary(BinaryKind::SigTanh, i[j], g[j]))
                .collect::<Result<Vec<_>, _>>()?;
            let c = if t == 0 {
                q
            } else {
                let prev_c = ids.c[t - 1].clone();
                let p = (0..hdim)
                    .map(|j| self.binary(BinaryKind::SigId, f[j], prev_c[j]))
                    .collect::<Result<Vec<_>, _>>()?;
                (0..hdim)
                    .map(|j| Ok(self.elem.affine(&[p[j], q[j]], &[1.0, 1.0], &[0.0])?[0]))
                    .collect::<Result<Vec<_>, Error>>()?
            };
            let h = (0..hdim)
                .map(|j| self.binary(BinaryKind::SigTanh, o[j], c[j]))
                .collect::<Result<Vec<_>, _>>()?;
            ids.gates.push(gates);
            ids.c.push(c);
            ids.h.push(h);
        }
        Ok(ids)
    }
}

/// Pushes the whole model onto `element`, whose input neurons must hold the
/// raw input region. Binary neurons get their whole-region planes; all
/// candidates are recorded for later refinement.
pub fn abstract_forward(
    model: &ModelSpec,
    element: AbstractElement,
    cfg: &ForwardConfig,
) -> Result<Abstraction, Error> {
    if element.input_count() != model.input_len() {
        return Err(Error::DimensionMismatch {
            what: "input neurons",
            expected: model.input_len(),
            got: element.input_count(),
        });
    }
    let mut b = Builder {
        elem: element,
        sites: Vec::new(),
        cfg,
    };
    let inputs: Vec<NeuronId> = b.elem.inputs().collect();
    let features = match &model.preprocess {
        Some(p) => p.abstract_features(&mut b.elem, &inputs, model.frames, cfg.preprocess)?,
        None => inputs
            .chunks(model.input_dim)
            .map(<[NeuronId]>::to_vec)
            .collect(),
    };
    let mut layout = Layout {
        features: features.clone(),
        lstm: Vec::new(),
    };
    let mut seq = features;
    let mut vec: Option<Vec<NeuronId>> = None;
    for layer in &model.layers {
        match layer {
            Layer::Lstm(l) => {
                let ids = b.lstm(l, &seq)?;
                seq = ids.h.clone();
                layout.lstm.push(ids);
            }
            Layer::Affine { weights, bias } => {
                let x = vec
                    .take()
                    .unwrap_or_else(|| seq.last().cloned().unwrap_or_default());
                vec = Some(b.elem.affine(&x, &weights.data, bias)?);
            }
            Layer::Relu => {
                let x = vec
                    .take()
                    .unwrap_or_else(|| seq.last().cloned().unwrap_or_default());
                vec = Some(
                    x.iter()
                        .map(|&v| relu_transformer(&mut b.elem, v))
                        .collect::<Result<_, _>>()?,
                );
            }
        }
    }
    let outputs = vec.unwrap_or_else(|| seq.last().cloned().unwrap_or_default());
    Ok(Abstraction {
        element: b.elem,
        sites: b.sites,
        outputs,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::model::{Matrix, MODEL_FORMAT};
    use crate::network::threat::ThreatModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lstm(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> LstmLayer {
        let mut m = || {
            Matrix::new(
                input + hidden,
                hidden,
                (0..(input + hidden) * hidden)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap()
        };
        let (w_f, w_i, w_o, w_c) = (m(), m(), m(), m());
        let mut v = || {
            (0..hidden)
                .map(|_| rng.random_range(-0.5..0.5))
                .collect::<Vec<_>>()
        };
        LstmLayer {
            hidden,
            w_f,
            w_i,
            w_o,
            w_c,
            b_f: v(),
            b_i: v(),
            b_o: v(),
            b_c: v(),
        }
    }

    fn random_model(rng: &mut ChaCha8Rng) -> ModelSpec {
        let input_dim = rng.random_range(1..=3);
        let hidden = rng.random_range(1..=3);
        let frames = rng.random_range(1..=3);
        let mut layers = vec![Layer::Lstm(random_lstm(rng, input_dim, hidden))];
        if rng.random_bool(0.5) {
            layers.push(Layer::Lstm(random_lstm(rng, hidden, hidden)));
        }
        layers.push(Layer::Affine {
            weights: Matrix::new(
                3,
                hidden,
                (0..3 * hidden)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap(),
            bias: vec![0.0; 3],
        });
        ModelSpec {
            format: MODEL_FORMAT.into(),
            input_dim,
            frames,
            preprocess: None,
            layers,
        }
    }

    #[test]
    fn boxes_contain_concrete_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let model = random_model(&mut rng);
            let centre: Vec<f64> = (0..model.input_len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let threat = ThreatModel::linf(rng.random_range(0.0..0.3));
            let elem = threat.build_input_element(&model, &centre).unwrap();
            let abs = abstract_forward(&model, elem, &ForwardConfig::default()).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = centre
                    .iter()
                    .map(|&c| c + threat.eps() * rng.random_range(-1.0..1.0))
                    .collect();
                let tr = model.trace(&x).unwrap();
                for (ids, vals) in abs.layout.lstm.iter().zip(&tr.lstm) {
                    for t in 0..model.frames {
                        for j in 0..vals.h[t].len() {
                            assert!(abs
                                .element
                                .interval(ids.h[t][j])
                                .widen(1e-6)
                                .contains(vals.h[t][j]));
                            assert!(abs
                                .element
                                .interval(ids.c[t][j])
                                .widen(1e-6)
                                .contains(vals.c[t][j]));
                        }
                    }
                }
                for (id, v) in abs.outputs.iter().zip(&tr.logits) {
                    assert!(abs.element.interval(*id).widen(1e-6).contains(*v));
                }
            }
        }
    }

    #[test]
    fn point_input_gives_point_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let model = random_model(&mut rng);
            let x: Vec<f64> = (0..model.input_len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let elem = ThreatModel::linf(0.0)
                .build_input_element(&model, &x)
                .unwrap();
            let abs = abstract_forward(&model, elem, &ForwardConfig::default()).unwrap();
            let logits = model.logits(&x).unwrap();
            for (id, v) in abs.outputs.iter().zip(&logits) {
                let b = abs.element.interval(*id);
                assert!(b.width() < 1e-6 && b.widen(1e-6).contains(*v));
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let z = Matrix::zeros(3, 2);
        let l = LstmLayer {
            hidden: 2,
            w_f: z.clone(),
            w_i: z.clone(),
            w_o: z.clone(),
            w_c: z,
            b_f: vec![0.0; 2],
            b_i: vec![0.0; 2],
            b_o: vec![0.0; 2],
            b_c: vec![0.0; 2],
        };
        let model = ModelSpec {
            format: MODEL_FORMAT.into(),
            input_dim: 1,
            frames: 3,
            preprocess: None,
            layers: vec![Layer::Lstm(l)],
        };
        let elem = ThreatModel::linf(1.0)
            .build_input_element(&model, &[0.0; 3])
            .unwrap();
        let abs = abstract_forward(&model, elem, &ForwardConfig::default()).unwrap();
        for id in &abs.outputs {
            let b = abs.element.interval(*id);
            assert!(b.lo() > -1e-8 && b.hi() < 1e-8, "{b:?}");
        }
    }

    #[test]
    fn site_count_follows_unrolling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = random_lstm(&mut rng, 1, 2);
        let model = ModelSpec {
            format: MODEL_FORMAT.into(),
            input_dim: 1,
            frames: 3,
            preprocess: None,
            layers: vec![Layer::Lstm(l)],
        };
        let elem = ThreatModel::linf(0.1)
            .build_input_element(&model, &[0.0; 3])
            .unwrap();
        let abs = abstract_forward(&model, elem, &ForwardConfig::default()).unwrap();
        // Two sites per unit at the first step, three afterwards.
        assert_eq!(abs.sites.len(), 2 * 2 + 2 * 3 * 2);
        assert!(abs
            .sites
            .iter()
            .all(|s| s.x.index() < s.neuron.index() && s.y.index() < s.neuron.index()));
    }
}
