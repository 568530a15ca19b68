//! Models, threat models and their abstract execution.

mod abstraction;
mod input;
mod model;
mod preprocess;
mod threat;

pub use abstraction::{abstract_forward, Abstraction, BinarySite, ForwardConfig, Layout, LstmIds};
pub use input::{
    decode_raw, encode_raw, load_examples, Example, InputFile, RawHeader, INPUT_FORMAT, RAW_FORMAT,
};
pub use model::{
    argmax, Gate, Layer, LstmLayer, LstmTrace, Matrix, ModelSpec, Trace, MODEL_FORMAT,
};
pub use preprocess::{hz_to_mel, mel_to_hz, PreprocMode, PreprocSpec};
pub use threat::{db_to_radius, peak_db, radius_to_db, Perturbation, Target, ThreatModel};
