//! Abstract transformers for the nonlinear operations.

pub mod binary;
pub mod unary;

pub use binary::{
    apply_binary, candidates, offset, offset_sigid, offset_sigtanh, stream_seed, surface_range,
    synthesize_plane, BinaryKind, CandidateSet, Region, SynthConfig, N_CANDIDATES,
};
pub use unary::{
    log_bounds, log_interval, log_transformer, relu_transformer, sigmoid, sigmoid_transformer,
    square_bounds, square_interval, square_transformer, tanh_transformer, SQUARE_DELTA,
};
