//! Minimal complex-valued network engine: tensors, layer kernels, a
//! reverse-mode tape, Adam, gradient checking and checkpoints.

pub mod adam;
pub mod bank;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::Checkpoint;
pub use bank::{make_circle_bank, CircleSampling, FourierFeatureBank};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, KinkSite, NodeId};
pub use ops::{complex_linear, dict_combine, fourier_features, relu_c, softmax_c_gate, GateMode};
pub use params::{Param, ParamId, ParamStore};
pub use tensor::CTensor;
