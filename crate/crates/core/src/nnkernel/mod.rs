//! Dense 64-bit tensor kernel: a recording graph with reverse-mode
//! differentiation, transformer building blocks, Adam and checkpoints.

mod adam;
pub mod checkpoint;
mod gemm;
mod graph;
mod layers;
mod tensor;

pub use adam::Adam;
pub use graph::{AttentionWeights, Gradients, Graph, NodeId};
pub use layers::{Encoder, EncoderLayerParams, LayerNormParams, Linear, Mlp, INIT_STD};
pub use tensor::{ParamId, ParamStore, Tensor};
