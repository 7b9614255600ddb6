//! Minimal differentiable computation: tensors, a reverse-mode tape,
//! layers, Adam, finite-difference gradient checks and checkpoints.

mod checkpoint;
mod gradcheck;
mod graph;
mod layers;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, GradCheckReport, GRADCHECK_FLOOR};
pub use graph::{Graph, Var};
pub use layers::{
    bidirectional_recurrent, conv1d, masked_softmax, sinusoidal_positions, BiRecurrent, Conv1d, ConvStack,
    Embedding, Encoder, EncoderKind, GruCell, Linear, SelfAttention,
};
pub use optim::{adam_step, Algorithm, OptimizerState};
pub use params::{Parameter, ParameterSet};
pub use tensor::Tensor;
