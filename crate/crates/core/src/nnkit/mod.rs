//! The pulse-regression CNN: layers, network, optimizer, training loop and
//! checkpoint format.

mod adadelta;
mod checkpoint;
mod kernels;
mod layers;
mod network;
mod predict;
mod tensor;
mod train;

pub use adadelta::{AdadeltaParams, AdadeltaState};
pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use kernels::{first_layer_channel_sums, KernelSummary};
pub use layers::{
    apply_mask, avgpool2x2, avgpool2x2_backward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, dropout, euclidean_loss, tanh_activation, tanh_backward, ConvGrads, DenseGrads,
    KERNEL,
};
pub use network::{DropoutMode, Network, NetworkConfig, Preset, Tape, CONV_LAYERS, POOL_AFTER};
pub use predict::predict_clip;
pub use tensor::Tensor;
pub use train::{epoch_order, train, Dataset, TrainOptions, TrainReport};
