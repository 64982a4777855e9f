//! Tensor storage, the differentiable layers used by the segmentation
//! network, and the optimizer.
//!
//! Every layer is a pure function. Forward passes return whatever the
//! backward pass needs; nothing is stashed on the tensors themselves.

mod conv;
mod layers;
mod optim;
mod scalar;
mod tensor;

pub use conv::{conv2d, conv2d_backward, ConvGrads};
pub use layers::{
    instance_norm, instance_norm_backward, leaky_relu, leaky_relu_backward, softmax_channel,
    upsample2x, upsample2x_backward, InstanceNormCache,
};
pub use optim::{sgd_nesterov_step, OptimizerState};
pub use scalar::Scalar;
pub use tensor::Tensor;
