//! Compact convolutional classifier trained from scratch.
//!
//! Layers run on plain `Vec` buffers, channel-major per sample. Convolutions
//! are lowered to GEMM through an im2col patch matrix. The network is generic
//! over the float type so the same code can be checked against finite
//! differences in `f64` and trained in `f32`.

mod io;
mod layers;
mod model;
mod scalar;
mod train;

pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use layers::{Conv2d, Dense, Layer, Shape};
pub(crate) use model::hwc_to_chw;
pub use model::{softmax, CnnModel, DecisionVector, Gradients, InputShape, Mode, CHUNK};
pub use scalar::Scalar;
pub use train::{accuracy, train, Dataset, EpochStats, History, TrainConfig};
