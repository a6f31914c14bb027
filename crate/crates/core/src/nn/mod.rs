//! A small CPU neural-network engine: layers with explicit backward passes.

pub mod block;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod gt;
pub mod layers;
pub mod loss;
pub mod model;
pub mod module;
pub mod optim;
pub mod tensor;
pub mod train;

pub use block::{residual_stage, Bottleneck};
pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest};
pub use conv::{Conv2d, ConvTranspose2d, Padding};
pub use gt::{encode_ground_truth, CellGrid, GroundTruth};
pub use layers::{conv_bn_relu, sigmoid, BatchNorm2d, Relu, Sigmoid, SwapChannelWidth, WidthCrop};
pub use loss::{bce, detection_loss, focal, mtl_loss, mtl_loss_logits, seg_loss, smooth_l1, LossValues, Targets, TrainConfig};
pub use model::{build_fftradnet, FftRadNet, HeadOutputs, HeadShapes, ModelSpec};
pub use module::{Cost, Mode, Module, ParamKind, Sequential};
pub use optim::Adam;
pub use tensor::{Scalar, Tensor};
pub use train::{predict, prepare_sample, prepare_samples, train_model, write_log_csv, LogRow, Sample, SceneSampler, Trainer};
