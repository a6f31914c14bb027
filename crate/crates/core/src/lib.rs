pub mod ablation;
pub mod complexity;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod format;
pub mod metrics;
pub mod mimo;
pub mod nn;
pub mod sim;

pub use config::{Preset, RadarConfig, ValidatedConfig};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{EvalParams, EvalReport};
pub use nn::{FftRadNet, ModelSpec, TrainConfig};
pub use sim::{PointTarget, Scene};
