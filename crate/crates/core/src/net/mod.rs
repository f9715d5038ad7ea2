//! U-Net imagination network: layers, loss, optimiser, training and weight files.

pub mod io;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod scalar;
pub mod train;
pub mod unet;

use thiserror::Error;

pub use io::{load_weights, load_weights_for, read_weights, save_weights, write_weights};
pub use layers::Tensor;
pub use loss::LossWeights;
pub use optim::Adam;
pub use scalar::Scalar;
pub use train::{train, train_from, EpochLog, TrainConfig, TrainError, TrainOutcome};
pub use unet::{encode_input, forward, Architecture, FeaturePyramid, Weights};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid class byte {0}")]
    InvalidClass(u8),
    #[error("empty batch")]
    EmptyBatch,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("not a weights file")]
    BadMagic,
    #[error("unsupported weights version {0}")]
    Version(u32),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("architecture mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },
    #[error("weights file truncated")]
    Truncated,
    #[error("malformed weights file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
