//! Knowledge-based dependence regularization for generative models.
//!
//! The crate trains factor analysis, VAE and GAN models under a penalty that
//! pushes the model's marginals to respect prescribed *relative* feature
//! dependence, measured with the Hilbert–Schmidt independence criterion
//! (HSIC). The HSIC estimators and the relative-dependence test are usable
//! on their own.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the trainer, data
//! loaders and CLI use.

pub mod autograd;
pub mod data;
pub mod error;
pub mod experiments;
pub mod gradcheck;
pub mod hsic;
pub mod kernels;
pub mod knowledge;
pub mod models;
pub mod optim;
pub mod regularizer;
pub mod scalar;
pub mod stats;
pub mod tensor;
pub mod trainer;

pub use autograd::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use data::{Dataset, Split, Splits};
pub use knowledge::{KnowledgeSet, KnowledgeTriple};
pub use optim::{Adam, AdamConfig};
pub use regularizer::{BandwidthTable, RegConfig};
pub use scalar::Scalar;
pub use tensor::{Parameter, Tensor};
pub use trainer::{evaluate, grid_select, train, Metric, TrainConfig, TrainReport};

pub type TensorF64 = Tensor<f64>;
pub type TensorF32 = Tensor<f32>;
pub type TapeF64 = Tape<f64>;
