//! Losses, regularizers, training loops and toy datasets.

mod commutation;
mod dataset;
mod flow_train;
mod deep_limit;
mod loss;
mod msa;
mod regularizer;
mod train;

pub use commutation::continuous_adjoint_gradient;
pub use flow_train::train_flow;
pub use dataset::{make_dataset, Dataset, DATASET_NAMES};
pub use deep_limit::{deep_limit_experiment, DeepLimitConfig, DeepLimitRow};
pub use loss::{loss_eval, LossKind};
pub use msa::{msa_iterate, MsaConfig, MsaResult};
pub use regularizer::{h1_penalty, prox_timestep, Regularizer};
pub use train::{dataset_loss, train_reduced, LogRow, TrainConfig, TrainLog};
