//! The interface surrogate: a small feedforward network, its training, and
//! the trial-solution wrapper that enforces initial and boundary values.

mod data;
mod mlp;
mod surrogate;
mod train;
mod trial;

pub use data::{InputScaling, OutputMap, Provenance, TrainingSet};
pub use mlp::{Gradient, Mlp};
pub use surrogate::Surrogate;
pub use train::{
    fit, loss, loss_and_gradient, train_network, Optimizer, TrainConfig, TrainReport,
};
pub use trial::{trial_parts, trial_solution, BoundaryData};
