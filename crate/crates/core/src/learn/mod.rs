//! Classifier heads over precomputed features, the classification and
//! ontology losses with analytic gradients, Nesterov SGD with a warmup plus
//! cosine schedule, and ontology-driven inference.

mod head;
mod infer;
mod loss;
mod optim;
mod train;

pub use head::{clamp_probability, sigmoid, ClassifierHead, EPS};
pub use infer::{infer, InferenceModel, InferenceResult, Predictor};
pub use loss::{
    bce, bce_grad, cosine_loss, cosine_loss_grad, weighted_bce, weighted_bce_grad, LossKind, Objective,
};
pub use optim::{LrSchedule, OptimState, SgdConfig};
pub use train::{batch_gradient, mean_loss, Dataset, TraceRow, TrainConfig, TrainOutcome, Trainer};

use alloc::string::String;
use alloc::vec::Vec;

use crate::ontology::OntologyError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("{what}: expected length {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("weights were computed for ontology {weights}, model expects {ontology}")]
    HashMismatch { weights: String, ontology: String },
    #[error("weighted vector is zero, cosine is undefined")]
    ZeroVector,
    #[error("iteration {iter} outside schedule of {total} iterations")]
    OutOfSchedule { iter: u64, total: u64 },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("training diverged at iteration {iter}")]
    Diverged { iter: u64, trace: Vec<TraceRow> },
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), LearnError> {
    if expected == got {
        Ok(())
    } else {
        Err(LearnError::Shape { what, expected, got })
    }
}
