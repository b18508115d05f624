//! Node-classification experiments on citation graphs: model builders, the
//! training loop, the experiment suite and a small decision demo.
//!
//! ```
//! use diffprog_experiments::{guided_decision, Action};
//!
//! assert_eq!(guided_decision(0.5, 1.2).unwrap(), Action::Buy);
//! assert_eq!(guided_decision(-0.1, 0.3).unwrap(), Action::Hold);
//! ```

use diffprog_core::graph::GraphError;
use diffprog_core::TensorError;

pub mod decide;
pub mod demo;
pub mod model;
pub mod suite;
pub mod train;

pub use decide::{guided_decision, Action};
pub use model::{build_model, AttnScope, GraphContext, Model, ModelConfig, ModelKind};
pub use suite::{run_experiment_suite, SuiteSpec, SuiteTable};
pub use train::{accuracy, evaluate, fit, run, train, EdgeSpec, Hyperparams, Optimizer, RunReport, RunSpec};

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("{0}")]
    Spec(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("evaluation mask is empty")]
    EmptyMask,
    #[error("non-finite trend input ({p1}, {p2})")]
    NonFinite { p1: f64, p2: f64 },
    #[error(transparent)]
    Core(#[from] diffprog_core::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed suite spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ExpError> = std::result::Result<T, E>;
