//! Minibatch subset selection for selective backpropagation.
//!
//! A forward pass over `M` examples is cheap relative to a backward pass, so
//! each training step can forward a full batch and backpropagate only a
//! weighted subset of `m` examples. This crate provides three ways to pick
//! that subset (uniform, loss-prioritized, and gradient matching via
//! orthogonal matching pursuit on the last-layer Gram matrix), a small MLP
//! with exact backprop to train with them, and the experiment drivers used to
//! compare them.
//!
//! ```
//! use selective_backprop::{gram_implicit, mean_correlations, omp_gram, BatchTape, DenseMatrix, OmpConfig};
//!
//! let h = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
//! let p = DenseMatrix::from_rows(&[vec![0.5, -0.5], vec![0.5, -0.5], vec![-0.2, 0.2]]).unwrap();
//! let tape = BatchTape::new(h, p, vec![0.7, 0.7, 0.2]).unwrap();
//! let k = gram_implicit(&tape);
//! let t = mean_correlations(&k);
//! let sel = omp_gram(&k, &t, &OmpConfig::new(2)).unwrap();
//! assert!(sel.len() <= 2);
//! ```

pub mod config;
pub mod data;
pub mod error;
pub mod evalgrad;
pub mod experiment;
pub mod gram;
pub mod linalg;
pub mod model;
pub mod omp;
pub mod selection;
pub mod trainer;

pub use config::{dump, load_config, parse_config, EvalSpec, ExperimentSpec};
pub use data::{load_dataset, Dataset, DatasetDescriptor, DatasetKind, Split};
pub use error::{Error, Result};
pub use evalgrad::{full_dataset_gradient, gradient_error_experiment, GradErrorSample};
pub use gram::{gram_explicit, gram_implicit, mean_correlations, BatchTape, GramMatrix};
pub use linalg::{cholesky_append, solve_posdef, DenseMatrix, LowerCholesky};
pub use model::{Activation, GradientVector, Mlp, ModelSpec};
pub use omp::{omp_dense_oracle, omp_gram, residual_norm_sq, OmpConfig, Selection};
pub use selection::{CdfSource, Selector, StrategyConfig, StrategyKind};
pub use trainer::{
    cost_units, lr_at, resolve_batch_sizes, run_training, train, BatchMode, MetricsRecord, Optimizer, Preset, Schedule,
    TrainConfig,
};
