//! Preference-guided multi-objective gradient optimization.
//!
//! The crate casts clothes-changing person re-identification as the joint
//! minimization of three conflicting losses (identity classification,
//! same-clothes triplet, clothes-changing triplet) and provides:
//!
//! - [`minnorm`]: simplex-constrained min-norm solvers over gradient Gram
//!   matrices and the Pareto stationarity test.
//! - [`preference`]: preference vectors, sub-region constraints, the
//!   projection weights and the combined preference-aware weights.
//! - [`descent`]: the optimization loop (fixed linear scalarization, Pareto
//!   descent, Pareto descent with a preference) with JSON-lines traces.
//! - [`problems`]: analytic benchmark problems and a finite-difference
//!   gradient validator.
//! - [`simulator`]: a desk-scale identity/clothing world with latent clothes
//!   swaps, a linear embedding model and the decomposed losses.
//! - [`sampler`]: PK, same-clothes and clothes-changing batch samplers.
//! - [`metrics`]: protocol-aware retrieval metrics, CCSR and Pareto utilities.

// parameter checks are written `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descent;
pub mod error;
pub mod metrics;
pub mod minnorm;
pub mod preference;
pub mod problems;
pub mod sampler;
pub mod simulator;

pub use descent::{OptimizerConfig, RunTrace, TrainFailure, WeightingMode};
pub use error::{Error, Result};
pub use metrics::{EvalResult, LabeledFeature, RetrievalProtocol};
pub use minnorm::{GradientSet, GramMatrix, SimplexWeights};
pub use preference::{CombinedWeights, PreferenceSet, PreferenceVector};
pub use problems::{FrontDescriptor, MultiObjectiveProblem, ObjectiveVector};
pub use sampler::{Batch, SamplerConfig, SamplerMode};
pub use simulator::{DatasetTable, EmbeddingModel, Instance, Source, WorldConfig};
