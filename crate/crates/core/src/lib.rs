//! Contrastive explanations for feed-forward tabular classifiers.
//!
//! Given a sample `x` predicted as class `X`, the generator perturbs a few
//! instance-dependent, mutually non-redundant features until the model predicts
//! some other class `Y`, keeping the result inside the training data's feature
//! domains. The difference between `x` and the generated sample is a predicate
//! that is rendered as text ("... would be classified as Y RATHER THAN X") and
//! scored for fidelity, conciseness, information gain and influence.
//!
//! Module map:
//!
//! - [`nn`]: the two-hidden-layer ReLU/softmax network, its input gradients and training.
//! - [`data`]: CSV loading, splits, feature domains, min-max scaling.
//! - [`discretize`], [`entropy`]: MDL discretization, entropy, Symmetrical Uncertainty.
//! - [`ranking`]: gradient and local-surrogate feature rankings.
//! - [`generator`]: the projection loop and the outer `k = 1..K` search.
//! - [`explainer`]: predicates, influence and text templates.
//! - [`metrics`]: evaluation statistics and the NearestCT / DeepFool baselines.
//! - [`eval`]: end-to-end runs over a test split.

pub mod data;
pub mod discretize;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod explainer;
pub mod generator;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ranking;
pub mod synth;

pub use error::{Error, Result};
pub use model::{argmax, Classifier, DifferentiableModel};
