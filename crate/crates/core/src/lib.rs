//! Derivative-free tuning of RBF-SVM hyperparameters.
//!
//! The search runs in `(log2 C, log2 gamma)` space. Particle swarm
//! optimization explores; rood-pattern search refines a selected subset of
//! particles each generation. The fitness is the stratified k-fold
//! cross-validation error of an SVM trained with a built-in SMO solver.
//! Plain PSO and grid search are provided as baselines, together with a
//! seeded benchmark harness.

pub mod bench;
pub mod cv;
pub mod data;
pub mod error;
pub mod memetic;
pub mod objective;
pub mod pattern;
pub mod pso;
pub mod selection;
pub mod space;
pub mod svm;

pub use error::{Error, Result};
pub use memetic::{run, Algorithm, RunConfig, RunResult};
pub use objective::Objective;
pub use space::{Position, SearchSpace, SvmParams};
