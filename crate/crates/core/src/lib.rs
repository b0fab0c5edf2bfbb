//! Bounded-Lipschitz metrics, shifted-loss SVMs and bootstrap robustness
//! probes on finite metric spaces.

pub mod bl_metric;
pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod loss_kernel;
pub mod lp;
pub mod measures;
pub mod metric_space;
pub mod output;
pub mod robustness;
pub mod rng;
pub mod selftest;
pub mod svm;

pub use error::{Error, Result};
