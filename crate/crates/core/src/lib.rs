//! Time-varying and contextual Bayesian optimization for dynamic mobile edge
//! computing, together with the simulator, comparison methods and an
//! experiment runner.

pub mod acquisition;
pub mod bandit;
pub mod baselines;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod mec_env;

pub use acquisition::{maximize_ucb, propose, ucb, AcquisitionOptions};
pub use bandit::Exp3Bank;
pub use error::{Error, Result};
pub use gp::{FitOptions, FitReport, GpModel};
pub use harness::{ExperimentConfig, ExperimentSpec, Method};
pub use kernels::{full_kernel, KernelConfig, MixedPoint};
pub use mec_env::{oracle_optimum, Decision, MecConfig, MecState};
