//! Error metrics, time-scale selection, cost model and LTI theory checks.

pub mod cost;
pub mod error;
pub mod misfit;
pub mod theory;

pub use cost::{flop_estimate, Algorithm, CostModel};
pub use error::{error_norm, ErrorHistory, ProjectedReference};
pub use misfit::{misfit_tau, MisfitResult};
pub use theory::VerificationReport;
