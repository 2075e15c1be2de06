//! The two model kinds this crate trains or analyzes: analytic families with
//! exact densities (for the theory suite) and a feed-forward implicit
//! generator (for training).

mod family;
mod net;

pub use family::{closed_form_mle, family_sample, log_density, AnalyticFamily, MleSolution, ModelError};
pub use net::{GeneratorNet, OutputActivation};
