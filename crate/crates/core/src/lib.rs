//! Copula-based hierarchical aggregation of correlated risks.
//!
//! Risks sit at the leaves of a regular `(k, m)` tree. Each internal node ties
//! its `k` children together with a copula and sums them, bottom-up, until the
//! root holds the total portfolio `Z`. The crate provides
//!
//! * [`marginals`]: Normal and LogNormal leaves, exact tail measures;
//! * [`copulas`]: independence, equicorrelation Gaussian and Clayton samplers;
//! * [`hierarchy`]: the tree model and the Monte-Carlo aggregation engine;
//! * [`riskmetrics`]: empirical TVaR/xTVaR, η and DB;
//! * [`analytic`]: the closed-form Gaussian tree;
//! * [`covariance`]: the conditionally independent leaf covariance matrix;
//! * [`config`] / [`cli`]: JSON experiments driven by the `riskagg` binary.

pub mod analytic;
pub mod cli;
pub mod config;
pub mod copulas;
pub mod covariance;
pub mod error;
pub mod hierarchy;
pub mod marginals;
pub mod rank;
pub mod riskmetrics;
pub mod rng;

pub use error::{Error, Result};
pub use hierarchy::{NodeId, ScenarioSet, TreeSpec};
pub use marginals::MarginalSpec;
pub use copulas::CopulaSpec;
pub use riskmetrics::RiskReport;
