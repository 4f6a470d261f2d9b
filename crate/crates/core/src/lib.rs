//! Off-policy evaluation of deterministic ranking policies from logged
//! clicks.
//!
//! Three importance-weight families are provided: the position-based model
//! (PBM), the item-position model (IPM), and an interpolating estimator
//! whose window size `T` moves between them. The crate also contains a
//! synthetic click simulator with a known ground truth, a replicated
//! experiment runner that measures bias, variance and MSE, and an exact
//! enumeration oracle for small lists.

pub mod clicks;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod logging;
pub mod plot;
pub mod types;

pub use clicks::{generate_dataset, power_curve, simulate_clicks, true_value, Scenario, UserModel};
pub use error::{Error, Result};
pub use estimator::{
    estimate, estimate_per_query, interpol_weight, ip_weight, pbm_weight, window_probability,
    EstimateReport, EstimatorConfig, Family, FixedTarget, TargetPolicy,
};
pub use experiments::{exhaustive_oracle, run_cell, run_grid, CellResult, ExperimentGrid};
pub use logging::{Sampler, SwapPolicy};
pub use types::{ClickRecord, PositionBiasCurve, RankPropensities, Ranking};
