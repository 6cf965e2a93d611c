//! Confounder-adjusted survival curves for right-censored observational data.
//!
//! The crate estimates counterfactual survival functions per treatment group
//! using inverse probability of treatment weighting, outcome regression,
//! doubly robust combinations, matching, and covariate stratification, with
//! analytic or bootstrap uncertainty and downstream summaries (differences,
//! survival-time quantiles, restricted mean survival time).

pub mod adjust;
pub mod data;
pub mod effects;
pub mod error;
pub mod inference;
pub mod models;
pub mod nonparam;
pub mod sim;
pub mod step;

pub use adjust::{
    adjusted_surv, compute_iptw_weights, fit_propensity, weights_from_model, AdjustedSurv,
    CiSource, CiTransform, EstimationOptions, IptwWeights, Method, MethodSpec, PropensityModel,
    ALL_METHODS,
};
pub use data::{Covariate, DesignMatrix, SurvDataset};
pub use effects::{curve_diff, rmst, surv_quantile, EffectEstimate, EffectKind};
pub use error::{Error, Result};
pub use inference::{BootInterval, BootstrapResult};
pub use models::GeeLink;
pub use nonparam::{
    pseudo_values, weighted_km, KmEstimate, KmVariance, PseudoValues, RiskTable, SurvCurve,
};
pub use sim::{simulate_dgp, true_curve, true_quantile, DgpSpec};
pub use step::StepFunction;
