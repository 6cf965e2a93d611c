//! Regression models used inside the adjustment methods: logistic treatment
//! models, Cox outcome models and pseudo-value regressions.

mod cox;
mod gee;
pub(crate) mod linalg;
mod logistic;

pub use cox::{cox_partial_loglik, cox_score, fit_cox, predict_cox_survival, CoxFit};
pub use gee::{fit_gee_pseudo, GeeFit, GeeLink};
pub use logistic::{expit, fit_logistic, logistic_loglik, logistic_score, LogisticFit};
