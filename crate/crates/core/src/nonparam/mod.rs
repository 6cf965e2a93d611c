//! Nonparametric estimation building blocks: product-limit curves,
//! jackknife pseudo-values and monotonicity corrections.

mod isotonic;
mod km;
mod pseudo;

pub use isotonic::pava_nonincreasing;
pub use km::{weighted_km, KmEstimate, KmVariance};
pub use pseudo::{pseudo_values, PseudoValues};

use crate::step::StepFunction;

/// Clamp estimates into the unit interval.
pub fn force_bounds(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Sample quantile with linear interpolation between order statistics
/// (the common "type 7" definition). `sorted` must be ascending and
/// non-empty; `p` in [0, 1].
pub fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Risk counts at the distinct event times of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    pub times: Vec<f64>,
    pub n_risk: Vec<f64>,
    pub n_event: Vec<f64>,
}

/// One estimated survival curve, evaluated on an explicit time grid that
/// always starts at 0 with survival 1.
#[derive(Debug, Clone)]
pub struct SurvCurve {
    /// Treatment level this curve belongs to.
    pub group: String,
    /// Estimates on the evaluation grid (right-continuous step function).
    pub curve: StepFunction,
    /// Pointwise standard errors aligned with `curve.times`, where available.
    pub se: Option<Vec<f64>>,
    pub ci_lower: Option<Vec<f64>>,
    pub ci_upper: Option<Vec<f64>>,
    /// Risk/event counts at the group's own event times, for methods with a
    /// sample-based risk set.
    pub risk_table: Option<RiskTable>,
    /// Distinct censoring times of the group, for plot annotations.
    pub censor_times: Vec<f64>,
    /// Last time at which this curve is estimable; summaries must not ask for
    /// values beyond it.
    pub max_time: f64,
}

impl SurvCurve {
    pub fn eval(&self, t: f64) -> f64 {
        self.curve.eval(t)
    }

    /// Cumulative-incidence view (1 - S), used for display.
    pub fn cif(&self) -> StepFunction {
        StepFunction {
            init: 0.0,
            times: self.curve.times.clone(),
            values: self.curve.values.iter().map(|s| 1.0 - s).collect(),
        }
    }
}
