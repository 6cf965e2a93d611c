//! Weighted product-limit estimation.
//!
//! One routine serves every survival-curve need in the crate: the classic
//! estimator is the unit-weight special case, treatment-weighted curves pass
//! inverse probability weights, matching passes multiplicities and the
//! standardized stratified estimator passes its balancing weights.

use crate::error::{Error, Result};

/// Variance formula attached to the product-limit estimate.
///
/// `Greenwood` is the textbook estimator for unit weights. `WeightedGreenwood`
/// replaces each increment d/(Y(Y-d)) by d*M/(Y^2(Y-d)) with M the sum of
/// squared weights over the risk set, following the variance proposed for
/// inverse-probability-weighted curves by Xie and Liu (2005); it reduces to
/// `Greenwood` when all weights are 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmVariance {
    Greenwood,
    WeightedGreenwood,
    /// Skip variance estimation; `var` is reported as all zeros.
    None,
}

/// Product-limit estimate over the distinct event times of the sample.
#[derive(Debug, Clone)]
pub struct KmEstimate {
    /// Distinct times with positive (weighted) event mass, ascending.
    pub times: Vec<f64>,
    /// Survival value from each event time onward.
    pub surv: Vec<f64>,
    /// Variance of the survival value at each event time. Reported as 0 where
    /// the curve itself reaches exactly 0 (there the usual increment is
    /// undefined because the at-risk mass is exhausted).
    pub var: Vec<f64>,
    /// Weighted number at risk just before each event time.
    pub n_risk: Vec<f64>,
    /// Weighted number of events at each event time.
    pub n_event: Vec<f64>,
    /// Last observed time (event or censored); the curve is not estimable
    /// beyond this point.
    pub max_time: f64,
    /// Distinct times at which at least one observation was censored.
    pub censor_times: Vec<f64>,
}

impl KmEstimate {
    /// Right-continuous evaluation, 1 before the first event time.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            1.0
        } else {
            self.surv[idx - 1]
        }
    }
}

pub fn weighted_km(
    time: &[f64],
    event: &[bool],
    weights: &[f64],
    variance: KmVariance,
) -> Result<KmEstimate> {
    let n = time.len();
    if n == 0 {
        return Err(Error::Degenerate("no observations".into()));
    }
    if event.len() != n || weights.len() != n {
        return Err(Error::Validation(format!(
            "length mismatch: {} times, {} events, {} weights",
            n,
            event.len(),
            weights.len()
        )));
    }
    let mut total_weight = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!(
                "weights must be finite and nonnegative, found {w} at row index {i}"
            )));
        }
        total_weight += w;
    }
    if total_weight <= 0.0 {
        return Err(Error::Degenerate("all weights are zero".into()));
    }
    for (i, &t) in time.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Validation(format!(
                "times must be positive and finite, found {t} at row index {i}"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));

    // Aggregate per distinct time: weighted events, weighted removals, sum of
    // squared weights removed, and whether any censoring happened there.
    struct TimeRow {
        t: f64,
        d_w: f64,
        removed_w: f64,
        removed_w2: f64,
        censored: bool,
    }
    let mut rows: Vec<TimeRow> = Vec::new();
    for &i in &order {
        let t = time[i];
        if rows.last().map(|r| r.t) != Some(t) {
            rows.push(TimeRow { t, d_w: 0.0, removed_w: 0.0, removed_w2: 0.0, censored: false });
        }
        let row = rows.last_mut().unwrap();
        row.removed_w += weights[i];
        row.removed_w2 += weights[i] * weights[i];
        if event[i] {
            row.d_w += weights[i];
        } else if weights[i] > 0.0 {
            row.censored = true;
        }
    }

    // Suffix sums give the weighted risk set just before each distinct time.
    let m = rows.len();
    let mut risk_w = vec![0.0; m];
    let mut risk_w2 = vec![0.0; m];
    let mut acc_w = 0.0;
    let mut acc_w2 = 0.0;
    for j in (0..m).rev() {
        acc_w += rows[j].removed_w;
        acc_w2 += rows[j].removed_w2;
        risk_w[j] = acc_w;
        risk_w2[j] = acc_w2;
    }

    let mut out = KmEstimate {
        times: Vec::new(),
        surv: Vec::new(),
        var: Vec::new(),
        n_risk: Vec::new(),
        n_event: Vec::new(),
        max_time: rows[m - 1].t,
        censor_times: rows.iter().filter(|r| r.censored).map(|r| r.t).collect(),
    };

    let mut surv = 1.0;
    let mut var_sum = 0.0;
    for j in 0..m {
        let d = rows[j].d_w;
        if d <= 0.0 {
            continue;
        }
        let y = risk_w[j];
        surv *= (y - d) / y;
        if y - d > 0.0 {
            var_sum += match variance {
                KmVariance::Greenwood => d / (y * (y - d)),
                KmVariance::WeightedGreenwood => d * risk_w2[j] / (y * y * (y - d)),
                KmVariance::None => 0.0,
            };
        }
        let var = if surv == 0.0 || variance == KmVariance::None {
            0.0
        } else {
            surv * surv * var_sum
        };
        out.times.push(rows[j].t);
        out.surv.push(surv);
        out.var.push(var);
        out.n_risk.push(y);
        out.n_event.push(d);
    }
    Ok(out)
}
