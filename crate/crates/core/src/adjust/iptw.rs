//! Inverse probability of treatment weighting.
//!
//! Three variants share the weights: a weighted product-limit curve, a
//! weighted Cox model with treatment indicators as its only covariates, and
//! weighted averages of jackknife pseudo-values.

use super::{censor_times_of, risk_at_grid, RawCurve};
use crate::data::{treatment_indicators, SurvDataset};
use crate::error::Result;
use crate::models::fit_cox;
use crate::nonparam::{pseudo_values, weighted_km, KmVariance};

pub(crate) fn run_km(data: &SurvDataset, w: &[f64], grid: &[f64]) -> Result<Vec<RawCurve>> {
    let mut out = Vec::new();
    for (level, idx) in data.group_indices() {
        let time: Vec<f64> = idx.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = idx.iter().map(|&i| data.event()[i]).collect();
        let wg: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
        let est = weighted_km(&time, &event, &wg, KmVariance::WeightedGreenwood)?;
        let risk = risk_at_grid(&time, &event, &wg, grid);
        out.push(RawCurve::from_km(level, est, Some(risk)));
    }
    Ok(out)
}

pub(crate) fn run_cox(data: &SurvDataset, w: &[f64], grid: &[f64]) -> Result<Vec<RawCurve>> {
    let _ = grid;
    let design = treatment_indicators(data, "treatment");
    let fit = fit_cox(data.time(), data.event(), &design, w)?;
    let base_times = fit.baseline_cumhaz.times.clone();
    let base_values = &fit.baseline_cumhaz.values;

    let mut out = Vec::new();
    for (gi, (level, idx)) in data.group_indices().into_iter().enumerate() {
        let hr = if gi == 0 { 1.0 } else { fit.coefficients[gi - 1].exp() };
        let surv: Vec<f64> = base_values.iter().map(|l| (-l * hr).exp()).collect();
        let time: Vec<f64> = idx.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = idx.iter().map(|&i| data.event()[i]).collect();
        out.push(RawCurve {
            group: level,
            times: base_times.clone(),
            surv,
            var: None,
            risk: None,
            censor_times: censor_times_of(&time, &event),
            max_time: fit.max_time,
        });
    }
    Ok(out)
}

/// Per-time weighted average of pseudo-values within each observed group.
/// `normalize` divides by the realized weight total (ratio of sums); the
/// alternative divides by the weight total expected under the weighting
/// scheme. The reported variance is the weighted-mean ratio variance
/// sum(w^2 (pv - mean)^2) / denominator^2.
pub(crate) fn run_pseudo(
    data: &SurvDataset,
    w: &[f64],
    normalize: bool,
    stabilized: bool,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    let pv = pseudo_values(data.time(), data.event(), grid)?;
    let n = data.n() as f64;
    let max_time = data.time().iter().fold(0.0f64, |a, &b| a.max(b));

    let mut out = Vec::new();
    for (level, idx) in data.group_indices() {
        let w_total: f64 = idx.iter().map(|&i| w[i]).sum();
        let share = idx.len() as f64 / n;
        let denom = if normalize {
            w_total
        } else if stabilized {
            n * share
        } else {
            n
        };

        let mut surv = Vec::with_capacity(grid.len());
        let mut var = Vec::with_capacity(grid.len());
        for e in 0..grid.len() {
            let mut num = 0.0;
            for &i in &idx {
                num += w[i] * pv.get(i, e);
            }
            let mean = num / denom;
            let mut v = 0.0;
            for &i in &idx {
                let d = pv.get(i, e) - mean;
                v += w[i] * w[i] * d * d;
            }
            surv.push(mean);
            var.push(v / (denom * denom));
        }

        let time: Vec<f64> = idx.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = idx.iter().map(|&i| data.event()[i]).collect();
        out.push(RawCurve {
            group: level,
            times: grid.to_vec(),
            surv,
            var: Some(var),
            risk: None,
            censor_times: censor_times_of(&time, &event),
            max_time,
        });
    }
    Ok(out)
}
