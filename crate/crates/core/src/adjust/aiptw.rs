//! Doubly robust estimation: an inverse-probability term corrected by an
//! outcome-model augmentation, consistent when either the treatment model or
//! the outcome model is right.

use crate::data::SurvDataset;
use crate::error::Result;
use crate::models::GeeLink;
use crate::nonparam::{pseudo_values, weighted_km, KmVariance};

use super::direct::{fit_outcome_cox, fit_outcome_pv};
use super::weights::PropensityModel;
use super::{censor_times_of, eval_on_grid, RawCurve};

/// Closed-form estimator for two treatment levels. The observed-data term
/// reweights by both the propensity and a pooled product-limit estimate of
/// the censoring distribution; the augmentation predicts from a Cox outcome
/// model.
pub(crate) fn run_closed(
    data: &SurvDataset,
    model: &PropensityModel,
    formula: &str,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    model.check_positivity()?;
    let outcome = fit_outcome_cox(data, formula)?;
    let cumhaz = outcome.cumhaz_on(grid);
    let n = data.n();
    let time = data.time();

    let flipped: Vec<bool> = data.event().iter().map(|&e| !e).collect();
    let g_km = weighted_km(time, &flipped, &vec![1.0; n], KmVariance::None)?;
    let g = eval_on_grid(&g_km.times, &g_km.surv, 1.0, grid);

    let mut out = Vec::new();
    for (z, (level, rows)) in data.group_indices().into_iter().enumerate() {
        let factors: Vec<f64> = (0..n).map(|i| outcome.eta(z, i).exp()).collect();
        let mut surv = Vec::with_capacity(grid.len());
        for (j, &t) in grid.iter().enumerate() {
            let mut total = 0.0;
            for i in 0..n {
                let pi = model.prob(i, z);
                let iz = model.observed_level(i) == z;
                // Whenever some subject is still observed past t the pooled
                // censoring estimate at t is positive, so this never divides
                // by zero.
                if iz && time[i] > t {
                    total += 1.0 / (pi * g[j]);
                }
                let m = (-cumhaz[j] * factors[i]).exp();
                total -= ((iz as u8 as f64) - pi) / pi * m;
            }
            surv.push(total / n as f64);
        }
        let gtime: Vec<f64> = rows.iter().map(|&i| time[i]).collect();
        let gevent: Vec<bool> = rows.iter().map(|&i| data.event()[i]).collect();
        out.push(RawCurve {
            group: level,
            times: grid.to_vec(),
            surv,
            var: None,
            risk: None,
            censor_times: censor_times_of(&gtime, &gevent),
            max_time: outcome.fit.max_time,
        });
    }
    Ok(out)
}

/// Pseudo-value variant: jackknife pseudo-values stand in for the
/// censoring-weighted outcome, and the augmentation predicts from a
/// pseudo-value regression. Handles any number of treatment levels.
pub(crate) fn run_pseudo(
    data: &SurvDataset,
    model: &PropensityModel,
    formula: &str,
    link: GeeLink,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    model.check_positivity()?;
    let outcome = fit_outcome_pv(data, formula, link, grid)?;
    let offset = outcome.offset;
    let pv = if offset < grid.len() {
        Some(pseudo_values(data.time(), data.event(), &grid[offset..])?)
    } else {
        None
    };

    let n = data.n();
    let max_obs = data.time().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for (z, (level, rows)) in data.group_indices().into_iter().enumerate() {
        let mut surv = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            if j < offset {
                // Pseudo-values and modeled means are both exactly one before
                // the first event, so every subject's term reduces to one.
                surv.push(1.0);
                continue;
            }
            let pv = pv.as_ref().unwrap();
            let mut total = 0.0;
            for i in 0..n {
                let pi = model.prob(i, z);
                let iz = (model.observed_level(i) == z) as u8 as f64;
                let theta = pv.get(i, j - offset);
                total += theta * iz / pi - (iz - pi) / pi * outcome.mu(z, i, j);
            }
            surv.push(total / n as f64);
        }
        let gtime: Vec<f64> = rows.iter().map(|&i| data.time()[i]).collect();
        let gevent: Vec<bool> = rows.iter().map(|&i| data.event()[i]).collect();
        out.push(RawCurve {
            group: level,
            times: grid.to_vec(),
            surv,
            var: None,
            risk: None,
            censor_times: censor_times_of(&gtime, &gevent),
            max_time: max_obs,
        });
    }
    Ok(out)
}
