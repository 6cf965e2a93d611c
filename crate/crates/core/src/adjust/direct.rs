//! Outcome-model adjustment: fit one outcome regression on the whole sample,
//! predict every subject's survival with the treatment forced to each level,
//! and average the counterfactual predictions.

use crate::data::{expand_covariates, treatment_indicators, DesignMatrix, SurvDataset};
use crate::error::Result;
use crate::models::{fit_cox, fit_gee_pseudo, CoxFit, GeeFit, GeeLink};
use crate::nonparam::{pseudo_values, weighted_km, KmVariance};

use super::{censor_times_of, eval_on_grid, RawCurve};

/// Cox outcome model with the treatment indicator columns ahead of the
/// covariate block, so a counterfactual linear predictor only swaps the
/// indicator part.
pub(crate) struct OutcomeCox {
    pub fit: CoxFit,
    n_treat: usize,
    covs: DesignMatrix,
}

impl OutcomeCox {
    /// Linear predictor for subject `row` forced to the treatment level with
    /// sorted-level index `level_idx`.
    pub fn eta(&self, level_idx: usize, row: usize) -> f64 {
        let mut eta = if level_idx > 0 {
            self.fit.coefficients[level_idx - 1]
        } else {
            0.0
        };
        for (j, &x) in self.covs.row(row).iter().enumerate() {
            eta += self.fit.coefficients[self.n_treat + j] * x;
        }
        eta
    }

    /// Baseline cumulative hazard looked up at the grid times.
    pub fn cumhaz_on(&self, grid: &[f64]) -> Vec<f64> {
        let h = &self.fit.baseline_cumhaz;
        eval_on_grid(&h.times, &h.values, h.init, grid)
    }
}

pub(crate) fn fit_outcome_cox(data: &SurvDataset, formula: &str) -> Result<OutcomeCox> {
    let indicators = treatment_indicators(data, "treatment");
    let covs = expand_covariates(data, formula)?;
    let design = indicators.hcat(&covs);
    let fit = fit_cox(data.time(), data.event(), &design, &vec![1.0; data.n()])?;
    Ok(OutcomeCox { fit, n_treat: indicators.n_cols(), covs })
}

pub(crate) fn run_cox(data: &SurvDataset, formula: &str, grid: &[f64]) -> Result<Vec<RawCurve>> {
    let model = fit_outcome_cox(data, formula)?;
    let cumhaz = model.cumhaz_on(grid);
    let n = data.n();
    let mut out = Vec::new();
    for (gi, (level, rows)) in data.group_indices().into_iter().enumerate() {
        let factors: Vec<f64> = (0..n).map(|i| model.eta(gi, i).exp()).collect();
        let surv: Vec<f64> = cumhaz
            .iter()
            .map(|&h| factors.iter().map(|&f| (-h * f).exp()).sum::<f64>() / n as f64)
            .collect();
        let time: Vec<f64> = rows.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = rows.iter().map(|&i| data.event()[i]).collect();
        out.push(RawCurve {
            group: level,
            times: grid.to_vec(),
            surv,
            var: None,
            risk: None,
            censor_times: censor_times_of(&time, &event),
            max_time: model.fit.max_time,
        });
    }
    Ok(out)
}

/// Pseudo-value outcome model. Grid times before the first observed event
/// carry pseudo-values identically equal to one, which the cloglog link
/// cannot represent; the regression starts at `offset` and predictions before
/// it are exactly one. Symmetrically, once the pooled product-limit estimate
/// reaches zero the pseudo-value means are non-positive and the cloglog fit
/// would diverge, so fitting stops at `upper` and cloglog predictions from
/// there on are exactly zero. Identity-link fits keep the whole range.
pub(crate) struct PvOutcomeModel {
    pub offset: usize,
    pub upper: usize,
    fit: Option<GeeFit>,
    /// Covariate-plus-indicator sums per (level, subject), precomputed so a
    /// prediction is one intercept lookup and a link inversion.
    scores: Vec<Vec<f64>>,
    link: GeeLink,
}

impl PvOutcomeModel {
    /// Modeled survival for subject `row` forced to the treatment level with
    /// sorted-level index `level_idx`, at grid index `grid_idx`.
    pub fn mu(&self, level_idx: usize, row: usize, grid_idx: usize) -> f64 {
        if grid_idx < self.offset {
            return 1.0;
        }
        if grid_idx >= self.upper {
            return 0.0;
        }
        let fit = self.fit.as_ref().unwrap();
        let eta = fit.time_intercepts[grid_idx - self.offset] + self.scores[level_idx][row];
        self.link.inverse(eta)
    }
}

pub(crate) fn fit_outcome_pv(
    data: &SurvDataset,
    formula: &str,
    link: GeeLink,
    grid: &[f64],
) -> Result<PvOutcomeModel> {
    let first_event = data
        .time()
        .iter()
        .zip(data.event())
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .fold(f64::INFINITY, f64::min);
    let offset = grid.partition_point(|&t| t < first_event);
    let upper = match link {
        GeeLink::Identity => grid.len(),
        GeeLink::Cloglog => {
            let km = weighted_km(data.time(), data.event(), &vec![1.0; data.n()], KmVariance::None)?;
            match km.times.iter().zip(&km.surv).find(|(_, &s)| s <= 0.0) {
                Some((&t, _)) => grid.partition_point(|&g| g < t),
                None => grid.len(),
            }
        }
    };

    let indicators = treatment_indicators(data, "treatment");
    let covs = expand_covariates(data, formula)?;
    let n_treat = indicators.n_cols();

    let fit = if offset >= upper {
        None
    } else {
        let pv = pseudo_values(data.time(), data.event(), &grid[offset..upper])?;
        let design = indicators.hcat(&covs);
        Some(fit_gee_pseudo(&pv, &design, link)?)
    };

    let n = data.n();
    let k = data.treatment_levels().len();
    let mut scores = vec![vec![0.0; n]; k];
    if let Some(fit) = &fit {
        for (z, level_scores) in scores.iter_mut().enumerate() {
            let base = if z > 0 { fit.coefficients[z - 1] } else { 0.0 };
            for (i, s) in level_scores.iter_mut().enumerate() {
                let mut eta = base;
                for (j, &x) in covs.row(i).iter().enumerate() {
                    eta += fit.coefficients[n_treat + j] * x;
                }
                *s = eta;
            }
        }
    }
    Ok(PvOutcomeModel { offset, upper, fit, scores, link })
}

pub(crate) fn run_pseudo(
    data: &SurvDataset,
    formula: &str,
    link: GeeLink,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    let model = fit_outcome_pv(data, formula, link, grid)?;
    let n = data.n();
    let max_obs = data.time().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for (gi, (level, rows)) in data.group_indices().into_iter().enumerate() {
        let surv: Vec<f64> = (0..grid.len())
            .map(|e| (0..n).map(|i| model.mu(gi, i, e)).sum::<f64>() / n as f64)
            .collect();
        let time: Vec<f64> = rows.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = rows.iter().map(|&i| data.event()[i]).collect();
        out.push(RawCurve {
            group: level,
            times: grid.to_vec(),
            surv,
            var: None,
            risk: None,
            censor_times: censor_times_of(&time, &event),
            max_time: max_obs,
        });
    }
    Ok(out)
}
