//! Stratified adjustment: cross-classify the sample by categorical
//! confounders and either average the per-stratum product-limit curves
//! (stratum-share or external reference weights) or fold the stratum shares
//! into row weights of a single product-limit estimate per group.

use crate::data::{Covariate, SurvDataset};
use crate::error::{Error, Result};
use crate::nonparam::{weighted_km, KmVariance};

use super::{censor_times_of, eval_on_grid, risk_at_grid, RawCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StratVariant {
    /// Share-weighted average of stratum curves, no variance.
    Cupples,
    /// Same average with a pooled variance, optionally under external
    /// reference shares.
    Nieto,
    /// Row-weighted product-limit estimate per group.
    Amato,
}

fn stratum_labels(data: &SurvDataset, cols: &[String]) -> Result<Vec<String>> {
    let mut parts: Vec<&[String]> = Vec::with_capacity(cols.len());
    for col in cols {
        match data.covariate(col) {
            None => {
                return Err(Error::Binding(format!(
                    "covariate '{col}' not found in the dataset"
                )))
            }
            Some(Covariate::Numeric(_)) => {
                return Err(Error::InvalidType(format!(
                    "stratification requires categorical columns; '{col}' is numeric"
                )))
            }
            Some(Covariate::Categorical(v)) => parts.push(v),
        }
    }
    Ok((0..data.n())
        .map(|i| parts.iter().map(|p| p[i].as_str()).collect::<Vec<_>>().join(","))
        .collect())
}

/// Stratum shares: observed proportions by default, or validated external
/// reference shares covering exactly the observed strata.
fn stratum_weights(
    strata: &[String],
    counts: &[usize],
    n: usize,
    reference: Option<&[(String, f64)]>,
) -> Result<Vec<f64>> {
    let Some(rw) = reference else {
        return Ok(counts.iter().map(|&c| c as f64 / n as f64).collect());
    };
    let mut shares: Vec<Option<f64>> = vec![None; strata.len()];
    for (label, share) in rw {
        let Ok(idx) = strata.binary_search(label) else {
            return Err(Error::Config(format!(
                "reference weights name stratum '{label}', which does not occur in the data"
            )));
        };
        if shares[idx].is_some() {
            return Err(Error::Config(format!(
                "stratum '{label}' appears twice in the reference weights"
            )));
        }
        if !share.is_finite() || *share < 0.0 {
            return Err(Error::Config(format!(
                "reference weight for stratum '{label}' must be a nonnegative \
                 number, got {share}"
            )));
        }
        shares[idx] = Some(*share);
    }
    let mut out = Vec::with_capacity(strata.len());
    for (idx, s) in shares.iter().enumerate() {
        match s {
            None => {
                return Err(Error::Config(format!(
                    "reference weights are missing stratum '{}'",
                    strata[idx]
                )))
            }
            Some(v) => out.push(*v),
        }
    }
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "reference weights sum to {total}, expected 1"
        )));
    }
    Ok(out)
}

pub(crate) fn run(
    data: &SurvDataset,
    cols: &[String],
    variant: StratVariant,
    reference: Option<&[(String, f64)]>,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    let labels = stratum_labels(data, cols)?;
    let mut strata: Vec<String> = labels.clone();
    strata.sort();
    strata.dedup();
    let counts: Vec<usize> =
        strata.iter().map(|s| labels.iter().filter(|l| *l == s).count()).collect();
    let shares = stratum_weights(&strata, &counts, data.n(), reference)?;

    let groups = data.group_indices();
    let mut cells: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); groups.len()]; strata.len()];
    for (gi, (_, rows)) in groups.iter().enumerate() {
        for &i in rows {
            let si = strata.binary_search(&labels[i]).unwrap();
            cells[si][gi].push(i);
        }
    }
    for (si, s) in strata.iter().enumerate() {
        for (gi, (level, _)) in groups.iter().enumerate() {
            if cells[si][gi].is_empty() {
                return Err(Error::Estimability(format!(
                    "stratum '{s}' has no subjects at treatment level '{level}'"
                )));
            }
        }
    }

    let mut out = Vec::with_capacity(groups.len());
    for (gi, (level, rows)) in groups.iter().enumerate() {
        let gtime: Vec<f64> = rows.iter().map(|&i| data.time()[i]).collect();
        let gevent: Vec<bool> = rows.iter().map(|&i| data.event()[i]).collect();
        let rc = match variant {
            StratVariant::Amato => {
                let n_z = rows.len() as f64;
                let w: Vec<f64> = rows
                    .iter()
                    .map(|&i| {
                        let si = strata.binary_search(&labels[i]).unwrap();
                        let cell_share = cells[si][gi].len() as f64 / n_z;
                        shares[si] / cell_share
                    })
                    .collect();
                let est = weighted_km(&gtime, &gevent, &w, KmVariance::None)?;
                let risk = risk_at_grid(&gtime, &gevent, &w, grid);
                RawCurve {
                    group: level.clone(),
                    times: est.times,
                    surv: est.surv,
                    var: None,
                    risk: Some(risk),
                    censor_times: est.censor_times,
                    max_time: est.max_time,
                }
            }
            StratVariant::Cupples | StratVariant::Nieto => {
                let nieto = variant == StratVariant::Nieto;
                let mut vals = vec![0.0; grid.len()];
                let mut vars = vec![0.0; grid.len()];
                let mut max_time = f64::INFINITY;
                for (si, cell) in cells.iter().enumerate() {
                    let ctime: Vec<f64> = cell[gi].iter().map(|&i| data.time()[i]).collect();
                    let cevent: Vec<bool> = cell[gi].iter().map(|&i| data.event()[i]).collect();
                    let unit = vec![1.0; ctime.len()];
                    let kind = if nieto { KmVariance::Greenwood } else { KmVariance::None };
                    let est = weighted_km(&ctime, &cevent, &unit, kind)?;
                    let sv = eval_on_grid(&est.times, &est.surv, 1.0, grid);
                    for (v, s) in vals.iter_mut().zip(&sv) {
                        *v += shares[si] * s;
                    }
                    if nieto {
                        let vr = eval_on_grid(&est.times, &est.var, 0.0, grid);
                        for (v, r) in vars.iter_mut().zip(&vr) {
                            *v += shares[si] * shares[si] * r;
                        }
                    }
                    max_time = max_time.min(est.max_time);
                }
                RawCurve {
                    group: level.clone(),
                    times: grid.to_vec(),
                    surv: vals,
                    var: if nieto { Some(vars) } else { None },
                    risk: None,
                    censor_times: censor_times_of(&gtime, &gevent),
                    max_time,
                }
            }
        };
        out.push(rc);
    }
    Ok(out)
}
