//! Weighted Cox proportional hazards regression.
//!
//! Newton-Raphson on the Breslow partial likelihood (tied event times share
//! one risk-set denominator), followed by the Breslow baseline cumulative
//! hazard at the estimate. Case weights enter both the likelihood and the
//! baseline; unit weights give the classic estimator. With an empty design
//! the baseline reduces to the (weighted) Nelson-Aalen estimator.
//!
//! References: Breslow (1974) for the tie handling and baseline, Cole &
//! Hernan (2004) for weighted fits.

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::models::linalg::{dot, max_abs, solve_spd};
use crate::step::StepFunction;

pub const MAX_ITER: usize = 25;
pub const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CoxFit {
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    /// Breslow baseline cumulative hazard; jumps at distinct event times.
    pub baseline_cumhaz: StepFunction,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Last observed time in the fitting data; predictions beyond it are
    /// refused.
    pub max_time: f64,
}

struct SortedSample<'a> {
    time: &'a [f64],
    event: &'a [bool],
    weights: &'a [f64],
    /// Row indices ordered by descending time.
    desc: Vec<usize>,
}

fn sort_sample<'a>(
    time: &'a [f64],
    event: &'a [bool],
    weights: &'a [f64],
) -> SortedSample<'a> {
    let mut desc: Vec<usize> = (0..time.len()).collect();
    desc.sort_by(|&a, &b| time[b].total_cmp(&time[a]));
    SortedSample { time, event, weights, desc }
}

/// One sweep over the risk sets: returns the Breslow partial log-likelihood
/// and, when `derivs` is set, the score vector and observed information.
fn breslow_sweep(
    s: &SortedSample,
    design: &DesignMatrix,
    beta: &[f64],
    derivs: bool,
) -> (f64, Vec<f64>, Vec<f64>) {
    let p = design.n_cols();
    let n = s.desc.len();
    let eta: Vec<f64> = (0..design.n_rows())
        .map(|i| dot(design.row(i), beta))
        .collect();
    // Shared exponent shift keeps exp() bounded without changing the result.
    let shift = eta.iter().fold(0.0f64, |a, &b| a.max(b));

    let mut ll = 0.0;
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];

    let mut pos = 0;
    while pos < n {
        let t = s.time[s.desc[pos]];
        let mut block_end = pos;
        while block_end < n && s.time[s.desc[block_end]] == t {
            block_end += 1;
        }
        // Everyone observed at time t belongs to the risk set at t.
        for &i in &s.desc[pos..block_end] {
            let w = s.weights[i];
            if w == 0.0 {
                continue;
            }
            let r = w * (eta[i] - shift).exp();
            s0 += r;
            if derivs {
                let row = design.row(i);
                for a in 0..p {
                    s1[a] += r * row[a];
                    for b in 0..p {
                        s2[a * p + b] += r * row[a] * row[b];
                    }
                }
            }
        }
        let mut d_w = 0.0;
        let mut eta_sum = 0.0;
        let mut x_sum = vec![0.0; p];
        for &i in &s.desc[pos..block_end] {
            if s.event[i] && s.weights[i] > 0.0 {
                d_w += s.weights[i];
                eta_sum += s.weights[i] * eta[i];
                if derivs {
                    let row = design.row(i);
                    for a in 0..p {
                        x_sum[a] += s.weights[i] * row[a];
                    }
                }
            }
        }
        if d_w > 0.0 {
            ll += eta_sum - d_w * (s0.ln() + shift);
            if derivs {
                for a in 0..p {
                    let ma = s1[a] / s0;
                    score[a] += x_sum[a] - d_w * ma;
                    for b in 0..p {
                        info[a * p + b] += d_w * (s2[a * p + b] / s0 - ma * s1[b] / s0);
                    }
                }
            }
        }
        pos = block_end;
    }
    (ll, score, info)
}

/// Breslow partial log-likelihood at an arbitrary coefficient vector.
pub fn cox_partial_loglik(
    time: &[f64],
    event: &[bool],
    design: &DesignMatrix,
    weights: &[f64],
    beta: &[f64],
) -> f64 {
    let s = sort_sample(time, event, weights);
    breslow_sweep(&s, design, beta, false).0
}

/// Score (gradient of the Breslow partial log-likelihood) at `beta`.
pub fn cox_score(
    time: &[f64],
    event: &[bool],
    design: &DesignMatrix,
    weights: &[f64],
    beta: &[f64],
) -> Vec<f64> {
    let s = sort_sample(time, event, weights);
    breslow_sweep(&s, design, beta, true).1
}

fn validate_inputs(
    time: &[f64],
    event: &[bool],
    design: &DesignMatrix,
    weights: &[f64],
) -> Result<()> {
    let n = time.len();
    if event.len() != n || weights.len() != n || design.n_rows() != n {
        return Err(Error::Validation(format!(
            "length mismatch: {} times, {} events, {} design rows, {} weights",
            n,
            event.len(),
            design.n_rows(),
            weights.len()
        )));
    }
    if n == 0 {
        return Err(Error::Degenerate("no observations".into()));
    }
    for (i, &t) in time.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Validation(format!(
                "times must be positive and finite, found {t} at row index {i}"
            )));
        }
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!(
                "weights must be finite and nonnegative, found {w} at row index {i}"
            )));
        }
    }
    let event_weight: f64 = time
        .iter()
        .zip(event)
        .zip(weights)
        .filter(|((_, &e), _)| e)
        .map(|(_, &w)| w)
        .sum();
    if event_weight <= 0.0 {
        return Err(Error::Degenerate("no events with positive weight".into()));
    }
    Ok(())
}

pub fn fit_cox(
    time: &[f64],
    event: &[bool],
    design: &DesignMatrix,
    weights: &[f64],
) -> Result<CoxFit> {
    validate_inputs(time, event, design, weights)?;
    let p = design.n_cols();
    let s = sort_sample(time, event, weights);

    let mut beta = vec![0.0; p];
    let mut iterations = 0;
    let mut ll = f64::NEG_INFINITY;
    if p == 0 {
        ll = breslow_sweep(&s, design, &beta, false).0;
    } else {
        let mut converged = false;
        for iter in 0..MAX_ITER {
            let (cur_ll, g, info) = breslow_sweep(&s, design, &beta, true);
            ll = cur_ll;
            if max_abs(&g) <= GRAD_TOL {
                iterations = iter;
                converged = true;
                break;
            }
            let delta = solve_spd(&info, &g, p, &design.names)?;
            // Slack scaled to |ll|, as in the logistic fitter: an absolute
            // cutoff stalls on summation noise once the sample is large.
            let slack = 1e-12 * (1.0 + ll.abs());
            let mut scale = 1.0;
            for _ in 0..12 {
                let cand: Vec<f64> =
                    beta.iter().zip(&delta).map(|(b, d)| b + scale * d).collect();
                let cand_ll = breslow_sweep(&s, design, &cand, false).0;
                if cand_ll >= ll - slack {
                    beta = cand;
                    break;
                }
                scale *= 0.5;
            }
            iterations = iter + 1;
        }
        if !converged {
            let g = breslow_sweep(&s, design, &beta, true).1;
            if max_abs(&g) > GRAD_TOL {
                let eta_max = (0..design.n_rows())
                    .map(|i| dot(design.row(i), &beta).abs())
                    .fold(0.0f64, f64::max);
                let hint = if eta_max > 30.0 {
                    "; linear predictors diverge, which indicates monotone likelihood"
                } else {
                    ""
                };
                return Err(Error::Convergence(format!(
                    "Cox fit did not converge in {MAX_ITER} iterations{hint}"
                )));
            }
        }
    }

    // Breslow baseline cumulative hazard at the estimate, ascending in time.
    let eta: Vec<f64> = (0..design.n_rows())
        .map(|i| dot(design.row(i), &beta))
        .collect();
    let shift = eta.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    let mut s0 = 0.0;
    let n = time.len();
    let mut pos = 0;
    while pos < n {
        let t = s.time[s.desc[pos]];
        let mut block_end = pos;
        while block_end < n && s.time[s.desc[block_end]] == t {
            block_end += 1;
        }
        let mut d_w = 0.0;
        for &i in &s.desc[pos..block_end] {
            let w = s.weights[i];
            if w > 0.0 {
                s0 += w * (eta[i] - shift).exp();
                if s.event[i] {
                    d_w += w;
                }
            }
        }
        if d_w > 0.0 {
            jumps.push((t, d_w * (-shift).exp() / s0));
        }
        pos = block_end;
    }
    jumps.reverse();
    let mut cum = 0.0;
    let (mut jt, mut jv) = (Vec::with_capacity(jumps.len()), Vec::with_capacity(jumps.len()));
    for (t, dh) in jumps {
        cum += dh;
        jt.push(t);
        jv.push(cum);
    }
    let baseline = StepFunction::new(0.0, jt, jv)?;
    let max_time = time.iter().fold(0.0f64, |a, &b| a.max(b));

    Ok(CoxFit {
        coefficients: beta,
        column_names: design.names.clone(),
        baseline_cumhaz: baseline,
        iterations,
        log_likelihood: ll,
        max_time,
    })
}

/// Model-implied survival S(t | x) = exp(-Lambda0(t) * exp(x'beta)) at the
/// requested times, which must lie inside [0, max observed time].
pub fn predict_cox_survival(fit: &CoxFit, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    if x.len() != fit.coefficients.len() {
        return Err(Error::Validation(format!(
            "covariate row has {} entries, model has {} coefficients",
            x.len(),
            fit.coefficients.len()
        )));
    }
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Range(format!("prediction time {t} is invalid")));
        }
        if t > fit.max_time {
            return Err(Error::Range(format!(
                "prediction time {t} lies beyond the last observed time {}",
                fit.max_time
            )));
        }
    }
    let hr = dot(x, &fit.coefficients).exp();
    Ok(times
        .iter()
        .map(|&t| (-fit.baseline_cumhaz.eval(t) * hr).exp())
        .collect())
}
