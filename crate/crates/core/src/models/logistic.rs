//! Logistic regression by iteratively reweighted least squares.
//!
//! Used to model treatment assignment probabilities. Convergence is declared
//! when the score (gradient of the log-likelihood) has max-norm at most 1e-8,
//! checked before each update so that data whose maximum-likelihood estimate
//! is hit exactly (e.g. perfectly balanced intercept-only fits) converge
//! without drift.

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::models::linalg::{add_outer, dot, max_abs, solve_spd};

pub const MAX_ITER: usize = 25;
pub const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl LogisticFit {
    /// Fitted success probabilities for the rows of `design`.
    pub fn predict(&self, design: &DesignMatrix) -> Vec<f64> {
        (0..design.n_rows())
            .map(|i| expit(dot(design.row(i), &self.coefficients)))
            .collect()
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood at `beta`.
pub fn logistic_loglik(design: &DesignMatrix, response: &[bool], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..design.n_rows() {
        let eta = dot(design.row(i), beta);
        // log p = eta - log(1 + e^eta) for y = 1, -log(1 + e^eta) for y = 0,
        // evaluated in the numerically safe branch.
        let log1pexp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        ll += if response[i] { eta - log1pexp } else { -log1pexp };
    }
    ll
}

/// Score vector X'(y - p) at `beta`.
pub fn logistic_score(design: &DesignMatrix, response: &[bool], beta: &[f64]) -> Vec<f64> {
    let p = design.n_cols();
    let mut g = vec![0.0; p];
    for i in 0..design.n_rows() {
        let row = design.row(i);
        let resid = (response[i] as i32 as f64) - expit(dot(row, beta));
        for j in 0..p {
            g[j] += row[j] * resid;
        }
    }
    g
}

pub fn fit_logistic(design: &DesignMatrix, response: &[bool]) -> Result<LogisticFit> {
    let n = design.n_rows();
    let p = design.n_cols();
    if response.len() != n {
        return Err(Error::Validation(format!(
            "design has {n} rows but response has {} entries",
            response.len()
        )));
    }
    if n == 0 || p == 0 {
        return Err(Error::Degenerate("empty design".into()));
    }
    if response.iter().all(|&y| y) || response.iter().all(|&y| !y) {
        return Err(Error::Degenerate("response takes a single value".into()));
    }

    let mut beta = vec![0.0; p];
    let mut ll = logistic_loglik(design, response, &beta);
    for iter in 0..MAX_ITER {
        let g = logistic_score(design, response, &beta);
        if max_abs(&g) <= GRAD_TOL {
            // Under perfect separation the score also vanishes, but only as
            // the coefficients run off to infinity; reject such "converged"
            // states instead of returning fitted probabilities of 0/1.
            let eta_max = (0..n)
                .map(|i| dot(design.row(i), &beta).abs())
                .fold(0.0f64, f64::max);
            if eta_max > 30.0 {
                return Err(separation_error());
            }
            return Ok(LogisticFit {
                coefficients: beta,
                column_names: design.names.clone(),
                iterations: iter,
                log_likelihood: ll,
            });
        }
        // Newton step with the expected information X'WX, W = p(1-p).
        let mut info = vec![0.0; p * p];
        for i in 0..n {
            let row = design.row(i);
            let mu = expit(dot(row, &beta));
            add_outer(&mut info, row, mu * (1.0 - mu));
        }
        let delta = solve_spd(&info, &g, p, &design.names)?;
        // The acceptance slack tracks |ll|: summation noise in a large
        // sample otherwise rejects the tiny true improvements of the
        // final steps and stalls the iteration short of the tolerance.
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut scale = 1.0;
        for _ in 0..12 {
            let cand: Vec<f64> =
                beta.iter().zip(&delta).map(|(b, d)| b + scale * d).collect();
            let cand_ll = logistic_loglik(design, response, &cand);
            if cand_ll >= ll - slack {
                beta = cand;
                ll = cand_ll;
                break;
            }
            scale *= 0.5;
        }
    }

    let eta_max = (0..n)
        .map(|i| dot(design.row(i), &beta).abs())
        .fold(0.0f64, f64::max);
    if eta_max > 30.0 {
        Err(separation_error())
    } else {
        Err(Error::Convergence(format!(
            "logistic fit did not converge in {MAX_ITER} iterations"
        )))
    }
}

fn separation_error() -> Error {
    Error::Convergence(
        "logistic fit drove fitted probabilities to 0/1, which indicates perfect \
         separation of the response by the covariates"
            .into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: Vec<(&str, Vec<f64>)>) -> DesignMatrix {
        let n = cols[0].1.len();
        DesignMatrix::from_columns(
            n,
            cols.into_iter().map(|(n2, v)| (n2.to_string(), v)).collect(),
        )
    }

    #[test]
    fn intercept_only_recovers_the_observed_share() {
        let d = design(vec![("intercept", vec![1.0; 8])]);
        let y = [true, true, true, false, false, false, false, false];
        let fit = fit_logistic(&d, &y).unwrap();
        let p = expit(fit.coefficients[0]);
        assert!((p - 3.0 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_intercept_fit_converges_at_exactly_zero() {
        let d = design(vec![("intercept", vec![1.0; 4])]);
        let y = [true, false, true, false];
        let fit = fit_logistic(&d, &y).unwrap();
        assert_eq!(fit.coefficients[0], 0.0);
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn score_matches_central_finite_differences() {
        let d = design(vec![
            ("intercept", vec![1.0; 6]),
            ("x", vec![-1.0, 0.5, 2.0, -0.3, 1.2, 0.0]),
        ]);
        let y = [false, true, true, false, true, false];
        let beta = [0.3, -0.7];
        let g = logistic_score(&d, &y, &beta);
        let h = 1e-6;
        for j in 0..2 {
            let mut up = beta.to_vec();
            let mut dn = beta.to_vec();
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic_loglik(&d, &y, &up) - logistic_loglik(&d, &y, &dn)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn balanced_two_column_fit_is_exactly_zero_with_half_probabilities() {
        let d = design(vec![
            ("intercept", vec![1.0; 4]),
            ("x", vec![0.0, 0.0, 1.0, 1.0]),
        ]);
        let y = [false, true, false, true];
        let fit = fit_logistic(&d, &y).unwrap();
        assert_eq!(fit.coefficients, vec![0.0, 0.0]);
        for p in fit.predict(&d) {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn optimum_beats_perturbed_coefficients() {
        // Response overlaps in x, so the maximum likelihood estimate is finite.
        let d = design(vec![
            ("intercept", vec![1.0; 7]),
            ("x", vec![0.1, 0.9, -1.5, 2.0, 0.4, -0.8, 1.1]),
        ]);
        let y = [true, false, false, true, true, false, true];
        let fit = fit_logistic(&d, &y).unwrap();
        let best = logistic_loglik(&d, &y, &fit.coefficients);
        for step in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.01), (0.005, -0.005)] {
            let cand = [fit.coefficients[0] + step.0, fit.coefficients[1] + step.1];
            assert!(logistic_loglik(&d, &y, &cand) <= best + 1e-12);
        }
    }

    #[test]
    fn large_sample_fit_reaches_the_closed_form_cell_estimate() {
        // Saturated binary-covariate fit: the estimate is the pair of cell
        // log-odds. Near the optimum the per-step improvement (~1e-11) sits
        // below the summation noise of a 2000-term log-likelihood, so the
        // fit must still exit at the score tolerance rather than stall.
        let cells = [(0.0, false, 657), (0.0, true, 379), (1.0, false, 255), (1.0, true, 709)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &(xv, yv, count) in &cells {
            for _ in 0..count {
                x.push(xv);
                y.push(yv);
            }
        }
        let n = x.len();
        let d = design(vec![("intercept", vec![1.0; n]), ("x", x)]);
        let fit = fit_logistic(&d, &y).unwrap();
        let b0 = (379.0f64 / 657.0).ln();
        let b1 = (709.0f64 / 255.0).ln() - b0;
        assert!(fit.iterations <= 10, "took {} iterations", fit.iterations);
        assert!((fit.coefficients[0] - b0).abs() < 1e-8);
        assert!((fit.coefficients[1] - b1).abs() < 1e-8);
    }

    #[test]
    fn separation_is_reported_as_nonconvergence() {
        let d = design(vec![
            ("intercept", vec![1.0; 4]),
            ("x", vec![-2.0, -1.0, 1.0, 2.0]),
        ]);
        let y = [false, false, true, true];
        let err = fit_logistic(&d, &y).unwrap_err();
        assert!(matches!(err, Error::Convergence(ref m) if m.contains("separation")));
    }

    #[test]
    fn single_class_response_is_degenerate() {
        let d = design(vec![("intercept", vec![1.0; 3])]);
        assert!(matches!(
            fit_logistic(&d, &[true, true, true]),
            Err(Error::Degenerate(_))
        ));
    }
}
