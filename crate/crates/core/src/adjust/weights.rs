//! Propensity scores and inverse probability of treatment weights.

use crate::data::{expand_design, SurvDataset};
use crate::error::{Error, Result};
use crate::models::{fit_logistic, LogisticFit};
use crate::nonparam::sample_quantile;

/// Fitted treatment-assignment model: per-subject probabilities of every
/// treatment level. Binary treatments use a single logistic fit; more levels
/// use one-vs-rest fits renormalized to sum to one per subject.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    levels: Vec<String>,
    /// n x k, row-major.
    probs: Vec<f64>,
    /// Index into `levels` of each subject's observed treatment.
    observed_level: Vec<usize>,
    pub fits: Vec<LogisticFit>,
}

impl PropensityModel {
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    /// P(Z = level | x_i) for the level at `level_idx`.
    pub fn prob(&self, row: usize, level_idx: usize) -> f64 {
        self.probs[row * self.levels.len() + level_idx]
    }

    /// Probability each subject had of receiving the treatment they actually
    /// received.
    pub fn observed_probs(&self) -> Vec<f64> {
        self.observed_level
            .iter()
            .enumerate()
            .map(|(i, &z)| self.prob(i, z))
            .collect()
    }

    pub fn observed_level(&self, row: usize) -> usize {
        self.observed_level[row]
    }

    /// Fail if any assignment probability is numerically zero (or not a
    /// number), reporting the offending rows.
    pub fn check_positivity(&self) -> Result<()> {
        let k = self.levels.len();
        let bad: Vec<usize> = (0..self.observed_level.len())
            .filter(|&i| (0..k).any(|z| !(self.prob(i, z) > 0.0) || !self.prob(i, z).is_finite()))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Positivity {
                message: "estimated treatment probabilities are numerically zero; \
                          the positivity assumption fails for these rows"
                    .into(),
                rows: bad,
            })
        }
    }
}

/// Fit the treatment model given an additive covariate formula.
pub fn fit_propensity(data: &SurvDataset, treatment_formula: &str) -> Result<PropensityModel> {
    let design = expand_design(data, treatment_formula)?;
    let levels = data.treatment_levels();
    let k = levels.len();
    let n = data.n();
    let observed_level: Vec<usize> = data
        .treatment()
        .iter()
        .map(|l| levels.iter().position(|lev| lev == l).unwrap())
        .collect();

    let mut probs = vec![0.0; n * k];
    let mut fits = Vec::new();
    if k == 2 {
        let response: Vec<bool> = observed_level.iter().map(|&z| z == 1).collect();
        let fit = fit_logistic(&design, &response)?;
        let p = fit.predict(&design);
        for i in 0..n {
            probs[i * 2] = 1.0 - p[i];
            probs[i * 2 + 1] = p[i];
        }
        fits.push(fit);
    } else {
        // One-vs-rest with per-subject renormalization, so the probabilities
        // of all levels sum to one.
        for (z, _level) in levels.iter().enumerate() {
            let response: Vec<bool> = observed_level.iter().map(|&o| o == z).collect();
            let fit = fit_logistic(&design, &response)?;
            let p = fit.predict(&design);
            for i in 0..n {
                probs[i * k + z] = p[i];
            }
            fits.push(fit);
        }
        for i in 0..n {
            let total: f64 = probs[i * k..(i + 1) * k].iter().sum();
            for z in 0..k {
                probs[i * k + z] /= total;
            }
        }
    }

    let model = PropensityModel { levels, probs, observed_level, fits };
    model.check_positivity()?;
    Ok(model)
}

/// Per-subject inverse probability of treatment weights.
#[derive(Debug, Clone)]
pub struct IptwWeights {
    pub w: Vec<f64>,
    pub stabilized: bool,
    pub trim_quantile: Option<f64>,
}

impl IptwWeights {
    /// Wrap externally supplied weights (for example from a custom treatment
    /// model), enforcing that all are finite and positive.
    pub fn from_vec(w: Vec<f64>) -> Result<IptwWeights> {
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi <= 0.0 {
                return Err(Error::Validation(format!(
                    "weight {wi} at row {i} is not a positive finite number"
                )));
            }
        }
        Ok(IptwWeights { w, stabilized: false, trim_quantile: None })
    }

    pub fn unit(n: usize) -> IptwWeights {
        IptwWeights { w: vec![1.0; n], stabilized: false, trim_quantile: None }
    }
}

/// w_i = 1 / P(Z_i | x_i), optionally multiplied by the marginal share of the
/// subject's group (stabilization) and clamped at the lower/upper weight
/// quantiles (two-sided trimming at (q, 1-q) for a trim quantile q).
pub fn compute_iptw_weights(
    data: &SurvDataset,
    treatment_formula: &str,
    stabilize: bool,
    trim_quantile: Option<f64>,
) -> Result<IptwWeights> {
    let model = fit_propensity(data, treatment_formula)?;
    weights_from_model(data, &model, stabilize, trim_quantile)
}

/// Weight construction given an already fitted treatment model.
pub fn weights_from_model(
    data: &SurvDataset,
    model: &PropensityModel,
    stabilize: bool,
    trim_quantile: Option<f64>,
) -> Result<IptwWeights> {
    if let Some(q) = trim_quantile {
        if !(0.0 < q && q < 1.0) {
            return Err(Error::Range(format!("trim quantile must be in (0,1), got {q}")));
        }
    }
    let n = data.n();
    let shares: Vec<f64> = {
        let k = model.levels().len();
        let mut counts = vec![0.0; k];
        for i in 0..n {
            counts[model.observed_level(i)] += 1.0;
        }
        counts.iter().map(|c| c / n as f64).collect()
    };

    let pi = model.observed_probs();
    let mut w = Vec::with_capacity(n);
    let mut bad = Vec::new();
    for (i, &p) in pi.iter().enumerate() {
        let mut wi = 1.0 / p;
        if stabilize {
            wi *= shares[model.observed_level(i)];
        }
        if !wi.is_finite() || wi <= 0.0 {
            bad.push(i);
        }
        w.push(wi);
    }
    if !bad.is_empty() {
        return Err(Error::Positivity {
            message: "inverse probability weights overflow; estimated treatment \
                      probabilities are numerically zero for these rows"
                .into(),
            rows: bad,
        });
    }

    if let Some(q) = trim_quantile {
        let mut sorted = w.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let lo = sample_quantile(&sorted, q.min(1.0 - q));
        let hi = sample_quantile(&sorted, q.max(1.0 - q));
        for wi in &mut w {
            *wi = wi.clamp(lo, hi);
        }
    }

    Ok(IptwWeights { w, stabilized: stabilize, trim_quantile })
}
