//! The estimator layer: adjustment methods and the dispatcher that maps a
//! dataset plus a method specification to per-group counterfactual survival
//! curves on a shared time grid.

mod aiptw;
mod direct;
mod km;
mod iptw;
mod matching;
mod strat;
mod weights;

pub use weights::{
    compute_iptw_weights, fit_propensity, weights_from_model, IptwWeights, PropensityModel,
};

use crate::data::SurvDataset;
use crate::error::{Error, Result};
use crate::inference::{attach_approx_ci, attach_bootstrap, BootInterval, BootstrapResult};
use crate::models::GeeLink;
use crate::nonparam::{force_bounds, pava_nonincreasing, KmEstimate, RiskTable, SurvCurve};
use crate::step::StepFunction;

/// The implemented adjustment methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Km,
    StratCupples,
    StratAmato,
    StratNieto,
    Direct,
    DirectPseudo,
    IptwKm,
    IptwCox,
    IptwPseudo,
    Aiptw,
    AiptwPseudo,
    Matching,
}

pub const ALL_METHODS: [Method; 12] = [
    Method::Km,
    Method::StratCupples,
    Method::StratAmato,
    Method::StratNieto,
    Method::Direct,
    Method::DirectPseudo,
    Method::IptwKm,
    Method::IptwCox,
    Method::IptwPseudo,
    Method::Aiptw,
    Method::AiptwPseudo,
    Method::Matching,
];

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Km => "km",
            Method::StratCupples => "strat_cupples",
            Method::StratAmato => "strat_amato",
            Method::StratNieto => "strat_nieto",
            Method::Direct => "direct",
            Method::DirectPseudo => "direct_pseudo",
            Method::IptwKm => "iptw_km",
            Method::IptwCox => "iptw_cox",
            Method::IptwPseudo => "iptw_pseudo",
            Method::Aiptw => "aiptw",
            Method::AiptwPseudo => "aiptw_pseudo",
            Method::Matching => "matching",
        }
    }

    pub fn parse(name: &str) -> Result<Method> {
        ALL_METHODS
            .iter()
            .copied()
            .find(|m| m.name() == name)
            .ok_or_else(|| {
                let valid: Vec<&str> = ALL_METHODS.iter().map(|m| m.name()).collect();
                Error::Config(format!(
                    "unknown method '{name}'; valid methods are {}",
                    valid.join(", ")
                ))
            })
    }

    /// Methods that estimate a treatment-assignment model.
    pub fn needs_treatment_model(&self) -> bool {
        matches!(
            self,
            Method::IptwKm
                | Method::IptwCox
                | Method::IptwPseudo
                | Method::Aiptw
                | Method::AiptwPseudo
                | Method::Matching
        )
    }

    /// Methods that estimate an outcome model.
    pub fn needs_outcome_model(&self) -> bool {
        matches!(
            self,
            Method::Direct | Method::DirectPseudo | Method::Aiptw | Method::AiptwPseudo
        )
    }

    pub fn is_stratified(&self) -> bool {
        matches!(self, Method::StratCupples | Method::StratAmato | Method::StratNieto)
    }

    /// Methods restricted to exactly two treatment levels.
    pub fn binary_only(&self) -> bool {
        matches!(self, Method::Aiptw | Method::Matching)
    }

    /// Methods with a closed-form pointwise variance; everything else gets
    /// standard errors from the bootstrap only.
    pub fn has_analytic_se(&self) -> bool {
        matches!(
            self,
            Method::Km | Method::IptwKm | Method::IptwPseudo | Method::StratNieto
        )
    }

    /// Methods whose weights feed a weighted product-limit or Cox estimator;
    /// their risk-set ratios are scale invariant, so stabilization defaults
    /// to off. Pseudo-value weighting is scale sensitive and defaults to on.
    fn default_stabilize(&self) -> bool {
        matches!(self, Method::IptwPseudo)
    }
}

/// Everything that defines an estimator: the method plus its model formulas
/// and method-specific settings.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub method: Method,
    /// Additive covariate formula for the treatment-assignment model.
    pub treatment_formula: Option<String>,
    /// Additive covariate formula for the outcome model.
    pub outcome_formula: Option<String>,
    /// Categorical columns whose cross-classification forms the strata.
    pub strata: Vec<String>,
    /// Multiply weights by the marginal group share. `None` uses the
    /// per-method default.
    pub stabilize: Option<bool>,
    /// Two-sided weight trimming at the (q, 1-q) weight quantiles.
    pub trim_quantile: Option<f64>,
    /// Mean link for pseudo-value outcome models.
    pub gee_link: GeeLink,
    /// Ratio-of-sums weighting for iptw_pseudo (default); the alternative
    /// divides by the expected weight total.
    pub normalize_pseudo: bool,
    /// External reference-population stratum shares for strat_nieto, as
    /// (stratum label, share) pairs summing to 1.
    pub reference_weights: Option<Vec<(String, f64)>>,
    /// Directly supplied subject weights, bypassing the treatment model.
    /// Honored by the iptw_* methods only.
    pub external_weights: Option<Vec<f64>>,
}

impl MethodSpec {
    pub fn new(method: Method) -> MethodSpec {
        MethodSpec {
            method,
            treatment_formula: None,
            outcome_formula: None,
            strata: Vec::new(),
            stabilize: None,
            trim_quantile: None,
            gee_link: GeeLink::Cloglog,
            normalize_pseudo: true,
            reference_weights: None,
            external_weights: None,
        }
    }

    pub fn with_treatment(mut self, formula: &str) -> MethodSpec {
        self.treatment_formula = Some(formula.to_string());
        self
    }

    pub fn with_outcome(mut self, formula: &str) -> MethodSpec {
        self.outcome_formula = Some(formula.to_string());
        self
    }

    pub fn with_strata(mut self, columns: &[&str]) -> MethodSpec {
        self.strata = columns.iter().map(|c| c.to_string()).collect();
        self
    }

    fn validate(&self, data: &SurvDataset) -> Result<()> {
        let m = self.method;
        if m.needs_treatment_model() && self.treatment_formula.is_none() {
            let weights_suffice =
                matches!(m, Method::IptwKm | Method::IptwCox | Method::IptwPseudo);
            if !(weights_suffice && self.external_weights.is_some()) {
                return Err(Error::Config(format!(
                    "missing: treatment_formula; method {} requires a treatment \
                     assignment model",
                    m.name()
                )));
            }
        }
        if m.needs_outcome_model() && self.outcome_formula.is_none() {
            return Err(Error::Config(format!(
                "missing: outcome_formula; method {} requires an outcome model",
                m.name()
            )));
        }
        if m.is_stratified() && self.strata.is_empty() {
            return Err(Error::Config(format!(
                "missing: strata; method {} requires at least one stratification column",
                m.name()
            )));
        }
        let k = data.treatment_levels().len();
        if m.binary_only() && k != 2 {
            return Err(Error::Capability(format!(
                "method {} supports exactly two treatment levels; the data has {k}",
                m.name()
            )));
        }
        let forms_weights = matches!(m, Method::IptwKm | Method::IptwCox | Method::IptwPseudo);
        if !forms_weights {
            if self.stabilize.is_some() {
                return Err(Error::Config(format!(
                    "stabilize only applies to weighting methods, not {}",
                    m.name()
                )));
            }
            if self.trim_quantile.is_some() {
                return Err(Error::Config(format!(
                    "trim_quantile only applies to weighting methods, not {}",
                    m.name()
                )));
            }
            if self.external_weights.is_some() {
                return Err(Error::Config(format!(
                    "external weights only apply to the iptw_* methods, not {}",
                    m.name()
                )));
            }
        }
        if self.reference_weights.is_some() && m != Method::StratNieto {
            return Err(Error::Config(format!(
                "reference weights are only supported by strat_nieto, not {}",
                m.name()
            )));
        }
        if let Some(w) = &self.external_weights {
            if w.len() != data.n() {
                return Err(Error::Validation(format!(
                    "{} external weights supplied for {} subjects",
                    w.len(),
                    data.n()
                )));
            }
        }
        Ok(())
    }
}

/// Interval construction for closed-form standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiTransform {
    /// estimate +/- z * SE, clamped into [0, 1].
    Linear,
    /// Symmetric interval on the log(-log S) scale, mapped back; stays inside
    /// (0, 1) by construction.
    LogLog,
}

/// Run-level settings shared by every method.
#[derive(Debug, Clone)]
pub struct EstimationOptions {
    /// Attach approximate point-wise confidence intervals.
    pub conf_int: bool,
    pub conf_level: f64,
    pub ci_transform: CiTransform,
    /// Explicit evaluation times; default is 0 plus every observed event time.
    pub times: Option<Vec<f64>>,
    /// Resample subjects and rerun the full pipeline for percentile intervals.
    pub bootstrap: bool,
    pub n_boot: usize,
    pub seed: Option<u64>,
    pub boot_interval: BootInterval,
    pub workers: usize,
    /// Clamp estimates into [0, 1] after estimation.
    pub force_bounds: bool,
    /// Project estimates onto non-increasing sequences after estimation.
    pub iso_reg: bool,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions {
            conf_int: false,
            conf_level: 0.95,
            ci_transform: CiTransform::Linear,
            times: None,
            bootstrap: false,
            n_boot: 500,
            seed: None,
            boot_interval: BootInterval::Percentile,
            workers: 1,
            force_bounds: false,
            iso_reg: false,
        }
    }
}

impl EstimationOptions {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.conf_level && self.conf_level < 1.0) {
            return Err(Error::Range(format!(
                "confidence level must be in (0,1), got {}",
                self.conf_level
            )));
        }
        if self.workers == 0 {
            return Err(Error::Range("worker count must be at least 1".into()));
        }
        if self.bootstrap {
            if self.n_boot < 2 {
                return Err(Error::Range(format!(
                    "bootstrapping needs at least 2 replicates, got {}",
                    self.n_boot
                )));
            }
            if self.seed.is_none() {
                return Err(Error::Config(
                    "missing: seed; bootstrapping requires an explicit seed".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Where the confidence bands of a result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiSource {
    Analytic,
    Bootstrap,
}

impl CiSource {
    pub fn name(&self) -> &'static str {
        match self {
            CiSource::Analytic => "analytic",
            CiSource::Bootstrap => "bootstrap",
        }
    }
}

/// Estimation result: one curve per treatment level, all evaluated on the
/// same grid.
#[derive(Debug, Clone)]
pub struct AdjustedSurv {
    pub curves: Vec<SurvCurve>,
    pub eval_times: Vec<f64>,
    pub method: Method,
    pub spec: MethodSpec,
    pub conf_level: f64,
    pub ci_source: Option<CiSource>,
    pub boot: Option<BootstrapResult>,
    pub force_bounds_applied: bool,
    pub iso_reg_applied: bool,
}

impl AdjustedSurv {
    pub fn curve(&self, group: &str) -> Option<&SurvCurve> {
        self.curves.iter().find(|c| c.group == group)
    }

    pub fn groups(&self) -> Vec<&str> {
        self.curves.iter().map(|c| c.group.as_str()).collect()
    }

    /// Groups whose estimates leave [0, 1]; possible for the pseudo-value
    /// and doubly robust methods when corrections are off.
    pub fn out_of_range_groups(&self) -> Vec<String> {
        self.curves
            .iter()
            .filter(|c| c.curve.values.iter().any(|&v| !(0.0..=1.0).contains(&v)))
            .map(|c| c.group.clone())
            .collect()
    }
}

/// Method output before projection onto the shared grid: the curve's native
/// jumps plus whatever extras the method can provide.
pub(crate) struct RawCurve {
    pub group: String,
    /// Strictly increasing jump times; the value before the first jump is 1.
    pub times: Vec<f64>,
    pub surv: Vec<f64>,
    /// Pointwise variance at the jump times (0 before the first jump).
    pub var: Option<Vec<f64>>,
    /// Grid-aligned risk counts, for sample-based methods.
    pub risk: Option<RiskTable>,
    pub censor_times: Vec<f64>,
    /// Last time at which the method defines the curve.
    pub max_time: f64,
}

impl RawCurve {
    pub fn from_km(group: String, est: KmEstimate, risk: Option<RiskTable>) -> RawCurve {
        RawCurve {
            group,
            times: est.times,
            surv: est.surv,
            var: Some(est.var),
            risk,
            censor_times: est.censor_times,
            max_time: est.max_time,
        }
    }
}

/// Right-continuous lookup of (times, values) on an ascending grid, with
/// `init` before the first jump.
pub(crate) fn eval_on_grid(times: &[f64], values: &[f64], init: f64, grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut j = 0usize;
    for &t in grid {
        while j < times.len() && times[j] <= t {
            j += 1;
        }
        out.push(if j == 0 { init } else { values[j - 1] });
    }
    out
}

/// Weighted at-risk and event counts at the grid times.
pub(crate) fn risk_at_grid(
    time: &[f64],
    event: &[bool],
    weights: &[f64],
    grid: &[f64],
) -> RiskTable {
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let sorted: Vec<(f64, f64, bool)> =
        order.iter().map(|&i| (time[i], weights[i], event[i])).collect();
    let mut suffix = vec![0.0; sorted.len() + 1];
    for j in (0..sorted.len()).rev() {
        suffix[j] = suffix[j + 1] + sorted[j].1;
    }
    let mut n_risk = Vec::with_capacity(grid.len());
    let mut n_event = Vec::with_capacity(grid.len());
    for &t in grid {
        let idx = sorted.partition_point(|&(x, _, _)| x < t);
        n_risk.push(suffix[idx]);
        let mut d = 0.0;
        let mut j = idx;
        while j < sorted.len() && sorted[j].0 == t {
            if sorted[j].2 {
                d += sorted[j].1;
            }
            j += 1;
        }
        n_event.push(d);
    }
    RiskTable { times: grid.to_vec(), n_risk, n_event }
}

/// Distinct sorted censoring times among the given rows.
pub(crate) fn censor_times_of(time: &[f64], event: &[bool]) -> Vec<f64> {
    let mut c: Vec<f64> = time
        .iter()
        .zip(event)
        .filter(|(_, &e)| !e)
        .map(|(&t, _)| t)
        .collect();
    c.sort_by(|a, b| a.total_cmp(b));
    c.dedup();
    c
}

/// Default evaluation grid: 0 followed by every distinct observed event time.
fn default_grid(data: &SurvDataset) -> Vec<f64> {
    let mut grid: Vec<f64> = data
        .time()
        .iter()
        .zip(data.event())
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    grid.insert(0, 0.0);
    grid
}

fn build_grid(data: &SurvDataset, times: Option<&[f64]>) -> Result<Vec<f64>> {
    match times {
        None => Ok(default_grid(data)),
        Some(ts) => {
            if ts.is_empty() {
                return Err(Error::Range("the list of evaluation times is empty".into()));
            }
            for &t in ts {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::Range(format!("evaluation time {t} is invalid")));
                }
            }
            let mut grid = ts.to_vec();
            grid.sort_by(|a, b| a.total_cmp(b));
            grid.dedup();
            Ok(grid)
        }
    }
}

fn resolve_weights(data: &SurvDataset, spec: &MethodSpec) -> Result<IptwWeights> {
    if let Some(w) = &spec.external_weights {
        return IptwWeights::from_vec(w.clone());
    }
    let formula = spec.treatment_formula.as_deref().unwrap();
    compute_iptw_weights(
        data,
        formula,
        spec.stabilize.unwrap_or(spec.method.default_stabilize()),
        spec.trim_quantile,
    )
}

fn estimate_on_grid(
    data: &SurvDataset,
    spec: &MethodSpec,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    match spec.method {
        Method::Km => km::run(data, grid),
        Method::IptwKm => {
            let w = resolve_weights(data, spec)?;
            iptw::run_km(data, &w.w, grid)
        }
        Method::IptwCox => {
            let w = resolve_weights(data, spec)?;
            iptw::run_cox(data, &w.w, grid)
        }
        Method::IptwPseudo => {
            let w = resolve_weights(data, spec)?;
            iptw::run_pseudo(
                data,
                &w.w,
                spec.normalize_pseudo,
                w.stabilized,
                grid,
            )
        }
        Method::Direct => direct::run_cox(data, spec.outcome_formula.as_deref().unwrap(), grid),
        Method::DirectPseudo => direct::run_pseudo(
            data,
            spec.outcome_formula.as_deref().unwrap(),
            spec.gee_link,
            grid,
        ),
        Method::Aiptw => {
            let model = fit_propensity(data, spec.treatment_formula.as_deref().unwrap())?;
            aiptw::run_closed(data, &model, spec.outcome_formula.as_deref().unwrap(), grid)
        }
        Method::AiptwPseudo => {
            let model = fit_propensity(data, spec.treatment_formula.as_deref().unwrap())?;
            aiptw::run_pseudo(
                data,
                &model,
                spec.outcome_formula.as_deref().unwrap(),
                spec.gee_link,
                grid,
            )
        }
        Method::Matching => {
            let model = fit_propensity(data, spec.treatment_formula.as_deref().unwrap())?;
            matching::run(data, &model, grid)
        }
        Method::StratCupples => {
            strat::run(data, &spec.strata, strat::StratVariant::Cupples, None, grid)
        }
        Method::StratNieto => strat::run(
            data,
            &spec.strata,
            strat::StratVariant::Nieto,
            spec.reference_weights.as_deref(),
            grid,
        ),
        Method::StratAmato => {
            strat::run(data, &spec.strata, strat::StratVariant::Amato, None, grid)
        }
    }
}

fn corrected_values(
    rc: &RawCurve,
    grid: &[f64],
    apply_bounds: bool,
    apply_iso: bool,
) -> Result<Vec<f64>> {
    let mut values = eval_on_grid(&rc.times, &rc.surv, 1.0, grid);
    if apply_bounds {
        values = force_bounds(&values);
    }
    if apply_iso {
        values = pava_nonincreasing(&values, &vec![1.0; values.len()])?;
    }
    Ok(values)
}

/// One full pipeline pass producing per-group values on `grid`; shared by the
/// point estimate and every bootstrap replicate so both run identical code.
pub(crate) fn replicate_values(
    data: &SurvDataset,
    spec: &MethodSpec,
    grid: &[f64],
    apply_bounds: bool,
    apply_iso: bool,
) -> Result<Vec<(String, Vec<f64>)>> {
    let raw = estimate_on_grid(data, spec, grid)?;
    raw.iter()
        .map(|rc| Ok((rc.group.clone(), corrected_values(rc, grid, apply_bounds, apply_iso)?)))
        .collect()
}

/// Estimate confounder-adjusted survival curves.
///
/// Dispatches on `spec.method`, evaluates every group's curve on a shared
/// grid (0 plus all observed event times unless `options.times` overrides
/// it), optionally applies bound/monotonicity corrections, and attaches
/// bootstrap or closed-form confidence intervals when requested.
pub fn adjusted_surv(
    data: &SurvDataset,
    spec: &MethodSpec,
    options: &EstimationOptions,
) -> Result<AdjustedSurv> {
    options.validate()?;
    spec.validate(data)?;
    let grid = build_grid(data, options.times.as_deref())?;
    let raw = estimate_on_grid(data, spec, &grid)?;

    if options.times.is_some() {
        for rc in &raw {
            if let Some(&last) = grid.last() {
                if last > rc.max_time {
                    return Err(Error::Range(format!(
                        "evaluation time {last} lies beyond the last estimable time {} \
                         of group {}",
                        rc.max_time, rc.group
                    )));
                }
            }
        }
    }

    let mut curves = Vec::with_capacity(raw.len());
    for rc in &raw {
        let values = corrected_values(rc, &grid, options.force_bounds, options.iso_reg)?;
        let se = match &rc.var {
            Some(var) => Some(
                eval_on_grid(&rc.times, var, 0.0, &grid)
                    .into_iter()
                    .map(f64::sqrt)
                    .collect::<Vec<f64>>(),
            ),
            None => None,
        };
        curves.push(SurvCurve {
            group: rc.group.clone(),
            curve: StepFunction::survival(grid.clone(), values)?,
            se,
            ci_lower: None,
            ci_upper: None,
            risk_table: rc.risk.clone(),
            censor_times: rc.censor_times.clone(),
            max_time: rc.max_time,
        });
    }

    let mut adj = AdjustedSurv {
        curves,
        eval_times: grid,
        method: spec.method,
        spec: spec.clone(),
        conf_level: options.conf_level,
        ci_source: None,
        boot: None,
        force_bounds_applied: options.force_bounds,
        iso_reg_applied: options.iso_reg,
    };

    if options.bootstrap {
        attach_bootstrap(&mut adj, data, options)?;
    } else if options.conf_int {
        attach_approx_ci(&mut adj, options.conf_level, options.ci_transform)?;
    }
    Ok(adj)
}
