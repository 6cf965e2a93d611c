//! Option resolution: every setting can come from a long flag or from a TOML
//! config file with the same key; flags win field by field, defaults fill the
//! rest. The resolved [`Run`] is what the subcommands execute and what the
//! metadata sidecar records.

use std::collections::BTreeMap;
use std::path::PathBuf;

use adjsurv::{BootInterval, CiTransform, Error, GeeLink, Method, MethodSpec, Result};
use clap::Args;
use serde::Deserialize;

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Input CSV file; the first row must be a header
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// TOML config file with the same keys as the long flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Column with follow-up times [default: time]
    #[arg(long)]
    pub time_col: Option<String>,
    /// Column with event indicators (1/0, true/false) [default: event]
    #[arg(long)]
    pub event_col: Option<String>,
    /// Column with treatment labels [default: treatment]
    #[arg(long)]
    pub treatment_col: Option<String>,
    /// Numeric-looking columns to treat as categorical
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Column with externally computed subject weights (iptw_* only)
    #[arg(long)]
    pub weights_col: Option<String>,

    /// Adjustment method (km, iptw_km, iptw_cox, iptw_pseudo, direct,
    /// direct_pseudo, aiptw, aiptw_pseudo, matching, strat_amato,
    /// strat_cupples, strat_nieto)
    #[arg(long)]
    pub method: Option<String>,
    /// Covariate formula for the treatment model, e.g. "x1 + x2"
    #[arg(long)]
    pub ps_formula: Option<String>,
    /// Covariate formula for the outcome model
    #[arg(long)]
    pub outcome_formula: Option<String>,
    /// Categorical columns whose cross-classification forms the strata
    #[arg(long, value_delimiter = ',')]
    pub strata: Vec<String>,
    /// Multiply weights by the marginal group share (true/false)
    #[arg(long)]
    pub stabilize: Option<bool>,
    /// Two-sided weight trimming quantile in (0, 1)
    #[arg(long)]
    pub trim: Option<f64>,
    /// Mean link for pseudo-value regressions: cloglog or identity
    #[arg(long)]
    pub gee_link: Option<String>,
    /// Divide weighted pseudo-value sums by the realized weight total
    #[arg(long)]
    pub normalize_pseudo: Option<bool>,
    /// Reference stratum shares for strat_nieto, e.g. "a=0.3,b=0.7"
    #[arg(long)]
    pub reference_weights: Option<String>,

    /// Evaluation times (comma separated); default is the pooled event grid
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Attach closed-form confidence intervals
    #[arg(long)]
    pub conf_int: bool,
    /// Confidence level [default: 0.95]
    #[arg(long)]
    pub conf_level: Option<f64>,
    /// Interval transform: linear or loglog
    #[arg(long)]
    pub ci_transform: Option<String>,
    /// Attach bootstrap intervals (requires --seed)
    #[arg(long)]
    pub bootstrap: bool,
    /// Number of bootstrap replicates [default: 500]
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// RNG seed for the bootstrap or the simulation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap interval style: percentile or normal-sd
    #[arg(long)]
    pub boot_interval: Option<String>,
    /// Worker threads for the bootstrap [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Clamp curve estimates into [0, 1]
    #[arg(long)]
    pub force_bounds: bool,
    /// Project curve estimates onto nonincreasing step functions
    #[arg(long)]
    pub iso_reg: bool,

    /// Output CSV path [default: curves.csv or effects.csv]
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Metadata JSON path [default: the CSV path with a .json extension]
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Optional SVG plot path (estimate and diff)
    #[arg(long)]
    pub out_svg: Option<PathBuf>,
    /// Plot cumulative incidence (1 - S) instead of survival
    #[arg(long)]
    pub cif: bool,
    /// Draw tick marks at censored times (true/false) [default: true]
    #[arg(long)]
    pub censor_ticks: Option<bool>,
    /// Draw median survival guide lines
    #[arg(long)]
    pub median_lines: bool,
    /// Plot title
    #[arg(long)]
    pub title: Option<String>,
}

/// TOML layer; unknown keys are rejected so typos surface as config errors.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub time_col: Option<String>,
    pub event_col: Option<String>,
    pub treatment_col: Option<String>,
    pub categorical: Option<Vec<String>>,
    pub weights_col: Option<String>,
    pub method: Option<String>,
    pub ps_formula: Option<String>,
    pub outcome_formula: Option<String>,
    pub strata: Option<Vec<String>>,
    pub stabilize: Option<bool>,
    pub trim: Option<f64>,
    pub gee_link: Option<String>,
    pub normalize_pseudo: Option<bool>,
    pub reference_weights: Option<BTreeMap<String, f64>>,
    pub times: Option<Vec<f64>>,
    pub conf_int: Option<bool>,
    pub conf_level: Option<f64>,
    pub ci_transform: Option<String>,
    pub bootstrap: Option<bool>,
    pub n_boot: Option<usize>,
    pub seed: Option<u64>,
    pub boot_interval: Option<String>,
    pub workers: Option<usize>,
    pub force_bounds: Option<bool>,
    pub iso_reg: Option<bool>,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    pub out_svg: Option<PathBuf>,
    pub cif: Option<bool>,
    pub censor_ticks: Option<bool>,
    pub median_lines: Option<bool>,
    pub title: Option<String>,
    pub group_a: Option<String>,
    pub group_b: Option<String>,
    pub at: Option<Vec<f64>>,
    pub prob: Option<f64>,
    pub tau: Option<f64>,
    pub n: Option<usize>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub censor_rate: Option<f64>,
}

pub fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config '{}': {e}", path.display())))
}

/// Effect-specific flags the subcommands pass through to the resolver.
#[derive(Debug, Default)]
pub struct EffectArgs {
    pub group_a: Option<String>,
    pub group_b: Option<String>,
    pub at: Vec<f64>,
    pub prob: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdKind {
    Estimate,
    Diff,
    Quantile,
    Rmst,
}

impl CmdKind {
    pub fn name(&self) -> &'static str {
        match self {
            CmdKind::Estimate => "estimate",
            CmdKind::Diff => "diff",
            CmdKind::Quantile => "quantile",
            CmdKind::Rmst => "rmst",
        }
    }
}

/// Fully resolved run settings with every default materialized.
#[derive(Debug)]
pub struct Run {
    pub kind: CmdKind,
    pub input: PathBuf,
    pub time_col: String,
    pub event_col: String,
    pub treatment_col: String,
    pub categorical: Vec<String>,
    pub weights_col: Option<String>,
    pub method: Method,
    pub ps_formula: Option<String>,
    pub outcome_formula: Option<String>,
    pub strata: Vec<String>,
    pub stabilize: Option<bool>,
    pub trim: Option<f64>,
    pub gee_link: GeeLink,
    pub normalize_pseudo: bool,
    pub reference_weights: Option<Vec<(String, f64)>>,
    pub times: Option<Vec<f64>>,
    pub conf_int: bool,
    pub conf_level: f64,
    pub ci_transform: CiTransform,
    pub bootstrap: bool,
    pub n_boot: usize,
    pub seed: Option<u64>,
    pub boot_interval: BootInterval,
    pub workers: usize,
    pub force_bounds: bool,
    pub iso_reg: bool,
    pub out_csv: PathBuf,
    pub out_json: PathBuf,
    pub out_svg: Option<PathBuf>,
    pub cif: bool,
    pub censor_ticks: bool,
    pub median_lines: bool,
    pub title: Option<String>,
    pub group_a: Option<String>,
    pub group_b: Option<String>,
    pub at: Option<Vec<f64>>,
    pub prob: f64,
    pub tau: Option<f64>,
}

fn flag(on: bool) -> Option<bool> {
    on.then_some(true)
}

fn parse_reference_weights(s: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let (label, value) = part.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "reference weight '{part}' is not of the form label=value"
            ))
        })?;
        let w: f64 = value.trim().parse().map_err(|_| {
            Error::Config(format!("reference weight '{part}' has a non-numeric value"))
        })?;
        out.push((label.trim().to_string(), w));
    }
    Ok(out)
}

pub fn resolve(kind: CmdKind, args: Common, effect: EffectArgs) -> Result<Run> {
    let cfg = load_file_config(args.config.as_ref())?;

    let input = args
        .input
        .or(cfg.input)
        .ok_or_else(|| Error::Config("missing: input; provide --input or the config key".into()))?;
    let method_name = args
        .method
        .or(cfg.method)
        .ok_or_else(|| Error::Config("missing: method; provide --method or the config key".into()))?;
    let method = Method::parse(&method_name)?;

    let gee_link = match args
        .gee_link
        .or(cfg.gee_link)
        .unwrap_or_else(|| "cloglog".into())
        .as_str()
    {
        "cloglog" => GeeLink::Cloglog,
        "identity" => GeeLink::Identity,
        other => {
            return Err(Error::Config(format!(
                "unknown gee link '{other}'; use cloglog or identity"
            )))
        }
    };
    let ci_transform = match args
        .ci_transform
        .or(cfg.ci_transform)
        .unwrap_or_else(|| "linear".into())
        .as_str()
    {
        "linear" => CiTransform::Linear,
        "loglog" => CiTransform::LogLog,
        other => {
            return Err(Error::Config(format!(
                "unknown interval transform '{other}'; use linear or loglog"
            )))
        }
    };
    let boot_interval = match args
        .boot_interval
        .or(cfg.boot_interval)
        .unwrap_or_else(|| "percentile".into())
        .as_str()
    {
        "percentile" => BootInterval::Percentile,
        "normal-sd" => BootInterval::NormalSd,
        other => {
            return Err(Error::Config(format!(
                "unknown bootstrap interval style '{other}'; use percentile or normal-sd"
            )))
        }
    };

    let reference_weights = match args.reference_weights {
        Some(s) => Some(parse_reference_weights(&s)?),
        None => cfg
            .reference_weights
            .map(|m| m.into_iter().collect::<Vec<_>>()),
    };

    let times = if !args.times.is_empty() {
        Some(args.times)
    } else {
        cfg.times
    };
    let strata = if !args.strata.is_empty() {
        args.strata
    } else {
        cfg.strata.unwrap_or_default()
    };
    let categorical = if !args.categorical.is_empty() {
        args.categorical
    } else {
        cfg.categorical.unwrap_or_default()
    };

    let out_csv = args.out_csv.or(cfg.out_csv).unwrap_or_else(|| {
        PathBuf::from(match kind {
            CmdKind::Estimate => "curves.csv",
            _ => "effects.csv",
        })
    });
    let out_json = args
        .out_json
        .or(cfg.out_json)
        .unwrap_or_else(|| out_csv.with_extension("json"));

    let tau = effect.tau.or(cfg.tau);
    if kind == CmdKind::Rmst && tau.is_none() {
        return Err(Error::Config("missing: tau; provide --tau or the config key".into()));
    }

    Ok(Run {
        kind,
        input,
        time_col: args.time_col.or(cfg.time_col).unwrap_or_else(|| "time".into()),
        event_col: args.event_col.or(cfg.event_col).unwrap_or_else(|| "event".into()),
        treatment_col: args
            .treatment_col
            .or(cfg.treatment_col)
            .unwrap_or_else(|| "treatment".into()),
        categorical,
        weights_col: args.weights_col.or(cfg.weights_col),
        method,
        ps_formula: args.ps_formula.or(cfg.ps_formula),
        outcome_formula: args.outcome_formula.or(cfg.outcome_formula),
        strata,
        stabilize: args.stabilize.or(cfg.stabilize),
        trim: args.trim.or(cfg.trim),
        gee_link,
        normalize_pseudo: args.normalize_pseudo.or(cfg.normalize_pseudo).unwrap_or(true),
        reference_weights,
        times,
        conf_int: flag(args.conf_int).or(cfg.conf_int).unwrap_or(false),
        conf_level: args.conf_level.or(cfg.conf_level).unwrap_or(0.95),
        ci_transform,
        bootstrap: flag(args.bootstrap).or(cfg.bootstrap).unwrap_or(false),
        n_boot: args.n_boot.or(cfg.n_boot).unwrap_or(500),
        seed: args.seed.or(cfg.seed),
        boot_interval,
        workers: args.workers.or(cfg.workers).unwrap_or(1),
        force_bounds: flag(args.force_bounds).or(cfg.force_bounds).unwrap_or(false),
        iso_reg: flag(args.iso_reg).or(cfg.iso_reg).unwrap_or(false),
        out_csv,
        out_json,
        out_svg: args.out_svg.or(cfg.out_svg),
        cif: flag(args.cif).or(cfg.cif).unwrap_or(false),
        censor_ticks: args.censor_ticks.or(cfg.censor_ticks).unwrap_or(true),
        median_lines: flag(args.median_lines).or(cfg.median_lines).unwrap_or(false),
        title: args.title.or(cfg.title),
        group_a: effect.group_a.or(cfg.group_a),
        group_b: effect.group_b.or(cfg.group_b),
        at: if effect.at.is_empty() { cfg.at } else { Some(effect.at) },
        prob: effect.prob.or(cfg.prob).unwrap_or(0.5),
        tau,
    })
}

impl Run {
    pub fn method_spec(&self, external_weights: Option<Vec<f64>>) -> MethodSpec {
        MethodSpec {
            method: self.method,
            treatment_formula: self.ps_formula.clone(),
            outcome_formula: self.outcome_formula.clone(),
            strata: self.strata.clone(),
            stabilize: self.stabilize,
            trim_quantile: self.trim,
            gee_link: self.gee_link,
            normalize_pseudo: self.normalize_pseudo,
            reference_weights: self.reference_weights.clone(),
            external_weights,
        }
    }

    pub fn options(&self) -> adjsurv::EstimationOptions {
        adjsurv::EstimationOptions {
            conf_int: self.conf_int,
            conf_level: self.conf_level,
            ci_transform: self.ci_transform,
            times: self.times.clone(),
            bootstrap: self.bootstrap,
            n_boot: self.n_boot,
            seed: self.seed,
            boot_interval: self.boot_interval,
            workers: self.workers,
            force_bounds: self.force_bounds,
            iso_reg: self.iso_reg,
        }
    }
}
