//! `adjsurv`: confounder-adjusted survival curves from right-censored
//! observational data.
//!
//! Subcommands estimate adjusted curves, compare them (pointwise differences,
//! survival quantiles, restricted mean survival times) and draw synthetic
//! datasets. Results go to CSV plus a JSON sidecar that records every
//! materialized setting, so a run can be reproduced from its metadata alone.
//! Failures print a single machine-readable JSON object on stderr; exit code
//! 2 flags usage or configuration problems, 1 everything else.

mod io;
mod settings;
mod svg;

use std::path::PathBuf;
use std::process::exit;

use adjsurv::{
    adjusted_surv, curve_diff, rmst, simulate_dgp, surv_quantile, AdjustedSurv, BootInterval,
    CiTransform, DgpSpec, EffectEstimate, Error, GeeLink, Result,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use settings::{CmdKind, Common, EffectArgs, Run};

#[derive(Parser)]
#[command(
    name = "adjsurv",
    version,
    about = "Confounder-adjusted survival curves from observational data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate adjusted survival curves for every treatment level
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Pointwise survival difference between two treatment levels
    Diff {
        #[command(flatten)]
        common: Common,
        /// First treatment level [default: the first level in the data]
        #[arg(long)]
        group_a: Option<String>,
        /// Second treatment level [default: the second level in the data]
        #[arg(long)]
        group_b: Option<String>,
        /// Times at which to test the difference [default: the whole grid]
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
    /// Survival quantile per treatment level
    Quantile {
        #[command(flatten)]
        common: Common,
        /// Probability in (0, 1) [default: 0.5]
        #[arg(long)]
        prob: Option<f64>,
    },
    /// Restricted mean survival time per treatment level
    Rmst {
        #[command(flatten)]
        common: Common,
        /// Upper integration limit
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Draw a synthetic confounded dataset
    Simulate(SimArgs),
}

#[derive(Args)]
struct SimArgs {
    /// TOML config file with the same keys as the long flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of subjects [default: 500]
    #[arg(long)]
    n: Option<usize>,
    /// RNG seed (required)
    #[arg(long)]
    seed: Option<u64>,
    /// Baseline hazard scale [default: 0.1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Log hazard ratio of treatment [default: -0.5]
    #[arg(long)]
    beta: Option<f64>,
    /// Log hazard ratio of the binary covariate [default: 1]
    #[arg(long)]
    gamma: Option<f64>,
    /// Treatment model intercept [default: -0.5]
    #[arg(long)]
    a0: Option<f64>,
    /// Treatment model covariate coefficient [default: 1.5]
    #[arg(long)]
    a1: Option<f64>,
    /// Exponential censoring rate [default: 0.05]
    #[arg(long)]
    censor_rate: Option<f64>,
    /// Output CSV path [default: simulated.csv]
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Metadata JSON path [default: the CSV path with a .json extension]
    #[arg(long)]
    out_json: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.exit_code() == 0 {
                let _ = e.print();
                exit(0);
            }
            let report = json!({
                "category": "config",
                "message": e.render().to_string(),
                "context": {"subcommand": "parse"},
            });
            eprintln!("{report}");
            exit(2);
        }
    };
    let name = match &cli.cmd {
        Cmd::Estimate { .. } => "estimate",
        Cmd::Diff { .. } => "diff",
        Cmd::Quantile { .. } => "quantile",
        Cmd::Rmst { .. } => "rmst",
        Cmd::Simulate(_) => "simulate",
    };
    if let Err(e) = dispatch(cli.cmd) {
        let report = json!({
            "category": e.category(),
            "message": e.to_string(),
            "context": {"subcommand": name},
        });
        eprintln!("{report}");
        exit(if e.is_usage() || matches!(e, Error::Range(_)) { 2 } else { 1 });
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Estimate { common } => run_curves(CmdKind::Estimate, common, EffectArgs::default()),
        Cmd::Diff { common, group_a, group_b, at } => run_curves(
            CmdKind::Diff,
            common,
            EffectArgs { group_a, group_b, at, ..Default::default() },
        ),
        Cmd::Quantile { common, prob } => {
            run_curves(CmdKind::Quantile, common, EffectArgs { prob, ..Default::default() })
        }
        Cmd::Rmst { common, tau } => {
            run_curves(CmdKind::Rmst, common, EffectArgs { tau, ..Default::default() })
        }
        Cmd::Simulate(args) => run_simulate(args),
    }
}

fn run_curves(kind: CmdKind, common: Common, effect: EffectArgs) -> Result<()> {
    let run = settings::resolve(kind, common, effect)?;
    let (data, weights) = io::read_dataset(&run)?;
    let n = data.n();
    let spec = run.method_spec(weights);
    let adj = adjusted_surv(&data, &spec, &run.options())?;

    match run.kind {
        CmdKind::Estimate => {
            io::write_curves_csv(&run.out_csv, &adj)?;
            io::write_json(&run.out_json, &metadata(&run, &adj, n, json!(null)))?;
            if let Some(path) = &run.out_svg {
                io::write_text(path, &svg::curves_svg(&adj, &plot_style(&run)))?;
            }
        }
        CmdKind::Diff => {
            let groups = adj.groups();
            let a = run.group_a.clone().unwrap_or_else(|| groups[0].to_string());
            let b = match &run.group_b {
                Some(b) => b.clone(),
                None => groups
                    .iter()
                    .find(|g| **g != a)
                    .map(|g| g.to_string())
                    .ok_or_else(|| {
                        Error::Config("missing: group_b; the data has a single treatment level".into())
                    })?,
            };
            let effects = curve_diff(&adj, &a, &b, run.at.as_deref(), run.conf_level)?;
            let extra = json!({"group_a": a, "group_b": b, "at": run.at});
            write_effect_outputs(&run, &adj, n, &effects, extra)?;
        }
        CmdKind::Quantile => {
            let effects = surv_quantile(&adj, run.prob, None)?;
            let extra = json!({"prob": run.prob});
            write_effect_outputs(&run, &adj, n, &effects, extra)?;
        }
        CmdKind::Rmst => {
            let tau = run.tau.expect("resolve checked tau");
            let effects = rmst(&adj, tau, None)?;
            let extra = json!({"tau": tau});
            write_effect_outputs(&run, &adj, n, &effects, extra)?;
        }
    }
    Ok(())
}

fn write_effect_outputs(
    run: &Run,
    adj: &AdjustedSurv,
    n: usize,
    effects: &[EffectEstimate],
    extra: serde_json::Value,
) -> Result<()> {
    io::write_effects_csv(&run.out_csv, effects)?;
    io::write_json(&run.out_json, &metadata(run, adj, n, extra))?;
    if let Some(path) = &run.out_svg {
        if run.kind == CmdKind::Diff {
            io::write_text(path, &svg::diff_svg(effects, &plot_style(run)))?;
        } else {
            io::write_text(path, &svg::curves_svg(adj, &plot_style(run)))?;
        }
    }
    Ok(())
}

fn plot_style(run: &Run) -> svg::PlotStyle {
    svg::PlotStyle {
        cif: run.cif,
        censor_ticks: run.censor_ticks,
        median_lines: run.median_lines,
        title: run.title.clone(),
    }
}

fn gee_link_name(link: GeeLink) -> &'static str {
    match link {
        GeeLink::Cloglog => "cloglog",
        GeeLink::Identity => "identity",
    }
}

fn ci_transform_name(t: CiTransform) -> &'static str {
    match t {
        CiTransform::Linear => "linear",
        CiTransform::LogLog => "loglog",
    }
}

fn boot_interval_name(b: BootInterval) -> &'static str {
    match b {
        BootInterval::Percentile => "percentile",
        BootInterval::NormalSd => "normal-sd",
    }
}

/// Everything needed to reproduce the run: resolved inputs with all defaults
/// materialized, plus result-level bookkeeping.
fn metadata(run: &Run, adj: &AdjustedSurv, n: usize, effect: serde_json::Value) -> serde_json::Value {
    json!({
        "command": run.kind.name(),
        "input": run.input.display().to_string(),
        "columns": {
            "time": run.time_col,
            "event": run.event_col,
            "treatment": run.treatment_col,
            "categorical": run.categorical,
            "weights": run.weights_col,
        },
        "method": {
            "name": run.method.name(),
            "ps_formula": run.ps_formula,
            "outcome_formula": run.outcome_formula,
            "strata": run.strata,
            "stabilize": run.stabilize,
            "trim": run.trim,
            "gee_link": gee_link_name(run.gee_link),
            "normalize_pseudo": run.normalize_pseudo,
            "reference_weights": run.reference_weights.as_ref().map(|ws| {
                ws.iter()
                    .map(|(label, w)| json!({"label": label, "weight": w}))
                    .collect::<Vec<_>>()
            }),
        },
        "options": {
            "times": run.times,
            "conf_int": run.conf_int,
            "conf_level": run.conf_level,
            "ci_transform": ci_transform_name(run.ci_transform),
            "bootstrap": run.bootstrap,
            "n_boot": run.n_boot,
            "seed": run.seed,
            "boot_interval": boot_interval_name(run.boot_interval),
            "workers": run.workers,
            "force_bounds": run.force_bounds,
            "iso_reg": run.iso_reg,
        },
        "effect": effect,
        "result": {
            "n": n,
            "groups": adj.groups(),
            "n_eval_times": adj.eval_times.len(),
            "ci_source": adj.ci_source.map(|s| s.name()),
            "failed_boot_replicates": adj.boot.as_ref().map(|b| b.failed_replicates),
            "force_bounds_applied": adj.force_bounds_applied,
            "iso_reg_applied": adj.iso_reg_applied,
        },
        "outputs": {
            "csv": run.out_csv.display().to_string(),
            "json": run.out_json.display().to_string(),
            "svg": run.out_svg.as_ref().map(|p| p.display().to_string()),
        },
    })
}

fn run_simulate(args: SimArgs) -> Result<()> {
    let cfg = settings::load_file_config(args.config.as_ref())?;
    let d = DgpSpec::default();
    let spec = DgpSpec {
        n: args.n.or(cfg.n).unwrap_or(d.n),
        lambda: args.lambda.or(cfg.lambda).unwrap_or(d.lambda),
        beta: args.beta.or(cfg.beta).unwrap_or(d.beta),
        gamma: args.gamma.or(cfg.gamma).unwrap_or(d.gamma),
        a0: args.a0.or(cfg.a0).unwrap_or(d.a0),
        a1: args.a1.or(cfg.a1).unwrap_or(d.a1),
        censor_rate: args.censor_rate.or(cfg.censor_rate).unwrap_or(d.censor_rate),
    };
    let seed = args
        .seed
        .or(cfg.seed)
        .ok_or_else(|| Error::Config("missing: seed; provide --seed or the config key".into()))?;
    let data = simulate_dgp(&spec, seed)?;

    let out_csv = args
        .out_csv
        .or(cfg.out_csv)
        .unwrap_or_else(|| PathBuf::from("simulated.csv"));
    let out_json = args
        .out_json
        .or(cfg.out_json)
        .unwrap_or_else(|| out_csv.with_extension("json"));
    io::write_sim_csv(&out_csv, &data)?;
    let meta = json!({
        "command": "simulate",
        "dgp": {
            "n": spec.n,
            "lambda": spec.lambda,
            "beta": spec.beta,
            "gamma": spec.gamma,
            "a0": spec.a0,
            "a1": spec.a1,
            "censor_rate": spec.censor_rate,
        },
        "seed": seed,
        "outputs": {
            "csv": out_csv.display().to_string(),
            "json": out_json.display().to_string(),
        },
    });
    io::write_json(&out_json, &meta)
}
