//! CSV input and CSV/JSON output.
//!
//! Numbers are written with Rust's shortest round-trip formatting and a '.'
//! decimal separator regardless of locale, so output files parse back to the
//! exact same bits and are byte-identical across platforms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use adjsurv::{AdjustedSurv, Covariate, EffectEstimate, Error, Result, SurvDataset};

use crate::settings::Run;

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn open_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot open '{}': {e}", path.display()))
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("cannot write '{}': {e}", path.display()))
}

fn event_from_str(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

/// Reads the input CSV, binds the time/event/treatment columns, types the
/// remaining columns (numeric when every value parses as a finite real,
/// categorical otherwise or when forced), and splits off an optional
/// externally supplied weight column.
pub fn read_dataset(run: &Run) -> Result<(SurvDataset, Option<Vec<f64>>)> {
    let file = File::open(&run.input).map_err(|e| open_err(&run.input, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Validation(format!("cannot parse header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(Error::Validation("the input file has no header row".into()));
    }

    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    let mut lines: Vec<u64> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Validation(format!("cannot parse row at line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for (j, v) in rec.iter().enumerate() {
            if v.is_empty() {
                return Err(Error::Validation(format!(
                    "empty value in column '{}' at line {line}",
                    headers[j]
                )));
            }
            columns[j].push(v.to_string());
        }
        lines.push(line);
    }

    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Binding(format!(
                "column '{name}' not found; the file has: {}",
                headers.join(", ")
            ))
        })
    };
    let time_idx = find(&run.time_col)?;
    let event_idx = find(&run.event_col)?;
    let treat_idx = find(&run.treatment_col)?;
    let weight_idx = match &run.weights_col {
        Some(name) => Some(find(name)?),
        None => None,
    };
    for name in &run.categorical {
        find(name)?;
    }

    let parse_num = |col: usize, what: &str| -> Result<Vec<f64>> {
        columns[col]
            .iter()
            .zip(&lines)
            .map(|(v, line)| {
                let x: f64 = v.parse().map_err(|_| {
                    Error::InvalidType(format!(
                        "{what} column '{}' has non-numeric value '{v}' at line {line}",
                        headers[col]
                    ))
                })?;
                if !x.is_finite() {
                    return Err(Error::InvalidType(format!(
                        "{what} column '{}' has non-finite value '{v}' at line {line}",
                        headers[col]
                    )));
                }
                Ok(x)
            })
            .collect()
    };

    let time = parse_num(time_idx, "time")?;
    let event = columns[event_idx]
        .iter()
        .zip(&lines)
        .map(|(v, line)| {
            event_from_str(v).ok_or_else(|| {
                Error::InvalidType(format!(
                    "event column '{}' has non-boolean value '{v}' at line {line}",
                    headers[event_idx]
                ))
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    let treatment = columns[treat_idx].clone();
    let weights = match weight_idx {
        Some(col) => Some(parse_num(col, "weight")?),
        None => None,
    };

    let mut covariates = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == time_idx || j == event_idx || j == treat_idx || Some(j) == weight_idx {
            continue;
        }
        let forced = run.categorical.iter().any(|c| c == name);
        let numeric = !forced
            && columns[j]
                .iter()
                .all(|v| v.parse::<f64>().map(|x| x.is_finite()).unwrap_or(false));
        let cov = if numeric {
            Covariate::Numeric(columns[j].iter().map(|v| v.parse().unwrap()).collect())
        } else {
            Covariate::Categorical(columns[j].clone())
        };
        covariates.push((name.clone(), cov));
    }

    let data = SurvDataset::new(time, event, treatment, covariates)?;
    Ok((data, weights))
}

pub fn write_curves_csv(path: &Path, adj: &AdjustedSurv) -> Result<()> {
    let file = File::create(path).map_err(|e| open_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["time", "group", "surv", "se", "ci_lower", "ci_upper"])
        .map_err(|e| write_err(path, e))?;
    for curve in &adj.curves {
        for (j, t) in adj.eval_times.iter().enumerate() {
            w.write_record([
                fmt_f64(*t),
                curve.group.clone(),
                fmt_f64(curve.curve.values[j]),
                fmt_opt(curve.se.as_ref().map(|s| s[j])),
                fmt_opt(curve.ci_lower.as_ref().map(|s| s[j])),
                fmt_opt(curve.ci_upper.as_ref().map(|s| s[j])),
            ])
            .map_err(|e| write_err(path, e))?;
        }
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub fn write_effects_csv(path: &Path, effects: &[EffectEstimate]) -> Result<()> {
    let file = File::create(path).map_err(|e| open_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "kind", "group_a", "group_b", "at", "estimate", "se", "ci_lower", "ci_upper", "p_value",
    ])
    .map_err(|e| write_err(path, e))?;
    for e in effects {
        w.write_record([
            e.kind.name().to_string(),
            e.group_a.clone(),
            e.group_b.clone().unwrap_or_default(),
            fmt_f64(e.at),
            fmt_opt(e.estimate),
            fmt_opt(e.se),
            fmt_opt(e.ci_lower),
            fmt_opt(e.ci_upper),
            fmt_opt(e.p_value),
        ])
        .map_err(|err| write_err(path, err))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize metadata: {e}")))?;
    let file = File::create(path).map_err(|e| open_err(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| write_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| open_err(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| write_err(path, e))
}

pub fn write_sim_csv(path: &Path, data: &SurvDataset) -> Result<()> {
    let file = File::create(path).map_err(|e| open_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["time".to_string(), "event".to_string(), "z".to_string()];
    header.extend(data.covariates().iter().map(|(name, _)| name.clone()));
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for i in 0..data.n() {
        let mut row = vec![
            fmt_f64(data.time()[i]),
            if data.event()[i] { "1".into() } else { "0".into() },
            data.treatment()[i].clone(),
        ];
        for (_, cov) in data.covariates() {
            row.push(match cov {
                Covariate::Numeric(v) => fmt_f64(v[i]),
                Covariate::Categorical(v) => v[i].clone(),
            });
        }
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}
