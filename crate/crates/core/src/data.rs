//! Dataset container and design-matrix construction.
//!
//! A [`SurvDataset`] holds one right-censored observation per row: a strictly
//! positive follow-up time, an event indicator (true = event, false =
//! censored), a categorical treatment label and any number of named covariate
//! columns. All estimators in this crate consume this type; weights are never
//! part of the input, they are always derived internally.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Covariate {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Covariate {
    pub fn len(&self) -> usize {
        match self {
            Covariate::Numeric(v) => v.len(),
            Covariate::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Covariate::Categorical(_))
    }
}

#[derive(Debug, Clone)]
pub struct SurvDataset {
    time: Vec<f64>,
    event: Vec<bool>,
    treatment: Vec<String>,
    covariates: Vec<(String, Covariate)>,
}

impl SurvDataset {
    /// Build and validate a dataset from typed columns.
    pub fn new(
        time: Vec<f64>,
        event: Vec<bool>,
        treatment: Vec<String>,
        covariates: Vec<(String, Covariate)>,
    ) -> Result<Self> {
        let data = SurvDataset { time, event, treatment, covariates };
        data.validate()?;
        Ok(data)
    }

    /// Build from raw numeric status codes, enforcing that each is exactly 0
    /// or 1. This is the entry point for file-based front ends.
    pub fn from_raw(
        time: Vec<f64>,
        event: Vec<f64>,
        treatment: Vec<String>,
        covariates: Vec<(String, Covariate)>,
    ) -> Result<Self> {
        let mut flags = Vec::with_capacity(event.len());
        for (i, &e) in event.iter().enumerate() {
            if e == 0.0 {
                flags.push(false);
            } else if e == 1.0 {
                flags.push(true);
            } else {
                return Err(Error::Validation(format!(
                    "event status must be 0 or 1, found {e} at row index {i}"
                )));
            }
        }
        SurvDataset::new(time, flags, treatment, covariates)
    }

    fn validate(&self) -> Result<()> {
        let n = self.time.len();
        if n == 0 {
            return Err(Error::Degenerate("dataset has no rows".into()));
        }
        if self.event.len() != n || self.treatment.len() != n {
            return Err(Error::Validation(format!(
                "column lengths differ: {} times, {} events, {} treatment labels",
                n,
                self.event.len(),
                self.treatment.len()
            )));
        }
        for (name, col) in &self.covariates {
            if col.len() != n {
                return Err(Error::Validation(format!(
                    "covariate '{}' has {} entries, expected {}",
                    name,
                    col.len(),
                    n
                )));
            }
        }
        for (i, &t) in self.time.iter().enumerate() {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::Validation(format!(
                    "follow-up times must be positive and finite, found {t} at row index {i}"
                )));
            }
        }
        for (i, label) in self.treatment.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Validation(format!(
                    "treatment label is missing at row index {i}"
                )));
            }
        }
        if self.treatment_levels().len() < 2 {
            return Err(Error::Degenerate(
                "treatment column has fewer than 2 observed levels".into(),
            ));
        }
        for (name, col) in &self.covariates {
            match col {
                Covariate::Numeric(v) => {
                    for (i, &x) in v.iter().enumerate() {
                        if !x.is_finite() {
                            return Err(Error::Validation(format!(
                                "covariate '{name}' is not finite at row index {i}"
                            )));
                        }
                    }
                }
                Covariate::Categorical(v) => {
                    for (i, s) in v.iter().enumerate() {
                        if s.is_empty() {
                            return Err(Error::Validation(format!(
                                "covariate '{name}' is missing at row index {i}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn event(&self) -> &[bool] {
        &self.event
    }

    pub fn treatment(&self) -> &[String] {
        &self.treatment
    }

    pub fn covariates(&self) -> &[(String, Covariate)] {
        &self.covariates
    }

    pub fn covariate(&self, name: &str) -> Option<&Covariate> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
    }

    /// Distinct treatment labels in lexicographic order. The first level acts
    /// as the reference wherever indicator coding is needed.
    pub fn treatment_levels(&self) -> Vec<String> {
        let mut levels: Vec<String> = self.treatment.to_vec();
        levels.sort();
        levels.dedup();
        levels
    }

    /// Row indices per treatment level, in level order.
    pub fn group_indices(&self) -> Vec<(String, Vec<usize>)> {
        self.treatment_levels()
            .into_iter()
            .map(|lev| {
                let idx = self
                    .treatment
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| **l == lev)
                    .map(|(i, _)| i)
                    .collect();
                (lev, idx)
            })
            .collect()
    }

    /// Row subset (duplicates allowed), used for resampling and matching.
    /// Structural validity is inherited from the parent; callers that care
    /// about treatment levels surviving the subset must check themselves.
    pub fn subset(&self, indices: &[usize]) -> SurvDataset {
        let pick_f = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        SurvDataset {
            time: pick_f(&self.time),
            event: indices.iter().map(|&i| self.event[i]).collect(),
            treatment: indices.iter().map(|&i| self.treatment[i].clone()).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|(name, col)| {
                    let col = match col {
                        Covariate::Numeric(v) => Covariate::Numeric(pick_f(v)),
                        Covariate::Categorical(v) => Covariate::Categorical(
                            indices.iter().map(|&i| v[i].clone()).collect(),
                        ),
                    };
                    (name.clone(), col)
                })
                .collect(),
        }
    }
}

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_columns(n_rows: usize, columns: Vec<(String, Vec<f64>)>) -> Self {
        let n_cols = columns.len();
        let mut data = vec![0.0; n_rows * n_cols];
        let mut names = Vec::with_capacity(n_cols);
        for (j, (name, col)) in columns.into_iter().enumerate() {
            assert_eq!(col.len(), n_rows, "column '{name}' length mismatch");
            for (i, x) in col.into_iter().enumerate() {
                data[i * n_cols + j] = x;
            }
            names.push(name);
        }
        DesignMatrix { names, n_rows, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    /// Horizontal concatenation; operands must have the same row count.
    pub fn hcat(&self, other: &DesignMatrix) -> DesignMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        let p = self.n_cols() + other.n_cols();
        let mut data = Vec::with_capacity(self.n_rows * p);
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        DesignMatrix { names, n_rows: self.n_rows, data }
    }

    /// Row subset (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> DesignMatrix {
        let p = self.n_cols();
        let mut data = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DesignMatrix { names: self.names.clone(), n_rows: indices.len(), data }
    }
}

/// Parse an additive formula: '+'-separated covariate names, or the single
/// term "1" for an empty covariate set. Returns the terms in written order.
pub fn parse_formula(formula: &str) -> Result<Vec<String>> {
    let trimmed = formula.trim();
    if trimmed.is_empty() {
        return Err(Error::Formula("formula is empty".into()));
    }
    let terms: Vec<&str> = trimmed.split('+').map(str::trim).collect();
    if terms.iter().any(|t| t.is_empty()) {
        return Err(Error::Formula(format!(
            "formula '{trimmed}' contains an empty term"
        )));
    }
    if terms.contains(&"1") {
        if terms.len() == 1 {
            return Ok(Vec::new());
        }
        return Err(Error::Formula(
            "the intercept-only term '1' cannot be combined with covariates".into(),
        ));
    }
    let mut seen: Vec<&str> = Vec::new();
    for t in &terms {
        if seen.contains(t) {
            return Err(Error::Formula(format!("duplicate term '{t}' in formula")));
        }
        seen.push(t);
    }
    Ok(terms.into_iter().map(str::to_string).collect())
}

fn expand_term(data: &SurvDataset, term: &str, out: &mut Vec<(String, Vec<f64>)>) -> Result<()> {
    let col = data
        .covariate(term)
        .ok_or_else(|| Error::Binding(format!("covariate '{term}' not found in the dataset")))?;
    match col {
        Covariate::Numeric(v) => {
            let first = v[0];
            if v.iter().all(|&x| x == first) {
                return Err(Error::LinearAlgebra {
                    message: "column is constant".into(),
                    column: term.to_string(),
                });
            }
            out.push((term.to_string(), v.clone()));
        }
        Covariate::Categorical(v) => {
            let mut levels: Vec<&String> = v.iter().collect();
            levels.sort();
            levels.dedup();
            if levels.len() < 2 {
                return Err(Error::LinearAlgebra {
                    message: "categorical column has a single observed level".into(),
                    column: term.to_string(),
                });
            }
            for lev in levels.iter().skip(1) {
                let name = format!("{term}={lev}");
                let ind = v.iter().map(|s| if s == *lev { 1.0 } else { 0.0 }).collect();
                out.push((name, ind));
            }
        }
    }
    Ok(())
}

/// Covariate block of a model design: one column per numeric term, reference
/// coded indicators per categorical term (lexicographically first level is
/// the reference). No intercept; may have zero columns for the formula "1".
pub fn expand_covariates(data: &SurvDataset, formula: &str) -> Result<DesignMatrix> {
    let terms = parse_formula(formula)?;
    let mut columns = Vec::new();
    for term in &terms {
        expand_term(data, term, &mut columns)?;
    }
    Ok(DesignMatrix::from_columns(data.n(), columns))
}

/// Full regression design: leading intercept column followed by the expanded
/// covariates, with deterministic column order and names.
pub fn expand_design(data: &SurvDataset, formula: &str) -> Result<DesignMatrix> {
    let covs = expand_covariates(data, formula)?;
    let intercept =
        DesignMatrix::from_columns(data.n(), vec![("intercept".into(), vec![1.0; data.n()])]);
    Ok(intercept.hcat(&covs))
}

/// Indicator columns for the non-reference treatment levels, named
/// `{col}={level}` with `col` the provided display name.
pub fn treatment_indicators(data: &SurvDataset, display_name: &str) -> DesignMatrix {
    let levels = data.treatment_levels();
    let columns = levels
        .iter()
        .skip(1)
        .map(|lev| {
            let name = format!("{display_name}={lev}");
            let ind = data
                .treatment()
                .iter()
                .map(|l| if l == lev { 1.0 } else { 0.0 })
                .collect();
            (name, ind)
        })
        .collect();
    DesignMatrix::from_columns(data.n(), columns)
}
