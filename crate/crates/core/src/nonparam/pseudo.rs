//! Jackknife pseudo-values for the survival function.
//!
//! The pseudo-value of subject i at time t is
//! `n * S(t) - (n - 1) * S_minus_i(t)` with `S` the full-sample product-limit
//! estimate and `S_minus_i` the estimate with subject i left out. Replacing
//! each censored outcome by its vector of pseudo-values turns curve
//! estimation into a regression problem on complete data.
//!
//! Leave-one-out curves only depend on a subject through its (time, status)
//! pair, so the computation groups subjects by that pair: one adjusted
//! product-limit walk per distinct pair instead of one per subject. Without
//! any censoring the jackknife collapses algebraically to the survival
//! indicator I(T_i > t), which is returned directly on that fast path.

use crate::error::{Error, Result};

/// Pseudo-value matrix: one row per subject, one column per evaluation time.
#[derive(Debug, Clone)]
pub struct PseudoValues {
    pub eval_times: Vec<f64>,
    n: usize,
    values: Vec<f64>,
}

impl PseudoValues {
    /// Assemble a matrix directly, one row per subject.
    pub fn from_rows(eval_times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Degenerate("no pseudo-value rows".into()));
        }
        let t = eval_times.len();
        let mut values = Vec::with_capacity(n * t);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != t {
                return Err(Error::Validation(format!(
                    "pseudo-value row {i} has {} entries, expected {t}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(PseudoValues { eval_times, n, values })
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn get(&self, subject: usize, time_index: usize) -> f64 {
        self.values[subject * self.eval_times.len() + time_index]
    }

    pub fn row(&self, subject: usize) -> &[f64] {
        let t = self.eval_times.len();
        &self.values[subject * t..(subject + 1) * t]
    }

    /// Column mean at one evaluation time.
    pub fn mean_at(&self, time_index: usize) -> f64 {
        let total: f64 = (0..self.n).map(|i| self.get(i, time_index)).sum();
        total / self.n as f64
    }
}

struct TimeTable {
    times: Vec<f64>,
    events: Vec<f64>,
    at_risk: Vec<f64>,
}

fn build_time_table(time: &[f64], event: &[bool]) -> TimeTable {
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut removed = Vec::new();
    for &i in &order {
        if times.last() != Some(&time[i]) {
            times.push(time[i]);
            events.push(0.0);
            removed.push(0.0);
        }
        *removed.last_mut().unwrap() += 1.0;
        if event[i] {
            *events.last_mut().unwrap() += 1.0;
        }
    }
    let mut at_risk = vec![0.0; times.len()];
    let mut acc = 0.0;
    for j in (0..times.len()).rev() {
        acc += removed[j];
        at_risk[j] = acc;
    }
    TimeTable { times, events, at_risk }
}

/// Product-limit walk over the time table with subject counts adjusted for a
/// removed subject observed at `drop_time` with event status `drop_event`
/// (pass None for the full sample), evaluated at the sorted `eval_times`.
fn km_at_evals(table: &TimeTable, drop: Option<(f64, bool)>, eval_times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(eval_times.len());
    let mut surv = 1.0;
    let mut e = 0;
    for j in 0..table.times.len() {
        let t = table.times[j];
        while e < eval_times.len() && eval_times[e] < t {
            out.push(surv);
            e += 1;
        }
        if e == eval_times.len() {
            break;
        }
        let mut d = table.events[j];
        let mut y = table.at_risk[j];
        if let Some((dt, de)) = drop {
            if dt >= t {
                y -= 1.0;
            }
            if de && dt == t {
                d -= 1.0;
            }
        }
        if d > 0.0 {
            surv *= (y - d) / y;
        }
    }
    while e < eval_times.len() {
        out.push(surv);
        e += 1;
    }
    out
}

pub fn pseudo_values(time: &[f64], event: &[bool], eval_times: &[f64]) -> Result<PseudoValues> {
    let n = time.len();
    if n < 2 {
        return Err(Error::Degenerate(
            "pseudo-values need at least 2 subjects".into(),
        ));
    }
    if event.len() != n {
        return Err(Error::Validation(format!(
            "length mismatch: {} times, {} events",
            n,
            event.len()
        )));
    }
    for (i, &t) in time.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Validation(format!(
                "times must be positive and finite, found {t} at row index {i}"
            )));
        }
    }
    for (j, w) in eval_times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::Validation(format!(
                "evaluation times must be strictly increasing, violated at index {}",
                j + 1
            )));
        }
    }
    if eval_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Validation(
            "evaluation times must be finite and nonnegative".into(),
        ));
    }

    let t_len = eval_times.len();
    let mut values = vec![0.0; n * t_len];

    if event.iter().all(|&e| e) {
        // No censoring: the jackknife reduces exactly to survival indicators.
        for i in 0..n {
            for e in 0..t_len {
                values[i * t_len + e] = if time[i] > eval_times[e] { 1.0 } else { 0.0 };
            }
        }
        return Ok(PseudoValues { eval_times: eval_times.to_vec(), n, values });
    }

    let table = build_time_table(time, event);
    let full = km_at_evals(&table, None, eval_times);

    // One leave-one-out walk per distinct (time, status) pair.
    let mut keys: Vec<(f64, bool)> = time.iter().copied().zip(event.iter().copied()).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup();
    let loo: Vec<Vec<f64>> = keys
        .iter()
        .map(|&key| km_at_evals(&table, Some(key), eval_times))
        .collect();

    let nf = n as f64;
    for i in 0..n {
        let key = (time[i], event[i]);
        let k = keys
            .binary_search_by(|probe| probe.0.total_cmp(&key.0).then(probe.1.cmp(&key.1)))
            .expect("key built from the same rows");
        for e in 0..t_len {
            values[i * t_len + e] = nf * full[e] - (nf - 1.0) * loo[k][e];
        }
    }
    Ok(PseudoValues { eval_times: eval_times.to_vec(), n, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonparam::{weighted_km, KmVariance};

    /// Independent oracle: recompute the leave-one-out curve for every subject
    /// with a plain product over the remaining rows.
    fn naive_pseudo(time: &[f64], event: &[bool], eval_times: &[f64]) -> Vec<Vec<f64>> {
        let n = time.len();
        let plain_km = |time: &[f64], event: &[bool], t: f64| -> f64 {
            let mut pairs: Vec<(f64, bool)> =
                time.iter().copied().zip(event.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut s = 1.0;
            let mut idx = 0;
            while idx < pairs.len() {
                let tj = pairs[idx].0;
                if tj > t {
                    break;
                }
                let at_risk = pairs.iter().filter(|p| p.0 >= tj).count() as f64;
                let deaths = pairs.iter().filter(|p| p.0 == tj && p.1).count() as f64;
                if deaths > 0.0 {
                    s *= (at_risk - deaths) / at_risk;
                }
                while idx < pairs.len() && pairs[idx].0 == tj {
                    idx += 1;
                }
            }
            s
        };
        (0..n)
            .map(|i| {
                let t_loo: Vec<f64> =
                    (0..n).filter(|&j| j != i).map(|j| time[j]).collect();
                let e_loo: Vec<bool> =
                    (0..n).filter(|&j| j != i).map(|j| event[j]).collect();
                eval_times
                    .iter()
                    .map(|&t| {
                        let full = plain_km(time, event, t);
                        let loo = plain_km(&t_loo, &e_loo, t);
                        n as f64 * full - (n as f64 - 1.0) * loo
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn no_censoring_gives_exact_survival_indicators() {
        let time = [3.0, 1.0, 4.0, 2.0, 5.0];
        let event = [true; 5];
        let evals = [0.5, 2.5, 4.5];
        let pv = pseudo_values(&time, &event, &evals).unwrap();
        for i in 0..5 {
            for (e, &t) in evals.iter().enumerate() {
                let want: f64 = if time[i] > t { 1.0 } else { 0.0 };
                assert_eq!(pv.get(i, e).to_bits(), want.to_bits());
            }
        }
    }

    #[test]
    fn mean_pseudo_value_equals_km_without_censoring() {
        let time = [2.0, 7.0, 3.0, 3.0, 9.0, 1.0];
        let event = [true; 6];
        let evals = [1.0, 2.5, 3.0, 8.0];
        let pv = pseudo_values(&time, &event, &evals).unwrap();
        let km = weighted_km(&time, &event, &[1.0; 6], KmVariance::Greenwood).unwrap();
        for (e, &t) in evals.iter().enumerate() {
            assert!((pv.mean_at(e) - km.eval(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_leave_one_out_oracle_under_censoring() {
        // Deterministic pseudo-random instances with heavy ties and censoring.
        let mut state = 0x00C0FFEEu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for n in [2usize, 3, 7, 18, 40] {
            let time: Vec<f64> = (0..n).map(|_| ((next() % 12) + 1) as f64).collect();
            let event: Vec<bool> = (0..n).map(|_| next() % 2 == 0).collect();
            if event.iter().all(|&e| e) {
                continue;
            }
            let evals = [0.5, 1.0, 3.0, 6.5, 11.0, 12.0];
            let pv = pseudo_values(&time, &event, &evals).unwrap();
            let oracle = naive_pseudo(&time, &event, &evals);
            for i in 0..n {
                for e in 0..evals.len() {
                    assert!(
                        (pv.get(i, e) - oracle[i][e]).abs() < 1e-12,
                        "n={n} subject {i} eval {e}: {} vs oracle {}",
                        pv.get(i, e),
                        oracle[i][e]
                    );
                }
            }
        }
    }

    #[test]
    fn pseudo_values_can_leave_the_unit_interval() {
        // An event after heavy censoring produces values outside [0, 1]; this
        // is expected and downstream corrections deal with it.
        let time = [1.0, 2.0, 3.0];
        let event = [false, false, true];
        let pv = pseudo_values(&time, &event, &[3.0]).unwrap();
        assert!((pv.get(0, 0) - 0.0).abs() < 1e-12);
        assert!((pv.get(1, 0) - 0.0).abs() < 1e-12);
        assert!((pv.get(2, 0) - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn input_validation() {
        assert!(pseudo_values(&[1.0], &[true], &[1.0]).is_err());
        assert!(pseudo_values(&[1.0, 2.0], &[true, false], &[2.0, 1.0]).is_err());
        assert!(pseudo_values(&[1.0, -2.0], &[true, false], &[1.0]).is_err());
    }
}
