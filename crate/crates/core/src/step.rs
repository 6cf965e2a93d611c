//! Right-continuous step functions.
//!
//! Survival curves, cumulative hazards and their standard errors are all
//! piecewise-constant in time. This module provides the single shared
//! representation: a start value plus jump times with the value that holds
//! from each jump onward (right-continuous evaluation).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    /// Value on [0, times[0]) (and on all of [0, inf) when there are no jumps).
    pub init: f64,
    /// Strictly increasing jump locations.
    pub times: Vec<f64>,
    /// values[j] holds on [times[j], times[j+1]).
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn new(init: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "step function has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if !init.is_finite() {
            return Err(Error::Validation("step function start value is not finite".into()));
        }
        for (j, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Validation(format!(
                    "step times must be strictly increasing, violated at index {}",
                    j + 1
                )));
            }
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("step function contains non-finite entries".into()));
        }
        Ok(StepFunction { init, times, values })
    }

    /// A survival-type step function: value 1 before the first jump.
    pub fn survival(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        StepFunction::new(1.0, times, values)
    }

    /// Right-continuous evaluation: the value of the last jump at or before `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            self.init
        } else {
            self.values[idx - 1]
        }
    }

    pub fn eval_many(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    /// Exact integral over [from, to] as a sum of rectangle areas. The final
    /// segment value is carried forward indefinitely, so integration past the
    /// last jump is well defined; estimator-level range checks live with the
    /// curves themselves.
    pub fn integrate(&self, from: f64, to: f64) -> Result<f64> {
        if !from.is_finite() || !to.is_finite() {
            return Err(Error::Range("integration limits must be finite".into()));
        }
        if from < 0.0 {
            return Err(Error::Range(format!("integration start {from} is negative")));
        }
        if to < from {
            return Err(Error::Range(format!(
                "integration end {to} lies before start {from}"
            )));
        }
        let mut total = 0.0;
        let mut cursor = from;
        let mut value = self.eval(from);
        let start = self.times.partition_point(|&x| x <= from);
        for j in start..self.times.len() {
            let t = self.times[j];
            if t >= to {
                break;
            }
            total += (t - cursor) * value;
            cursor = t;
            value = self.values[j];
        }
        total += (to - cursor) * value;
        Ok(total)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_step() -> StepFunction {
        StepFunction::survival(vec![1.0, 2.0], vec![0.9, 0.7]).unwrap()
    }

    #[test]
    fn eval_before_first_jump_is_one() {
        assert_eq!(two_step().eval(0.999), 1.0);
    }

    #[test]
    fn eval_is_right_continuous_at_jumps() {
        let f = two_step();
        assert_eq!(f.eval(1.0), 0.9);
        assert_eq!(f.eval(2.0), 0.7);
        assert_eq!(f.eval(1.5), 0.9);
        assert_eq!(f.eval(10.0), 0.7);
    }

    #[test]
    fn integrate_carries_last_value() {
        let f = StepFunction::survival(vec![1.0, 2.0], vec![0.5, 0.0]).unwrap();
        assert_eq!(f.integrate(0.0, 3.0).unwrap(), 1.5);
    }

    #[test]
    fn integrate_partial_segments() {
        let f = two_step();
        // 0.5 of value 1, 1 of value 0.9, 0.5 of value 0.7
        let got = f.integrate(0.5, 2.5).unwrap();
        assert!((got - (0.5 + 0.9 + 0.35)).abs() < 1e-15);
    }

    #[test]
    fn integrate_rejects_reversed_limits() {
        let f = two_step();
        assert!(matches!(f.integrate(2.0, 1.0), Err(Error::Range(_))));
        assert!(matches!(f.integrate(-1.0, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn constructor_rejects_unsorted_times() {
        assert!(StepFunction::survival(vec![2.0, 1.0], vec![0.9, 0.7]).is_err());
        assert!(StepFunction::survival(vec![1.0, 1.0], vec![0.9, 0.7]).is_err());
        assert!(StepFunction::survival(vec![1.0], vec![0.9, 0.7]).is_err());
        assert!(StepFunction::survival(vec![f64::NAN], vec![0.9]).is_err());
    }

    proptest! {
        // Integration is additive over adjacent intervals.
        #[test]
        fn integral_additivity(
            times in proptest::collection::vec(0.01f64..100.0, 1..12),
            cuts in proptest::collection::vec(0.0f64..120.0, 3)
        ) {
            let mut times = times;
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup();
            let values: Vec<f64> = (0..times.len()).map(|j| 1.0 / (j as f64 + 2.0)).collect();
            let f = StepFunction::survival(times, values).unwrap();
            let mut cuts = cuts;
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (a, b, c) = (cuts[0], cuts[1], cuts[2]);
            let whole = f.integrate(a, c).unwrap();
            let split = f.integrate(a, b).unwrap() + f.integrate(b, c).unwrap();
            prop_assert!((whole - split).abs() <= 1e-9 * (1.0 + whole.abs()));
        }

        // Evaluation is piecewise constant: anywhere strictly between jumps the
        // value equals the value at the previous jump.
        #[test]
        fn eval_piecewise_constant(mid in 0.0f64..0.999) {
            let f = StepFunction::survival(vec![1.0, 2.0, 3.0], vec![0.8, 0.5, 0.1]).unwrap();
            prop_assert_eq!(f.eval(1.0 + mid), 0.8);
            prop_assert_eq!(f.eval(2.0 + mid), 0.5);
        }
    }
}
