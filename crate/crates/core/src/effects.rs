//! Effect summaries on adjusted survival curves: pointwise differences,
//! survival quantiles, and restricted mean survival time.

use crate::adjust::{AdjustedSurv, CiSource};
use crate::error::{Error, Result};
use crate::inference::{normal_p_value, z_quantile};
use crate::nonparam::sample_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectKind {
    Diff,
    Quantile,
    Rmst,
}

impl EffectKind {
    pub fn name(&self) -> &'static str {
        match self {
            EffectKind::Diff => "diff",
            EffectKind::Quantile => "quantile",
            EffectKind::Rmst => "rmst",
        }
    }
}

/// One effect estimate at one evaluation point.
///
/// `at` holds the time for differences and restricted means and the survival
/// probability for quantiles. `estimate == None` means a quantile was never
/// reached on the curve; the confidence bounds may be unreached independently
/// of the point estimate. Whenever all three of `estimate`, `ci_lower` and
/// `ci_upper` are present, the interval contains the estimate, and p-values
/// are always inside [0, 1].
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub group_a: String,
    pub group_b: Option<String>,
    pub at: f64,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub p_value: Option<f64>,
    pub se_source: Option<CiSource>,
}

/// Right-continuous lookup of a grid-aligned vector, `init` before the grid.
fn value_at(grid: &[f64], values: &[f64], init: f64, t: f64) -> f64 {
    let idx = grid.partition_point(|&g| g <= t);
    if idx == 0 {
        init
    } else {
        values[idx - 1]
    }
}

fn check_conf_level(conf_level: f64) -> Result<()> {
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(Error::Range(format!(
            "confidence level {conf_level} is outside (0, 1)"
        )));
    }
    Ok(())
}

/// Survival difference `S_a(t) - S_b(t)` with a normal test at each time.
///
/// With `times` omitted the difference is evaluated on the full estimation
/// grid; explicit times must lie inside the estimable range of both groups.
/// Standard errors combine the per-curve standard errors as
/// `sqrt(se_a^2 + se_b^2)`, preferring closed-form ones and falling back to
/// bootstrap standard deviations; `se_source` records which kind was used.
/// The p-value is the two-sided normal test of a zero difference.
pub fn curve_diff(
    adj: &AdjustedSurv,
    group_a: &str,
    group_b: &str,
    times: Option<&[f64]>,
    conf_level: f64,
) -> Result<Vec<EffectEstimate>> {
    check_conf_level(conf_level)?;
    let ca = adj
        .curve(group_a)
        .ok_or_else(|| Error::Binding(format!("treatment level '{group_a}' has no fitted curve")))?;
    let cb = adj
        .curve(group_b)
        .ok_or_else(|| Error::Binding(format!("treatment level '{group_b}' has no fitted curve")))?;

    if ca.se.is_none() || cb.se.is_none() {
        return Err(Error::Capability(format!(
            "method {} has no closed-form standard errors; enable the bootstrap to test differences",
            adj.method.name()
        )));
    }
    let se_a = ca.se.as_ref().unwrap();
    let se_b = cb.se.as_ref().unwrap();
    let source = if adj.method.has_analytic_se() {
        CiSource::Analytic
    } else {
        CiSource::Bootstrap
    };

    let eval_times: Vec<f64> = match times {
        Some(ts) => {
            let limit = ca.max_time.min(cb.max_time);
            for &t in ts {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::Range(format!("evaluation time {t} is not a nonnegative number")));
                }
                if t > limit {
                    let g = if ca.max_time <= cb.max_time { group_a } else { group_b };
                    return Err(Error::Range(format!(
                        "evaluation time {t} lies beyond the last estimable time {limit} of group {g}"
                    )));
                }
            }
            ts.to_vec()
        }
        None => adj.eval_times.clone(),
    };

    let z = z_quantile(conf_level);
    let grid = &adj.eval_times;
    let mut out = Vec::with_capacity(eval_times.len());
    for &t in &eval_times {
        let diff = ca.curve.eval(t) - cb.curve.eval(t);
        let sa = value_at(grid, se_a, 0.0, t);
        let sb = value_at(grid, se_b, 0.0, t);
        let se = (sa * sa + sb * sb).sqrt();
        let p = if se > 0.0 { Some(normal_p_value(diff, se)) } else { None };
        out.push(EffectEstimate {
            kind: EffectKind::Diff,
            group_a: group_a.to_string(),
            group_b: Some(group_b.to_string()),
            at: t,
            estimate: Some(diff),
            se: Some(se),
            ci_lower: Some(diff - z * se),
            ci_upper: Some(diff + z * se),
            p_value: p,
            se_source: Some(source),
        });
    }
    Ok(out)
}

/// First grid time at which `values` drops to `p` or below.
fn first_crossing(grid: &[f64], values: &[f64], p: f64) -> Option<f64> {
    grid.iter()
        .zip(values)
        .find(|(_, &v)| v <= p)
        .map(|(&t, _)| t)
}

/// Survival quantile `min { t : S(t) <= p }` for every group.
///
/// An unreached quantile is reported as `estimate == None`, not as an error.
/// When confidence bands are attached the quantile interval inverts them:
/// the lower bound is the first crossing of the lower band, the upper bound
/// the first crossing of the upper band, either of which may itself be
/// unreached. Without bands but with bootstrap replicates, the interval is
/// the percentile range of the per-replicate quantiles, where replicates
/// that never reach `p` count as unreached upper tails.
pub fn surv_quantile(
    adj: &AdjustedSurv,
    p: f64,
    conf_level: Option<f64>,
) -> Result<Vec<EffectEstimate>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Range(format!(
            "quantile probability {p} is outside (0, 1)"
        )));
    }
    let level = match conf_level {
        Some(l) => {
            check_conf_level(l)?;
            l
        }
        None => adj.conf_level,
    };

    let grid = &adj.eval_times;
    let mut out = Vec::with_capacity(adj.curves.len());
    for (ci, curve) in adj.curves.iter().enumerate() {
        let estimate = first_crossing(grid, &curve.curve.values, p);
        let (mut lo, mut hi) = (None, None);
        let has_bands = curve.ci_lower.is_some() && curve.ci_upper.is_some();
        if has_bands && level == adj.conf_level {
            lo = first_crossing(grid, curve.ci_lower.as_ref().unwrap(), p);
            hi = first_crossing(grid, curve.ci_upper.as_ref().unwrap(), p);
        } else if let Some(boot) = &adj.boot {
            let alpha = 1.0 - level;
            let mut reps: Vec<f64> = boot
                .replicates
                .iter()
                .map(|rep| first_crossing(grid, &rep[ci], p).unwrap_or(f64::INFINITY))
                .collect();
            reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ql = sample_quantile(&reps, alpha / 2.0);
            let qh = sample_quantile(&reps, 1.0 - alpha / 2.0);
            lo = ql.is_finite().then_some(ql);
            hi = qh.is_finite().then_some(qh);
        } else if has_bands {
            return Err(Error::Config(format!(
                "confidence bands were built at level {}; invert them at that level or attach a bootstrap",
                adj.conf_level
            )));
        }
        out.push(EffectEstimate {
            kind: EffectKind::Quantile,
            group_a: curve.group.clone(),
            group_b: None,
            at: p,
            estimate,
            se: None,
            ci_lower: lo,
            ci_upper: hi,
            p_value: None,
            se_source: None,
        });
    }
    Ok(out)
}

/// Exact step integral of grid-aligned values over `[0, tau]`, starting from
/// one before the first grid time.
fn integrate_grid(grid: &[f64], values: &[f64], tau: f64) -> f64 {
    let mut total = 0.0;
    let mut cursor = 0.0;
    let mut value = 1.0;
    for (j, &t) in grid.iter().enumerate() {
        if t >= tau {
            break;
        }
        total += (t - cursor) * value;
        cursor = t;
        value = values[j];
    }
    total + (tau - cursor) * value
}

/// Restricted mean survival time per group: the exact area under each step
/// curve on `[0, tau]`.
///
/// `tau` must not exceed the last estimable time of any group; the curves are
/// never extrapolated. With bootstrap replicates attached the interval is the
/// percentile range of the per-replicate restricted means and the standard
/// error their standard deviation; otherwise both are absent.
pub fn rmst(adj: &AdjustedSurv, tau: f64, conf_level: Option<f64>) -> Result<Vec<EffectEstimate>> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::Range(format!("horizon {tau} is not a positive number")));
    }
    let level = match conf_level {
        Some(l) => {
            check_conf_level(l)?;
            l
        }
        None => adj.conf_level,
    };
    for curve in &adj.curves {
        if tau > curve.max_time {
            return Err(Error::Range(format!(
                "horizon {tau} lies beyond the last estimable time {} of group {}",
                curve.max_time, curve.group
            )));
        }
    }

    let grid = &adj.eval_times;
    let mut out = Vec::with_capacity(adj.curves.len());
    for (ci, curve) in adj.curves.iter().enumerate() {
        let estimate = curve.curve.integrate(0.0, tau)?;
        let (mut se, mut lo, mut hi) = (None, None, None);
        if let Some(boot) = &adj.boot {
            let mut areas: Vec<f64> = boot
                .replicates
                .iter()
                .map(|rep| integrate_grid(grid, &rep[ci], tau))
                .collect();
            if areas.len() > 1 {
                let mean = areas.iter().sum::<f64>() / areas.len() as f64;
                let var = areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
                    / (areas.len() - 1) as f64;
                se = Some(var.sqrt());
            }
            areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let alpha = 1.0 - level;
            lo = Some(sample_quantile(&areas, alpha / 2.0).min(estimate));
            hi = Some(sample_quantile(&areas, 1.0 - alpha / 2.0).max(estimate));
        }
        out.push(EffectEstimate {
            kind: EffectKind::Rmst,
            group_a: curve.group.clone(),
            group_b: None,
            at: tau,
            estimate: Some(estimate),
            se,
            ci_lower: lo,
            ci_upper: hi,
            p_value: None,
            se_source: adj.boot.as_ref().map(|_| CiSource::Bootstrap),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjust::{adjusted_surv, EstimationOptions, Method, MethodSpec};
    use crate::data::SurvDataset;
    use crate::nonparam::SurvCurve;
    use crate::sim::{simulate_dgp, DgpSpec};
    use crate::step::StepFunction;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn two_group_data() -> SurvDataset {
        let time = vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0];
        let event = vec![true; 8];
        let group = vec!["a", "a", "a", "a", "b", "b", "b", "b"]
            .into_iter()
            .map(String::from)
            .collect();
        SurvDataset::new(time, event, group, vec![]).unwrap()
    }

    fn km_fit(options: EstimationOptions) -> AdjustedSurv {
        adjusted_surv(&two_group_data(), &MethodSpec::new(Method::Km), &options).unwrap()
    }

    fn synthetic_surv(values_a: Vec<f64>, se_a: Vec<f64>, values_b: Vec<f64>, se_b: Vec<f64>) -> AdjustedSurv {
        let times = (1..=values_a.len()).map(|i| i as f64).collect::<Vec<_>>();
        let curve = |g: &str, v: Vec<f64>, s: Vec<f64>| SurvCurve {
            group: g.to_string(),
            curve: StepFunction::survival(times.clone(), v).unwrap(),
            se: Some(s),
            ci_lower: None,
            ci_upper: None,
            risk_table: None,
            censor_times: vec![],
            max_time: times[times.len() - 1],
        };
        AdjustedSurv {
            curves: vec![curve("a", values_a, se_a), curve("b", values_b, se_b)],
            eval_times: times,
            method: Method::Km,
            spec: MethodSpec::new(Method::Km),
            conf_level: 0.95,
            ci_source: None,
            boot: None,
            force_bounds_applied: false,
            iso_reg_applied: false,
        }
    }

    #[test]
    fn toy_restricted_mean_is_exact() {
        let adj = km_fit(EstimationOptions::default());
        let est = rmst(&adj, 2.0, None).unwrap();
        for e in &est {
            assert_eq!(e.estimate, Some(1.5));
            assert!(e.se.is_none() && e.ci_lower.is_none());
        }
    }

    #[test]
    fn restricted_mean_of_a_flat_curve_is_the_horizon() {
        let grid = vec![1.0, 2.0, 4.0];
        assert_eq!(integrate_grid(&grid, &[1.0, 1.0, 1.0], 3.0), 3.0);
        assert_eq!(integrate_grid(&grid, &[1.0, 1.0, 1.0], 0.5), 0.5);
    }

    #[test]
    fn restricted_means_add_over_adjacent_horizons() {
        let adj = km_fit(EstimationOptions::default());
        let at1 = rmst(&adj, 1.0, None).unwrap()[0].estimate.unwrap();
        let at2 = rmst(&adj, 2.0, None).unwrap()[0].estimate.unwrap();
        let tail = adj.curves[0].curve.integrate(1.0, 2.0).unwrap();
        assert!((at1 + tail - at2).abs() < 1e-15);
    }

    #[test]
    fn horizon_beyond_the_data_is_rejected() {
        let adj = km_fit(EstimationOptions::default());
        let err = rmst(&adj, 2.5, None).unwrap_err();
        assert!(matches!(err, Error::Range(_)), "{err}");
        assert!(rmst(&adj, 0.0, None).is_err());
    }

    #[test]
    fn difference_combines_standard_errors() {
        let adj = synthetic_surv(vec![0.8], vec![0.03], vec![0.7], vec![0.04]);
        let est = curve_diff(&adj, "a", "b", Some(&[1.0]), 0.95).unwrap();
        let e = &est[0];
        let diff = e.estimate.unwrap();
        let se = e.se.unwrap();
        assert!((diff - 0.1).abs() < 1e-15);
        assert!((se - 0.05).abs() < 1e-15);
        let z = diff / se;
        let expect_p = 2.0 * (1.0 - statrs::distribution::ContinuousCDF::cdf(
            &statrs::distribution::Normal::new(0.0, 1.0).unwrap(),
            z,
        ));
        assert!((e.p_value.unwrap() - expect_p).abs() < 1e-12);
        assert_eq!(e.se_source, Some(CiSource::Analytic));
        assert!(e.ci_lower.unwrap() <= diff && diff <= e.ci_upper.unwrap());
    }

    #[test]
    fn difference_is_antisymmetric_bitwise() {
        let adj = synthetic_surv(
            vec![0.9, 0.62, 0.31],
            vec![0.02, 0.05, 0.07],
            vec![0.85, 0.44, 0.29],
            vec![0.03, 0.06, 0.08],
        );
        let ab = curve_diff(&adj, "a", "b", None, 0.95).unwrap();
        let ba = curve_diff(&adj, "b", "a", None, 0.95).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!(
                x.estimate.unwrap().to_bits(),
                (-y.estimate.unwrap()).to_bits()
            );
            assert_eq!(x.se, y.se);
            assert_eq!(x.p_value, y.p_value);
        }
    }

    #[test]
    fn identical_curves_give_unit_p_values() {
        let adj = synthetic_surv(
            vec![0.8, 0.5],
            vec![0.05, 0.08],
            vec![0.8, 0.5],
            vec![0.05, 0.08],
        );
        for e in curve_diff(&adj, "a", "b", None, 0.95).unwrap() {
            assert_eq!(e.estimate, Some(0.0));
            assert_eq!(e.p_value, Some(1.0));
        }
    }

    #[test]
    fn omitted_times_cover_the_whole_grid() {
        let adj = synthetic_surv(
            vec![0.9, 0.6, 0.3],
            vec![0.1, 0.1, 0.1],
            vec![0.8, 0.5, 0.2],
            vec![0.1, 0.1, 0.1],
        );
        let est = curve_diff(&adj, "a", "b", None, 0.95).unwrap();
        assert_eq!(est.len(), adj.eval_times.len());
        let err = curve_diff(&adj, "a", "b", Some(&[4.0]), 0.95).unwrap_err();
        assert!(matches!(err, Error::Range(_)), "{err}");
    }

    #[test]
    fn missing_standard_errors_point_to_the_bootstrap() {
        let data = simulate_dgp(&DgpSpec { n: 60, ..DgpSpec::default() }, 7).unwrap();
        let adj = adjusted_surv(
            &data,
            &MethodSpec::new(Method::Direct).with_outcome("x"),
            &EstimationOptions::default(),
        )
        .unwrap();
        let err = curve_diff(&adj, "0", "1", None, 0.95).unwrap_err();
        assert!(matches!(err, Error::Capability(_)), "{err}");
        assert!(err.to_string().contains("bootstrap"));
    }

    #[test]
    fn unknown_groups_are_rejected() {
        let adj = km_fit(EstimationOptions::default());
        assert!(curve_diff(&adj, "a", "zzz", None, 0.95).is_err());
    }

    #[test]
    fn quantile_takes_the_first_crossing() {
        let adj = synthetic_surv(
            vec![0.9, 0.5, 0.2],
            vec![0.0; 3],
            vec![0.9, 0.7, 0.6],
            vec![0.0; 3],
        );
        let est = surv_quantile(&adj, 0.5, None).unwrap();
        assert_eq!(est[0].estimate, Some(2.0));
        assert_eq!(est[1].estimate, None);
        assert_eq!(est[0].at, 0.5);
    }

    #[test]
    fn quantile_is_exact_on_ties_with_the_target() {
        let adj = synthetic_surv(vec![0.5, 0.1], vec![0.0; 2], vec![0.6, 0.5], vec![0.0; 2]);
        let est = surv_quantile(&adj, 0.5, None).unwrap();
        assert_eq!(est[0].estimate, Some(1.0));
        assert_eq!(est[1].estimate, Some(2.0));
    }

    #[test]
    fn redundant_grid_points_leave_quantiles_alone() {
        let grid = vec![1.0, 2.0, 3.0];
        let vals = vec![0.8, 0.4, 0.4];
        let q = first_crossing(&grid, &vals, 0.5).unwrap();
        let dense_grid = vec![1.0, 1.5, 2.0, 2.5, 3.0];
        let dense_vals = vec![0.8, 0.8, 0.4, 0.4, 0.4];
        assert_eq!(q, first_crossing(&dense_grid, &dense_vals, 0.5).unwrap());
    }

    #[test]
    fn quantiles_are_monotone_in_the_probability() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..8);
            let mut vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let grid: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            // Larger probabilities are crossed earlier, so the quantile is
            // nonincreasing in p.
            let mut last = f64::INFINITY;
            for pct in 1..20 {
                let p = pct as f64 / 20.0;
                let q = first_crossing(&grid, &vals, p).unwrap_or(f64::INFINITY);
                assert!(q <= last);
                last = q;
            }
        }
    }

    #[test]
    fn band_inversion_brackets_the_quantile() {
        let mut adj = synthetic_surv(
            vec![0.9, 0.6, 0.3, 0.1],
            vec![0.0; 4],
            vec![0.9, 0.6, 0.3, 0.1],
            vec![0.0; 4],
        );
        for c in &mut adj.curves {
            c.ci_lower = Some(vec![0.8, 0.45, 0.2, 0.05]);
            c.ci_upper = Some(vec![0.97, 0.75, 0.45, 0.2]);
        }
        let est = surv_quantile(&adj, 0.5, None).unwrap();
        let e = &est[0];
        assert_eq!(e.estimate, Some(3.0));
        assert_eq!(e.ci_lower, Some(2.0));
        assert_eq!(e.ci_upper, Some(3.0));
        assert!(e.ci_lower.unwrap() <= e.estimate.unwrap());
        assert!(e.estimate.unwrap() <= e.ci_upper.unwrap());
    }

    #[test]
    fn bad_probabilities_are_rejected() {
        let adj = km_fit(EstimationOptions::default());
        for p in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(surv_quantile(&adj, p, None).is_err());
        }
    }

    #[test]
    fn bootstrap_attaches_intervals_to_restricted_means() {
        let options = EstimationOptions {
            bootstrap: true,
            n_boot: 40,
            seed: Some(5),
            ..EstimationOptions::default()
        };
        let adj = km_fit(options);
        let est = rmst(&adj, 2.0, None).unwrap();
        for e in &est {
            let (lo, hi) = (e.ci_lower.unwrap(), e.ci_upper.unwrap());
            let point = e.estimate.unwrap();
            assert!(lo <= point && point <= hi);
            assert!(e.se.unwrap() >= 0.0);
            assert_eq!(e.se_source, Some(CiSource::Bootstrap));
        }
    }

    #[test]
    fn bootstrap_quantiles_cover_the_point_estimate() {
        let data = simulate_dgp(&DgpSpec { n: 120, ..DgpSpec::default() }, 3).unwrap();
        let options = EstimationOptions {
            bootstrap: true,
            n_boot: 60,
            seed: Some(9),
            ..EstimationOptions::default()
        };
        let adj = adjusted_surv(&data, &MethodSpec::new(Method::Km), &options).unwrap();
        let est = surv_quantile(&adj, 0.5, None).unwrap();
        for e in &est {
            if let (Some(lo), Some(q)) = (e.ci_lower, e.estimate) {
                assert!(lo <= q);
            }
        }
    }
}
