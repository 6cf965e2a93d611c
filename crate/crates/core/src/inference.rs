//! Uncertainty for adjusted curves: subject-level bootstrap with full
//! pipeline refits, and closed-form point-wise intervals where an analytic
//! variance exists.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adjust::{replicate_values, AdjustedSurv, CiSource, CiTransform, EstimationOptions};
use crate::data::SurvDataset;
use crate::error::{Error, Result};
use crate::nonparam::sample_quantile;

/// How bootstrap replicates are turned into interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootInterval {
    /// Empirical quantiles of the replicate estimates.
    Percentile,
    /// Point estimate plus/minus a normal quantile times the replicate
    /// standard deviation.
    NormalSd,
}

/// Replicate estimates and bookkeeping from a bootstrap run.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Successful replicates only: replicate x group x grid time, with groups
    /// in the same order as the point-estimate curves.
    pub replicates: Vec<Vec<Vec<f64>>>,
    pub n_boot: usize,
    pub seed: u64,
    pub failed_replicates: usize,
}

pub(crate) fn z_quantile(conf_level: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + conf_level / 2.0)
}

/// Two-sided normal p-value for an estimate and its standard error.
pub(crate) fn normal_p_value(estimate: f64, se: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    2.0 * (1.0 - normal.cdf((estimate / se).abs()))
}

/// One bootstrap draw: stream `r` of the root seed resamples subject rows
/// with replacement and re-runs the whole estimation pipeline. `None` marks a
/// failed replicate (an estimation error, or a treatment level vanished).
fn one_replicate(
    r: usize,
    seed: u64,
    data: &SurvDataset,
    adj: &AdjustedSurv,
    expected: &[String],
    grid: &[f64],
) -> Option<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    let n = data.n();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let sub = data.subset(&idx);
    match replicate_values(
        &sub,
        &adj.spec,
        grid,
        adj.force_bounds_applied,
        adj.iso_reg_applied,
    ) {
        Err(_) => None,
        Ok(vals) => {
            if vals.len() != expected.len()
                || vals.iter().zip(expected).any(|((g, _), e)| g != e)
            {
                return None;
            }
            Some(vals.into_iter().map(|(_, v)| v).collect())
        }
    }
}

/// Run the bootstrap and attach percentile (or normal-approximation) bands,
/// replicate-based standard errors where no analytic ones exist, and the raw
/// replicates themselves.
pub(crate) fn attach_bootstrap(
    adj: &mut AdjustedSurv,
    data: &SurvDataset,
    options: &EstimationOptions,
) -> Result<()> {
    let seed = options.seed.unwrap();
    let n_boot = options.n_boot;
    let grid = adj.eval_times.clone();
    let expected: Vec<String> = adj.curves.iter().map(|c| c.group.clone()).collect();

    let run =
        |r: usize| one_replicate(r, seed, data, adj, &expected, &grid);
    let raw: Vec<Option<Vec<Vec<f64>>>> = if options.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| {
                Error::Config(format!("could not start {} workers: {e}", options.workers))
            })?;
        pool.install(|| (0..n_boot).into_par_iter().map(run).collect())
    } else {
        (0..n_boot).map(run).collect()
    };

    let replicates: Vec<Vec<Vec<f64>>> = raw.into_iter().flatten().collect();
    let failed = n_boot - replicates.len();
    if failed as f64 > 0.05 * n_boot as f64 {
        return Err(Error::Instability(format!(
            "{failed} of {n_boot} bootstrap replicates failed"
        )));
    }

    let alpha = 1.0 - options.conf_level;
    let z = z_quantile(options.conf_level);
    for (gi, curve) in adj.curves.iter_mut().enumerate() {
        let mut lower = Vec::with_capacity(grid.len());
        let mut upper = Vec::with_capacity(grid.len());
        let mut sds = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let mut vals: Vec<f64> = replicates.iter().map(|rep| rep[gi][j]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var =
                vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64;
            sds.push(var.sqrt());

            let est = curve.curve.values[j];
            let (lo, hi) = match options.boot_interval {
                BootInterval::Percentile => {
                    vals.sort_by(|a, b| a.total_cmp(b));
                    (
                        sample_quantile(&vals, alpha / 2.0),
                        sample_quantile(&vals, 1.0 - alpha / 2.0),
                    )
                }
                BootInterval::NormalSd => {
                    let sd = *sds.last().unwrap();
                    (est - z * sd, est + z * sd)
                }
            };
            // Clamp into [0,1], then widen so the band always contains the
            // point estimate (which itself can leave [0,1] for uncorrected
            // pseudo-value estimators).
            lower.push(lo.clamp(0.0, 1.0).min(est));
            upper.push(hi.clamp(0.0, 1.0).max(est));
        }
        if curve.se.is_none() {
            curve.se = Some(sds);
        }
        curve.ci_lower = Some(lower);
        curve.ci_upper = Some(upper);
    }
    adj.ci_source = Some(CiSource::Bootstrap);
    adj.boot = Some(BootstrapResult { replicates, n_boot, seed, failed_replicates: failed });
    Ok(())
}

/// Attach closed-form point-wise intervals from the per-time standard
/// errors.
pub(crate) fn attach_approx_ci(
    adj: &mut AdjustedSurv,
    conf_level: f64,
    transform: CiTransform,
) -> Result<()> {
    let method = adj.method.name();
    let z = z_quantile(conf_level);
    for curve in adj.curves.iter_mut() {
        let Some(se) = curve.se.clone() else {
            return Err(Error::Capability(format!(
                "method {method} has no closed-form standard errors; use the \
                 bootstrap for confidence intervals"
            )));
        };
        let mut lower = Vec::with_capacity(se.len());
        let mut upper = Vec::with_capacity(se.len());
        for (j, &s) in se.iter().enumerate() {
            let est = curve.curve.values[j];
            let (lo, hi) = match transform {
                CiTransform::Linear => (est - z * s, est + z * s),
                CiTransform::LogLog => loglog_band(est, s, z),
            };
            lower.push(lo.clamp(0.0, 1.0).min(est));
            upper.push(hi.clamp(0.0, 1.0).max(est));
        }
        curve.ci_lower = Some(lower);
        curve.ci_upper = Some(upper);
    }
    adj.ci_source = Some(CiSource::Analytic);
    Ok(())
}

/// Symmetric interval on the log(-log S) scale mapped back to the survival
/// scale: S^exp(±z·se/(S·ln S)). Degenerate at S in {0, 1}.
fn loglog_band(est: f64, se: f64, z: f64) -> (f64, f64) {
    if est <= 0.0 || est >= 1.0 || se == 0.0 {
        return (est, est);
    }
    let scale = se / (est * est.ln().abs());
    let lo = est.powf((z * scale).exp());
    let hi = est.powf((-z * scale).exp());
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjust::{adjusted_surv, Method, MethodSpec};
    use crate::sim::{simulate_dgp, DgpSpec};

    fn options(n_boot: usize, seed: u64) -> EstimationOptions {
        EstimationOptions {
            bootstrap: true,
            n_boot,
            seed: Some(seed),
            ..EstimationOptions::default()
        }
    }

    fn km_spec() -> MethodSpec {
        MethodSpec::new(Method::Km)
    }

    #[test]
    fn identical_rows_give_degenerate_intervals() {
        let time = vec![2.0; 12].into_iter().chain(vec![3.0; 12]).collect::<Vec<f64>>();
        let event = vec![true; 24];
        let trt: Vec<String> = (0..24).map(|i| if i < 12 { "a" } else { "b" }.into()).collect();
        let data = SurvDataset::new(time, event, trt, vec![]).unwrap();
        let adj = adjusted_surv(&data, &km_spec(), &options(40, 5)).unwrap();
        for curve in &adj.curves {
            let lo = curve.ci_lower.as_ref().unwrap();
            let hi = curve.ci_upper.as_ref().unwrap();
            for j in 0..adj.eval_times.len() {
                assert_eq!(lo[j].to_bits(), curve.curve.values[j].to_bits());
                assert_eq!(hi[j].to_bits(), curve.curve.values[j].to_bits());
                assert_eq!(curve.se.as_ref().unwrap()[j], 0.0);
            }
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_bands() {
        let data = simulate_dgp(&DgpSpec { n: 60, ..DgpSpec::default() }, 201).unwrap();
        let a = adjusted_surv(&data, &km_spec(), &options(25, 9)).unwrap();
        let b = adjusted_surv(&data, &km_spec(), &options(25, 9)).unwrap();
        for (ca, cb) in a.curves.iter().zip(&b.curves) {
            let (la, lb) = (ca.ci_lower.as_ref().unwrap(), cb.ci_lower.as_ref().unwrap());
            let (ua, ub) = (ca.ci_upper.as_ref().unwrap(), cb.ci_upper.as_ref().unwrap());
            for j in 0..la.len() {
                assert_eq!(la[j].to_bits(), lb[j].to_bits());
                assert_eq!(ua[j].to_bits(), ub[j].to_bits());
            }
        }
    }

    #[test]
    fn replicate_streams_are_prefix_stable() {
        let data = simulate_dgp(&DgpSpec { n: 40, ..DgpSpec::default() }, 77).unwrap();
        let small = adjusted_surv(&data, &km_spec(), &options(10, 13)).unwrap();
        let large = adjusted_surv(&data, &km_spec(), &options(20, 13)).unwrap();
        let (bs, bl) = (small.boot.unwrap(), large.boot.unwrap());
        assert_eq!(bs.replicates.len(), 10);
        for (rs, rl) in bs.replicates.iter().zip(&bl.replicates) {
            for (gs, gl) in rs.iter().zip(rl) {
                for (a, b) in gs.iter().zip(gl) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let data = simulate_dgp(&DgpSpec { n: 40, ..DgpSpec::default() }, 78).unwrap();
        let serial = adjusted_surv(&data, &km_spec(), &options(16, 3)).unwrap();
        let mut opts = options(16, 3);
        opts.workers = 4;
        let parallel = adjusted_surv(&data, &km_spec(), &opts).unwrap();
        for (a, b) in serial.curves.iter().zip(&parallel.curves) {
            for j in 0..a.curve.values.len() {
                assert_eq!(
                    a.ci_lower.as_ref().unwrap()[j].to_bits(),
                    b.ci_lower.as_ref().unwrap()[j].to_bits()
                );
                assert_eq!(
                    a.ci_upper.as_ref().unwrap()[j].to_bits(),
                    b.ci_upper.as_ref().unwrap()[j].to_bits()
                );
            }
        }
    }

    #[test]
    fn percentile_bands_contain_the_replicate_median() {
        let data = simulate_dgp(&DgpSpec { n: 50, ..DgpSpec::default() }, 301).unwrap();
        let adj = adjusted_surv(&data, &km_spec(), &options(31, 17)).unwrap();
        let boot = adj.boot.as_ref().unwrap();
        for (gi, curve) in adj.curves.iter().enumerate() {
            for j in 0..adj.eval_times.len() {
                let mut vals: Vec<f64> =
                    boot.replicates.iter().map(|r| r[gi][j]).collect();
                vals.sort_by(|a, b| a.total_cmp(b));
                let median = sample_quantile(&vals, 0.5);
                assert!(curve.ci_lower.as_ref().unwrap()[j] <= median);
                assert!(curve.ci_upper.as_ref().unwrap()[j] >= median);
            }
        }
    }

    #[test]
    fn normal_interval_option_uses_the_replicate_sd() {
        let data = simulate_dgp(&DgpSpec { n: 50, ..DgpSpec::default() }, 302).unwrap();
        let mut opts = options(25, 21);
        opts.boot_interval = BootInterval::NormalSd;
        let adj = adjusted_surv(&data, &km_spec(), &opts).unwrap();
        let boot = adj.boot.as_ref().unwrap();
        let z = z_quantile(0.95);
        let curve = &adj.curves[0];
        let j = adj.eval_times.len() / 2;
        let vals: Vec<f64> = boot.replicates.iter().map(|r| r[0][j]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / (vals.len() - 1) as f64)
            .sqrt();
        let est = curve.curve.values[j];
        let want_lo = (est - z * sd).clamp(0.0, 1.0).min(est);
        assert!((curve.ci_lower.as_ref().unwrap()[j] - want_lo).abs() < 1e-12);
    }

    #[test]
    fn vanishing_treatment_levels_count_as_failures() {
        // One lonely subject in group b: many resamples miss it entirely.
        let mut time: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        time.push(41.0);
        let event = vec![true; 41];
        let mut trt = vec!["a".to_string(); 40];
        trt.push("b".to_string());
        let data = SurvDataset::new(time, event, trt, vec![]).unwrap();
        let err = adjusted_surv(&data, &km_spec(), &options(50, 11)).unwrap_err();
        assert!(matches!(err, Error::Instability(_)));
    }

    #[test]
    fn approximate_bands_match_the_stated_arithmetic() {
        // Greenwood toy: 4 subjects, 2 events in one group.
        let data = SurvDataset::new(
            vec![1.0, 2.0, 1.0, 2.0],
            vec![true, true, true, true],
            vec!["a".into(), "a".into(), "b".into(), "b".into()],
            vec![],
        )
        .unwrap();
        let opts = EstimationOptions { conf_int: true, ..EstimationOptions::default() };
        let adj = adjusted_surv(&data, &km_spec(), &opts).unwrap();
        let curve = &adj.curves[0];
        let z = z_quantile(0.95);
        assert!((z - 1.959964).abs() < 1e-5);
        let se = curve.se.as_ref().unwrap();
        let lo = curve.ci_lower.as_ref().unwrap();
        let j = 1;
        let want = (curve.curve.values[j] - z * se[j]).clamp(0.0, 1.0);
        assert!((lo[j] - want).abs() < 1e-15);
        assert_eq!(adj.ci_source, Some(CiSource::Analytic));
    }

    #[test]
    fn missing_se_directs_to_the_bootstrap() {
        let data = simulate_dgp(&DgpSpec { n: 30, ..DgpSpec::default() }, 303).unwrap();
        let spec = MethodSpec::new(Method::Direct).with_outcome("x");
        let opts = EstimationOptions { conf_int: true, ..EstimationOptions::default() };
        let err = adjusted_surv(&data, &spec, &opts).unwrap_err();
        assert!(matches!(err, Error::Capability(m) if m.contains("bootstrap")));
    }

    #[test]
    fn loglog_bands_stay_inside_the_open_interval() {
        let (lo, hi) = loglog_band(0.5, 0.1, 1.96);
        assert!(0.0 < lo && lo < 0.5 && 0.5 < hi && hi < 1.0);
        assert_eq!(loglog_band(1.0, 0.1, 1.96), (1.0, 1.0));
        assert_eq!(loglog_band(0.0, 0.1, 1.96), (0.0, 0.0));
    }

    #[test]
    fn bootstrap_covers_weighting_methods_end_to_end() {
        let data = simulate_dgp(&DgpSpec { n: 60, ..DgpSpec::default() }, 304).unwrap();
        let spec = MethodSpec::new(Method::IptwKm).with_treatment("x");
        let adj = adjusted_surv(&data, &spec, &options(20, 29)).unwrap();
        assert_eq!(adj.ci_source, Some(CiSource::Bootstrap));
        let boot = adj.boot.as_ref().unwrap();
        assert!(boot.failed_replicates <= 1);
        for curve in &adj.curves {
            let lo = curve.ci_lower.as_ref().unwrap();
            let hi = curve.ci_upper.as_ref().unwrap();
            for j in 0..lo.len() {
                assert!(lo[j] <= hi[j]);
                assert!((0.0..=1.0).contains(&lo[j]));
                assert!((0.0..=1.0).contains(&hi[j]));
            }
        }
    }
}
