//! Propensity-score matching for two treatment levels: every row of the
//! second level keeps its own outcome, and each one also draws the closest
//! first-level row (with replacement) to represent its counterfactual. Both
//! matched samples are then summarized by unweighted or count-weighted
//! product-limit curves.

use crate::data::SurvDataset;
use crate::error::Result;
use crate::nonparam::{weighted_km, KmVariance};

use super::weights::PropensityModel;
use super::{risk_at_grid, RawCurve};

/// Nearest control per treated row, matched on `score` with replacement;
/// equal distances resolve to the lowest row index. Returns per-row usage
/// counts: one for every treated row, the match count for every control row.
pub(crate) fn match_multiplicities(
    score: &[f64],
    treated: &[usize],
    controls: &[usize],
) -> Vec<f64> {
    let mut sorted: Vec<usize> = controls.to_vec();
    sorted.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut mult = vec![0.0; score.len()];
    for &t in treated {
        mult[t] += 1.0;
    }
    for &t in treated {
        let p = score[t];
        let start = sorted.partition_point(|&c| score[c] < p);
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |row: usize, best: &mut (f64, usize)| {
            let d = (score[row] - p).abs();
            if d < best.0 || (d == best.0 && row < best.1) {
                *best = (d, row);
            }
        };
        // Scores rise to the right and fall to the left of the insertion
        // point, so each walk can stop at the first distance past the best.
        let mut j = start;
        while j < sorted.len() {
            if (score[sorted[j]] - p).abs() > best.0 {
                break;
            }
            consider(sorted[j], &mut best);
            j += 1;
        }
        let mut j = start;
        while j > 0 {
            j -= 1;
            if (score[sorted[j]] - p).abs() > best.0 {
                break;
            }
            consider(sorted[j], &mut best);
        }
        mult[best.1] += 1.0;
    }
    mult
}

pub(crate) fn run(
    data: &SurvDataset,
    model: &PropensityModel,
    grid: &[f64],
) -> Result<Vec<RawCurve>> {
    model.check_positivity()?;
    let groups = data.group_indices();
    let score: Vec<f64> = (0..data.n()).map(|i| model.prob(i, 1)).collect();
    let mult = match_multiplicities(&score, &groups[1].1, &groups[0].1);

    let mut out = Vec::new();
    for (level, rows) in &groups {
        let used: Vec<usize> = rows.iter().copied().filter(|&i| mult[i] > 0.0).collect();
        let time: Vec<f64> = used.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = used.iter().map(|&i| data.event()[i]).collect();
        let w: Vec<f64> = used.iter().map(|&i| mult[i]).collect();
        let est = weighted_km(&time, &event, &w, KmVariance::None)?;
        let risk = risk_at_grid(&time, &event, &w, grid);
        out.push(RawCurve {
            group: level.clone(),
            times: est.times,
            surv: est.surv,
            var: None,
            risk: Some(risk),
            censor_times: est.censor_times,
            max_time: est.max_time,
        });
    }
    Ok(out)
}
