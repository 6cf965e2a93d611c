//! Unadjusted per-group Kaplan-Meier curves.
//!
//! Included for reference: with confounding present these curves answer a
//! different question than the adjusted methods and should not be compared
//! causally.

use super::{risk_at_grid, RawCurve};
use crate::data::SurvDataset;
use crate::error::Result;
use crate::nonparam::{weighted_km, KmVariance};

pub(crate) fn run(data: &SurvDataset, grid: &[f64]) -> Result<Vec<RawCurve>> {
    let mut out = Vec::new();
    for (level, idx) in data.group_indices() {
        let time: Vec<f64> = idx.iter().map(|&i| data.time()[i]).collect();
        let event: Vec<bool> = idx.iter().map(|&i| data.event()[i]).collect();
        let weights = vec![1.0; idx.len()];
        let est = weighted_km(&time, &event, &weights, KmVariance::Greenwood)?;
        let risk = risk_at_grid(&time, &event, &weights, grid);
        out.push(RawCurve::from_km(level, est, Some(risk)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvDataset;

    fn two_group_toy() -> SurvDataset {
        SurvDataset::new(
            vec![1.0, 2.0, 1.0, 2.0],
            vec![true, true, true, true],
            vec!["a".into(), "a".into(), "b".into(), "b".into()],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn per_group_curves_match_the_hand_values() {
        let data = two_group_toy();
        let grid = [0.0, 1.0, 2.0];
        let curves = run(&data, &grid).unwrap();
        assert_eq!(curves.len(), 2);
        for c in &curves {
            assert_eq!(c.times, vec![1.0, 2.0]);
            assert_eq!(c.surv, vec![0.5, 0.0]);
            assert_eq!(c.max_time, 2.0);
        }
    }

    #[test]
    fn identical_groups_give_identical_curves() {
        let data = two_group_toy();
        let curves = run(&data, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(curves[0].surv, curves[1].surv);
        assert_eq!(curves[0].times, curves[1].times);
    }

    #[test]
    fn risk_table_counts_at_grid_times() {
        let data = SurvDataset::new(
            vec![1.0, 2.0, 3.0],
            vec![true, false, true],
            vec!["a".into(), "a".into(), "a".into()],
            vec![],
        );
        // A single treatment level is rejected at dataset construction, so
        // add a second level that plays no part in the checked group.
        assert!(data.is_err());

        let data = SurvDataset::new(
            vec![1.0, 2.0, 3.0, 9.0],
            vec![true, false, true, true],
            vec!["a".into(), "a".into(), "a".into(), "b".into()],
            vec![],
        )
        .unwrap();
        let grid = [0.0, 1.0, 2.5, 3.0];
        let curves = run(&data, &grid).unwrap();
        let a = curves.iter().find(|c| c.group == "a").unwrap();
        let risk = a.risk.as_ref().unwrap();
        assert_eq!(risk.n_risk, vec![3.0, 3.0, 1.0, 1.0]);
        assert_eq!(risk.n_event, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(a.censor_times, vec![2.0]);
    }
}
