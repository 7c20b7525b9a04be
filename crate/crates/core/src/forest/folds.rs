//! Leave-one-week-out training harness.
//!
//! One forest per week present in the data: the forest holding out week `w`
//! is the only one allowed to score plays from week `w`, which gives every
//! tackle an out-of-sample density exactly once.

use log::warn;

use super::{DensityForest, ForestConfig};
use crate::dataset::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct WeeklyFolds {
    pub forests: Vec<DensityForest>,
}

impl WeeklyFolds {
    /// The forest whose held-out week is `week`.
    pub fn for_week(&self, week: u8) -> Result<&DensityForest> {
        self.forests
            .iter()
            .find(|f| f.held_out_week == Some(week))
            .ok_or_else(|| Error::model(format!("no fold holds out week {week}")))
    }

    pub fn held_out_weeks(&self) -> Vec<u8> {
        self.forests.iter().filter_map(|f| f.held_out_week).collect()
    }
}

/// Fit one forest per week, training on all other weeks. Standardization is
/// recomputed per fold from its own training rows. A week with zero rows is
/// skipped with a warning.
pub fn fit_weekly_folds(
    data: &FeatureDataset,
    config: &ForestConfig,
    master_seed: u64,
) -> Result<WeeklyFolds> {
    let weeks = data.weeks();
    if weeks.len() < 2 {
        return Err(Error::data(format!(
            "leave-one-week-out needs at least 2 weeks, found {}",
            weeks.len()
        )));
    }
    let mut forests = Vec::with_capacity(weeks.len());
    for &week in &weeks {
        let training: Vec<usize> = (0..data.n_rows()).filter(|&r| data.week[r] != week).collect();
        if training.is_empty() {
            warn!("fold for week {week} skipped: no training rows");
            continue;
        }
        let fold_seed = rng::stream_seed(master_seed, 0x666f_6c64 ^ u64::from(week));
        forests.push(DensityForest::fit(
            data,
            &training,
            config,
            fold_seed,
            Some(week),
        )?);
    }
    Ok(WeeklyFolds { forests })
}

/// Point-prediction accuracy of the folds on their held-out weeks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FoldEvaluation {
    /// (held-out week, rmse, mae, n rows)
    pub per_fold: Vec<(u8, f64, f64, usize)>,
    /// Plain average over folds, matching how the harness reports accuracy.
    pub avg_rmse: f64,
    pub avg_mae: f64,
}

impl FoldEvaluation {
    pub fn compute(folds: &WeeklyFolds, data: &FeatureDataset) -> Result<Self> {
        let mut per_fold = Vec::new();
        for forest in &folds.forests {
            let week = forest
                .held_out_week
                .ok_or_else(|| Error::model("fold forest without held-out week"))?;
            let mut se = 0.0;
            let mut ae = 0.0;
            let mut n = 0usize;
            for r in 0..data.n_rows() {
                if data.week[r] != week {
                    continue;
                }
                let pred = forest.predict_mean(data.row(r))?;
                let err = pred - data.response[r];
                se += err * err;
                ae += err.abs();
                n += 1;
            }
            if n == 0 {
                warn!("held-out week {week} has no rows to evaluate");
                continue;
            }
            per_fold.push((week, (se / n as f64).sqrt(), ae / n as f64, n));
        }
        if per_fold.is_empty() {
            return Err(Error::data("no folds could be evaluated"));
        }
        let k = per_fold.len() as f64;
        let avg_rmse = per_fold.iter().map(|f| f.1).sum::<f64>() / k;
        let avg_mae = per_fold.iter().map(|f| f.2).sum::<f64>() / k;
        Ok(Self {
            per_fold,
            avg_rmse,
            avg_mae,
        })
    }
}
