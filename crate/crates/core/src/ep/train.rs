//! Training harness for the expected-points classifier.
//!
//! Rows are weighted down as the score differential grows (blowouts carry
//! little next-score information), and hyperparameters come from
//! leave-one-season-out cross-validation over a small grid.

use serde::{Deserialize, Serialize};

use super::boost::{BoostConfig, BoostedClassifier};
use super::state::{
    outcome_index, GameState, ScoreDistribution, ScorePredictor, STATE_FEATURE_NAMES,
};
use crate::error::{Error, Result};
use crate::exec;

/// One play-by-play training row: the snap state, its season, and the next
/// scoring event of the same drive-resolution labeling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpTrainRow {
    pub season: u16,
    pub game_id: u64,
    pub drive_id: u64,
    pub state: GameState,
    /// Realized next score in {-7,-3,-2,0,2,3,7}.
    pub next_score: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// w = 1 / (1 + |score differential|).
    InverseScoreDiff,
    Uniform,
}

impl WeightScheme {
    pub fn weight(&self, state: &GameState) -> f64 {
        match self {
            WeightScheme::InverseScoreDiff => 1.0 / (1.0 + f64::from(state.score_differential.abs())),
            WeightScheme::Uniform => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n_rounds: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpConfig {
    pub grid: Vec<GridPoint>,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub weighting: WeightScheme,
    pub seed: u64,
}

impl Default for EpConfig {
    fn default() -> Self {
        Self {
            grid: vec![
                GridPoint {
                    n_rounds: 60,
                    max_depth: 3,
                },
                GridPoint {
                    n_rounds: 120,
                    max_depth: 3,
                },
                GridPoint {
                    n_rounds: 120,
                    max_depth: 4,
                },
            ],
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
            weighting: WeightScheme::InverseScoreDiff,
            seed: 0,
        }
    }
}

/// A fitted expected-points model plus its selection record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpModel {
    pub classifier: BoostedClassifier,
    pub feature_names: Vec<String>,
    pub weighting: WeightScheme,
    pub chosen: GridPoint,
    /// (grid point, cross-validated EP MAE).
    pub cv_table: Vec<(GridPoint, f64)>,
    pub seasons: Vec<u16>,
    pub seed: u64,
}

impl ScorePredictor for EpModel {
    fn predict_distribution(&self, state: &GameState) -> ScoreDistribution {
        self.classifier.predict_probs(&state.features())
    }
}

impl EpModel {
    pub fn expected_points(&self, state: &GameState) -> f64 {
        self.predict_distribution(state).expected_points()
    }
}

fn assemble(rows: &[EpTrainRow], weighting: WeightScheme) -> Result<(Vec<f64>, Vec<usize>, Vec<f64>)> {
    let mut x = Vec::with_capacity(rows.len() * 8);
    let mut labels = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let class = outcome_index(row.next_score).ok_or_else(|| {
            Error::data(format!(
                "row {i}: next_score {} is not one of the seven outcomes",
                row.next_score
            ))
        })?;
        x.extend_from_slice(&row.state.features());
        labels.push(class);
        weights.push(weighting.weight(&row.state));
    }
    Ok((x, labels, weights))
}

fn fit_once(rows: &[EpTrainRow], config: &EpConfig, point: GridPoint) -> Result<BoostedClassifier> {
    let (x, labels, weights) = assemble(rows, config.weighting)?;
    let boost = BoostConfig {
        n_rounds: point.n_rounds,
        max_depth: point.max_depth,
        learning_rate: config.learning_rate,
        lambda: config.lambda,
        min_child_weight: config.min_child_weight,
    };
    BoostedClassifier::fit(&x, 8, &labels, &weights, &boost)
}

fn ep_mae(clf: &BoostedClassifier, rows: &[EpTrainRow]) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|r| {
            let ep = clf.predict_probs(&r.state.features()).expected_points();
            (ep - f64::from(r.next_score)).abs()
        })
        .sum();
    total / rows.len() as f64
}

/// Leave-one-season-out model selection, then a refit on all seasons.
/// Deterministic: the boosting itself uses no randomness and grid ties go
/// to the earlier grid entry.
pub fn fit_ep_classifier(rows: &[EpTrainRow], config: &EpConfig) -> Result<EpModel> {
    if rows.is_empty() {
        return Err(Error::data("no play-by-play rows"));
    }
    let mut seasons: Vec<u16> = rows.iter().map(|r| r.season).collect();
    seasons.sort_unstable();
    seasons.dedup();
    if seasons.len() < 2 {
        return Err(Error::data(format!(
            "leave-one-season-out needs at least 2 seasons, found {}",
            seasons.len()
        )));
    }
    if config.grid.is_empty() {
        return Err(Error::data("hyperparameter grid is empty"));
    }

    let mut cv_table = Vec::with_capacity(config.grid.len());
    for &point in &config.grid {
        let fold_maes = exec::map_indexed(seasons.len(), |si| {
            let held = seasons[si];
            let train: Vec<EpTrainRow> =
                rows.iter().filter(|r| r.season != held).cloned().collect();
            let eval: Vec<EpTrainRow> =
                rows.iter().filter(|r| r.season == held).cloned().collect();
            let clf = fit_once(&train, config, point)?;
            Ok::<f64, Error>(ep_mae(&clf, &eval))
        });
        let mut sum = 0.0;
        for m in fold_maes {
            sum += m?;
        }
        cv_table.push((point, sum / seasons.len() as f64));
    }

    let chosen = cv_table
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| *p)
        .expect("grid nonempty");

    let classifier = fit_once(rows, config, chosen)?;
    Ok(EpModel {
        classifier,
        feature_names: STATE_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        weighting: config.weighting,
        chosen,
        cv_table,
        seasons,
        seed: config.seed,
    })
}

/// Mean absolute error of the model's EP against realized next scores.
pub fn evaluate_ep(model: &EpModel, rows: &[EpTrainRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::data("no evaluation rows"));
    }
    Ok(ep_mae(&model.classifier, rows))
}

/// MAE of the best constant predictor (the weighted median next score),
/// the baseline any model has to beat.
pub fn best_constant_mae(rows: &[EpTrainRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::data("no rows"));
    }
    let mut outcomes: Vec<f64> = rows.iter().map(|r| f64::from(r.next_score)).collect();
    outcomes.sort_unstable_by(f64::total_cmp);
    let median = outcomes[outcomes.len() / 2];
    Ok(outcomes.iter().map(|y| (y - median).abs()).sum::<f64>() / outcomes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_row(season: u16, yardline: f64, next: i8) -> EpTrainRow {
        EpTrainRow {
            season,
            game_id: 1,
            drive_id: 1,
            state: GameState {
                yardline,
                yards_to_go: 10.0,
                down: 1,
                quarter: 1,
                score_differential: 0,
                home_possession: true,
                timeouts_off: 3,
                timeouts_def: 3,
            },
            next_score: next,
        }
    }

    #[test]
    fn single_season_is_fatal() {
        let rows: Vec<EpTrainRow> = (0..40).map(|i| mk_row(2020, i as f64, 0)).collect();
        assert!(fit_ep_classifier(&rows, &EpConfig::default()).is_err());
    }

    #[test]
    fn refit_with_same_config_is_identical() {
        let rows: Vec<EpTrainRow> = (0..120)
            .map(|i| {
                let season = 2020 + (i % 2) as u16;
                let yl = (i % 60) as f64 + 1.0;
                let next = if yl < 30.0 { 7 } else { -7 };
                mk_row(season, yl, next)
            })
            .collect();
        let cfg = EpConfig {
            grid: vec![GridPoint {
                n_rounds: 10,
                max_depth: 2,
            }],
            ..Default::default()
        };
        let a = fit_ep_classifier(&rows, &cfg).unwrap();
        let b = fit_ep_classifier(&rows, &cfg).unwrap();
        assert_eq!(a.classifier, b.classifier);
        assert_eq!(a.cv_table, b.cv_table);
    }

    #[test]
    fn weighting_formula() {
        let mut s = mk_row(2020, 50.0, 0).state;
        s.score_differential = -6;
        assert_eq!(WeightScheme::InverseScoreDiff.weight(&s), 1.0 / 7.0);
        assert_eq!(WeightScheme::Uniform.weight(&s), 1.0);
    }

    #[test]
    fn best_constant_mae_of_symmetric_outcomes() {
        let rows = vec![mk_row(2020, 50.0, 7), mk_row(2020, 50.0, -7)];
        // median is one of the outcomes; MAE = 7 either way
        assert_eq!(best_constant_mae(&rows).unwrap(), 7.0);
    }
}
