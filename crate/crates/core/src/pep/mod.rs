//! The prevented-expected-points metric.
//!
//! For every tackle: predict the conditional yardage density at the tackle
//! frame twice (with the tackler present and removed), push every draw
//! through the expected-points map `g`, and compare against the observed
//! outcome:
//!
//! * `pep      = E[g | x_removed] - g(y_observed)`
//! * `pep_alt  = E[g | x_removed] - E[g | x_real]`
//!
//! Positive `pep` means the tackle prevented expected points. Records carry
//! all three EP components so the identity
//! `pep - pep_alt = ep_real_pred - ep_real_obs` stays checkable.

use serde::{Deserialize, Serialize};

use crate::ep::{g, GameContext, ScorePredictor};
use crate::error::{Error, Result};
use crate::exec;
use crate::forest::{compensated_mean, ConditionalDensity, WeeklyFolds};
use crate::tracking::{
    engineer_features, filter_tackle_plays, identify_tackle_frame, FeatureConfig, PlayMeta,
    PlayType, TrackingData,
};

/// One valued tackle (or missed tackle, when `source` says so).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PepRecord {
    pub game_id: u64,
    pub play_id: u64,
    pub week: u8,
    pub drive_id: u64,
    pub tackler_id: u64,
    pub tackler_position: String,
    pub ball_carrier_id: u64,
    pub ball_carrier_position: String,
    pub off_team_id: String,
    pub play_type: PlayType,
    pub pass_result: String,
    pub short_yardage: bool,
    pub fourth_down: bool,
    pub fourth_quarter: bool,
    pub turnover: bool,
    pub pep: f64,
    pub pep_alt: f64,
    pub ep_hyp: f64,
    pub ep_real_pred: f64,
    pub ep_real_obs: f64,
    /// "real" for observed tackles, "missed" for valued missed tackles.
    pub source: String,
}

impl PepRecord {
    /// The two defining equations, applied to already-computed EP
    /// components. All PEP arithmetic funnels through here.
    pub fn from_components(ep_hyp: f64, ep_real_pred: f64, ep_real_obs: f64) -> (f64, f64) {
        (ep_hyp - ep_real_obs, ep_hyp - ep_real_pred)
    }
}

/// Monte-Carlo expected points over a conditional yardage density: the mean
/// of `g` applied to every draw, where a draw of `d` yards still to gain
/// from carrier position `carrier_x` ends the play at `carrier_x - d`.
pub fn mc_expected_ep<P: ScorePredictor>(
    density: &ConditionalDensity,
    carrier_x: f64,
    ctx: &GameContext,
    predictor: &P,
) -> Result<f64> {
    if density.draws.is_empty() {
        return Err(Error::data("empty conditional density"));
    }
    let values: Vec<f64> = density
        .draws
        .iter()
        .map(|&d| g(carrier_x - d, ctx, predictor))
        .collect();
    Ok(compensated_mean(&values))
}

pub fn game_context(meta: &PlayMeta) -> GameContext {
    GameContext {
        adjusted_los: meta.adjusted_los,
        yards_to_go: meta.yards_to_go,
        down: meta.down,
        quarter: meta.quarter,
        score_differential: meta.score_differential,
        home_possession: meta.home_possession,
        timeouts_off: meta.timeouts_off,
        timeouts_def: meta.timeouts_def,
    }
}

fn position_of(data: &TrackingData, entity_id: u64) -> String {
    data.players
        .get(&entity_id)
        .map(|p| p.position.clone())
        .unwrap_or_else(|| "UNK".to_string())
}

fn record_shell(data: &TrackingData, meta: &PlayMeta, tackler_id: u64, source: &str) -> PepRecord {
    PepRecord {
        game_id: meta.key.game_id,
        play_id: meta.key.play_id,
        week: meta.week,
        drive_id: meta.drive_id,
        tackler_id,
        tackler_position: position_of(data, tackler_id),
        ball_carrier_id: meta.ball_carrier_id,
        ball_carrier_position: position_of(data, meta.ball_carrier_id),
        off_team_id: meta.off_team_id.clone(),
        play_type: meta.play_type,
        pass_result: meta.pass_result.clone(),
        short_yardage: meta.yards_to_go < 2.0,
        fourth_down: meta.down == 4,
        fourth_quarter: meta.quarter == 4,
        turnover: meta.turnover,
        pep: 0.0,
        pep_alt: 0.0,
        ep_hyp: 0.0,
        ep_real_pred: 0.0,
        ep_real_obs: 0.0,
        source: source.to_string(),
    }
}

/// Value one tackle play. The counterfactual density comes from the same
/// out-of-sample fold forest as the real one; the observed term uses the
/// true end-of-play yard line, not a prediction.
pub fn compute_pep<P: ScorePredictor>(
    data: &TrackingData,
    meta: &PlayMeta,
    folds: &WeeklyFolds,
    predictor: &P,
    config: &FeatureConfig,
) -> Result<PepRecord> {
    let tackler_id = meta
        .tackler_id
        .ok_or_else(|| Error::data("play has no tackler"))?;
    let frames = data
        .frames
        .get(&meta.key)
        .ok_or_else(|| Error::data("play has no frames"))?;
    let tackle_frame_id = identify_tackle_frame(frames, meta.ball_carrier_id, tackler_id)?;
    let frame = frames
        .frame(tackle_frame_id)
        .ok_or_else(|| Error::data("tackle frame missing"))?;
    let carrier = frame
        .entity(meta.ball_carrier_id)
        .ok_or_else(|| Error::data("carrier absent from tackle frame"))?;

    let x_real = engineer_features(frame, meta.ball_carrier_id, config, None)?;
    let x_removed = engineer_features(frame, meta.ball_carrier_id, config, Some(tackler_id))?;

    let forest = folds.for_week(meta.week)?;
    let density_removed = forest.predict_density(&x_removed)?;
    let density_real = forest.predict_density(&x_real)?;

    let ctx = game_context(meta);
    let ep_hyp = mc_expected_ep(&density_removed, carrier.x, &ctx, predictor)?;
    let ep_real_pred = mc_expected_ep(&density_real, carrier.x, &ctx, predictor)?;
    let ep_real_obs = g(meta.end_of_play_x, &ctx, predictor);
    let (pep, pep_alt) = PepRecord::from_components(ep_hyp, ep_real_pred, ep_real_obs);

    let mut rec = record_shell(data, meta, tackler_id, "real");
    rec.pep = pep;
    rec.pep_alt = pep_alt;
    rec.ep_hyp = ep_hyp;
    rec.ep_real_pred = ep_real_pred;
    rec.ep_real_obs = ep_real_obs;
    Ok(rec)
}

/// Value every penalty-free tackle play, in ascending play order. Parallel
/// across plays; the output order does not depend on scheduling.
pub fn compute_all_pep<P: ScorePredictor + Sync>(
    data: &TrackingData,
    folds: &WeeklyFolds,
    predictor: &P,
    config: &FeatureConfig,
) -> Result<Vec<PepRecord>> {
    let all: Vec<PlayMeta> = data.plays.values().cloned().collect();
    let metas = filter_tackle_plays(&all);
    let results = exec::map_indexed(metas.len(), |i| {
        compute_pep(data, metas[i], folds, predictor, config)
    });
    results.into_iter().collect()
}

/// Value a missed tackle: had the tackle been made, the play would have
/// resolved from the contact frame, so the hypothetical term conditions on
/// that frame with the defender still present. Returned records satisfy
/// `pep = ep_hyp - ep_real_obs` like real ones; a costly miss has negative
/// `pep` (see [`missed_tackle_cost`]).
pub fn compute_missed_tackle<P: ScorePredictor>(
    data: &TrackingData,
    meta: &PlayMeta,
    missed_tackler: u64,
    folds: &WeeklyFolds,
    predictor: &P,
    config: &FeatureConfig,
) -> Result<PepRecord> {
    let frames = data
        .frames
        .get(&meta.key)
        .ok_or_else(|| Error::data("play has no frames"))?;
    let contact_frame_id = identify_tackle_frame(frames, meta.ball_carrier_id, missed_tackler)?;
    let frame = frames
        .frame(contact_frame_id)
        .ok_or_else(|| Error::data("contact frame missing"))?;
    let carrier = frame
        .entity(meta.ball_carrier_id)
        .ok_or_else(|| Error::data("carrier absent from contact frame"))?;

    let x_contact = engineer_features(frame, meta.ball_carrier_id, config, None)?;
    let forest = folds.for_week(meta.week)?;
    let density = forest.predict_density(&x_contact)?;

    let ctx = game_context(meta);
    let ep_hyp = mc_expected_ep(&density, carrier.x, &ctx, predictor)?;
    let ep_real_obs = g(meta.end_of_play_x, &ctx, predictor);
    // At the contact frame there is only one scenario, so the model's view
    // of the "real" play is the same density.
    let ep_real_pred = ep_hyp;
    let (pep, pep_alt) = PepRecord::from_components(ep_hyp, ep_real_pred, ep_real_obs);

    let mut rec = record_shell(data, meta, missed_tackler, "missed");
    rec.pep = pep;
    rec.pep_alt = pep_alt;
    rec.ep_hyp = ep_hyp;
    rec.ep_real_pred = ep_real_pred;
    rec.ep_real_obs = ep_real_obs;
    Ok(rec)
}

/// Cost of a missed tackle: how many expected points the miss conceded
/// relative to making the tackle. Positive means the miss was costly.
pub fn missed_tackle_cost(record: &PepRecord) -> f64 {
    record.ep_real_obs - record.ep_hyp
}

/// All missed-tackle records over penalty-free plays with missed-tackle
/// labels, ascending play order.
pub fn compute_all_missed<P: ScorePredictor + Sync>(
    data: &TrackingData,
    folds: &WeeklyFolds,
    predictor: &P,
    config: &FeatureConfig,
) -> Result<Vec<PepRecord>> {
    let mut tasks: Vec<(&PlayMeta, u64)> = Vec::new();
    for meta in data.plays.values() {
        if meta.penalty_flag {
            continue;
        }
        for &m in &meta.missed_tackler_ids {
            tasks.push((meta, m));
        }
    }
    let results = exec::map_indexed(tasks.len(), |i| {
        let (meta, tackler) = tasks[i];
        compute_missed_tackle(data, meta, tackler, folds, predictor, config)
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Player,
    Position,
}

/// One aggregation row: cumulative and average PEP for a player or a
/// position group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PepAggregate {
    pub group: String,
    pub player_id: Option<u64>,
    pub position: String,
    pub sum_pep: f64,
    pub avg_pep: f64,
    pub n_tackles: usize,
}

/// Per-group sum, mean, and count; `avg = sum / n` exactly.
pub fn aggregate_pep(records: &[PepRecord], group_by: GroupBy) -> Vec<PepAggregate> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<String, (Option<u64>, String, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let (key, player_id) = match group_by {
            GroupBy::Player => (format!("{:08}", r.tackler_id), Some(r.tackler_id)),
            GroupBy::Position => (r.tackler_position.clone(), None),
        };
        let entry = groups
            .entry(key)
            .or_insert_with(|| (player_id, r.tackler_position.clone(), Vec::new()));
        entry.2.push(r.pep);
    }
    groups
        .into_iter()
        .map(|(group, (player_id, position, peps))| {
            let sum = crate::forest::compensated_sum(&peps);
            PepAggregate {
                group,
                player_id,
                position,
                sum_pep: sum,
                avg_pep: sum / peps.len() as f64,
                n_tackles: peps.len(),
            }
        })
        .collect()
}

/// Keep run-play records only.
pub fn filter_run_plays(records: &[PepRecord]) -> Vec<PepRecord> {
    records
        .iter()
        .filter(|r| r.play_type == PlayType::Run)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ep::{GameState, ScoreDistribution};

    struct UniformStub;
    impl ScorePredictor for UniformStub {
        fn predict_distribution(&self, _s: &GameState) -> ScoreDistribution {
            ScoreDistribution::uniform()
        }
    }

    fn ctx() -> GameContext {
        GameContext {
            adjusted_los: 50.0,
            yards_to_go: 10.0,
            down: 1,
            quarter: 1,
            score_differential: 0,
            home_possession: true,
            timeouts_off: 3,
            timeouts_def: 3,
        }
    }

    #[test]
    fn paper_arithmetic_is_exact() {
        let (pep, _) = PepRecord::from_components(6.2, 0.0, 5.41);
        assert_eq!(pep, 0.79);
    }

    #[test]
    fn identity_links_the_two_metrics() {
        let (ep_hyp, ep_real_pred, ep_real_obs) = (3.25, 2.0, 1.75);
        let (pep, pep_alt) = PepRecord::from_components(ep_hyp, ep_real_pred, ep_real_obs);
        assert!(((pep - pep_alt) - (ep_real_pred - ep_real_obs)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_density_equals_g_of_draw() {
        // all draws identical: MC mean == g at that yardage
        let density = ConditionalDensity {
            draws: vec![8.0; 100],
        };
        let got = mc_expected_ep(&density, 45.0, &ctx(), &UniformStub).unwrap();
        assert_eq!(got, g(45.0 - 8.0, &ctx(), &UniformStub));
    }

    #[test]
    fn two_point_density_averages() {
        // draws ending in a touchdown (g = 7) and at midfield (uniform -> 0)
        let density = ConditionalDensity {
            draws: vec![45.0, 5.0],
        };
        let got = mc_expected_ep(&density, 45.0, &ctx(), &UniformStub).unwrap();
        assert!((got - 3.5).abs() < 1e-12);
    }

    #[test]
    fn empty_density_is_an_error() {
        let density = ConditionalDensity { draws: vec![] };
        assert!(mc_expected_ep(&density, 45.0, &ctx(), &UniformStub).is_err());
    }

    #[test]
    fn mc_is_permutation_invariant() {
        let draws: Vec<f64> = (0..500).map(|i| (i as f64 * 0.17) % 30.0).collect();
        let a = mc_expected_ep(
            &ConditionalDensity {
                draws: draws.clone(),
            },
            45.0,
            &ctx(),
            &UniformStub,
        )
        .unwrap();
        let mut rev = draws;
        rev.reverse();
        let b = mc_expected_ep(&ConditionalDensity { draws: rev }, 45.0, &ctx(), &UniformStub)
            .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn mk_record(tackler: u64, position: &str, pep: f64, play_type: PlayType) -> PepRecord {
        PepRecord {
            game_id: 1,
            play_id: 1,
            week: 1,
            drive_id: 1,
            tackler_id: tackler,
            tackler_position: position.to_string(),
            ball_carrier_id: 99,
            ball_carrier_position: "RB".into(),
            off_team_id: "AAA".into(),
            play_type,
            pass_result: String::new(),
            short_yardage: false,
            fourth_down: false,
            fourth_quarter: false,
            turnover: false,
            pep,
            pep_alt: pep,
            ep_hyp: pep,
            ep_real_pred: 0.0,
            ep_real_obs: 0.0,
            source: "real".into(),
        }
    }

    #[test]
    fn aggregation_sum_avg_count() {
        let records = vec![
            mk_record(1, "ILB", 1.5, PlayType::Run),
            mk_record(1, "ILB", 0.5, PlayType::Pass),
            mk_record(2, "CB", -0.25, PlayType::Run),
        ];
        let by_player = aggregate_pep(&records, GroupBy::Player);
        assert_eq!(by_player.len(), 2);
        let p1 = by_player.iter().find(|a| a.player_id == Some(1)).unwrap();
        assert_eq!(p1.sum_pep, 2.0);
        assert_eq!(p1.avg_pep, 1.0);
        assert_eq!(p1.n_tackles, 2);

        // partition additivity: position sums add up to the global sum
        let by_pos = aggregate_pep(&records, GroupBy::Position);
        let total: f64 = by_pos.iter().map(|a| a.sum_pep).sum();
        assert!((total - 1.75).abs() < 1e-12);
    }

    #[test]
    fn run_filter() {
        let records = vec![
            mk_record(1, "ILB", 1.0, PlayType::Run),
            mk_record(2, "CB", 1.0, PlayType::Pass),
        ];
        let runs = filter_run_plays(&records);
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].tackler_id, 1);
    }
}
