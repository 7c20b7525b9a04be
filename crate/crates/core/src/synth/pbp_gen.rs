//! Play-by-play corpus with a known next-score process.
//!
//! Next-score outcomes come from a fixed multinomial-logistic model over the
//! game state, so the exact outcome probabilities - and from them the
//! Bayes-optimal expected points of any state - are available in closed
//! form. The touchdown logit has the strictly smallest slope in yardline,
//! down, and distance, so p(+7) is maximal at 1st-and-goal from the 1 by
//! construction.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ep::{EpTrainRow, GameState, ScoreDistribution, OUTCOME_POINTS};
use crate::error::Result;
use crate::io::write_atomic;
use crate::rng::stream_rng;

pub const PBP_HEADER: &str = "season,gameId,driveId,down,yardsToGo,yardline,quarter,scoreDifferential,home,timeoutsOff,timeoutsDef,nextScore";

/// Logit coefficient rows, one per outcome in [`OUTCOME_POINTS`] order
/// (-7, -3, -2, 0, 2, 3, 7). Columns multiply the feature vector
/// `[1, yardline/100, down-1, min(ytg,20)/10, diff/21, home, to_off/3, to_def/3]`.
pub const GENERATOR_LOGITS: [[f64; 8]; 7] = [
    // -7: opponent touchdown, likeliest deep in own territory
    [-0.15, 1.60, 0.25, 0.20, -0.10, -0.03, -0.05, 0.08],
    // -3: opponent field goal
    [-0.55, 1.10, 0.20, 0.15, -0.08, -0.02, -0.03, 0.05],
    // -2: opponent safety (rare)
    [-3.00, 0.30, 0.05, 0.05, 0.00, 0.00, 0.00, 0.00],
    //  0: no further score
    [-0.40, 0.60, 0.15, 0.10, -0.05, 0.00, 0.00, 0.05],
    //  2: safety (rare)
    [-2.60, -0.40, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    //  3: field goal
    [0.80, -1.20, -0.05, -0.15, 0.05, 0.02, 0.05, 0.00],
    //  7: touchdown - strictly smallest slope in yardline/down/distance
    [1.40, -3.00, -0.30, -0.45, 0.10, 0.05, 0.10, -0.05],
];

fn generator_features(state: &GameState) -> [f64; 8] {
    [
        1.0,
        state.yardline / 100.0,
        f64::from(state.down) - 1.0,
        state.yards_to_go.min(20.0) / 10.0,
        f64::from(state.score_differential.clamp(-21, 21)) / 21.0,
        f64::from(u8::from(state.home_possession)),
        f64::from(state.timeouts_off) / 3.0,
        f64::from(state.timeouts_def) / 3.0,
    ]
}

/// Exact outcome probabilities of the generating process at `state`.
pub fn true_distribution(state: &GameState) -> ScoreDistribution {
    let phi = generator_features(state);
    let mut logits = [0.0; 7];
    for (k, row) in GENERATOR_LOGITS.iter().enumerate() {
        logits[k] = row.iter().zip(&phi).map(|(c, f)| c * f).sum();
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = [0.0; 7];
    let mut sum = 0.0;
    for k in 0..7 {
        probs[k] = (logits[k] - max).exp();
        sum += probs[k];
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    ScoreDistribution { probs }
}

/// Bayes-optimal expected points of the generating process.
pub fn bayes_ep(state: &GameState) -> f64 {
    true_distribution(state).expected_points()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PbpGenConfig {
    pub n_seasons: u16,
    pub games_per_season: usize,
    pub plays_per_game: usize,
    pub first_season: u16,
}

impl Default for PbpGenConfig {
    fn default() -> Self {
        Self {
            n_seasons: 4,
            games_per_season: 16,
            plays_per_game: 120,
            first_season: 2018,
        }
    }
}

/// Sample a plausible game state from the row's RNG stream.
fn sample_state(rng: &mut rand_chacha::ChaCha8Rng) -> GameState {
    let yardline = f64::from(rng.random_range(1..=99i32));
    let down: u8 = match rng.random_range(0..20) {
        0..=8 => 1,
        9..=13 => 2,
        14..=17 => 3,
        _ => 4,
    };
    let ytg_base = f64::from(rng.random_range(1..=15i32));
    GameState {
        yardline,
        yards_to_go: ytg_base.min(yardline),
        down,
        quarter: rng.random_range(1..=5),
        score_differential: rng.random_range(-21..=21),
        home_possession: rng.random::<bool>(),
        timeouts_off: rng.random_range(0..=3),
        timeouts_def: rng.random_range(0..=3),
    }
}

fn sample_outcome(probs: &[f64; 7], u: f64) -> i8 {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return OUTCOME_POINTS[k] as i8;
        }
    }
    OUTCOME_POINTS[6] as i8
}

/// Generate the corpus rows. Deterministic per `(config, seed)`.
pub fn generate_pbp_corpus(config: &PbpGenConfig, seed: u64) -> Vec<EpTrainRow> {
    let mut rows = Vec::new();
    for s in 0..config.n_seasons {
        let season = config.first_season + s;
        for g in 0..config.games_per_season {
            let game_id = u64::from(season) * 1_000 + g as u64;
            for p in 0..config.plays_per_game {
                let uid = game_id * 1_000 + p as u64;
                let mut rng = stream_rng(seed ^ 0x7062_7067, uid);
                let state = sample_state(&mut rng);
                let probs = true_distribution(&state).probs;
                let next_score = sample_outcome(&probs, rng.random());
                rows.push(EpTrainRow {
                    season,
                    game_id,
                    drive_id: game_id * 100 + (p / 6) as u64,
                    state,
                    next_score,
                });
            }
        }
    }
    rows
}

/// Render rows in the documented play-by-play file format.
pub fn pbp_to_csv(rows: &[EpTrainRow]) -> String {
    let mut out = String::from(PBP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.season,
            r.game_id,
            r.drive_id,
            r.state.down,
            r.state.yards_to_go,
            r.state.yardline,
            r.state.quarter,
            r.state.score_differential,
            u8::from(r.state.home_possession),
            r.state.timeouts_off,
            r.state.timeouts_def,
            r.next_score,
        );
    }
    out
}

pub fn write_pbp_csv(path: &Path, rows: &[EpTrainRow]) -> Result<()> {
    write_atomic(path, pbp_to_csv(rows).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(yardline: f64, down: u8, ytg: f64) -> GameState {
        GameState {
            yardline,
            yards_to_go: ytg,
            down,
            quarter: 2,
            score_differential: 0,
            home_possession: true,
            timeouts_off: 3,
            timeouts_def: 3,
        }
    }

    #[test]
    fn touchdown_probability_peaks_at_first_and_goal_from_the_one() {
        let best = true_distribution(&state(1.0, 1, 1.0)).probs[6];
        for yl in [1.0, 5.0, 20.0, 50.0, 80.0, 99.0] {
            for down in 1..=4 {
                for ytg in [1.0, 5.0, 10.0] {
                    if ytg > yl {
                        continue;
                    }
                    let p = true_distribution(&state(yl, down, ytg)).probs[6];
                    assert!(p <= best + 1e-12, "p7 at ({yl},{down},{ytg}) = {p} > {best}");
                }
            }
        }
    }

    #[test]
    fn distributions_are_simplexes_and_ep_finite() {
        for yl in 1..=99 {
            let d = true_distribution(&state(yl as f64, 2, 8.0));
            assert!(d.is_valid(1e-12));
            assert!(d.expected_points().is_finite());
        }
    }

    #[test]
    fn frequencies_converge_to_probabilities() {
        // law of large numbers at one fixed state
        let s = state(35.0, 2, 7.0);
        let probs = true_distribution(&s).probs;
        let mut counts = [0usize; 7];
        let mut rng = stream_rng(5, 0);
        let n = 10_000;
        for _ in 0..n {
            let y = sample_outcome(&probs, rng.random());
            let idx = crate::ep::outcome_index(y).unwrap();
            counts[idx] += 1;
        }
        for k in 0..7 {
            let freq = counts[k] as f64 / n as f64;
            assert!(
                (freq - probs[k]).abs() < 0.02,
                "outcome {k}: freq {freq} vs p {}",
                probs[k]
            );
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let cfg = PbpGenConfig {
            n_seasons: 2,
            games_per_season: 2,
            plays_per_game: 30,
            first_season: 2020,
        };
        let a = pbp_to_csv(&generate_pbp_corpus(&cfg, 9));
        let b = pbp_to_csv(&generate_pbp_corpus(&cfg, 9));
        assert_eq!(a, b);
    }
}
