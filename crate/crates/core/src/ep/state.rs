//! Game states, score distributions, and the yardage-to-expected-points map.

use serde::{Deserialize, Serialize};

/// Point values of the seven next-score outcomes, ascending. Index into
/// [`ScoreDistribution::probs`] follows this order.
pub const OUTCOME_POINTS: [f64; 7] = [-7.0, -3.0, -2.0, 0.0, 2.0, 3.0, 7.0];

pub const N_OUTCOMES: usize = 7;

/// Class index of a next-score point value.
pub fn outcome_index(points: i8) -> Option<usize> {
    match points {
        -7 => Some(0),
        -3 => Some(1),
        -2 => Some(2),
        0 => Some(3),
        2 => Some(4),
        3 => Some(5),
        7 => Some(6),
        _ => None,
    }
}

/// Covariates of the expected-points model, from the possessing team's
/// perspective. Clock features are deliberately absent: a predicted
/// end-of-play yard line carries no information about elapsed time, so the
/// model may not use any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    /// Yards to the opponent goal line.
    pub yardline: f64,
    pub yards_to_go: f64,
    pub down: u8,
    /// 1..=5, overtime included as 5.
    pub quarter: u8,
    /// Possessing team's score minus opponent's.
    pub score_differential: i32,
    pub home_possession: bool,
    pub timeouts_off: u8,
    pub timeouts_def: u8,
}

pub const STATE_FEATURE_NAMES: [&str; 8] = [
    "yardline",
    "yards_to_go",
    "down",
    "quarter",
    "score_differential",
    "home_possession",
    "timeouts_off",
    "timeouts_def",
];

impl GameState {
    pub fn features(&self) -> [f64; 8] {
        [
            self.yardline,
            self.yards_to_go,
            f64::from(self.down),
            f64::from(self.quarter),
            f64::from(self.score_differential),
            f64::from(u8::from(self.home_possession)),
            f64::from(self.timeouts_off),
            f64::from(self.timeouts_def),
        ]
    }
}

/// Probabilities over the seven next-score outcomes, in
/// [`OUTCOME_POINTS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub probs: [f64; N_OUTCOMES],
}

impl ScoreDistribution {
    pub fn uniform() -> Self {
        Self {
            probs: [1.0 / 7.0; 7],
        }
    }

    /// Simplex check with tolerance `tol` on the total mass.
    pub fn is_valid(&self, tol: f64) -> bool {
        let sum: f64 = self.probs.iter().sum();
        self.probs.iter().all(|&p| (0.0..=1.0).contains(&p)) && (sum - 1.0).abs() <= tol
    }

    /// E[Y] = sum of y * p_y over the seven outcomes. The outcome set is
    /// symmetric, so the sum is grouped as y * (p_y - p_{-y}); symmetric
    /// distributions therefore come out exactly zero.
    pub fn expected_points(&self) -> f64 {
        let p = &self.probs;
        7.0 * (p[6] - p[0]) + 3.0 * (p[5] - p[1]) + 2.0 * (p[4] - p[2])
    }
}

/// Anything that maps a game state to a next-score distribution.
pub trait ScorePredictor {
    fn predict_distribution(&self, state: &GameState) -> ScoreDistribution;
}

/// Snap context of the play being valued: everything needed to turn an
/// end-of-play yard line into the successor game state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameContext {
    /// Line of scrimmage, canonical yards to the opponent goal.
    pub adjusted_los: f64,
    pub yards_to_go: f64,
    pub down: u8,
    pub quarter: u8,
    pub score_differential: i32,
    pub home_possession: bool,
    pub timeouts_off: u8,
    pub timeouts_def: u8,
}

/// Result of resolving an end-of-play yard line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlayResolution {
    /// The play itself scored: +7 (touchdown) or -2 (safety) for the offense.
    Terminal(f64),
    /// Play ends in a new snap. When `flipped`, the state is from the new
    /// possessing team's perspective and its EP must be negated.
    Snap { state: GameState, flipped: bool },
}

/// Map an end-of-play yard line (canonical, yards to the opponent goal) to
/// the successor state under the down-and-distance rules:
/// reaching the end zone is a touchdown, being pushed behind the own end
/// line a safety, making the line to gain a fresh first down, failing it on
/// fourth down a turnover with the field mirrored.
pub fn derive_next_state(eopy: f64, ctx: &GameContext) -> PlayResolution {
    if eopy <= 0.0 {
        return PlayResolution::Terminal(7.0);
    }
    if eopy >= 100.0 {
        return PlayResolution::Terminal(-2.0);
    }
    let gained = ctx.adjusted_los - eopy;
    if gained >= ctx.yards_to_go {
        PlayResolution::Snap {
            state: GameState {
                yardline: eopy,
                yards_to_go: 10.0f64.min(eopy),
                down: 1,
                quarter: ctx.quarter,
                score_differential: ctx.score_differential,
                home_possession: ctx.home_possession,
                timeouts_off: ctx.timeouts_off,
                timeouts_def: ctx.timeouts_def,
            },
            flipped: false,
        }
    } else if ctx.down < 4 {
        PlayResolution::Snap {
            state: GameState {
                yardline: eopy,
                yards_to_go: ctx.yards_to_go - gained,
                down: ctx.down + 1,
                quarter: ctx.quarter,
                score_differential: ctx.score_differential,
                home_possession: ctx.home_possession,
                timeouts_off: ctx.timeouts_off,
                timeouts_def: ctx.timeouts_def,
            },
            flipped: false,
        }
    } else {
        // Turnover on downs: mirror the field and swap perspectives.
        let yardline = 100.0 - eopy;
        PlayResolution::Snap {
            state: GameState {
                yardline,
                yards_to_go: 10.0f64.min(yardline),
                down: 1,
                quarter: ctx.quarter,
                score_differential: -ctx.score_differential,
                home_possession: !ctx.home_possession,
                timeouts_off: ctx.timeouts_def,
                timeouts_def: ctx.timeouts_off,
            },
            flipped: true,
        }
    }
}

/// Expected points of an end-of-play yard line: terminal outcomes score
/// directly, anything else goes through the classifier on the successor
/// state (negated on possession flips).
pub fn g<P: ScorePredictor>(eopy: f64, ctx: &GameContext, predictor: &P) -> f64 {
    match derive_next_state(eopy, ctx) {
        PlayResolution::Terminal(points) => points,
        PlayResolution::Snap { state, flipped } => {
            let ep = predictor.predict_distribution(&state).expected_points();
            if flipped {
                -ep
            } else {
                ep
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub struct UniformStub;
    impl ScorePredictor for UniformStub {
        fn predict_distribution(&self, _state: &GameState) -> ScoreDistribution {
            ScoreDistribution::uniform()
        }
    }

    fn ctx(down: u8, ytg: f64, los: f64) -> GameContext {
        GameContext {
            adjusted_los: los,
            yards_to_go: ytg,
            down,
            quarter: 2,
            score_differential: 3,
            home_possession: true,
            timeouts_off: 3,
            timeouts_def: 2,
        }
    }

    #[test]
    fn expected_points_of_uniform_is_exactly_zero() {
        assert_eq!(ScoreDistribution::uniform().expected_points(), 0.0);
    }

    #[test]
    fn expected_points_point_mass_and_mixture() {
        let mut d = ScoreDistribution { probs: [0.0; 7] };
        d.probs[6] = 1.0;
        assert_eq!(d.expected_points(), 7.0);
        let mut m = ScoreDistribution { probs: [0.0; 7] };
        m.probs[6] = 0.6;
        m.probs[1] = 0.4;
        assert!((m.expected_points() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn first_down_rule() {
        // 1st-and-10 at the 50, gain of 12 -> 1st-and-10 at the 38.
        match derive_next_state(38.0, &ctx(1, 10.0, 50.0)) {
            PlayResolution::Snap { state, flipped } => {
                assert!(!flipped);
                assert_eq!(state.down, 1);
                assert_eq!(state.yardline, 38.0);
                assert_eq!(state.yards_to_go, 10.0);
            }
            _ => panic!("expected a snap"),
        }
    }

    #[test]
    fn touchdown_and_safety_are_terminal() {
        assert_eq!(
            derive_next_state(0.0, &ctx(1, 10.0, 20.0)),
            PlayResolution::Terminal(7.0)
        );
        assert_eq!(
            derive_next_state(-3.5, &ctx(1, 10.0, 20.0)),
            PlayResolution::Terminal(7.0)
        );
        assert_eq!(
            derive_next_state(100.0, &ctx(2, 10.0, 95.0)),
            PlayResolution::Terminal(-2.0)
        );
    }

    #[test]
    fn fourth_down_stop_mirrors_state() {
        // 4th-and-5 at the 40, gain of 2 -> opponent ball at its own 62?
        // eopy = 38, mirrored yardline = 100 - 38 = 62.
        match derive_next_state(38.0, &ctx(4, 5.0, 40.0)) {
            PlayResolution::Snap { state, flipped } => {
                assert!(flipped);
                assert_eq!(state.yardline, 62.0);
                assert_eq!(state.down, 1);
                assert_eq!(state.yards_to_go, 10.0);
                assert_eq!(state.score_differential, -3);
                assert!(!state.home_possession);
                assert_eq!(state.timeouts_off, 2);
                assert_eq!(state.timeouts_def, 3);
            }
            _ => panic!("expected a snap"),
        }
    }

    #[test]
    fn goal_to_go_distance() {
        match derive_next_state(4.0, &ctx(1, 10.0, 18.0)) {
            PlayResolution::Snap { state, .. } => {
                assert_eq!(state.yards_to_go, 4.0);
                assert_eq!(state.down, 1);
            }
            _ => panic!("expected a snap"),
        }
    }

    #[test]
    fn g_uniform_stub_gives_zero_for_non_terminal() {
        assert_eq!(g(42.0, &ctx(2, 7.0, 50.0), &UniformStub), 0.0);
        assert_eq!(g(-1.0, &ctx(2, 7.0, 50.0), &UniformStub), 7.0);
    }
}
