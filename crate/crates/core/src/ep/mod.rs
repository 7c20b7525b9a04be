//! Expected points: the seven-outcome next-score model and the mapping
//! from an end-of-play yard line to points.

mod boost;
mod pbp;
mod serialize;
mod state;
mod train;

pub use boost::{BoostConfig, BoostTree, BoostedClassifier};
pub use pbp::load_pbp_csv;
pub use state::{
    derive_next_state, g, outcome_index, GameContext, GameState, PlayResolution,
    ScoreDistribution, ScorePredictor, N_OUTCOMES, OUTCOME_POINTS, STATE_FEATURE_NAMES,
};
pub use train::{
    best_constant_mae, evaluate_ep, fit_ep_classifier, EpConfig, EpModel, EpTrainRow, GridPoint,
    WeightScheme,
};
