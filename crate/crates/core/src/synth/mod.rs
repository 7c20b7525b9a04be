//! Ground-truth corpus generators for desk-scale validation.
//!
//! The tracking generator scripts whole plays and re-simulates each one
//! without its tackler, so the counterfactual outcome is known exactly; the
//! play-by-play generator draws next scores from a fixed multinomial
//! logistic process whose Bayes-optimal expected points are computable in
//! closed form.

mod pbp_gen;
mod tracking_gen;

pub use pbp_gen::{
    bayes_ep, generate_pbp_corpus, pbp_to_csv, true_distribution, write_pbp_csv, PbpGenConfig,
    GENERATOR_LOGITS, PBP_HEADER,
};
pub use tracking_gen::{
    defense_id, generate_tracking_corpus, offense_id, team_name, PlayOracle, Scenario,
    TrackingCorpus, TrackingGenConfig, DEFENSE_POSITIONS, OFFENSE_POSITIONS,
};
