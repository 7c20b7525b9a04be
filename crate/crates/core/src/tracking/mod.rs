//! Tracking-data ingest: parsing, canonical coordinates, and per-frame
//! feature engineering.

pub mod canonical;
mod features;
mod parse;
mod types;

pub use canonical::PlayDirection;
pub use features::{
    build_dataset, engineer_features, filter_tackle_plays, identify_tackle_frame,
    play_feature_rows, possession_start, pursuit_angle, FeatureConfig, PlayRows,
    POSSESSION_EVENTS,
};
pub use parse::{
    load_players, parse_tracking, ParseReport, TrackingData, BALL_CLUB, PLAYERS_HEADER,
    PLAYS_HEADER, TACKLES_HEADER, TRACKING_HEADER,
};
pub use types::{
    EntityState, FrameSnapshot, PlayFrames, PlayKey, PlayMeta, PlayType, PlayerInfo, Side,
    FIELD_HALF_WIDTH,
};
