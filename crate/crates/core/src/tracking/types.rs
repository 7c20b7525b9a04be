//! Canonical tracking and play types.
//!
//! Coordinates are canonical everywhere past the parser: `x` is the distance
//! to the opponent's goal line (0 at the goal line, play advances toward 0),
//! `y` is centered on the field midline (half-width 26.65), and direction 0
//! means heading straight at the opponent end zone.

use serde::{Deserialize, Serialize};

/// Field half-width in yards (53.3 / 2).
pub const FIELD_HALF_WIDTH: f64 = 26.65;

/// Which unit an entity belongs to on this play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Offense,
    Defense,
    Ball,
}

/// One entity (player or ball) at one frame, canonical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntityState {
    /// `None` marks the ball.
    pub entity_id: Option<u64>,
    pub side: Side,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: f64,
    /// Yards traveled since the previous frame.
    pub dist: f64,
    pub orientation: f64,
    pub direction: f64,
}

/// All entities of one play at one frame, plus the frame's event tag.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot {
    pub frame_id: u32,
    pub event: String,
    pub entities: Vec<EntityState>,
}

impl FrameSnapshot {
    pub fn entity(&self, id: u64) -> Option<&EntityState> {
        self.entities
            .iter()
            .find(|e| e.entity_id == Some(id))
    }
}

/// The frames of one play, ascending by frame id.
#[derive(Debug, Clone, Default)]
pub struct PlayFrames {
    pub frames: Vec<FrameSnapshot>,
}

impl PlayFrames {
    pub fn frame(&self, frame_id: u32) -> Option<&FrameSnapshot> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn last(&self) -> Option<&FrameSnapshot> {
        self.frames.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayType {
    Run,
    Pass,
}

impl PlayType {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlayType::Run => "run",
            PlayType::Pass => "pass",
        }
    }
}

/// Composite play key: plays are unique per (game, play) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlayKey {
    pub game_id: u64,
    pub play_id: u64,
}

impl PlayKey {
    /// Single-integer form used where a scalar play id is needed (feature
    /// files, dataset bookkeeping). Requires play ids below 1e6, which the
    /// parser enforces.
    pub fn uid(&self) -> u64 {
        self.game_id * 1_000_000 + self.play_id
    }
}

/// Per-play metadata after validation, canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayMeta {
    pub key: PlayKey,
    pub week: u8,
    pub drive_id: u64,
    pub down: u8,
    pub yards_to_go: f64,
    /// Line of scrimmage, canonical yards to the opponent goal.
    pub adjusted_los: f64,
    pub quarter: u8,
    /// Possession team score minus opponent score at the snap.
    pub score_differential: i32,
    pub home_possession: bool,
    pub timeouts_off: u8,
    pub timeouts_def: u8,
    pub ball_carrier_id: u64,
    pub tackler_id: Option<u64>,
    pub missed_tackler_ids: Vec<u64>,
    pub penalty_flag: bool,
    pub play_type: PlayType,
    /// "C", "I", "S" for pass plays, empty for runs.
    pub pass_result: String,
    pub turnover: bool,
    pub off_team_id: String,
    /// True end-of-play carrier position, canonical yards to opponent goal.
    pub end_of_play_x: f64,
}

/// Roster entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerInfo {
    pub entity_id: u64,
    pub position: String,
    pub name: String,
}
