//! Per-frame feature engineering around the ball carrier.
//!
//! Players are ranked by Euclidean distance to the carrier, per frame, ties
//! broken by ascending entity id. The feature vector holds the carrier's
//! kinematics plus the blocks of the K nearest defenders and K nearest
//! offensive players; defenders additionally carry the pursuit angle (the
//! absolute difference between their direction and the bearing of the
//! shortest segment to the carrier).

use serde::{Deserialize, Serialize};

use super::canonical::{angle_difference, angle_of_heading};
use super::parse::TrackingData;
use super::types::{EntityState, FrameSnapshot, PlayFrames, PlayKey, PlayMeta, Side};
use crate::dataset::FeatureDataset;
use crate::error::{Error, Result};

/// Events that mark the ball carrier taking possession. Frames before the
/// first such event do not describe the carrier's path and are skipped.
pub const POSSESSION_EVENTS: [&str; 3] = ["handoff", "run", "pass_outcome_caught"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Ranked players per side entering the feature vector.
    pub k_per_side: usize,
    /// Keep every `frame_stride`-th carrier frame when building the
    /// training set (1 = all frames). The tackle frame is always kept.
    pub frame_stride: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k_per_side: 5,
            frame_stride: 1,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        // 10 non-carrier offensive players; one defender may be removed in
        // the counterfactual, leaving 10.
        if self.k_per_side == 0 || self.k_per_side > 10 {
            return Err(Error::data(format!(
                "k_per_side must be in 1..=10, got {}",
                self.k_per_side
            )));
        }
        if self.frame_stride == 0 {
            return Err(Error::data("frame_stride must be at least 1"));
        }
        Ok(())
    }

    /// Feature names, fixing the layout of every engineered row.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for f in ["x", "y", "speed", "accel", "dist", "orient", "dir"] {
            names.push(format!("carrier_{f}"));
        }
        for k in 1..=self.k_per_side {
            for f in [
                "x", "y", "speed", "accel", "dist", "orient", "dir", "euclid", "xdist", "ydist",
                "pursuit",
            ] {
                names.push(format!("def{k}_{f}"));
            }
        }
        for k in 1..=self.k_per_side {
            for f in [
                "x", "y", "speed", "accel", "dist", "orient", "dir", "euclid", "xdist", "ydist",
            ] {
                names.push(format!("off{k}_{f}"));
            }
        }
        names
    }

    pub fn n_features(&self) -> usize {
        7 + self.k_per_side * 11 + self.k_per_side * 10
    }
}

fn euclid(a: &EntityState, b: &EntityState) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Rank one side's players by distance to the carrier, ties by entity id.
fn ranked<'a>(
    frame: &'a FrameSnapshot,
    carrier: &EntityState,
    side: Side,
    exclude: Option<u64>,
) -> Vec<&'a EntityState> {
    let mut players: Vec<&EntityState> = frame
        .entities
        .iter()
        .filter(|e| {
            e.side == side
                && e.entity_id.is_some()
                && e.entity_id != carrier.entity_id
                && exclude.map_or(true, |ex| e.entity_id != Some(ex))
        })
        .collect();
    players.sort_by(|a, b| {
        euclid(a, carrier)
            .total_cmp(&euclid(b, carrier))
            .then(a.entity_id.cmp(&b.entity_id))
    });
    players
}

/// Engineer the raw (unstandardized) feature row for one frame.
///
/// `exclude_defender` removes that defender before ranking - the
/// counterfactual scenario. Ranks below the removed player shift up by one
/// and the K-th slot is filled by the next-nearest defender.
pub fn engineer_features(
    frame: &FrameSnapshot,
    carrier_id: u64,
    config: &FeatureConfig,
    exclude_defender: Option<u64>,
) -> Result<Vec<f64>> {
    let carrier = frame
        .entity(carrier_id)
        .ok_or_else(|| Error::data(format!("ball carrier {carrier_id} absent from frame")))?;
    let defenders = ranked(frame, carrier, Side::Defense, exclude_defender);
    let offense = ranked(frame, carrier, Side::Offense, None);
    let k = config.k_per_side;
    if defenders.len() < k {
        return Err(Error::data(format!(
            "only {} defenders available, need {k}",
            defenders.len()
        )));
    }
    if offense.len() < k {
        return Err(Error::data(format!(
            "only {} offensive players available, need {k}",
            offense.len()
        )));
    }

    let mut row = Vec::with_capacity(config.n_features());
    push_kinematics(&mut row, carrier);
    for d in defenders.iter().take(k) {
        push_kinematics(&mut row, d);
        push_relative(&mut row, d, carrier);
        row.push(pursuit_angle(d, carrier));
    }
    for o in offense.iter().take(k) {
        push_kinematics(&mut row, o);
        push_relative(&mut row, o, carrier);
    }
    Ok(row)
}

fn push_kinematics(row: &mut Vec<f64>, e: &EntityState) {
    row.extend_from_slice(&[e.x, e.y, e.speed, e.accel, e.dist, e.orientation, e.direction]);
}

fn push_relative(row: &mut Vec<f64>, e: &EntityState, carrier: &EntityState) {
    row.push(euclid(e, carrier));
    row.push(e.x - carrier.x);
    row.push(e.y - carrier.y);
}

/// Absolute difference (degrees in [0, 180]) between the defender's
/// direction and the bearing of the segment defender -> carrier.
pub fn pursuit_angle(defender: &EntityState, carrier: &EntityState) -> f64 {
    let bearing = angle_of_heading(carrier.x - defender.x, carrier.y - defender.y);
    angle_difference(defender.direction, bearing)
}

/// Frame where the tackler is closest to the carrier (earliest on ties).
pub fn identify_tackle_frame(frames: &PlayFrames, carrier_id: u64, tackler_id: u64) -> Result<u32> {
    let mut best: Option<(f64, u32)> = None;
    for frame in &frames.frames {
        let (Some(t), Some(c)) = (frame.entity(tackler_id), frame.entity(carrier_id)) else {
            continue;
        };
        let d = euclid(t, c);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, frame.frame_id));
        }
    }
    best.map(|(_, f)| f)
        .ok_or_else(|| Error::data(format!("tackler {tackler_id} never on the field")))
}

/// First frame at or after which the carrier has possession.
pub fn possession_start(frames: &PlayFrames) -> Option<u32> {
    frames
        .frames
        .iter()
        .find(|f| POSSESSION_EVENTS.contains(&f.event.as_str()))
        .map(|f| f.frame_id)
}

/// Keep only penalty-free plays that contain a tackle.
pub fn filter_tackle_plays(plays: &[PlayMeta]) -> Vec<&PlayMeta> {
    plays
        .iter()
        .filter(|p| !p.penalty_flag && p.tackler_id.is_some())
        .collect()
}

/// Response and per-frame training rows for one play: for each kept carrier
/// frame, yards still to be gained = carrier x now minus carrier x at the
/// play's final frame.
pub struct PlayRows {
    pub key: PlayKey,
    /// (frame id, raw feature row, response).
    pub rows: Vec<(u32, Vec<f64>, f64)>,
}

pub fn play_feature_rows(
    key: PlayKey,
    meta: &PlayMeta,
    frames: &PlayFrames,
    config: &FeatureConfig,
) -> Result<PlayRows> {
    let start = possession_start(frames)
        .ok_or_else(|| Error::data("no possession event in play"))?;
    let last = frames
        .last()
        .ok_or_else(|| Error::data("play has no frames"))?;
    let final_x = last
        .entity(meta.ball_carrier_id)
        .ok_or_else(|| Error::data("carrier absent from final frame"))?
        .x;

    let mut rows = Vec::new();
    let mut kept = 0usize;
    for (i, frame) in frames.frames.iter().enumerate() {
        if frame.frame_id < start {
            continue;
        }
        let Some(carrier) = frame.entity(meta.ball_carrier_id) else {
            // Carrier off the data for this frame: excluded from training.
            continue;
        };
        let is_last = i == frames.frames.len() - 1;
        if kept % config.frame_stride != 0 && !is_last {
            kept += 1;
            continue;
        }
        kept += 1;
        let row = engineer_features(frame, meta.ball_carrier_id, config, None)?;
        rows.push((frame.frame_id, row, carrier.x - final_x));
    }
    Ok(PlayRows { key, rows })
}

/// Build the forest training dataset over all penalty-free, valid plays.
pub fn build_dataset(data: &TrackingData, config: &FeatureConfig) -> Result<FeatureDataset> {
    config.validate()?;
    let mut dataset = FeatureDataset::new(config.feature_names());
    for (key, meta) in &data.plays {
        if meta.penalty_flag {
            continue;
        }
        let frames = data
            .frames
            .get(key)
            .ok_or_else(|| Error::data("play without frames"))?;
        let rows = play_feature_rows(*key, meta, frames, config)?;
        for (frame_id, row, response) in rows.rows {
            dataset.push_row(key.uid(), frame_id, meta.week, &row, response);
        }
    }
    if dataset.n_rows() == 0 {
        return Err(Error::data("no training rows survive filtering"));
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: u64, side: Side, x: f64, y: f64, dir: f64) -> EntityState {
        EntityState {
            entity_id: Some(id),
            side,
            x,
            y,
            speed: 5.0,
            accel: 0.5,
            dist: 0.5,
            orientation: dir,
            direction: dir,
        }
    }

    /// 11 offense (carrier id 1), 11 defense, ball.
    fn full_frame(frame_id: u32, carrier_xy: (f64, f64), tweak: impl Fn(&mut Vec<EntityState>)) -> FrameSnapshot {
        let mut entities = Vec::new();
        entities.push(entity(1, Side::Offense, carrier_xy.0, carrier_xy.1, 0.0));
        for i in 0..10 {
            entities.push(entity(
                10 + i,
                Side::Offense,
                carrier_xy.0 + 3.0 + i as f64,
                carrier_xy.1 + 2.0,
                0.0,
            ));
        }
        for i in 0..11 {
            entities.push(entity(
                100 + i,
                Side::Defense,
                carrier_xy.0 - 4.0 - i as f64,
                carrier_xy.1 - 1.0,
                180.0,
            ));
        }
        entities.push(EntityState {
            entity_id: None,
            side: Side::Ball,
            x: carrier_xy.0,
            y: carrier_xy.1,
            speed: 0.0,
            accel: 0.0,
            dist: 0.0,
            orientation: 0.0,
            direction: 0.0,
        });
        let mut f = FrameSnapshot {
            frame_id,
            event: String::new(),
            entities,
        };
        tweak(&mut f.entities);
        f
    }

    #[test]
    fn three_four_five_triangle() {
        let frame = full_frame(1, (50.0, 0.0), |ents| {
            // defender 100 at exactly (+3, +4) from the carrier
            let d = ents.iter_mut().find(|e| e.entity_id == Some(100)).unwrap();
            d.x = 53.0;
            d.y = 4.0;
        });
        let cfg = FeatureConfig {
            k_per_side: 1,
            frame_stride: 1,
        };
        let row = engineer_features(&frame, 1, &cfg, None).unwrap();
        let names = cfg.feature_names();
        let idx = |n: &str| names.iter().position(|x| x == n).unwrap();
        assert_eq!(row[idx("def1_euclid")], 5.0);
        assert_eq!(row[idx("def1_xdist")], 3.0);
        assert_eq!(row[idx("def1_ydist")], 4.0);
    }

    #[test]
    fn head_on_pursuit_angle_is_zero() {
        let carrier = entity(1, Side::Offense, 50.0, 0.0, 0.0);
        // Defender 5 yards closer to the goal, running straight at the
        // carrier (heading +x canonical = 180 degrees).
        let defender = entity(2, Side::Defense, 45.0, 0.0, 180.0);
        assert!(pursuit_angle(&defender, &carrier) < 1e-9);
    }

    #[test]
    fn ranks_sorted_by_distance_with_id_ties() {
        let frame = full_frame(1, (50.0, 0.0), |ents| {
            // two defenders at identical distance: ids 105 and 103
            for id in [105, 103] {
                let d = ents.iter_mut().find(|e| e.entity_id == Some(id)).unwrap();
                d.x = 49.0;
                d.y = 0.0;
            }
        });
        let cfg = FeatureConfig {
            k_per_side: 3,
            frame_stride: 1,
        };
        let row = engineer_features(&frame, 1, &cfg, None).unwrap();
        let names = cfg.feature_names();
        let idx = |n: &str| names.iter().position(|x| x == n).unwrap();
        // both tied defenders are 1.0 away; id 103 must come first
        assert_eq!(row[idx("def1_euclid")], 1.0);
        assert_eq!(row[idx("def2_euclid")], 1.0);
        assert_eq!(row[idx("def1_x")], 49.0);
        // euclid nondecreasing in rank
        assert!(row[idx("def1_euclid")] <= row[idx("def2_euclid")]);
        assert!(row[idx("def2_euclid")] <= row[idx("def3_euclid")]);
    }

    #[test]
    fn removal_shifts_ranks_and_matches_physical_deletion() {
        let frame = full_frame(7, (60.0, 3.0), |_| {});
        let cfg = FeatureConfig {
            k_per_side: 4,
            frame_stride: 1,
        };
        // rank-1 defender is id 100 (closest by construction)
        let removed = engineer_features(&frame, 1, &cfg, Some(100)).unwrap();

        // physical deletion oracle
        let mut deleted = frame.clone();
        deleted.entities.retain(|e| e.entity_id != Some(100));
        let oracle = engineer_features(&deleted, 1, &cfg, None).unwrap();
        assert_eq!(removed, oracle);

        // removing a defender far beyond rank K leaves the vector unchanged
        let untouched = engineer_features(&frame, 1, &cfg, Some(110)).unwrap();
        let base = engineer_features(&frame, 1, &cfg, None).unwrap();
        assert_eq!(untouched, base);
    }

    #[test]
    fn tackle_frame_minimum_and_tie_rule() {
        // distances 8, 3, 5 -> frame 2; tie 3 at frames 2 and 4 -> frame 2
        let mk = |fid: u32, dx: f64| {
            full_frame(fid, (50.0, 0.0), |ents| {
                let d = ents.iter_mut().find(|e| e.entity_id == Some(100)).unwrap();
                d.x = 50.0 - dx;
                d.y = 0.0;
            })
        };
        let frames = PlayFrames {
            frames: vec![mk(1, 8.0), mk(2, 3.0), mk(3, 5.0), mk(4, 3.0)],
        };
        assert_eq!(identify_tackle_frame(&frames, 1, 100).unwrap(), 2);
        assert!(identify_tackle_frame(&frames, 1, 999).is_err());
    }
}
