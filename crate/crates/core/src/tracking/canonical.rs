//! Transforms between the source coordinate convention and the canonical
//! frame of reference.
//!
//! Source convention: `x` runs 0..120 along the field (goal lines at 10 and
//! 110), `y` runs 0..53.3, and angles are compass-style - 0 degrees points
//! at +y, 90 at +x, measured clockwise. Each play moves either `left`
//! (toward x = 0) or `right` (toward x = 120).
//!
//! Canonical convention: `x` is the distance to the opponent goal line, `y`
//! is zero at the field midline, and a direction of 0 degrees means heading
//! straight at the opponent end zone. Left-moving plays translate; right-
//! moving plays rotate by 180 degrees. Both maps preserve handedness, so a
//! play and its mirror land on identical canonical coordinates.

use crate::error::{Error, Result};
use crate::tracking::types::FIELD_HALF_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlayDirection {
    Left,
    Right,
}

impl PlayDirection {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(PlayDirection::Left),
            "right" => Ok(PlayDirection::Right),
            other => Err(Error::data(format!("unknown play direction {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PlayDirection::Left => "left",
            PlayDirection::Right => "right",
        }
    }
}

pub fn canonical_x(raw_x: f64, dir: PlayDirection) -> f64 {
    match dir {
        PlayDirection::Left => raw_x - 10.0,
        PlayDirection::Right => 110.0 - raw_x,
    }
}

pub fn canonical_y(raw_y: f64, dir: PlayDirection) -> f64 {
    match dir {
        PlayDirection::Left => raw_y - FIELD_HALF_WIDTH,
        PlayDirection::Right => FIELD_HALF_WIDTH - raw_y,
    }
}

/// Canonical angle of a raw compass angle (degrees).
pub fn canonical_angle(raw_deg: f64, dir: PlayDirection) -> f64 {
    let r = raw_deg.to_radians();
    // Raw heading vector (dx, dy) = (sin, cos); rotate for right-moving.
    let (dx, dy) = match dir {
        PlayDirection::Left => (r.sin(), r.cos()),
        PlayDirection::Right => (-r.sin(), -r.cos()),
    };
    angle_of_heading(dx, dy)
}

/// Canonical angle (degrees in [0, 360)) of a canonical heading vector;
/// 0 = straight at the opponent end zone (-x).
pub fn angle_of_heading(dx: f64, dy: f64) -> f64 {
    let deg = dy.atan2(-dx).to_degrees();
    wrap_degrees(deg)
}

/// Unit heading vector of a canonical angle.
pub fn heading_of_angle(canon_deg: f64) -> (f64, f64) {
    let r = canon_deg.to_radians();
    (-r.cos(), r.sin())
}

/// Inverse transforms, used by the corpus generator to emit raw files.
pub fn raw_x(canon_x: f64, dir: PlayDirection) -> f64 {
    match dir {
        PlayDirection::Left => canon_x + 10.0,
        PlayDirection::Right => 110.0 - canon_x,
    }
}

pub fn raw_y(canon_y: f64, dir: PlayDirection) -> f64 {
    match dir {
        PlayDirection::Left => canon_y + FIELD_HALF_WIDTH,
        PlayDirection::Right => FIELD_HALF_WIDTH - canon_y,
    }
}

pub fn raw_angle(canon_deg: f64, dir: PlayDirection) -> f64 {
    let (cdx, cdy) = heading_of_angle(canon_deg);
    let (dx, dy) = match dir {
        PlayDirection::Left => (cdx, cdy),
        PlayDirection::Right => (-cdx, -cdy),
    };
    wrap_degrees(dx.atan2(dy).to_degrees())
}

pub fn wrap_degrees(deg: f64) -> f64 {
    let mut d = deg % 360.0;
    if d < 0.0 {
        d += 360.0;
    }
    // -1e-16 % 360 wraps to 360.0 after the add; fold it back.
    if d >= 360.0 {
        d = 0.0;
    }
    d
}

/// Absolute angular difference folded into [0, 180].
pub fn angle_difference(a_deg: f64, b_deg: f64) -> f64 {
    let d = wrap_degrees(a_deg - b_deg);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}
