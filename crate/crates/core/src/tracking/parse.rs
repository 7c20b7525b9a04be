//! Ingest of the delimiter-separated tracking / plays / tackles / players
//! files into validated, canonical play data.
//!
//! Schema errors (wrong or reordered header) are fatal with file context;
//! individual plays that fail validation (bad entity counts, out-of-bounds
//! coordinates, missing fields) are dropped and logged.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::Deserialize;

use super::canonical::{canonical_angle, canonical_x, canonical_y, PlayDirection};
use super::types::{
    EntityState, FrameSnapshot, PlayFrames, PlayKey, PlayMeta, PlayType, PlayerInfo, Side,
    FIELD_HALF_WIDTH,
};
use crate::error::{Error, Result};

pub const TRACKING_HEADER: [&str; 14] = [
    "gameId",
    "playId",
    "nflId",
    "frameId",
    "playDirection",
    "x",
    "y",
    "s",
    "a",
    "dis",
    "o",
    "dir",
    "event",
    "club",
];

pub const PLAYS_HEADER: [&str; 20] = [
    "gameId",
    "playId",
    "week",
    "driveId",
    "quarter",
    "down",
    "yardsToGo",
    "absoluteYardlineNumber",
    "preSnapHomeScore",
    "preSnapVisitorScore",
    "homePossession",
    "timeoutsOff",
    "timeoutsDef",
    "possessionTeam",
    "ballCarrierId",
    "playType",
    "passResult",
    "penaltyFlag",
    "turnover",
    "playResult",
];

pub const TACKLES_HEADER: [&str; 5] = ["gameId", "playId", "nflId", "tackle", "pff_missedTackle"];

pub const PLAYERS_HEADER: [&str; 3] = ["nflId", "position", "displayName"];

/// Ball marker in the `club` column.
pub const BALL_CLUB: &str = "football";

#[derive(Debug, Deserialize)]
struct RawTrackingRow {
    #[serde(rename = "gameId")]
    game_id: u64,
    #[serde(rename = "playId")]
    play_id: u64,
    #[serde(rename = "nflId")]
    nfl_id: Option<u64>,
    #[serde(rename = "frameId")]
    frame_id: u32,
    #[serde(rename = "playDirection")]
    play_direction: String,
    x: f64,
    y: f64,
    s: f64,
    a: f64,
    dis: f64,
    o: f64,
    dir: f64,
    event: String,
    club: String,
}

#[derive(Debug, Deserialize)]
struct RawPlayRow {
    #[serde(rename = "gameId")]
    game_id: u64,
    #[serde(rename = "playId")]
    play_id: u64,
    week: u8,
    #[serde(rename = "driveId")]
    drive_id: u64,
    quarter: u8,
    down: u8,
    #[serde(rename = "yardsToGo")]
    yards_to_go: f64,
    #[serde(rename = "absoluteYardlineNumber")]
    absolute_yardline: f64,
    #[serde(rename = "preSnapHomeScore")]
    pre_snap_home_score: i32,
    #[serde(rename = "preSnapVisitorScore")]
    pre_snap_visitor_score: i32,
    #[serde(rename = "homePossession")]
    home_possession: u8,
    #[serde(rename = "timeoutsOff")]
    timeouts_off: u8,
    #[serde(rename = "timeoutsDef")]
    timeouts_def: u8,
    #[serde(rename = "possessionTeam")]
    possession_team: String,
    #[serde(rename = "ballCarrierId")]
    ball_carrier_id: u64,
    #[serde(rename = "playType")]
    play_type: String,
    #[serde(rename = "passResult")]
    pass_result: String,
    #[serde(rename = "penaltyFlag")]
    penalty_flag: u8,
    turnover: u8,
    #[serde(rename = "playResult")]
    play_result: f64,
}

#[derive(Debug, Deserialize)]
struct RawTackleRow {
    #[serde(rename = "gameId")]
    game_id: u64,
    #[serde(rename = "playId")]
    play_id: u64,
    #[serde(rename = "nflId")]
    nfl_id: u64,
    tackle: u8,
    #[serde(rename = "pff_missedTackle")]
    pff_missed_tackle: Option<u8>,
}

#[derive(Debug, Deserialize)]
struct RawPlayerRow {
    #[serde(rename = "nflId")]
    nfl_id: u64,
    position: String,
    #[serde(rename = "displayName")]
    display_name: String,
}

/// Fully parsed and validated corpus.
#[derive(Debug, Clone, Default)]
pub struct TrackingData {
    pub plays: BTreeMap<PlayKey, PlayMeta>,
    pub frames: BTreeMap<PlayKey, PlayFrames>,
    pub players: BTreeMap<u64, PlayerInfo>,
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub plays_seen: usize,
    pub plays_kept: usize,
    pub plays_dropped: usize,
}

fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema {
            file: path.display().to_string(),
            message: format!("cannot read header: {e}"),
        })?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Schema {
            file: path.display().to_string(),
            message: format!("header mismatch: expected {expected:?}, got {got:?}"),
        });
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(csv::ReaderBuilder::new().from_reader(file))
}

/// Parse and validate the four input files. Plays failing validation are
/// dropped with a warning; structural problems in the tracking file are
/// fatal.
pub fn parse_tracking(
    tracking_path: &Path,
    plays_path: &Path,
    tackles_path: &Path,
    players_path: &Path,
) -> Result<(TrackingData, ParseReport)> {
    let raw_plays = read_plays(plays_path)?;
    let (tackle_map, missed_map) = read_tackles(tackles_path)?;
    let players = load_players(players_path)?;
    let (raw_frames, directions) = read_tracking(tracking_path)?;

    let mut data = TrackingData {
        players,
        ..Default::default()
    };
    let mut report = ParseReport {
        plays_seen: raw_plays.len(),
        ..Default::default()
    };

    for (key, row) in raw_plays {
        match finalize_play(key, &row, &raw_frames, &directions, &tackle_map, &missed_map) {
            Ok((meta, frames)) => {
                data.plays.insert(key, meta);
                data.frames.insert(key, frames);
                report.plays_kept += 1;
            }
            Err(reason) => {
                warn!(
                    "dropping play game {} play {}: {reason}",
                    key.game_id, key.play_id
                );
                report.plays_dropped += 1;
            }
        }
    }
    Ok((data, report))
}

type FrameStore = BTreeMap<PlayKey, BTreeMap<u32, (String, Vec<(EntityState, String)>)>>;

fn read_tracking(path: &Path) -> Result<(FrameStore, BTreeMap<PlayKey, PlayDirection>)> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &TRACKING_HEADER)?;
    let mut store: FrameStore = BTreeMap::new();
    let mut directions: BTreeMap<PlayKey, PlayDirection> = BTreeMap::new();

    for (idx, rec) in rdr.deserialize::<RawTrackingRow>().enumerate() {
        let row_no = idx as u64 + 2; // header is line 1
        let row = rec.map_err(|e| Error::Parse {
            file: path.display().to_string(),
            row: row_no,
            message: e.to_string(),
        })?;
        if row.play_id >= 1_000_000 {
            return Err(Error::Parse {
                file: path.display().to_string(),
                row: row_no,
                message: format!("play id {} exceeds the supported range", row.play_id),
            });
        }
        let key = PlayKey {
            game_id: row.game_id,
            play_id: row.play_id,
        };
        let dir = PlayDirection::parse(&row.play_direction).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            row: row_no,
            message: e.to_string(),
        })?;
        if let Some(prev) = directions.insert(key, dir) {
            if prev != dir {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    row: row_no,
                    message: "inconsistent playDirection within one play".into(),
                });
            }
        }
        // Sides are resolved against the possession team when the play is
        // finalized; until then the club string rides along.
        let entity = EntityState {
            entity_id: row.nfl_id,
            side: Side::Ball,
            x: canonical_x(row.x, dir),
            y: canonical_y(row.y, dir),
            speed: row.s,
            accel: row.a,
            dist: row.dis,
            orientation: canonical_angle(row.o, dir),
            direction: canonical_angle(row.dir, dir),
        };
        let frame = store.entry(key).or_default().entry(row.frame_id).or_default();
        if !row.event.is_empty() {
            if frame.0.is_empty() {
                frame.0 = row.event.clone();
            } else if frame.0 != row.event {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    row: row_no,
                    message: "conflicting event tags within one frame".into(),
                });
            }
        }
        frame.1.push((entity, row.club));
    }
    Ok((store, directions))
}

fn read_plays(path: &Path) -> Result<BTreeMap<PlayKey, RawPlayRow>> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &PLAYS_HEADER)?;
    let mut out = BTreeMap::new();
    for (idx, rec) in rdr.deserialize::<RawPlayRow>().enumerate() {
        match rec {
            Ok(row) => {
                let key = PlayKey {
                    game_id: row.game_id,
                    play_id: row.play_id,
                };
                out.insert(key, row);
            }
            Err(e) => {
                // A malformed play row drops that play, not the run.
                warn!("{}: row {} unreadable, play dropped: {e}", path.display(), idx + 2);
            }
        }
    }
    Ok(out)
}

type TackleMaps = (BTreeMap<PlayKey, u64>, BTreeMap<PlayKey, Vec<u64>>);

fn read_tackles(path: &Path) -> Result<TackleMaps> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &TACKLES_HEADER)?;
    let mut tackles = BTreeMap::new();
    let mut missed: BTreeMap<PlayKey, Vec<u64>> = BTreeMap::new();
    for (idx, rec) in rdr.deserialize::<RawTackleRow>().enumerate() {
        let row: RawTackleRow = match rec {
            Ok(r) => r,
            Err(e) => {
                warn!("{}: row {} unreadable, skipped: {e}", path.display(), idx + 2);
                continue;
            }
        };
        let key = PlayKey {
            game_id: row.game_id,
            play_id: row.play_id,
        };
        if row.tackle == 1 {
            tackles.insert(key, row.nfl_id);
        }
        if row.pff_missed_tackle == Some(1) {
            missed.entry(key).or_default().push(row.nfl_id);
        }
    }
    Ok((tackles, missed))
}

/// Load the roster file on its own (positions for rankings and reports).
pub fn load_players(path: &Path) -> Result<BTreeMap<u64, PlayerInfo>> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &PLAYERS_HEADER)?;
    let mut out = BTreeMap::new();
    for (idx, rec) in rdr.deserialize::<RawPlayerRow>().enumerate() {
        match rec {
            Ok(row) => {
                out.insert(
                    row.nfl_id,
                    PlayerInfo {
                        entity_id: row.nfl_id,
                        position: row.position,
                        name: row.display_name,
                    },
                );
            }
            Err(e) => {
                warn!("{}: row {} unreadable, skipped: {e}", path.display(), idx + 2);
            }
        }
    }
    Ok(out)
}

const COORD_EPS: f64 = 1e-6;

fn finalize_play(
    key: PlayKey,
    row: &RawPlayRow,
    raw_frames: &FrameStore,
    directions: &BTreeMap<PlayKey, PlayDirection>,
    tackle_map: &BTreeMap<PlayKey, u64>,
    missed_map: &BTreeMap<PlayKey, Vec<u64>>,
) -> std::result::Result<(PlayMeta, PlayFrames), String> {
    let dir = *directions.get(&key).ok_or("no tracking rows for play")?;
    let frames_raw = raw_frames.get(&key).ok_or("no tracking frames for play")?;

    if !(1..=9).contains(&row.week) {
        return Err(format!("week {} outside 1..=9", row.week));
    }
    if !(1..=4).contains(&row.down) {
        return Err(format!("down {} outside 1..=4", row.down));
    }
    if !(1..=5).contains(&row.quarter) {
        return Err(format!("quarter {} outside 1..=5", row.quarter));
    }
    if row.yards_to_go <= 0.0 {
        return Err("yardsToGo must be positive".into());
    }
    if row.timeouts_off > 3 || row.timeouts_def > 3 {
        return Err("timeouts outside 0..=3".into());
    }
    let play_type = match row.play_type.as_str() {
        "run" => PlayType::Run,
        "pass" => PlayType::Pass,
        other => return Err(format!("unknown playType {other:?}")),
    };

    let adjusted_los = canonical_x(row.absolute_yardline, dir);
    let end_of_play_x = adjusted_los - row.play_result;
    if end_of_play_x > adjusted_los + 100.0 + COORD_EPS {
        return Err("end of play beyond the field".into());
    }

    let home = row.home_possession == 1;
    let score_differential = if home {
        row.pre_snap_home_score - row.pre_snap_visitor_score
    } else {
        row.pre_snap_visitor_score - row.pre_snap_home_score
    };

    // Assemble frames: exactly 22 players and one ball per frame, entities
    // unique, coordinates inside the field envelope.
    let mut frames = Vec::with_capacity(frames_raw.len());
    let mut carrier_seen = false;
    for (&frame_id, (event, entities)) in frames_raw {
        let mut ents: Vec<EntityState> = entities
            .iter()
            .map(|(e, club)| EntityState {
                side: side_for(club, &row.possession_team),
                ..*e
            })
            .collect();
        ents.sort_by_key(|e| (e.entity_id.is_none(), e.entity_id));
        let n_players = ents.iter().filter(|e| e.entity_id.is_some()).count();
        let n_ball = ents.len() - n_players;
        if n_players != 22 || n_ball != 1 {
            return Err(format!(
                "frame {frame_id} has {n_players} players and {n_ball} ball entities"
            ));
        }
        let n_off = ents.iter().filter(|e| e.side == Side::Offense).count();
        if n_off != 11 {
            return Err(format!("frame {frame_id} has {n_off} offensive players"));
        }
        for w in ents.windows(2) {
            if w[0].entity_id.is_some() && w[0].entity_id == w[1].entity_id {
                return Err(format!("frame {frame_id} repeats entity {:?}", w[0].entity_id));
            }
        }
        for e in &ents {
            if !(-10.0 - COORD_EPS..=110.0 + COORD_EPS).contains(&e.x)
                || !(-FIELD_HALF_WIDTH - COORD_EPS..=FIELD_HALF_WIDTH + COORD_EPS).contains(&e.y)
            {
                return Err(format!("frame {frame_id} entity out of bounds"));
            }
            if e.speed < 0.0 || e.dist < 0.0 {
                return Err(format!("frame {frame_id} negative speed or distance"));
            }
            if e.entity_id == Some(row.ball_carrier_id) {
                carrier_seen = true;
            }
        }
        frames.push(FrameSnapshot {
            frame_id,
            event: event.clone(),
            entities: ents,
        });
    }
    if frames.is_empty() {
        return Err("play has no frames".into());
    }
    if !carrier_seen {
        return Err("ball carrier never on the field".into());
    }

    let meta = PlayMeta {
        key,
        week: row.week,
        drive_id: row.drive_id,
        down: row.down,
        yards_to_go: row.yards_to_go,
        adjusted_los,
        quarter: row.quarter,
        score_differential,
        home_possession: home,
        timeouts_off: row.timeouts_off,
        timeouts_def: row.timeouts_def,
        ball_carrier_id: row.ball_carrier_id,
        tackler_id: tackle_map.get(&key).copied(),
        missed_tackler_ids: missed_map.get(&key).cloned().unwrap_or_default(),
        penalty_flag: row.penalty_flag == 1,
        play_type,
        pass_result: row.pass_result.clone(),
        turnover: row.turnover == 1,
        off_team_id: row.possession_team.clone(),
        end_of_play_x,
    };
    Ok((meta, PlayFrames { frames }))
}

/// Resolve sides against the possession team. The parser stores clubs as
/// defense by default; this pass fixes up offense membership per play.
pub(super) fn side_for(club: &str, possession: &str) -> Side {
    if club == BALL_CLUB {
        Side::Ball
    } else if club == possession {
        Side::Offense
    } else {
        Side::Defense
    }
}
