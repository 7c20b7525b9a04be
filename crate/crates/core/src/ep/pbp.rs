//! Loader for play-by-play training files
//! (season, game, drive, state covariates, realized next score).

use std::path::Path;

use serde::Deserialize;

use super::state::GameState;
use super::train::EpTrainRow;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct RawPbpRow {
    season: u16,
    #[serde(rename = "gameId")]
    game_id: u64,
    #[serde(rename = "driveId")]
    drive_id: u64,
    down: u8,
    #[serde(rename = "yardsToGo")]
    yards_to_go: f64,
    yardline: f64,
    quarter: u8,
    #[serde(rename = "scoreDifferential")]
    score_differential: i32,
    home: u8,
    #[serde(rename = "timeoutsOff")]
    timeouts_off: u8,
    #[serde(rename = "timeoutsDef")]
    timeouts_def: u8,
    #[serde(rename = "nextScore")]
    next_score: i8,
}

pub fn load_pbp_csv(path: &Path) -> Result<Vec<EpTrainRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.deserialize::<RawPbpRow>().enumerate() {
        let r = rec.map_err(|e| Error::Parse {
            file: path.display().to_string(),
            row: idx as u64 + 2,
            message: e.to_string(),
        })?;
        if super::state::outcome_index(r.next_score).is_none() {
            return Err(Error::Parse {
                file: path.display().to_string(),
                row: idx as u64 + 2,
                message: format!("nextScore {} is not a valid outcome", r.next_score),
            });
        }
        rows.push(EpTrainRow {
            season: r.season,
            game_id: r.game_id,
            drive_id: r.drive_id,
            state: GameState {
                yardline: r.yardline,
                yards_to_go: r.yards_to_go,
                down: r.down,
                quarter: r.quarter,
                score_differential: r.score_differential,
                home_possession: r.home == 1,
                timeouts_off: r.timeouts_off,
                timeouts_def: r.timeouts_def,
            },
            next_score: r.next_score,
        });
    }
    Ok(rows)
}
