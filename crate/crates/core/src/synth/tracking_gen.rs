//! Scripted tracking-corpus generator.
//!
//! Every play is a deterministic script: a ball carrier on a straight path,
//! a designated tackler in pure pursuit, and inert teammates. The same
//! script is simulated twice - with and without the tackler - which makes
//! the counterfactual ("what if the tackle had been missed") an exact,
//! known quantity instead of an estimate. Three scenario families:
//!
//! * `contain`: tackler close to the carrier, a safety further downfield;
//!   removing the tackler hands the stop to the safety after extra yards.
//! * `breakaway`: nobody between the carrier and the end zone; long gain.
//! * `dominant`: tackler is the only defender who can reach the carrier;
//!   removal turns the play into a touchdown run.
//!
//! Scripts live on a 0.01-yard position grid with 0.1-yard/s speeds, so the
//! emitted two-decimal files carry the script exactly when noise is zero.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_atomic;
use crate::rng::stream_rng;
use crate::tracking::canonical::{angle_of_heading, raw_angle, raw_x, raw_y, PlayDirection};
use crate::tracking::{PlayKey, BALL_CLUB};

const FRAME_DT: f64 = 0.1;
const CONTACT_DIST: f64 = 1.0;
const MAX_FRAMES: usize = 150;
/// Post-contact drift, spread over four frames.
const POST_CONTACT_FRACTIONS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

pub const OFFENSE_POSITIONS: [&str; 11] =
    ["QB", "RB", "WR", "WR", "WR", "TE", "T", "G", "C", "G", "T"];
pub const DEFENSE_POSITIONS: [&str; 11] = [
    "DE", "DT", "NT", "OLB", "ILB", "MLB", "OLB", "CB", "CB", "SS", "FS",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Contain,
    Breakaway,
    Dominant,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Contain => "contain",
            Scenario::Breakaway => "breakaway",
            Scenario::Dominant => "dominant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingGenConfig {
    pub n_games: usize,
    pub plays_per_game: usize,
    pub n_weeks: u8,
    pub n_teams: usize,
    /// Positional jitter (yards) added to emitted coordinates.
    pub noise_sd: f64,
    pub run_fraction: f64,
    pub penalty_rate: f64,
    /// Probability that a contain play also scripts a missed tackle.
    pub missed_tackle_rate: f64,
    pub dominant_fraction: f64,
    pub breakaway_fraction: f64,
}

impl Default for TrackingGenConfig {
    fn default() -> Self {
        Self {
            n_games: 18,
            plays_per_game: 28,
            n_weeks: 9,
            n_teams: 8,
            noise_sd: 0.05,
            run_fraction: 0.6,
            penalty_rate: 0.1,
            missed_tackle_rate: 0.08,
            dominant_fraction: 0.15,
            breakaway_fraction: 0.2,
        }
    }
}

/// Ground truth for one generated play.
#[derive(Debug, Clone)]
pub struct PlayOracle {
    pub game_id: u64,
    pub play_id: u64,
    pub scenario: Scenario,
    pub penalty: bool,
    pub has_tackle: bool,
    /// Yards gained from scrimmage in the scripted play.
    pub scripted_gain: f64,
    /// Yards gained had the tackler been absent (equals `scripted_gain`
    /// for plays without a tackle).
    pub counterfactual_gain: f64,
    /// Carrier spot at the end of the play, canonical yards to goal.
    pub scripted_eopy_x: f64,
    pub counterfactual_eopy_x: f64,
    /// Scripted yards between first contact and the final spot.
    pub post_contact_yards: f64,
    /// (frame id, true remaining yards for the carrier at that frame).
    pub frame_truth: Vec<(u32, f64)>,
}

/// The generated corpus: file bodies plus structured oracles.
#[derive(Debug, Clone)]
pub struct TrackingCorpus {
    pub tracking_csv: String,
    pub plays_csv: String,
    pub tackles_csv: String,
    pub players_csv: String,
    pub oracle_plays_csv: String,
    pub oracle_frames_csv: String,
    pub oracles: Vec<PlayOracle>,
}

impl TrackingCorpus {
    /// Write the corpus files into `dir` with their standard names.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("tracking.csv"), self.tracking_csv.as_bytes())?;
        write_atomic(&dir.join("plays.csv"), self.plays_csv.as_bytes())?;
        write_atomic(&dir.join("tackles.csv"), self.tackles_csv.as_bytes())?;
        write_atomic(&dir.join("players.csv"), self.players_csv.as_bytes())?;
        write_atomic(
            &dir.join("oracle_plays.csv"),
            self.oracle_plays_csv.as_bytes(),
        )?;
        write_atomic(
            &dir.join("oracle_frames.csv"),
            self.oracle_frames_csv.as_bytes(),
        )?;
        Ok(())
    }
}

pub fn team_name(t: usize) -> String {
    format!("T{t:02}")
}

pub fn offense_id(team: usize, slot: usize) -> u64 {
    100_000 + team as u64 * 1_000 + slot as u64
}

pub fn defense_id(team: usize, slot: usize) -> u64 {
    100_000 + team as u64 * 1_000 + 100 + slot as u64
}

/// Snap to the 0.01-yard grid.
fn grid2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Snap to the 0.1 grid.
fn grid1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

#[derive(Debug, Clone, Copy)]
struct Pursuer {
    id: u64,
    speed: f64,
    x: f64,
    y: f64,
    active_from: u32,
    /// Missed-tackle defenders fall off at this frame (quarter speed) and
    /// are never contact-eligible.
    fade_from: Option<u32>,
}

#[derive(Debug, Clone)]
struct PlayScript {
    possession_frame: u32,
    carrier_id: u64,
    carrier_start: (f64, f64),
    carrier_speed: f64,
    /// Lateral yards per frame.
    carrier_drift: f64,
    /// Carrier positions for frames 1..possession_frame (pass routes).
    pre_possession: Vec<(f64, f64)>,
    tackler_id: Option<u64>,
    post_contact_yards: f64,
    pursuers: Vec<Pursuer>,
    /// Inert players: (entity id, x, y).
    statics: Vec<(u64, f64, f64)>,
}

#[derive(Debug, Clone)]
struct SimEntity {
    id: Option<u64>,
    x: f64,
    y: f64,
    speed: f64,
    dir: f64,
}

#[derive(Debug, Clone)]
struct SimFrame {
    frame_id: u32,
    event: String,
    entities: Vec<SimEntity>,
}

#[derive(Debug, Clone)]
struct SimResult {
    frames: Vec<SimFrame>,
    final_carrier_x: f64,
    contact_frame: Option<u32>,
    /// (frame id, carrier x) for every frame at/after possession.
    carrier_path: Vec<(u32, f64)>,
}

/// Deterministic play simulation; `include_tackler` switches between the
/// real play and the counterfactual re-run. In the real run only the
/// designated tackler may trigger contact (that is the scripted outcome);
/// in the re-run any non-fading pursuer may.
fn simulate(script: &PlayScript, include_tackler: bool, emit_frames: bool) -> SimResult {
    let mut frames = Vec::new();
    let mut carrier_path = Vec::new();
    let (mut cx, mut cy) = script.carrier_start;
    let mut pursuers: Vec<Pursuer> = script
        .pursuers
        .iter()
        .copied()
        .filter(|d| include_tackler || Some(d.id) != script.tackler_id)
        .collect();

    let mut contact_frame: Option<u32> = None;
    let mut gluer: Option<u64> = None;
    let mut post_steps_done = 0usize;
    let mut frame_id: u32 = 0;
    let mut finished = false;

    while !finished && (frame_id as usize) < MAX_FRAMES {
        frame_id += 1;
        let mut event = String::new();
        if frame_id == 1 {
            event = "ball_snap".into();
        }
        let mut carrier_moving = false;

        if frame_id < script.possession_frame {
            if let Some(&(px, py)) = script.pre_possession.get(frame_id as usize - 1) {
                cx = px;
                cy = py;
            }
        } else if frame_id == script.possession_frame {
            event = if script.pre_possession.is_empty() {
                "handoff".into()
            } else {
                "pass_outcome_caught".into()
            };
        } else if contact_frame.is_none() {
            cx = grid2(cx - script.carrier_speed * FRAME_DT);
            cy = grid2((cy + script.carrier_drift).clamp(-24.0, 24.0));
            carrier_moving = true;
            if cx <= 0.0 {
                cx = 0.0;
                event = "touchdown".into();
                finished = true;
            }
        } else if post_steps_done < POST_CONTACT_FRACTIONS.len() {
            cx = grid2(cx - POST_CONTACT_FRACTIONS[post_steps_done] * script.post_contact_yards);
            post_steps_done += 1;
            if cx <= 0.0 {
                cx = 0.0;
                post_steps_done = POST_CONTACT_FRACTIONS.len();
            }
            if post_steps_done == POST_CONTACT_FRACTIONS.len() {
                event = "tackle".into();
                finished = true;
            }
        }

        // Contact decision before moving pursuers: a pursuer that can
        // bridge the remaining distance within this frame makes contact.
        // Without the look-ahead, head-on closing speeds step straight
        // through the contact radius.
        if contact_frame.is_none() && frame_id >= script.possession_frame && !finished {
            let hit = pursuers
                .iter()
                .filter(|d| {
                    frame_id >= d.active_from
                        && d.fade_from.is_none()
                        && (!include_tackler || Some(d.id) == script.tackler_id)
                })
                .map(|d| {
                    let gap = (d.x - cx).hypot(d.y - cy) - d.speed * FRAME_DT;
                    (d.id, gap)
                })
                .filter(|(_, gap)| *gap <= CONTACT_DIST)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((id, _)) = hit {
                contact_frame = Some(frame_id);
                gluer = Some(id);
                if script.post_contact_yards == 0.0 {
                    post_steps_done = POST_CONTACT_FRACTIONS.len();
                    event = "tackle".into();
                    finished = true;
                }
            }
        }

        // Pursuit.
        let contact_now = contact_frame == Some(frame_id);
        let mut pursuer_states = Vec::with_capacity(pursuers.len());
        for d in pursuers.iter_mut() {
            let mut speed = 0.0;
            let mut dir = 0.0;
            if Some(d.id) == gluer {
                if contact_now {
                    speed = d.speed;
                    dir = angle_of_heading(cx - d.x, cy - d.y);
                }
                d.x = cx;
                d.y = cy;
            } else if contact_frame.is_none() && frame_id >= d.active_from {
                let mut v = d.speed;
                if let Some(fade) = d.fade_from {
                    if frame_id >= fade {
                        v = grid1(v * 0.25);
                    }
                }
                let (dx, dy) = (cx - d.x, cy - d.y);
                let dist = dx.hypot(dy);
                if dist > 1e-9 {
                    let step = (v * FRAME_DT).min(dist);
                    d.x += step * dx / dist;
                    d.y += step * dy / dist;
                    speed = v;
                    dir = angle_of_heading(dx / dist, dy / dist);
                }
            }
            pursuer_states.push(SimEntity {
                id: Some(d.id),
                x: d.x,
                y: d.y,
                speed,
                dir,
            });
        }

        if frame_id >= script.possession_frame {
            carrier_path.push((frame_id, cx));
        }

        if emit_frames {
            let carrier_speed = if carrier_moving { script.carrier_speed } else { 0.0 };
            let carrier_dir = if carrier_moving {
                angle_of_heading(-script.carrier_speed * FRAME_DT, script.carrier_drift)
            } else {
                0.0
            };
            let mut entities = Vec::with_capacity(23);
            entities.push(SimEntity {
                id: Some(script.carrier_id),
                x: cx,
                y: cy,
                speed: carrier_speed,
                dir: carrier_dir,
            });
            for &(id, sx, sy) in &script.statics {
                entities.push(SimEntity {
                    id: Some(id),
                    x: sx,
                    y: sy,
                    speed: 0.0,
                    dir: 0.0,
                });
            }
            entities.extend(pursuer_states);
            entities.push(SimEntity {
                id: None,
                x: cx,
                y: cy,
                speed: carrier_speed,
                dir: carrier_dir,
            });
            frames.push(SimFrame {
                frame_id,
                event,
                entities,
            });
        }
    }

    SimResult {
        frames,
        final_carrier_x: cx,
        contact_frame,
        carrier_path,
    }
}

struct CsvBuffers {
    tracking: String,
    plays: String,
    tackles: String,
    oracle_plays: String,
    oracle_frames: String,
}

/// Generate the corpus. Byte-identical output for a fixed `(config, seed)`.
pub fn generate_tracking_corpus(config: &TrackingGenConfig, seed: u64) -> TrackingCorpus {
    let mut buf = CsvBuffers {
        tracking: String::from(
            "gameId,playId,nflId,frameId,playDirection,x,y,s,a,dis,o,dir,event,club\n",
        ),
        plays: String::from(
            "gameId,playId,week,driveId,quarter,down,yardsToGo,absoluteYardlineNumber,preSnapHomeScore,preSnapVisitorScore,homePossession,timeoutsOff,timeoutsDef,possessionTeam,ballCarrierId,playType,passResult,penaltyFlag,turnover,playResult\n",
        ),
        tackles: String::from("gameId,playId,nflId,tackle,pff_missedTackle\n"),
        oracle_plays: String::from(
            "gameId,playId,scenario,penalty,hasTackle,scriptedGain,counterfactualGain,scriptedEopyX,counterfactualEopyX,postContactYards\n",
        ),
        oracle_frames: String::from("gameId,playId,frameId,trueRemainingYards\n"),
    };
    let mut oracles = Vec::new();
    let mut drive_counter: u64 = 0;

    for game in 0..config.n_games {
        let game_id = 2_022_090_000 + game as u64;
        let week = (game % config.n_weeks as usize) as u8 + 1;
        let home_team = game % config.n_teams;
        let mut away_team = (game + 1 + game / config.n_teams) % config.n_teams;
        if away_team == home_team {
            away_team = (home_team + 1) % config.n_teams;
        }

        for play_idx in 0..config.plays_per_game {
            if play_idx % 4 == 0 {
                drive_counter += 1;
            }
            let key = PlayKey {
                game_id,
                play_id: play_idx as u64 + 1,
            };
            let home_possession = drive_counter % 2 == 0;
            let (off_team, def_team) = if home_possession {
                (home_team, away_team)
            } else {
                (away_team, home_team)
            };
            let mut rng = stream_rng(seed, key.uid());
            emit_play(
                config,
                &mut buf,
                &mut oracles,
                EmitCtx {
                    key,
                    week,
                    drive_id: drive_counter,
                    quarter: (1 + 4 * play_idx / config.plays_per_game.max(1)).min(4) as u8,
                    home_possession,
                    off_team,
                    def_team,
                },
                &mut rng,
            );
        }
    }

    let mut players = String::from("nflId,position,displayName\n");
    for t in 0..config.n_teams {
        for (s, pos) in OFFENSE_POSITIONS.iter().enumerate() {
            let _ = writeln!(players, "{},{},{} O{}", offense_id(t, s), pos, team_name(t), s);
        }
        for (s, pos) in DEFENSE_POSITIONS.iter().enumerate() {
            let _ = writeln!(players, "{},{},{} D{}", defense_id(t, s), pos, team_name(t), s);
        }
    }

    TrackingCorpus {
        tracking_csv: buf.tracking,
        plays_csv: buf.plays,
        tackles_csv: buf.tackles,
        players_csv: players,
        oracle_plays_csv: buf.oracle_plays,
        oracle_frames_csv: buf.oracle_frames,
        oracles,
    }
}

struct EmitCtx {
    key: PlayKey,
    week: u8,
    drive_id: u64,
    quarter: u8,
    home_possession: bool,
    off_team: usize,
    def_team: usize,
}

fn emit_play(
    config: &TrackingGenConfig,
    buf: &mut CsvBuffers,
    oracles: &mut Vec<PlayOracle>,
    ctx: EmitCtx,
    rng: &mut ChaCha8Rng,
) {
    let penalty = rng.random::<f64>() < config.penalty_rate;
    let is_run = rng.random::<f64>() < config.run_fraction;
    let u: f64 = rng.random();
    let scenario = if u < config.dominant_fraction {
        Scenario::Dominant
    } else if u < config.dominant_fraction + config.breakaway_fraction {
        Scenario::Breakaway
    } else {
        Scenario::Contain
    };

    let los = f64::from(30 + rng.random_range(0..=45i32));
    let down: u8 = match rng.random_range(0..20) {
        0..=8 => 1,
        9..=13 => 2,
        14..=17 => 3,
        _ => 4,
    };
    let ytg = f64::from(rng.random_range(1..=12i32));
    let home_score: i32 = rng.random_range(0..=31);
    let visitor_score: i32 = rng.random_range(0..=31);
    let timeouts_off: u8 = rng.random_range(0..=3);
    let timeouts_def: u8 = rng.random_range(0..=3);
    let direction = if rng.random::<bool>() {
        PlayDirection::Left
    } else {
        PlayDirection::Right
    };

    // Carrier script.
    let carrier_slot = if is_run { 1 } else { 2 + rng.random_range(0..3usize) };
    let carrier_id = offense_id(ctx.off_team, carrier_slot);
    let y0 = grid1(f64::from(rng.random_range(-140..=140i32)) / 10.0);
    let v_c = grid1(6.0 + f64::from(rng.random_range(0..=25i32)) / 10.0);
    let drift = grid2(f64::from(rng.random_range(-2..=2i32)) / 10.0);

    let possession_frame: u32 = if is_run { 6 } else { 12 };
    let (carrier_start, pre_possession): ((f64, f64), Vec<(f64, f64)>) = if is_run {
        ((grid2(los + 4.0), y0), Vec::new())
    } else {
        let air = grid1(3.0 + f64::from(rng.random_range(0..=70i32)) / 10.0);
        let catch_x = grid2(los - air);
        let step = grid2(air / f64::from(possession_frame - 1));
        let pre: Vec<(f64, f64)> = (0..possession_frame - 1)
            .map(|f| (grid2(los + 0.5 - step * f64::from(f)), y0))
            .collect();
        ((catch_x, y0), pre)
    };
    let carrier_x0 = carrier_start.0;

    // Defender scripts. Tackle volume concentrates on the linebacker and
    // safety slots, mirroring real tackle distributions.
    const TACKLE_WEIGHTS: [u32; 11] = [1, 2, 1, 3, 6, 5, 3, 2, 2, 4, 3];
    let total_weight: u32 = TACKLE_WEIGHTS.iter().sum();
    let mut pick = rng.random_range(0..total_weight);
    let mut tackler_slot = 0usize;
    for (slot, &w) in TACKLE_WEIGHTS.iter().enumerate() {
        if pick < w {
            tackler_slot = slot;
            break;
        }
        pick -= w;
    }
    let tackler_id = defense_id(ctx.def_team, tackler_slot);
    // Tied to the carrier's speed so the scripted pursuit always closes.
    let v_t = grid1(v_c + f64::from(rng.random_range(-5..=15i32)) / 10.0);
    let d0 = grid1(3.0 + f64::from(rng.random_range(0..=70i32)) / 10.0);
    let post_contact_yards = [0.0, 0.5, 1.0, 1.5, 2.0][rng.random_range(0..5usize)];

    let mut pursuers: Vec<Pursuer> = Vec::new();
    let mut missed_tackler: Option<u64> = None;

    if scenario != Scenario::Breakaway {
        pursuers.push(Pursuer {
            id: tackler_id,
            speed: v_t,
            x: grid2(carrier_x0 - d0),
            y: grid2(y0 + f64::from(rng.random_range(-10..=10i32)) / 10.0),
            active_from: possession_frame,
            fade_from: None,
        });
        if scenario == Scenario::Contain {
            let safety_slot = (tackler_slot + 5) % 11;
            let extra = grid1(8.0 + f64::from(rng.random_range(0..=120i32)) / 10.0);
            pursuers.push(Pursuer {
                id: defense_id(ctx.def_team, safety_slot),
                speed: grid1(v_c + 0.5),
                x: grid2((carrier_x0 - d0 - extra).max(2.0)),
                y: grid2(y0 + f64::from(rng.random_range(-30..=30i32)) / 10.0),
                active_from: possession_frame,
                fade_from: None,
            });
            if rng.random::<f64>() < config.missed_tackle_rate {
                let miss_slot = (tackler_slot + 3) % 11;
                let miss_id = defense_id(ctx.def_team, miss_slot);
                missed_tackler = Some(miss_id);
                pursuers.push(Pursuer {
                    id: miss_id,
                    speed: grid1(v_c + 1.5),
                    x: grid2(carrier_x0 - grid1(d0 * 0.6).max(1.5)),
                    y: grid2(y0 + 1.2),
                    active_from: possession_frame,
                    fade_from: Some(possession_frame + 4),
                });
            }
        }
    }

    // Everyone unscripted is inert; defenders trail the play where they can
    // never reach the carrier.
    let scripted: Vec<u64> = pursuers.iter().map(|d| d.id).collect();
    let mut statics: Vec<(u64, f64, f64)> = Vec::new();
    for s in 0..11 {
        let id = offense_id(ctx.off_team, s);
        if id != carrier_id {
            statics.push((
                id,
                grid2(los + 1.0 + (s % 3) as f64),
                grid2(-12.0 + 2.4 * s as f64),
            ));
        }
    }
    for s in 0..11 {
        let id = defense_id(ctx.def_team, s);
        if !scripted.contains(&id) {
            statics.push((
                id,
                grid2((carrier_x0 + 13.0 + (s % 4) as f64).min(105.0)),
                grid2(-10.0 + 2.0 * s as f64),
            ));
        }
    }

    let script = PlayScript {
        possession_frame,
        carrier_id,
        carrier_start,
        carrier_speed: v_c,
        carrier_drift: drift,
        pre_possession,
        tackler_id: (scenario != Scenario::Breakaway).then_some(tackler_id),
        post_contact_yards,
        pursuers,
        statics,
    };

    let real = simulate(&script, true, true);
    let counterfactual = simulate(&script, false, false);

    let has_tackle = real.contact_frame.is_some();
    let scripted_gain = los - real.final_carrier_x;
    let counterfactual_gain = los - counterfactual.final_carrier_x;
    let frame_truth: Vec<(u32, f64)> = real
        .carrier_path
        .iter()
        .map(|&(f, x)| (f, x - real.final_carrier_x))
        .collect();

    // Emit tracking rows, with optional jitter.
    for frame in &real.frames {
        for e in &frame.entities {
            let (ex, ey) = if config.noise_sd > 0.0 {
                (
                    e.x + (rng.random::<f64>() * 2.0 - 1.0) * config.noise_sd,
                    (e.y + (rng.random::<f64>() * 2.0 - 1.0) * config.noise_sd)
                        .clamp(-26.0, 26.0),
                )
            } else {
                (e.x, e.y)
            };
            let club = match e.id {
                None => BALL_CLUB.to_string(),
                Some(pid) => team_name(((pid - 100_000) / 1_000) as usize),
            };
            let _ = writeln!(
                buf.tracking,
                "{},{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{},{}",
                ctx.key.game_id,
                ctx.key.play_id,
                e.id.map(|v| v.to_string()).unwrap_or_default(),
                frame.frame_id,
                direction.as_str(),
                raw_x(ex, direction),
                raw_y(ey, direction),
                e.speed,
                0.0,
                e.speed * FRAME_DT,
                raw_angle(e.dir, direction),
                raw_angle(e.dir, direction),
                frame.event,
                club,
            );
        }
    }

    let play_result = los - real.final_carrier_x;
    let turnover = down == 4 && play_result < ytg && real.final_carrier_x > 0.0;
    let _ = writeln!(
        buf.plays,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        ctx.key.game_id,
        ctx.key.play_id,
        ctx.week,
        ctx.drive_id,
        ctx.quarter,
        down,
        ytg,
        raw_x(los, direction),
        home_score,
        visitor_score,
        u8::from(ctx.home_possession),
        timeouts_off,
        timeouts_def,
        team_name(ctx.off_team),
        carrier_id,
        if is_run { "run" } else { "pass" },
        if is_run { "" } else { "C" },
        u8::from(penalty),
        u8::from(turnover),
        play_result,
    );

    if has_tackle {
        let _ = writeln!(
            buf.tackles,
            "{},{},{},1,0",
            ctx.key.game_id, ctx.key.play_id, tackler_id
        );
    }
    if let Some(m) = missed_tackler {
        let _ = writeln!(
            buf.tackles,
            "{},{},{},0,1",
            ctx.key.game_id, ctx.key.play_id, m
        );
    }

    let _ = writeln!(
        buf.oracle_plays,
        "{},{},{},{},{},{},{},{},{},{}",
        ctx.key.game_id,
        ctx.key.play_id,
        scenario.as_str(),
        u8::from(penalty),
        u8::from(has_tackle),
        scripted_gain,
        counterfactual_gain,
        real.final_carrier_x,
        counterfactual.final_carrier_x,
        post_contact_yards,
    );
    for &(f, rem) in &frame_truth {
        let _ = writeln!(
            buf.oracle_frames,
            "{},{},{},{}",
            ctx.key.game_id, ctx.key.play_id, f, rem
        );
    }

    oracles.push(PlayOracle {
        game_id: ctx.key.game_id,
        play_id: ctx.key.play_id,
        scenario,
        penalty,
        has_tackle,
        scripted_gain,
        counterfactual_gain,
        scripted_eopy_x: real.final_carrier_x,
        counterfactual_eopy_x: counterfactual.final_carrier_x,
        post_contact_yards,
        frame_truth,
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_noise_config() -> TrackingGenConfig {
        TrackingGenConfig {
            n_games: 4,
            plays_per_game: 10,
            n_weeks: 4,
            noise_sd: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let cfg = TrackingGenConfig::default();
        let a = generate_tracking_corpus(&cfg, 42);
        let b = generate_tracking_corpus(&cfg, 42);
        assert_eq!(a.tracking_csv, b.tracking_csv);
        assert_eq!(a.plays_csv, b.plays_csv);
        assert_eq!(a.tackles_csv, b.tackles_csv);
        let c = generate_tracking_corpus(&cfg, 43);
        assert_ne!(a.tracking_csv, c.tracking_csv);
    }

    #[test]
    fn removal_never_shortens_the_run() {
        let corpus = generate_tracking_corpus(&zero_noise_config(), 7);
        for o in &corpus.oracles {
            assert!(
                o.counterfactual_gain >= o.scripted_gain - 1e-9,
                "play {} {:?}: cf {} < real {}",
                o.play_id,
                o.scenario,
                o.counterfactual_gain,
                o.scripted_gain
            );
        }
    }

    #[test]
    fn dominant_plays_open_big_counterfactual_gains() {
        let cfg = TrackingGenConfig {
            dominant_fraction: 1.0,
            breakaway_fraction: 0.0,
            ..zero_noise_config()
        };
        let corpus = generate_tracking_corpus(&cfg, 11);
        for o in &corpus.oracles {
            assert_eq!(o.scenario, Scenario::Dominant);
            assert!(o.has_tackle);
            assert!(
                o.counterfactual_gain >= o.scripted_gain + 15.0,
                "cf {} real {}",
                o.counterfactual_gain,
                o.scripted_gain
            );
            // removal opens the full field
            assert_eq!(o.counterfactual_eopy_x, 0.0);
        }
    }

    #[test]
    fn penalty_count_within_binomial_bounds() {
        let cfg = TrackingGenConfig {
            n_games: 25,
            plays_per_game: 40,
            penalty_rate: 0.1,
            ..Default::default()
        };
        let corpus = generate_tracking_corpus(&cfg, 3);
        let n = corpus.oracles.len() as f64;
        let k = corpus.oracles.iter().filter(|o| o.penalty).count() as f64;
        // 99% binomial interval around np
        let sd = (n * 0.1 * 0.9).sqrt();
        assert!(
            (k - n * 0.1).abs() < 2.576 * sd,
            "penalties {k} of {n} outside bounds"
        );
    }
}
