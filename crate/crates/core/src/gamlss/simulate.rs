//! Simulation from the mixed distributional model itself - the ground
//! truth for recovery, shrinkage, and ranking validation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::families::{Family, ShapeParams};
use crate::pep::PepRecord;
use crate::rng::stream_rng;
use crate::tracking::PlayType;

pub const SIM_TACKLER_POSITIONS: [&str; 5] = ["ILB", "OLB", "CB", "SS", "DT"];
pub const SIM_CARRIER_POSITIONS: [&str; 3] = ["RB", "WR", "TE"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimPlan {
    /// Tackles per tackler; tackler `t` gets `tackle_counts[t]` records.
    pub tackle_counts: Vec<usize>,
    pub tackler_sd: f64,
    pub n_carriers: usize,
    pub carrier_sd: f64,
    pub n_teams: usize,
    pub team_sd: f64,
    /// True coefficients for the indicator covariates.
    pub beta_intercept: f64,
    pub beta_short_yardage: f64,
    pub beta_fourth_down: f64,
    pub beta_fourth_quarter: f64,
    pub beta_turnover: f64,
    /// Per-position additive effects for the tackler position (zero map
    /// means position carries no signal).
    pub position_effects: Vec<(String, f64)>,
    pub family: Family,
    pub shape: ShapeParams,
    /// Records per drive after shuffling.
    pub records_per_drive: usize,
    pub seed: u64,
}

impl Default for SimPlan {
    fn default() -> Self {
        Self {
            tackle_counts: vec![50; 100],
            tackler_sd: 0.25,
            n_carriers: 60,
            carrier_sd: 0.10,
            n_teams: 16,
            team_sd: 0.05,
            beta_intercept: 0.15,
            beta_short_yardage: 0.30,
            beta_fourth_down: 0.20,
            beta_fourth_quarter: -0.05,
            beta_turnover: 0.40,
            position_effects: Vec::new(),
            family: Family::Sst,
            shape: ShapeParams {
                sigma: 0.5,
                nu: 1.6,
                tau: 6.0,
            },
            records_per_drive: 6,
            seed: 0,
        }
    }
}

/// What the simulator planted.
#[derive(Debug, Clone)]
pub struct SimTruth {
    /// Planted intercept per tackler (index = tackler index).
    pub tackler_effects: Vec<f64>,
    pub tackler_positions: Vec<String>,
    pub carrier_effects: Vec<f64>,
    pub team_effects: Vec<f64>,
    /// True fixed coefficients keyed by design column name (reference-coded
    /// factor columns excluded - the plan's factor effects are on levels,
    /// not contrasts).
    pub beta_by_name: Vec<(String, f64)>,
}

fn sample_normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let u: f64 = rng.random();
    Normal::new(0.0, sd.max(1e-12)).expect("normal").inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
}

pub fn simulate_records(plan: &SimPlan) -> (Vec<PepRecord>, SimTruth) {
    let mut rng = stream_rng(plan.seed, 0xec6);
    let n_tacklers = plan.tackle_counts.len();

    let tackler_effects: Vec<f64> = (0..n_tacklers)
        .map(|_| sample_normal(&mut rng, plan.tackler_sd))
        .collect();
    let tackler_positions: Vec<String> = (0..n_tacklers)
        .map(|t| SIM_TACKLER_POSITIONS[t % SIM_TACKLER_POSITIONS.len()].to_string())
        .collect();
    let carrier_effects: Vec<f64> = (0..plan.n_carriers)
        .map(|_| sample_normal(&mut rng, plan.carrier_sd))
        .collect();
    let team_effects: Vec<f64> = (0..plan.n_teams)
        .map(|_| sample_normal(&mut rng, plan.team_sd))
        .collect();

    let pos_effect = |pos: &str| -> f64 {
        plan.position_effects
            .iter()
            .find(|(p, _)| p == pos)
            .map(|(_, e)| *e)
            .unwrap_or(0.0)
    };

    let mut records = Vec::new();
    let mut play_counter = 0u64;
    for (t, &count) in plan.tackle_counts.iter().enumerate() {
        for _ in 0..count {
            play_counter += 1;
            let carrier = rng.random_range(0..plan.n_carriers);
            let team = rng.random_range(0..plan.n_teams);
            let short_yardage = rng.random::<f64>() < 0.15;
            let fourth_down = rng.random::<f64>() < 0.10;
            let fourth_quarter = rng.random::<f64>() < 0.25;
            let turnover = rng.random::<f64>() < 0.05;
            let is_run = rng.random::<bool>();
            let position = tackler_positions[t].clone();

            let mu = plan.beta_intercept
                + plan.beta_short_yardage * f64::from(u8::from(short_yardage))
                + plan.beta_fourth_down * f64::from(u8::from(fourth_down))
                + plan.beta_fourth_quarter * f64::from(u8::from(fourth_quarter))
                + plan.beta_turnover * f64::from(u8::from(turnover))
                + pos_effect(&position)
                + tackler_effects[t]
                + carrier_effects[carrier]
                + team_effects[team];
            let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            let noise = plan.family.quantile(u, 0.0, &plan.shape);
            let pep = mu + noise;

            records.push(PepRecord {
                game_id: 1 + play_counter / 500,
                play_id: play_counter % 500,
                week: (play_counter % 9) as u8 + 1,
                drive_id: 0, // assigned below after shuffling
                tackler_id: 1_000 + t as u64,
                tackler_position: position,
                ball_carrier_id: 5_000 + carrier as u64,
                ball_carrier_position: SIM_CARRIER_POSITIONS
                    [carrier % SIM_CARRIER_POSITIONS.len()]
                .to_string(),
                off_team_id: format!("S{team:02}"),
                play_type: if is_run { PlayType::Run } else { PlayType::Pass },
                pass_result: if is_run { String::new() } else { "C".into() },
                short_yardage,
                fourth_down,
                fourth_quarter,
                turnover,
                pep,
                pep_alt: 0.0,
                ep_hyp: pep,
                ep_real_pred: pep,
                ep_real_obs: 0.0,
                source: "real".into(),
            });
        }
    }

    // Shuffle, then cut into drives so one tackler's records spread over
    // many drives.
    let n = records.len();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        records.swap(i, j);
    }
    for (i, r) in records.iter_mut().enumerate() {
        r.drive_id = (i / plan.records_per_drive.max(1)) as u64 + 1;
    }

    let beta_by_name = vec![
        ("intercept".to_string(), plan.beta_intercept),
        ("short_yardage".to_string(), plan.beta_short_yardage),
        ("fourth_down".to_string(), plan.beta_fourth_down),
        ("fourth_quarter".to_string(), plan.beta_fourth_quarter),
        ("turnover".to_string(), plan.beta_turnover),
    ];

    (
        records,
        SimTruth {
            tackler_effects,
            tackler_positions,
            carrier_effects,
            team_effects,
            beta_by_name,
        },
    )
}
