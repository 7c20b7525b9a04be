//! Drive-level bootstrap of the tackler intercepts.
//!
//! Drives, not plays, are the resampling unit: each replicate draws
//! `n_drives` drives with replacement (a drive picked twice contributes its
//! records twice), refits the model from a cold start, and stores every
//! tackler's intercept. Tacklers absent from a replicate report the
//! shrinkage center exactly. Replicates run in parallel with one RNG stream
//! each and merge in replicate order.

use std::collections::BTreeMap;

use log::warn;
use rand::Rng;

use super::design::{build_design, design_rows_for};
use super::families::Family;
use super::fit::{fit_prepared, MixedModelConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::pep::PepRecord;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// The run is flagged when fewer than this fraction of replicates
    /// converge.
    pub min_success_fraction: f64,
    pub fit: MixedModelConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0,
            min_success_fraction: 0.9,
            fit: MixedModelConfig::default(),
        }
    }
}

/// Per-tackler bootstrap distribution of the random intercept.
#[derive(Debug, Clone)]
pub struct BootstrapDistribution {
    pub tackler_levels: Vec<String>,
    /// Tackles per tackler in the full data.
    pub n_tackles: Vec<usize>,
    /// `samples[r][t]`: intercept of tackler `t` in replicate `r`.
    pub samples: Vec<Vec<f64>>,
    pub n_failed: usize,
    pub flagged: bool,
}

impl BootstrapDistribution {
    pub fn replicate_count(&self) -> usize {
        self.samples.len()
    }

    /// Bootstrap values of one tackler across replicates.
    pub fn tackler_samples(&self, t: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[t]).collect()
    }

    pub fn median_of(&self, t: usize) -> f64 {
        let mut v = self.tackler_samples(t);
        v.sort_unstable_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    pub fn sd_of(&self, t: usize) -> f64 {
        let v = self.tackler_samples(t);
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}

pub fn drive_bootstrap(
    records: &[PepRecord],
    family: Family,
    config: &BootstrapConfig,
) -> Result<BootstrapDistribution> {
    if config.replicates == 0 {
        return Err(Error::data("bootstrap needs at least one replicate"));
    }
    let (_, schema) = build_design(records)?;

    // Records grouped by drive, drives in sorted order.
    let mut by_drive: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_drive.entry(r.drive_id).or_default().push(i);
    }
    let drives: Vec<&Vec<usize>> = by_drive.values().collect();
    let n_drives = drives.len();
    if n_drives < 2 {
        return Err(Error::data("bootstrap needs at least two drives"));
    }

    let results: Vec<Option<Vec<f64>>> = exec::map_indexed(config.replicates, |r| {
        let mut rng = stream_rng(config.seed, r as u64);
        let mut picked: Vec<usize> = Vec::new();
        for _ in 0..n_drives {
            let d = rng.random_range(0..n_drives);
            picked.extend_from_slice(drives[d]);
        }
        let (y, design) = design_rows_for(&schema, records, &picked);
        match fit_prepared(&y, &design, family, &config.fit, None) {
            Ok(fit) if fit.converged => Some(fit.groups[0].intercepts.clone()),
            Ok(_) => {
                warn!("bootstrap replicate {r} did not converge; dropped");
                None
            }
            Err(e) => {
                warn!("bootstrap replicate {r} failed: {e}; dropped");
                None
            }
        }
    });

    let samples: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let n_failed = config.replicates - samples.len();
    let flagged =
        (samples.len() as f64) < config.min_success_fraction * config.replicates as f64;
    if flagged {
        warn!(
            "bootstrap flagged: only {}/{} replicates converged",
            samples.len(),
            config.replicates
        );
    }
    if samples.is_empty() {
        return Err(Error::NonConvergence("no bootstrap replicate converged".into()));
    }

    let tackler_levels = schema.groups[0].levels.clone();
    let mut counts = vec![0usize; tackler_levels.len()];
    for r in records {
        let label = format!("{:08}", r.tackler_id);
        if let Ok(pos) = tackler_levels.binary_search(&label) {
            counts[pos] += 1;
        }
    }

    Ok(BootstrapDistribution {
        tackler_levels,
        n_tackles: counts,
        samples,
        n_failed,
        flagged,
    })
}
