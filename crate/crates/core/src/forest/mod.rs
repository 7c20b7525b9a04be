//! Random-forest conditional density estimation.
//!
//! Each tree is grown on a bootstrap resample; instead of averaging the
//! per-tree predictions away, [`DensityForest::predict_density`] returns all
//! of them as an empirical sample of the conditional distribution of
//! yards-to-be-gained. Fitting is parallel across trees with one RNG stream
//! per tree, merged in tree order, so the forest is a pure function of
//! `(data, config, master_seed)`.

mod folds;
mod serialize;
mod tree;

pub use folds::{fit_weekly_folds, FoldEvaluation, WeeklyFolds};
pub use tree::RegressionTree;

use rand::Rng;

use crate::dataset::{FeatureDataset, Standardization};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng;

/// Forest hyperparameters. The defaults follow the usual random-forest
/// defaults: `mtry = floor(sqrt(p))` and a minimum node size of 5.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features drawn as split candidates at each node; `None` means
    /// `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_node_size: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 1000,
            mtry: None,
            min_node_size: 5,
        }
    }
}

/// The per-tree predictions for one feature vector, in tree order. Treated
/// downstream as draws from the conditional density of the response.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    pub draws: Vec<f64>,
}

impl ConditionalDensity {
    /// Mean of the draws (the classical forest point prediction), via
    /// Neumaier-compensated summation so the result is permutation-stable.
    pub fn mean(&self) -> f64 {
        compensated_mean(&self.draws)
    }

    /// Draws in ascending order; the empirical CDF puts mass `1/N` on each.
    pub fn sorted_draws(&self) -> Vec<f64> {
        let mut d = self.draws.clone();
        d.sort_unstable_by(f64::total_cmp);
        d
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn compensated_mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

/// A fitted forest plus everything needed to score new frames: the feature
/// schema and the standardization stats of its training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityForest {
    pub trees: Vec<RegressionTree>,
    pub mtry: usize,
    pub min_node_size: usize,
    pub feature_names: Vec<String>,
    pub standardization: Standardization,
    /// Week whose plays this forest scores out-of-sample; `None` for a
    /// forest trained on everything.
    pub held_out_week: Option<u8>,
    pub master_seed: u64,
}

impl DensityForest {
    /// Fit on the given training rows of `data`. Standardization stats are
    /// computed from exactly those rows; each tree gets an independent
    /// bootstrap resample (with replacement, same size) from its own seeded
    /// stream.
    pub fn fit(
        data: &FeatureDataset,
        training_rows: &[usize],
        config: &ForestConfig,
        master_seed: u64,
        held_out_week: Option<u8>,
    ) -> Result<Self> {
        if training_rows.is_empty() {
            return Err(Error::data("forest training set is empty"));
        }
        if config.n_trees == 0 {
            return Err(Error::data("forest must have at least one tree"));
        }
        let p = data.n_features();
        let mtry = config.mtry.unwrap_or_else(|| (p as f64).sqrt().floor() as usize);
        let mtry = mtry.clamp(1, p);
        let min_node_size = config.min_node_size.max(1);

        let standardization = Standardization::fit(data, training_rows)?;
        let n = training_rows.len();
        let mut x = vec![0.0; n * p];
        let mut y = vec![0.0; n];
        for (local, &r) in training_rows.iter().enumerate() {
            let row = &mut x[local * p..(local + 1) * p];
            row.copy_from_slice(data.row(r));
            standardization.apply_row(row);
            y[local] = data.response[r];
        }

        let trees = exec::map_indexed(config.n_trees, |t| {
            let seed = rng::stream_seed(master_seed, t as u64);
            let mut tree_rng = rng::seeded_rng(seed);
            let mut items: Vec<usize> =
                (0..n).map(|_| tree_rng.random_range(0..n)).collect();
            RegressionTree::fit(&x, p, &y, &mut items, mtry, min_node_size, &mut tree_rng, seed)
        });

        Ok(Self {
            trees,
            mtry,
            min_node_size,
            feature_names: data.feature_names.clone(),
            standardization,
            held_out_week,
            master_seed,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Per-tree predictions for a raw (unstandardized) feature row.
    pub fn predict_density(&self, raw_row: &[f64]) -> Result<ConditionalDensity> {
        if raw_row.len() != self.n_features() {
            return Err(Error::model(format!(
                "feature vector has {} entries, forest schema expects {}",
                raw_row.len(),
                self.n_features()
            )));
        }
        let row = self.standardization.standardized(raw_row);
        let draws = self.trees.iter().map(|t| t.predict(&row)).collect();
        Ok(ConditionalDensity { draws })
    }

    /// Forest point prediction: the mean of the density draws.
    pub fn predict_mean(&self, raw_row: &[f64]) -> Result<f64> {
        Ok(self.predict_density(raw_row)?.mean())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset_constant() -> FeatureDataset {
        let mut d = FeatureDataset::new(vec!["f0".into(), "f1".into()]);
        for i in 0..30 {
            d.push_row(i, 0, 1, &[i as f64, (i % 3) as f64], 4.25);
        }
        d
    }

    #[test]
    fn constant_response_all_draws_equal() {
        let d = dataset_constant();
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let cfg = ForestConfig {
            n_trees: 25,
            ..Default::default()
        };
        let f = DensityForest::fit(&d, &rows, &cfg, 3, None).unwrap();
        let dens = f.predict_density(&[100.0, 1.0]).unwrap();
        assert_eq!(dens.draws.len(), 25);
        assert!(dens.draws.iter().all(|&v| v == 4.25));
        assert!(f.trees.iter().all(|t| t.n_nodes() == 1));
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let mut d = FeatureDataset::new(vec!["f0".into()]);
        for i in 0..60 {
            let v = i as f64 / 10.0;
            d.push_row(i, 0, 1, &[v], if v < 3.0 { 1.0 } else { 7.0 });
        }
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let cfg = ForestConfig {
            n_trees: 1,
            min_node_size: 1,
            ..Default::default()
        };
        let f = DensityForest::fit(&d, &rows, &cfg, 9, None).unwrap();
        let raw = [1.5];
        let z = f.standardization.standardized(&raw);
        assert_eq!(
            f.predict_density(&raw).unwrap().draws[0],
            f.trees[0].predict(&z)
        );
    }

    #[test]
    fn schema_mismatch_rejected() {
        let d = dataset_constant();
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let f = DensityForest::fit(&d, &rows, &ForestConfig::default(), 1, None);
        let f = f.unwrap();
        assert!(f.predict_density(&[1.0]).is_err());
    }

    #[test]
    fn compensated_mean_is_permutation_stable() {
        let mut vals: Vec<f64> = (0..1000)
            .map(|i| ((i * 2654435761u64 as usize) % 977) as f64 * 0.137 - 60.0)
            .collect();
        let a = compensated_mean(&vals);
        vals.reverse();
        let b = compensated_mean(&vals);
        assert!((a - b).abs() < 1e-12);
    }
}
