//! Second-order gradient boosting with a softmax objective.
//!
//! One regression tree per class per round, grown on the cross-entropy
//! gradients and hessians of the margins from the previous round. Splits use
//! the usual gain `G_l^2/(H_l+lambda) + G_r^2/(H_r+lambda) - G^2/(H+lambda)`;
//! leaf weights are `-lr * G/(H+lambda)`. The search is exact over all
//! features, so training involves no randomness at all.

use serde::{Deserialize, Serialize};

use super::state::{ScoreDistribution, N_OUTCOMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_rounds: 80,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

/// A depth-limited regression tree storing margin increments in its leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl BoostTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if row[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    fn push_node(&mut self) -> u32 {
        let id = self.feature.len() as u32;
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(0.0);
        id
    }
}

struct TreeGrower<'a> {
    x: &'a [f64],
    p: usize,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a BoostConfig,
}

impl TreeGrower<'_> {
    fn grow(&self, tree: &mut BoostTree, rows: &mut [usize], depth: usize) -> u32 {
        let node = tree.push_node();
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();

        if depth < self.cfg.max_depth && rows.len() >= 2 {
            if let Some((feature, thr)) = self.best_split(rows, g, h) {
                let mid = stable_partition(rows, self.x, self.p, feature, thr);
                tree.feature[node as usize] = feature as i32;
                tree.threshold[node as usize] = thr;
                let (l_rows, r_rows) = rows.split_at_mut(mid);
                let l = self.grow(tree, l_rows, depth + 1);
                tree.left[node as usize] = l;
                let r = self.grow(tree, r_rows, depth + 1);
                tree.right[node as usize] = r;
                return node;
            }
        }
        tree.value[node as usize] = -self.cfg.learning_rate * g / (h + self.cfg.lambda);
        node
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<(usize, f64)> {
        let lambda = self.cfg.lambda;
        let parent = g * g / (h + lambda);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for f in 0..self.p {
            sorted.clear();
            sorted.extend(
                rows.iter()
                    .map(|&i| (self.x[i * self.p + f], self.grad[i], self.hess[i])),
            );
            sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut gl = 0.0;
            let mut hl = 0.0;
            for k in 0..sorted.len() - 1 {
                gl += sorted[k].1;
                hl += sorted[k].2;
                let lo = sorted[k].0;
                let hi = sorted[k + 1].0;
                if lo == hi {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > best.map_or(1e-12, |b| b.2) {
                    let mut thr = lo + (hi - lo) / 2.0;
                    if thr >= hi {
                        thr = lo;
                    }
                    best = Some((f, thr, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

fn stable_partition(rows: &mut [usize], x: &[f64], p: usize, feature: usize, thr: f64) -> usize {
    let mut left = Vec::with_capacity(rows.len());
    let mut right = Vec::with_capacity(rows.len());
    for &i in rows.iter() {
        if x[i * p + feature] <= thr {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    let mid = left.len();
    rows[..mid].copy_from_slice(&left);
    rows[mid..].copy_from_slice(&right);
    mid
}

/// A boosted softmax classifier over the seven next-score outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedClassifier {
    pub base_score: [f64; N_OUTCOMES],
    /// `n_rounds * N_OUTCOMES` trees, round-major.
    pub trees: Vec<BoostTree>,
    pub n_features: usize,
    pub config: BoostConfig,
}

impl BoostedClassifier {
    /// Fit on `x` (row-major `n x p`), class labels, and per-row weights.
    pub fn fit(
        x: &[f64],
        p: usize,
        labels: &[usize],
        weights: &[f64],
        config: &BoostConfig,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::data("boosted classifier needs training rows"));
        }
        if x.len() != n * p {
            return Err(Error::data("feature matrix shape mismatch"));
        }
        if labels.iter().any(|&l| l >= N_OUTCOMES) {
            return Err(Error::data("class label out of range"));
        }

        // Weighted log-prior as base margin; classes never observed get a
        // small floor so the softmax stays finite.
        let total_w: f64 = weights.iter().sum();
        let mut base_score = [0.0; N_OUTCOMES];
        for k in 0..N_OUTCOMES {
            let wk: f64 = labels
                .iter()
                .zip(weights)
                .filter(|(&l, _)| l == k)
                .map(|(_, &w)| w)
                .sum();
            base_score[k] = ((wk / total_w).max(1e-9)).ln();
        }

        let mut margins = vec![0.0; n * N_OUTCOMES];
        for i in 0..n {
            margins[i * N_OUTCOMES..(i + 1) * N_OUTCOMES].copy_from_slice(&base_score);
        }

        let mut trees = Vec::with_capacity(config.n_rounds * N_OUTCOMES);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut probs = vec![0.0; n * N_OUTCOMES];

        for _round in 0..config.n_rounds {
            for i in 0..n {
                softmax_into(
                    &margins[i * N_OUTCOMES..(i + 1) * N_OUTCOMES],
                    &mut probs[i * N_OUTCOMES..(i + 1) * N_OUTCOMES],
                );
            }
            for k in 0..N_OUTCOMES {
                for i in 0..n {
                    let pik = probs[i * N_OUTCOMES + k];
                    let yik = if labels[i] == k { 1.0 } else { 0.0 };
                    grad[i] = weights[i] * (pik - yik);
                    hess[i] = weights[i] * (pik * (1.0 - pik)).max(1e-16);
                }
                let grower = TreeGrower {
                    x,
                    p,
                    grad: &grad,
                    hess: &hess,
                    cfg: config,
                };
                let mut tree = BoostTree {
                    feature: Vec::new(),
                    threshold: Vec::new(),
                    left: Vec::new(),
                    right: Vec::new(),
                    value: Vec::new(),
                };
                let mut rows: Vec<usize> = (0..n).collect();
                grower.grow(&mut tree, &mut rows, 0);
                for i in 0..n {
                    margins[i * N_OUTCOMES + k] += tree.predict(&x[i * p..(i + 1) * p]);
                }
                trees.push(tree);
            }
        }

        Ok(Self {
            base_score,
            trees,
            n_features: p,
            config: config.clone(),
        })
    }

    pub fn predict_margins(&self, row: &[f64]) -> [f64; N_OUTCOMES] {
        let mut m = self.base_score;
        for (t, tree) in self.trees.iter().enumerate() {
            m[t % N_OUTCOMES] += tree.predict(row);
        }
        m
    }

    pub fn predict_probs(&self, row: &[f64]) -> ScoreDistribution {
        let m = self.predict_margins(row);
        let mut probs = [0.0; N_OUTCOMES];
        softmax_into(&m, &mut probs);
        ScoreDistribution { probs }
    }
}

fn softmax_into(margins: &[f64], out: &mut [f64]) {
    let max = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &m) in out.iter_mut().zip(margins) {
        *o = (m - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_single_class_predicts_it() {
        // All touchdowns: p_7 ~ 1 everywhere.
        let n = 50;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels = vec![6usize; n];
        let weights = vec![1.0; n];
        let cfg = BoostConfig {
            n_rounds: 10,
            ..Default::default()
        };
        let clf = BoostedClassifier::fit(&x, 1, &labels, &weights, &cfg).unwrap();
        let d = clf.predict_probs(&[25.0]);
        assert!(d.probs[6] > 0.99, "p_7 = {}", d.probs[6]);
        assert!(d.is_valid(1e-9));
    }

    #[test]
    fn separable_two_class_problem() {
        // Feature < 0 -> class 0, else class 6.
        let n = 200;
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 100.0 + 0.5).collect();
        let labels: Vec<usize> = x.iter().map(|&v| if v < 0.0 { 0 } else { 6 }).collect();
        let weights = vec![1.0; n];
        let cfg = BoostConfig {
            n_rounds: 40,
            max_depth: 2,
            ..Default::default()
        };
        let clf = BoostedClassifier::fit(&x, 1, &labels, &weights, &cfg).unwrap();
        assert!(clf.predict_probs(&[-50.0]).probs[0] > 0.9);
        assert!(clf.predict_probs(&[50.0]).probs[6] > 0.9);
    }

    #[test]
    fn fit_is_deterministic() {
        let n = 120;
        let x: Vec<f64> = (0..n * 2).map(|i| ((i * 37) % 101) as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| (i * 13) % 7).collect();
        let weights: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + (i % 5) as f64)).collect();
        let cfg = BoostConfig::default();
        let a = BoostedClassifier::fit(&x, 2, &labels, &weights, &cfg).unwrap();
        let b = BoostedClassifier::fit(&x, 2, &labels, &weights, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predictions_are_valid_distributions() {
        let n = 100;
        let x: Vec<f64> = (0..n * 3).map(|i| ((i * 29) % 53) as f64 * 0.1).collect();
        let labels: Vec<usize> = (0..n).map(|i| (i * 11) % 7).collect();
        let weights = vec![1.0; n];
        let cfg = BoostConfig {
            n_rounds: 15,
            ..Default::default()
        };
        let clf = BoostedClassifier::fit(&x, 3, &labels, &weights, &cfg).unwrap();
        for i in 0..40 {
            let row = [i as f64 * 0.3, (i % 7) as f64, 2.0];
            assert!(clf.predict_probs(&row).is_valid(1e-9));
        }
    }
}
