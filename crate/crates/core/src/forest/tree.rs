//! Greedy CART regression trees with variance-reduction splits.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

/// A fitted regression tree in flat-array form. `feature[i] < 0` marks a
/// leaf; `value[i]` is the mean of the bootstrap responses routed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    pub seed: u64,
}

/// One candidate split found by the exact greedy search.
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl RegressionTree {
    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    /// Grow a tree on `items` (row indices into `x`/`y`, duplicates allowed -
    /// that is the bootstrap). At each node `mtry` features are sampled
    /// without replacement as split candidates; the (feature, threshold) pair
    /// maximizing the variance reduction wins, first-found on ties. Growth
    /// stops when a node holds fewer than `2 * min_node_size` items, when the
    /// response is constant, or when no candidate split reduces variance.
    pub fn fit(
        x: &[f64],
        n_features: usize,
        y: &[f64],
        items: &mut [usize],
        mtry: usize,
        min_node_size: usize,
        rng: &mut ChaCha8Rng,
        seed: u64,
    ) -> Self {
        let mut tree = RegressionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            seed,
        };
        let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(items.len());
        tree.grow(
            x,
            n_features,
            y,
            items,
            mtry,
            min_node_size.max(1),
            rng,
            &mut scratch,
        );
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        x: &[f64],
        p: usize,
        y: &[f64],
        items: &mut [usize],
        mtry: usize,
        min_node_size: usize,
        rng: &mut ChaCha8Rng,
        scratch: &mut Vec<(f64, f64)>,
    ) -> u32 {
        let node = self.push_node();
        let n = items.len();
        let sum: f64 = items.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;

        if n < 2 * min_node_size || constant_response(y, items) {
            self.make_leaf(node, mean);
            return node;
        }

        let best = self.search_split(x, p, y, items, sum, mtry, min_node_size, rng, scratch);
        match best {
            Some(split) if split.gain > 0.0 => {
                // Partition in place: <= threshold goes left.
                let mid = partition_items(items, x, p, split.feature, split.threshold);
                // A degenerate partition cannot happen: thresholds sit
                // strictly between two observed values of the feature.
                debug_assert!(mid > 0 && mid < n);
                self.feature[node as usize] = split.feature as i32;
                self.threshold[node as usize] = split.threshold;
                let (left_items, right_items) = items.split_at_mut(mid);
                let l = self.grow(x, p, y, left_items, mtry, min_node_size, rng, scratch);
                self.left[node as usize] = l;
                let r = self.grow(x, p, y, right_items, mtry, min_node_size, rng, scratch);
                self.right[node as usize] = r;
                node
            }
            _ => {
                self.make_leaf(node, mean);
                node
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn search_split(
        &self,
        x: &[f64],
        p: usize,
        y: &[f64],
        items: &[usize],
        sum: f64,
        mtry: usize,
        min_node_size: usize,
        rng: &mut ChaCha8Rng,
        scratch: &mut Vec<(f64, f64)>,
    ) -> Option<BestSplit> {
        let n = items.len();
        let parent_score = sum * sum / n as f64;
        let mtry = mtry.clamp(1, p);
        let candidates = sample(rng, p, mtry);
        let mut best: Option<BestSplit> = None;

        for f in candidates.iter() {
            scratch.clear();
            scratch.extend(items.iter().map(|&i| (x[i * p + f], y[i])));
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += scratch[k].1;
                let lo = scratch[k].0;
                let hi = scratch[k + 1].0;
                if lo == hi {
                    continue;
                }
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < min_node_size || n_right < min_node_size {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / n_right as f64
                    - parent_score;
                if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                    // Midpoint between adjacent distinct values; if rounding
                    // pushes it onto `hi`, fall back to `lo` so that the
                    // `<=` routing reproduces the training partition.
                    let mut thr = lo + (hi - lo) / 2.0;
                    if thr >= hi {
                        thr = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold: thr,
                        gain,
                    });
                }
            }
        }
        best
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

    fn make_leaf(&mut self, node: u32, mean: f64) {
        self.feature[node as usize] = -1;
        self.value[node as usize] = mean;
    }

    /// Route one standardized feature row to its leaf prediction. Values
    /// equal to a threshold go left.
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
}

fn constant_response(y: &[f64], items: &[usize]) -> bool {
    let first = y[items[0]];
    items.iter().all(|&i| y[i] == first)
}

/// Stable in-place partition by `x[..,feature] <= threshold`; returns the
/// size of the left block.
fn partition_items(items: &mut [usize], x: &[f64], p: usize, feature: usize, thr: f64) -> usize {
    // Stable so that recursion order (and thus RNG consumption) is a pure
    // function of the data.
    let mut left: Vec<usize> = Vec::with_capacity(items.len());
    let mut right: Vec<usize> = Vec::with_capacity(items.len());
    for &i in items.iter() {
        if x[i * p + feature] <= thr {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    let mid = left.len();
    items[..mid].copy_from_slice(&left);
    items[mid..].copy_from_slice(&right);
    mid
}
