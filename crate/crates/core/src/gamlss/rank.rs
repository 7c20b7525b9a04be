//! Player rankings from the bootstrap intercept distributions.

use std::collections::BTreeMap;

use serde::Serialize;

use super::bootstrap::BootstrapDistribution;
use crate::forest::compensated_sum;
use crate::pep::PepRecord;
use crate::tracking::PlayerInfo;

/// One ranking-table row, in the cumulative-plus-average layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingRow {
    pub rank: usize,
    pub player_id: u64,
    pub player: String,
    pub position: String,
    pub mm_median: f64,
    pub sum_pep: f64,
    pub avg_pep: f64,
    pub n_tackles: usize,
}

/// Rank tacklers by the median of their bootstrap intercept distribution,
/// descending. Players with `n_tackles <= min_tackles` are excluded - the
/// threshold is strict, so a player with exactly `min_tackles` tackles
/// drops out.
pub fn rank_players(
    bootstrap: &BootstrapDistribution,
    records: &[PepRecord],
    roster: &BTreeMap<u64, PlayerInfo>,
    min_tackles: usize,
) -> Vec<RankingRow> {
    let mut pep_by_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        pep_by_label
            .entry(format!("{:08}", r.tackler_id))
            .or_default()
            .push(r.pep);
    }

    let mut rows: Vec<RankingRow> = Vec::new();
    for (t, label) in bootstrap.tackler_levels.iter().enumerate() {
        let n = bootstrap.n_tackles[t];
        if n <= min_tackles {
            continue;
        }
        let player_id: u64 = label.parse().unwrap_or(0);
        let peps = pep_by_label.get(label).cloned().unwrap_or_default();
        let sum = compensated_sum(&peps);
        let info = roster.get(&player_id);
        rows.push(RankingRow {
            rank: 0,
            player_id,
            player: info.map(|p| p.name.clone()).unwrap_or_else(|| label.clone()),
            position: info.map(|p| p.position.clone()).unwrap_or_else(|| "UNK".into()),
            mm_median: bootstrap.median_of(t),
            sum_pep: sum,
            avg_pep: if peps.is_empty() { 0.0 } else { sum / peps.len() as f64 },
            n_tackles: n,
        });
    }
    rows.sort_by(|a, b| {
        b.mm_median
            .total_cmp(&a.mm_median)
            .then(a.player_id.cmp(&b.player_id))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(levels: Vec<&str>, counts: Vec<usize>, per_replicate: Vec<Vec<f64>>) -> BootstrapDistribution {
        BootstrapDistribution {
            tackler_levels: levels.into_iter().map(String::from).collect(),
            n_tackles: counts,
            samples: per_replicate,
            n_failed: 0,
            flagged: false,
        }
    }

    #[test]
    fn threshold_is_strict_and_order_by_median() {
        // player 2 has exactly 10 tackles: excluded
        let b = dist(
            vec!["00000001", "00000002", "00000003"],
            vec![12, 10, 30],
            vec![vec![0.1, 0.5, 0.4], vec![0.3, 0.5, 0.4]],
        );
        let rows = rank_players(&b, &[], &BTreeMap::new(), 10);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].player_id, 3);
        assert_eq!(rows[0].rank, 1);
        assert_eq!(rows[1].player_id, 1);
    }
}
