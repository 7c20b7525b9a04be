//! Row-major feature matrices shared by the forest and the ingest stage.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A labeled regression dataset: raw (unstandardized) engineered features,
/// the yards-to-be-gained response, and bookkeeping columns used by the
/// leave-one-week-out harness.
#[derive(Debug, Clone, Default)]
pub struct FeatureDataset {
    pub feature_names: Vec<String>,
    /// Row-major, `n_rows * n_features`.
    pub features: Vec<f64>,
    pub response: Vec<f64>,
    pub week: Vec<u8>,
    pub play_id: Vec<u64>,
    pub frame_id: Vec<u32>,
}

impl FeatureDataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            ..Default::default()
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.features[i * p..(i + 1) * p]
    }

    pub fn push_row(&mut self, play_id: u64, frame_id: u32, week: u8, row: &[f64], y: f64) {
        debug_assert_eq!(row.len(), self.n_features());
        self.features.extend_from_slice(row);
        self.response.push(y);
        self.week.push(week);
        self.play_id.push(play_id);
        self.frame_id.push(frame_id);
    }

    /// Sorted list of weeks present in the data.
    pub fn weeks(&self) -> Vec<u8> {
        let mut w: Vec<u8> = self.week.clone();
        w.sort_unstable();
        w.dedup();
        w
    }

    /// Hash of the feature schema; serialized models refuse data whose
    /// schema hash differs.
    pub fn schema_hash(&self) -> String {
        schema_hash(&self.feature_names)
    }
}

pub fn schema_hash(feature_names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for name in feature_names {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-feature mean and sample standard deviation, computed on training
/// rows only and applied unchanged everywhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    /// Fit on the selected rows of `data`. Constant features keep sd = 1 so
    /// standardization is a no-op shift for them.
    pub fn fit(data: &FeatureDataset, rows: &[usize]) -> Result<Self> {
        let p = data.n_features();
        if rows.is_empty() {
            return Err(Error::data("cannot fit standardization on zero rows"));
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; p];
        for &r in rows {
            for (m, v) in means.iter_mut().zip(data.row(r)) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut sds = vec![0.0; p];
        for &r in rows {
            for ((s, m), v) in sds.iter_mut().zip(&means).zip(data.row(r)) {
                let d = v - m;
                *s += d * d;
            }
        }
        for s in sds.iter_mut() {
            *s = if rows.len() > 1 { (*s / (n - 1.0)).sqrt() } else { 0.0 };
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Self { means, sds })
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.sds) {
            *v = (*v - m) / s;
        }
    }

    pub fn standardized(&self, row: &[f64]) -> Vec<f64> {
        let mut out = row.to_vec();
        self.apply_row(&mut out);
        out
    }
}

impl FeatureDataset {
    /// Render as the columnar feature file: one row per (play, frame) with
    /// the header `play_uid,frame_id,week,response,<feature names...>`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("play_uid,frame_id,week,response");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n_rows() {
            let _ = write!(
                out,
                "{},{},{},{}",
                self.play_id[i], self.frame_id[i], self.week[i], self.response[i]
            );
            for v in self.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::data("empty feature file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5 || cols[..4] != ["play_uid", "frame_id", "week", "response"] {
            return Err(Error::data("feature file header mismatch"));
        }
        let feature_names: Vec<String> = cols[4..].iter().map(|s| s.to_string()).collect();
        let mut data = FeatureDataset::new(feature_names);
        let p = data.n_features();
        for (ln, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse_err = |what: &str| {
                Error::data(format!("feature file row {}: bad {what}", ln + 2))
            };
            let play: u64 = parts.next().ok_or_else(|| parse_err("play_uid"))?.parse().map_err(|_| parse_err("play_uid"))?;
            let frame: u32 = parts.next().ok_or_else(|| parse_err("frame_id"))?.parse().map_err(|_| parse_err("frame_id"))?;
            let week: u8 = parts.next().ok_or_else(|| parse_err("week"))?.parse().map_err(|_| parse_err("week"))?;
            let response: f64 = parts.next().ok_or_else(|| parse_err("response"))?.parse().map_err(|_| parse_err("response"))?;
            let row: Vec<f64> = parts
                .map(|v| v.parse::<f64>().map_err(|_| parse_err("feature value")))
                .collect::<Result<_>>()?;
            if row.len() != p {
                return Err(parse_err("feature count"));
            }
            data.push_row(play, frame, week, &row, response);
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset() -> FeatureDataset {
        let mut d = FeatureDataset::new(vec!["a".into(), "b".into()]);
        d.push_row(1, 1, 1, &[1.0, 10.0], 0.0);
        d.push_row(1, 2, 1, &[2.0, 10.0], 1.0);
        d.push_row(2, 1, 2, &[3.0, 10.0], 2.0);
        d
    }

    #[test]
    fn standardization_zero_mean_unit_sd() {
        let d = toy_dataset();
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let st = Standardization::fit(&d, &rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|&r| st.standardized(d.row(r))).collect();
        let mean_a: f64 = z.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let var_a: f64 = z.iter().map(|r| (r[0] - mean_a).powi(2)).sum::<f64>() / 2.0;
        assert!(mean_a.abs() < 1e-12);
        assert!((var_a - 1.0).abs() < 1e-12);
        // constant feature: untouched apart from centering
        assert_eq!(st.sds[1], 1.0);
        assert!(z.iter().all(|r| r[1].abs() < 1e-12));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = toy_dataset();
        let text = d.to_csv();
        let back = FeatureDataset::from_csv(&text).unwrap();
        assert_eq!(d.feature_names, back.feature_names);
        assert_eq!(d.features, back.features);
        assert_eq!(d.response, back.response);
        assert_eq!(d.play_id, back.play_id);
        assert_eq!(text, back.to_csv());
    }

    #[test]
    fn schema_hash_changes_with_names() {
        let a = schema_hash(&["x".into(), "y".into()]);
        let b = schema_hash(&["x".into(), "z".into()]);
        assert_ne!(a, b);
        // not separator-confusable
        let c = schema_hash(&["xy".into()]);
        let d = schema_hash(&["x".into(), "y".into()]);
        assert_ne!(c, d);
    }
}
