//! Fixed-effect design and random-effect grouping built from PEP records.
//!
//! Factors (tackler position, ball-carrier position, pass result) are
//! reference-coded with the most frequent level as reference; indicator
//! covariates enter as 0/1. Three random-intercept groupings: tackler,
//! ball carrier, offensive team.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::pep::PepRecord;

pub const N_GROUPS: usize = 3;
pub const GROUP_NAMES: [&str; N_GROUPS] = ["tackler", "ball_carrier", "off_team"];

/// One random-effect grouping: sorted level labels plus each record's level
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub levels: Vec<String>,
    pub assignment: Vec<usize>,
}

impl Grouping {
    fn build<F: Fn(&PepRecord) -> String>(records: &[PepRecord], key: F) -> Self {
        let mut levels: Vec<String> = records.iter().map(&key).collect();
        levels.sort();
        levels.dedup();
        let index: BTreeMap<&str, usize> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let assignment = records.iter().map(|r| index[key(r).as_str()]).collect();
        Self { levels, assignment }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Design for the mean model: `mu_i = x_i beta + T + B + O`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub fixed_names: Vec<String>,
    /// Row-major `n x p` fixed-effect matrix.
    pub x: Vec<f64>,
    pub n_fixed: usize,
    pub groups: [Grouping; N_GROUPS],
}

impl Design {
    pub fn n_rows(&self) -> usize {
        if self.n_fixed == 0 {
            0
        } else {
            self.x.len() / self.n_fixed
        }
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_fixed..(i + 1) * self.n_fixed]
    }

    /// Total random-effect coefficients across the three groupings.
    pub fn n_random(&self) -> usize {
        self.groups.iter().map(|g| g.n_levels()).sum()
    }

    /// Offset of grouping `g` inside the stacked random-effect vector.
    pub fn group_offset(&self, g: usize) -> usize {
        self.groups[..g].iter().map(|x| x.n_levels()).sum()
    }

    pub fn mean_at(&self, i: usize, beta: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let mut mu = 0.0;
        for (j, &xv) in self.x_row(i).iter().enumerate() {
            mu += xv * beta[j];
        }
        for g in 0..N_GROUPS {
            mu += a[self.group_offset(g) + self.groups[g].assignment[i]];
        }
        mu
    }
}

/// Reference-code one factor: levels sorted, most frequent level dropped.
fn factor_columns(records: &[PepRecord], name: &str, value: impl Fn(&PepRecord) -> String) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(value(r)).or_insert(0) += 1;
    }
    // most frequent as reference; BTreeMap order breaks ties by label
    let reference = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(l, _)| l.clone())
        .unwrap_or_default();
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for level in counts.keys() {
        if *level == reference {
            continue;
        }
        names.push(format!("{name}[{level}]"));
        cols.push(
            records
                .iter()
                .map(|r| if value(r) == *level { 1.0 } else { 0.0 })
                .collect(),
        );
    }
    (names, cols)
}

fn label_or(value: &str, empty: &str) -> String {
    if value.is_empty() {
        empty.to_string()
    } else {
        value.to_string()
    }
}

/// Build the response vector and design from records.
pub fn build_design(records: &[PepRecord]) -> Result<(DVector<f64>, Design)> {
    if records.is_empty() {
        return Err(Error::data("no records to fit"));
    }
    let n = records.len();
    let mut names: Vec<String> = vec!["intercept".into()];
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];

    for (name, value) in [
        ("short_yardage", Box::new(|r: &PepRecord| r.short_yardage) as Box<dyn Fn(&PepRecord) -> bool>),
        ("fourth_down", Box::new(|r: &PepRecord| r.fourth_down)),
        ("fourth_quarter", Box::new(|r: &PepRecord| r.fourth_quarter)),
        ("turnover", Box::new(|r: &PepRecord| r.turnover)),
    ] {
        names.push(name.into());
        columns.push(records.iter().map(|r| f64::from(u8::from(value(r)))).collect());
    }

    let (f_names, f_cols) = factor_columns(records, "tackler_pos", |r| r.tackler_position.clone());
    names.extend(f_names);
    columns.extend(f_cols);
    let (f_names, f_cols) =
        factor_columns(records, "carrier_pos", |r| r.ball_carrier_position.clone());
    names.extend(f_names);
    columns.extend(f_cols);
    let (f_names, f_cols) = factor_columns(records, "pass_result", |r| {
        label_or(&r.pass_result, "none")
    });
    names.extend(f_names);
    columns.extend(f_cols);

    let p = names.len();
    let mut x = vec![0.0; n * p];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x[i * p + j] = v;
        }
    }

    let groups = [
        Grouping::build(records, |r| format!("{:08}", r.tackler_id)),
        Grouping::build(records, |r| format!("{:08}", r.ball_carrier_id)),
        Grouping::build(records, |r| r.off_team_id.clone()),
    ];
    for (g, grouping) in groups.iter().enumerate() {
        if grouping.n_levels() < 2 {
            return Err(Error::data(format!(
                "random-effect grouping {:?} has {} level(s); need at least 2",
                GROUP_NAMES[g],
                grouping.n_levels()
            )));
        }
    }

    let y = DVector::from_iterator(n, records.iter().map(|r| r.pep));
    Ok((
        y,
        Design {
            fixed_names: names,
            x,
            n_fixed: p,
            groups,
        },
    ))
}

/// Rebuild rows of an existing design schema for a resampled record set.
/// Level sets and reference coding stay those of the full data, so
/// coefficients remain comparable across bootstrap replicates; records must
/// come from the original set.
pub fn design_rows_for(
    schema: &Design,
    full_records: &[PepRecord],
    picked: &[usize],
) -> (DVector<f64>, Design) {
    let p = schema.n_fixed;
    let mut x = Vec::with_capacity(picked.len() * p);
    for &i in picked {
        x.extend_from_slice(schema.x_row(i));
    }
    let groups = [0, 1, 2].map(|g| Grouping {
        levels: schema.groups[g].levels.clone(),
        assignment: picked
            .iter()
            .map(|&i| schema.groups[g].assignment[i])
            .collect(),
    });
    let y = DVector::from_iterator(picked.len(), picked.iter().map(|&i| full_records[i].pep));
    (
        y,
        Design {
            fixed_names: schema.fixed_names.clone(),
            x,
            n_fixed: p,
            groups,
        },
    )
}
