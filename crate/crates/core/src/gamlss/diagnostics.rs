//! Model diagnostics: normalized quantile residuals, wormplot (detrended
//! Q-Q) data, and the small test statistics the validation suite leans on.

use log::warn;
use statrs::distribution::{ContinuousCDF, Normal};

use super::design::{build_design, Design};
use super::fit::MixedModelFit;
use crate::error::Result;
use crate::pep::PepRecord;

/// Residuals are clamped here when the family CDF under/overflows.
pub const RESIDUAL_CLAMP: f64 = 8.0;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Normalized quantile residuals: `r_i = Phi^-1(F(y_i; mu_i, shape))`.
/// Standard normal when the model is correctly specified.
pub fn quantile_residuals(fit: &MixedModelFit, records: &[PepRecord]) -> Result<Vec<f64>> {
    let (y, design) = build_design(records)?;
    Ok(quantile_residuals_prepared(fit, &y.as_slice().to_vec(), &design))
}

pub fn quantile_residuals_prepared(
    fit: &MixedModelFit,
    y: &[f64],
    design: &Design,
) -> Vec<f64> {
    let norm = std_normal();
    let mut clamped = 0usize;
    let out = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let mu = fit.mean_at(design, i);
            let p = fit.family.cdf(yi, mu, &fit.shape);
            if p <= 0.0 || p >= 1.0 {
                clamped += 1;
                return if p <= 0.0 { -RESIDUAL_CLAMP } else { RESIDUAL_CLAMP };
            }
            let r = norm.inverse_cdf(p);
            if r.abs() > RESIDUAL_CLAMP {
                clamped += 1;
                r.clamp(-RESIDUAL_CLAMP, RESIDUAL_CLAMP)
            } else {
                r
            }
        })
        .collect();
    if clamped > 0 {
        warn!("{clamped} quantile residual(s) clamped to +/-{RESIDUAL_CLAMP}");
    }
    out
}

/// One wormplot point: ordered residual against its theoretical normal
/// quantile, with a pointwise 95% band from the order-statistic
/// approximation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WormPoint {
    pub theoretical_q: f64,
    pub deviation: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

/// Detrended Q-Q data: plotting positions `(i - 0.5) / n`.
pub fn wormplot_data(residuals: &[f64]) -> Vec<WormPoint> {
    let n = residuals.len();
    if n == 0 {
        return Vec::new();
    }
    let norm = std_normal();
    let mut sorted = residuals.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let p = (i as f64 + 0.5) / n as f64;
            let q = norm.inverse_cdf(p);
            let dens = (-0.5 * q * q).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let se = (p * (1.0 - p) / n as f64).sqrt() / dens;
            WormPoint {
                theoretical_q: q,
                deviation: r - q,
                band_lo: -1.96 * se,
                band_hi: 1.96 * se,
            }
        })
        .collect()
}

/// Kolmogorov-Smirnov statistic of a sample against the standard normal.
pub fn ks_statistic(sample: &[f64]) -> f64 {
    let norm = std_normal();
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = norm.cdf(x);
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Large-sample KS critical value at level `alpha`:
/// `sqrt(-ln(alpha/2) / 2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

pub fn ks_passes(sample: &[f64], alpha: f64) -> bool {
    ks_statistic(sample) < ks_critical(sample.len(), alpha)
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// Two-sample Welch t statistic; used by the positional-fairness check.
pub fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0);
    (ma - mb) / (va / na + vb / nb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wormplot_flat_for_exact_normal_grid() {
        // residuals on the exact plotting grid detrend to zero
        let n = 101;
        let norm = std_normal();
        let residuals: Vec<f64> = (0..n)
            .map(|i| norm.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        for p in wormplot_data(&residuals) {
            assert!(p.deviation.abs() < 1e-10);
            assert!(p.band_lo < 0.0 && p.band_hi > 0.0);
        }
    }

    #[test]
    fn wormplot_single_point() {
        let pts = wormplot_data(&[0.0]);
        assert_eq!(pts.len(), 1);
        assert!(pts[0].deviation.abs() < 1e-12);
    }

    #[test]
    fn ks_accepts_normal_grid_rejects_shifted() {
        let n = 2000;
        let norm = std_normal();
        let good: Vec<f64> = (0..n)
            .map(|i| norm.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(ks_passes(&good, 0.01));
        let bad: Vec<f64> = good.iter().map(|x| x + 0.4).collect();
        assert!(!ks_passes(&bad, 0.01));
    }

    #[test]
    fn spearman_detects_monotone_relation() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x * x).collect();
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((spearman(&a, &c) + 1.0).abs() < 1e-12);
    }
}
