//! Response families: normal, location-scale Student t (TF), and the
//! four-parameter skew Student t (SST).
//!
//! The SST here is the spliced-scale construction: below the location the
//! t kernel argument is scaled by `nu`, above by `1/nu`, with normalizing
//! constant `2 / (nu + 1/nu)`:
//!
//! ```text
//! f(y) = 2 / (sigma * (nu + 1/nu)) * t_tau(z * nu)    for z <  0
//!        2 / (sigma * (nu + 1/nu)) * t_tau(z / nu)    for z >= 0,
//! z = (y - mu) / sigma
//! ```
//!
//! `sigma` is a scale (not the standard deviation), `nu > 0` the skewness
//! (`nu = 1` recovers TF exactly, `nu > 1` skews right), and `tau > 2` the
//! tail weight. Shape parameters are intercept-only: one (sigma, nu, tau)
//! triple per fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Tf,
    Sst,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Tf => "tf",
            Family::Sst => "sst",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Family::Normal),
            "tf" => Ok(Family::Tf),
            "sst" => Ok(Family::Sst),
            other => Err(Error::data(format!("unknown family {other:?}"))),
        }
    }
}

/// The intercept-only shape parameters. `nu`/`tau` are carried but unused
/// by the smaller families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub sigma: f64,
    pub nu: f64,
    pub tau: f64,
}

impl ShapeParams {
    pub fn validate(&self, family: Family) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::model(format!("sigma must be positive, got {}", self.sigma)));
        }
        if family == Family::Sst && !(self.nu > 0.0) {
            return Err(Error::model(format!("nu must be positive, got {}", self.nu)));
        }
        if family != Family::Normal && !(self.tau > 2.0) {
            return Err(Error::model(format!("tau must exceed 2, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Log density of the standard t with `tau` degrees of freedom.
fn log_t_kernel(u: f64, tau: f64) -> f64 {
    ln_gamma((tau + 1.0) / 2.0)
        - ln_gamma(tau / 2.0)
        - 0.5 * (tau * std::f64::consts::PI).ln()
        - (tau + 1.0) / 2.0 * (u * u / tau).ln_1p()
}

pub fn normal_logdensity(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * z * z
}

pub fn tf_logdensity(y: f64, mu: f64, sigma: f64, tau: f64) -> f64 {
    let z = (y - mu) / sigma;
    log_t_kernel(z, tau) - sigma.ln()
}

pub fn sst_logdensity(y: f64, mu: f64, sigma: f64, nu: f64, tau: f64) -> f64 {
    let z = (y - mu) / sigma;
    let c = (2.0 / (nu + 1.0 / nu)).ln();
    let u = if z < 0.0 { z * nu } else { z / nu };
    c + log_t_kernel(u, tau) - sigma.ln()
}

fn student_t(tau: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, tau).expect("valid t parameters")
}

pub fn tf_cdf(y: f64, mu: f64, sigma: f64, tau: f64) -> f64 {
    student_t(tau).cdf((y - mu) / sigma)
}

pub fn sst_cdf(y: f64, mu: f64, sigma: f64, nu: f64, tau: f64) -> f64 {
    let z = (y - mu) / sigma;
    let t = student_t(tau);
    let below = 1.0 / (1.0 + nu * nu);
    if z < 0.0 {
        2.0 * below * t.cdf(z * nu)
    } else {
        below + (1.0 - below) * (2.0 * t.cdf(z / nu) - 1.0)
    }
}

pub fn sst_quantile(p: f64, mu: f64, sigma: f64, nu: f64, tau: f64) -> f64 {
    let t = student_t(tau);
    let below = 1.0 / (1.0 + nu * nu);
    let z = if p < below {
        t.inverse_cdf(p / (2.0 * below)) / nu
    } else {
        t.inverse_cdf(0.5 * (1.0 + (p - below) / (1.0 - below))) * nu
    };
    mu + sigma * z
}

impl Family {
    pub fn logpdf(&self, y: f64, mu: f64, s: &ShapeParams) -> f64 {
        match self {
            Family::Normal => normal_logdensity(y, mu, s.sigma),
            Family::Tf => tf_logdensity(y, mu, s.sigma, s.tau),
            Family::Sst => sst_logdensity(y, mu, s.sigma, s.nu, s.tau),
        }
    }

    pub fn cdf(&self, y: f64, mu: f64, s: &ShapeParams) -> f64 {
        match self {
            Family::Normal => Normal::new(mu, s.sigma).expect("valid normal").cdf(y),
            Family::Tf => tf_cdf(y, mu, s.sigma, s.tau),
            Family::Sst => sst_cdf(y, mu, s.sigma, s.nu, s.tau),
        }
    }

    pub fn quantile(&self, p: f64, mu: f64, s: &ShapeParams) -> f64 {
        match self {
            Family::Normal => Normal::new(mu, s.sigma).expect("valid normal").inverse_cdf(p),
            Family::Tf => mu + s.sigma * student_t(s.tau).inverse_cdf(p),
            Family::Sst => sst_quantile(p, mu, s.sigma, s.nu, s.tau),
        }
    }

    /// Score and (clamped) negative second derivative of the log density
    /// with respect to `mu`, the working quantities of the Newton update.
    /// The t tails make the observed information negative far out, hence
    /// the floor.
    pub fn mu_score_weight(&self, y: f64, mu: f64, s: &ShapeParams, floor: f64) -> (f64, f64) {
        let sigma = s.sigma;
        let z = (y - mu) / sigma;
        match self {
            Family::Normal => (z / sigma, 1.0 / (sigma * sigma)),
            Family::Tf => {
                let tau = s.tau;
                let denom = tau + z * z;
                let score = (tau + 1.0) * z / (sigma * denom);
                let w = (tau + 1.0) * (tau - z * z) / (sigma * sigma * denom * denom);
                (score, w.max(floor))
            }
            Family::Sst => {
                let (nu, tau) = (s.nu, s.tau);
                // chain rule through u = z*nu (left) or z/nu (right)
                let (u, du_dz) = if z < 0.0 { (z * nu, nu) } else { (z / nu, 1.0 / nu) };
                let denom = tau + u * u;
                let score = (tau + 1.0) * u * du_dz / (sigma * denom);
                let w = (tau + 1.0) * (tau - u * u) * du_dz * du_dz
                    / (sigma * sigma * denom * denom);
                (score, w.max(floor))
            }
        }
    }

    /// Which of (sigma, nu, tau) this family estimates.
    pub fn active_shapes(&self) -> &'static [ShapeKind] {
        match self {
            Family::Normal => &[ShapeKind::Sigma],
            Family::Tf => &[ShapeKind::Sigma, ShapeKind::Tau],
            Family::Sst => &[ShapeKind::Sigma, ShapeKind::Nu, ShapeKind::Tau],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sigma,
    Nu,
    Tau,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sst_with_unit_skew_is_tf() {
        for i in 0..1000 {
            let y = -12.0 + i as f64 * 0.024;
            let a = sst_logdensity(y, 0.3, 1.4, 1.0, 5.5);
            let b = tf_logdensity(y, 0.3, 1.4, 5.5);
            assert!((a - b).abs() < 1e-12, "y={y}: {a} vs {b}");
        }
    }

    #[test]
    fn tf_approaches_normal_for_huge_tau() {
        for i in 0..100 {
            let y = -4.0 + i as f64 * 0.08;
            let a = tf_logdensity(y, 0.0, 1.0, 1e6);
            let b = normal_logdensity(y, 0.0, 1.0);
            assert!((a - b).abs() < 1e-3, "y={y}: {a} vs {b}");
        }
    }

    /// Simpson-rule quadrature oracle for the density mass.
    fn integrate_density(mu: f64, sigma: f64, nu: f64, tau: f64) -> f64 {
        let lo = mu - 50.0 * sigma;
        let hi = mu + 50.0 * sigma;
        let n = 200_000; // even
        let h = (hi - lo) / n as f64;
        let f = |y: f64| sst_logdensity(y, mu, sigma, nu, tau).exp();
        let mut acc = f(lo) + f(hi);
        for k in 1..n {
            let y = lo + h * k as f64;
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        acc * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        // tau >= 5 keeps the tail mass beyond 50 sigma under 1e-9
        for &(mu, sigma, nu, tau) in &[
            (0.0, 1.0, 1.5, 5.0),
            (2.0, 0.5, 0.7, 8.0),
            (-1.0, 2.0, 1.0, 5.0),
            (0.5, 1.0, 2.5, 12.0),
        ] {
            let mass = integrate_density(mu, sigma, nu, tau);
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "mass {mass} at ({mu},{sigma},{nu},{tau})"
            );
        }
    }

    #[test]
    fn cdf_matches_quadrature_and_quantile_inverts() {
        let (mu, sigma, nu, tau) = (0.5, 1.2, 1.8, 6.0);
        // spot-check CDF against incremental integration
        let lo = mu - 40.0 * sigma;
        let mut mass = 0.0;
        let n = 400_000;
        let hi = mu + 8.0 * sigma;
        let h = (hi - lo) / n as f64;
        let mut prev = sst_logdensity(lo, mu, sigma, nu, tau).exp();
        let mut checks = vec![(mu - 2.0, 0.0), (mu, 0.0), (mu + 3.0, 0.0)];
        for k in 1..=n {
            let y = lo + h * k as f64;
            let cur = sst_logdensity(y, mu, sigma, nu, tau).exp();
            mass += 0.5 * (prev + cur) * h;
            prev = cur;
            for c in checks.iter_mut() {
                if (y - c.0).abs() < h {
                    c.1 = mass;
                }
            }
        }
        for (y, m) in checks {
            let cdf = sst_cdf(y, mu, sigma, nu, tau);
            assert!((cdf - m).abs() < 1e-4, "cdf({y}) = {cdf}, quadrature {m}");
        }
        for &p in &[0.01, 0.2, 0.5, 0.8, 0.99] {
            let q = sst_quantile(p, mu, sigma, nu, tau);
            let back = sst_cdf(q, mu, sigma, nu, tau);
            assert!((back - p).abs() < 1e-9, "p {p} -> q {q} -> {back}");
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let s = ShapeParams {
            sigma: 1.3,
            nu: 1.7,
            tau: 5.0,
        };
        for family in [Family::Normal, Family::Tf, Family::Sst] {
            for &y in &[-3.0, -0.4, 0.0, 0.4, 2.5] {
                let mu = 0.2;
                let h = 1e-6;
                let fd = (family.logpdf(y, mu + h, &s) - family.logpdf(y, mu - h, &s)) / (2.0 * h);
                let (score, w) = family.mu_score_weight(y, mu, &s, 1e-10);
                assert!(
                    (score - fd).abs() < 1e-5,
                    "{family:?} y={y}: score {score} vs fd {fd}"
                );
                assert!(w > 0.0);
            }
        }
    }

    #[test]
    fn invalid_shapes_rejected() {
        let bad_sigma = ShapeParams { sigma: 0.0, nu: 1.0, tau: 5.0 };
        assert!(bad_sigma.validate(Family::Normal).is_err());
        let bad_tau = ShapeParams { sigma: 1.0, nu: 1.0, tau: 2.0 };
        assert!(bad_tau.validate(Family::Sst).is_err());
        let ok = ShapeParams { sigma: 1.0, nu: 0.5, tau: 4.0 };
        assert!(ok.validate(Family::Sst).is_ok());
    }
}
