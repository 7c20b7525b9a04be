//! Penalized maximum likelihood for the mixed distributional model
//! `y_i ~ family(mu_i, sigma, nu, tau)`, `mu_i = x_i beta + T + B + O`.
//!
//! Random intercepts enter as ridge-penalized coefficients with penalty
//! `1/sigma_g^2` per grouping. The fit alternates damped Newton updates of
//! `(beta, a)` with golden-section updates of the shape parameters and
//! EM-style variance updates `sigma_g^2 = (||a_g||^2 + tr_g(H^-1)) / n_g`,
//! until the penalized log-likelihood moves less than `tol`.
//!
//! The group means of the random-effect distributions are absorbed into the
//! fixed intercept: intercepts are centered at zero and zero is the
//! shrinkage target, so a level with no observations sits exactly at the
//! group mean.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector};

use super::design::{build_design, Design, GROUP_NAMES, N_GROUPS};
use super::families::{Family, ShapeKind, ShapeParams};
use crate::error::{Error, Result};
use crate::pep::PepRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedModelConfig {
    pub max_iter: usize,
    /// Stop when the penalized log-likelihood improves by less than this.
    pub tol: f64,
    /// Floor on Newton weights (the t observed information goes negative in
    /// the tails).
    pub weight_floor: f64,
    pub variance_floor: f64,
    /// Tiny ridge on fixed effects; keeps replicates with empty factor
    /// levels solvable.
    pub fixed_ridge: f64,
    /// Freeze the variance components at these values (testing hook).
    pub fixed_variances: Option<[f64; 3]>,
}

impl Default for MixedModelConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            weight_floor: 1e-6,
            variance_floor: 1e-10,
            fixed_ridge: 1e-8,
            fixed_variances: None,
        }
    }
}

/// Fitted intercepts of one grouping. `mean` is the shrinkage center the
/// intercepts are pulled toward (zero under the centered convention), the
/// value reported for levels never observed.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupEffects {
    pub name: String,
    pub levels: Vec<String>,
    pub intercepts: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl GroupEffects {
    pub fn intercept_of(&self, level: &str) -> Option<f64> {
        self.levels
            .iter()
            .position(|l| l == level)
            .map(|i| self.intercepts[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedModelFit {
    pub family: Family,
    pub fixed_names: Vec<String>,
    pub beta: Vec<f64>,
    pub beta_se: Vec<f64>,
    pub groups: [GroupEffects; N_GROUPS],
    pub shape: ShapeParams,
    pub converged: bool,
    pub iterations: usize,
    /// The optimizer's objective (joint log-likelihood of data and random
    /// effects) at the final state.
    pub penalized_loglik: f64,
    /// Laplace-approximate marginal log-likelihood: the joint objective
    /// plus `(q/2) ln 2 pi - 0.5 ln det` of the random-block curvature.
    /// Unlike the joint objective this is comparable across fits with
    /// different variance components, so family comparison uses it.
    pub marginal_loglik: f64,
}

impl MixedModelFit {
    pub fn tackler_effects(&self) -> &GroupEffects {
        &self.groups[0]
    }

    /// Fitted mean for row `i` of the design the model was fit on.
    pub fn mean_at(&self, design: &Design, i: usize) -> f64 {
        let beta = DVector::from_column_slice(&self.beta);
        let a = self.stacked_intercepts();
        design.mean_at(i, &beta, &a)
    }

    pub fn stacked_intercepts(&self) -> DVector<f64> {
        let q: usize = self.groups.iter().map(|g| g.intercepts.len()).sum();
        let mut a = DVector::zeros(q);
        let mut off = 0;
        for g in &self.groups {
            for (j, &v) in g.intercepts.iter().enumerate() {
                a[off + j] = v;
            }
            off += g.intercepts.len();
        }
        a
    }
}

/// Explicit starting point (used for warm starts along the family ladder).
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub beta: DVector<f64>,
    pub a: DVector<f64>,
    pub shape: ShapeParams,
    pub variances: [f64; 3],
}

pub fn fit_gamlss(
    records: &[PepRecord],
    family: Family,
    config: &MixedModelConfig,
) -> Result<MixedModelFit> {
    let (y, design) = build_design(records)?;
    fit_prepared(&y, &design, family, config, None)
}

struct FitState<'a> {
    y: &'a DVector<f64>,
    design: &'a Design,
    family: Family,
    config: &'a MixedModelConfig,
    beta: DVector<f64>,
    a: DVector<f64>,
    shape: ShapeParams,
    variances: [f64; 3],
    mu: DVector<f64>,
    /// ln of the smallest sigma the line search may visit; sigma collapsing
    /// to zero while the intercepts interpolate the data is the classic
    /// degenerate direction of the joint objective.
    sigma_floor_ln: f64,
    /// Cap on the group variances (a multiple of var(y)); random-intercept
    /// spread beyond the response's own scale is never identified, only
    /// pumped up by the degenerate direction above.
    variance_cap: f64,
}

impl FitState<'_> {
    fn refresh_mu(&mut self) {
        for i in 0..self.design.n_rows() {
            self.mu[i] = self.design.mean_at(i, &self.beta, &self.a);
        }
    }

    fn data_loglik(&self) -> f64 {
        data_loglik(self.family, &self.shape, self.y, &self.mu)
    }

    fn prior_loglik(&self) -> f64 {
        let mut ll = 0.0;
        for g in 0..N_GROUPS {
            let off = self.design.group_offset(g);
            let n_g = self.design.groups[g].n_levels();
            let var = self.variances[g];
            let mut ss = 0.0;
            for j in 0..n_g {
                ss += self.a[off + j] * self.a[off + j];
            }
            ll -= 0.5 * ss / var + 0.5 * n_g as f64 * (2.0 * std::f64::consts::PI * var).ln();
        }
        ll
    }

    fn penalized_loglik(&self) -> f64 {
        self.data_loglik() + self.prior_loglik()
    }

    /// Log-determinant of the random-block curvature (data weights plus
    /// penalties) at the current state.
    fn random_block_logdet(&self) -> f64 {
        let design = self.design;
        let q = design.n_random();
        let mut h = DMatrix::<f64>::zeros(q, q);
        for i in 0..design.n_rows() {
            let (_, w) = self.family.mu_score_weight(
                self.y[i],
                self.mu[i],
                &self.shape,
                self.config.weight_floor,
            );
            let coords: [usize; N_GROUPS] = std::array::from_fn(|g| {
                design.group_offset(g) + design.groups[g].assignment[i]
            });
            for &a in &coords {
                for &b in &coords {
                    h[(a, b)] += w;
                }
            }
        }
        for g in 0..N_GROUPS {
            let lambda = 1.0 / self.variances[g];
            let off = design.group_offset(g);
            for j in 0..design.groups[g].n_levels() {
                h[(off + j, off + j)] += lambda;
            }
        }
        match Cholesky::new(h) {
            Some(c) => c.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum(),
            None => f64::INFINITY,
        }
    }

    fn marginal_loglik(&self, penalized: f64) -> f64 {
        let q = self.design.n_random() as f64;
        penalized + 0.5 * q * (2.0 * std::f64::consts::PI).ln() - 0.5 * self.random_block_logdet()
    }
}

/// Batched data log-likelihood with per-call constants hoisted out of the
/// observation loop.
pub(super) fn data_loglik(
    family: Family,
    shape: &ShapeParams,
    y: &DVector<f64>,
    mu: &DVector<f64>,
) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let n = y.len();
    let sigma = shape.sigma;
    match family {
        Family::Normal => {
            let c = -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln();
            let mut ll = 0.0;
            for i in 0..n {
                let z = (y[i] - mu[i]) / sigma;
                ll += c - 0.5 * z * z;
            }
            ll
        }
        Family::Tf => {
            let tau = shape.tau;
            let c = ln_gamma((tau + 1.0) / 2.0)
                - ln_gamma(tau / 2.0)
                - 0.5 * (tau * std::f64::consts::PI).ln()
                - sigma.ln();
            let half = (tau + 1.0) / 2.0;
            let mut ll = 0.0;
            for i in 0..n {
                let z = (y[i] - mu[i]) / sigma;
                ll += c - half * (z * z / tau).ln_1p();
            }
            ll
        }
        Family::Sst => {
            let (nu, tau) = (shape.nu, shape.tau);
            let c = (2.0 / (nu + 1.0 / nu)).ln()
                + ln_gamma((tau + 1.0) / 2.0)
                - ln_gamma(tau / 2.0)
                - 0.5 * (tau * std::f64::consts::PI).ln()
                - sigma.ln();
            let half = (tau + 1.0) / 2.0;
            let mut ll = 0.0;
            for i in 0..n {
                let z = (y[i] - mu[i]) / sigma;
                let u = if z < 0.0 { z * nu } else { z / nu };
                ll += c - half * (u * u / tau).ln_1p();
            }
            ll
        }
    }
}

struct NewtonOutcome {
    ll: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// Data part of the Hessian diagonal for the random block, used by the
    /// variance fixed-point update.
    random_data_diag: Vec<f64>,
}

/// One damped Newton update of `(beta, a)`. Returns the new penalized
/// log-likelihood and the factorized system for reuse, or `None` when no
/// step length improved the objective.
fn newton_step(state: &mut FitState<'_>, current_ll: f64) -> Option<NewtonOutcome> {
    let design = state.design;
    let p = design.n_fixed;
    let q = design.n_random();
    let m = p + q;
    let n = design.n_rows();

    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut grad = DVector::<f64>::zeros(m);

    let mut idx = vec![0usize; p + N_GROUPS];
    let mut val = vec![0.0f64; p + N_GROUPS];
    for i in 0..n {
        let (u, w) =
            state
                .family
                .mu_score_weight(state.y[i], state.mu[i], &state.shape, state.config.weight_floor);
        let row = design.x_row(i);
        for j in 0..p {
            idx[j] = j;
            val[j] = row[j];
        }
        for g in 0..N_GROUPS {
            idx[p + g] = p + design.group_offset(g) + design.groups[g].assignment[i];
            val[p + g] = 1.0;
        }
        for j in 0..idx.len() {
            let vj = val[j];
            if vj == 0.0 {
                continue;
            }
            grad[idx[j]] += u * vj;
            for k in j..idx.len() {
                let vk = val[k];
                if vk == 0.0 {
                    continue;
                }
                let (a, b) = (idx[j], idx[k]);
                let add = w * vj * vk;
                if a <= b {
                    h[(a, b)] += add;
                } else {
                    h[(b, a)] += add;
                }
            }
        }
    }
    // Mirror the upper triangle.
    for a in 0..m {
        for b in (a + 1)..m {
            h[(b, a)] = h[(a, b)];
        }
    }
    let random_data_diag: Vec<f64> = (0..q).map(|j| h[(p + j, p + j)]).collect();
    // Penalties: ridge on fixed effects, 1/variance on each grouping.
    for j in 0..p {
        h[(j, j)] += state.config.fixed_ridge;
        grad[j] -= state.config.fixed_ridge * state.beta[j];
    }
    for g in 0..N_GROUPS {
        let lambda = 1.0 / state.variances[g];
        let off = design.group_offset(g);
        for j in 0..design.groups[g].n_levels() {
            h[(p + off + j, p + off + j)] += lambda;
            grad[p + off + j] -= lambda * state.a[off + j];
        }
    }

    // Factorize with escalating jitter if needed.
    let mut jitter = 0.0;
    let chol = loop {
        let mut hj = h.clone();
        if jitter > 0.0 {
            for d in 0..m {
                hj[(d, d)] += jitter;
            }
        }
        match Cholesky::new(hj) {
            Some(c) => break c,
            None => {
                jitter = if jitter == 0.0 { 1e-8 } else { jitter * 100.0 };
                if jitter > 1.0 {
                    return None;
                }
            }
        }
    };

    let delta = chol.solve(&grad);
    let beta0 = state.beta.clone();
    let a0 = state.a.clone();
    let mut scale = 1.0;
    for _ in 0..12 {
        for j in 0..p {
            state.beta[j] = beta0[j] + scale * delta[j];
        }
        for j in 0..q {
            state.a[j] = a0[j] + scale * delta[p + j];
        }
        state.refresh_mu();
        let ll = state.penalized_loglik();
        if ll > current_ll {
            return Some(NewtonOutcome {
                ll,
                chol,
                random_data_diag,
            });
        }
        scale *= 0.5;
    }
    state.beta = beta0;
    state.a = a0;
    state.refresh_mu();
    None
}

fn snapshot_params(state: &FitState<'_>) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.beta.len() + state.a.len() + 6);
    v.extend(state.beta.iter());
    v.extend(state.a.iter());
    v.push(state.shape.sigma);
    v.push(state.shape.nu);
    v.push(state.shape.tau);
    v.extend_from_slice(&state.variances);
    v
}

/// ML of `var` for independent `z_j ~ N(0, var + noise_j)` given
/// `(z_j^2, noise_j)` pairs, by golden section over `ln var`.
fn working_variance_ml(stats: &[(f64, f64)], floor: f64, cap: f64) -> f64 {
    let objective = |var: f64| -> f64 {
        stats
            .iter()
            .map(|&(zz, noise)| {
                let total = var + noise;
                -0.5 * (total.ln() + zz / total)
            })
            .sum()
    };
    let (mut lo, mut hi) = (floor.ln(), cap.max(floor * 2.0).ln());
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = objective(x1.exp());
    let mut f2 = objective(x2.exp());
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = objective(x2.exp());
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = objective(x1.exp());
        }
    }
    let x = if f1 >= f2 { x1 } else { x2 };
    // boundary means the ML sits at (or below) the floor
    let at_floor = objective(floor) >= objective(x.exp());
    if at_floor {
        floor
    } else {
        x.exp().max(floor)
    }
}

/// Golden-section maximization of the penalized log-likelihood over one
/// transformed shape coordinate.
fn shape_line_search(state: &mut FitState<'_>, kind: ShapeKind, current_ll: f64) -> f64 {
    let apply = |shape: &ShapeParams, t: f64| -> ShapeParams {
        let mut s = *shape;
        match kind {
            ShapeKind::Sigma => s.sigma = t.exp(),
            ShapeKind::Nu => s.nu = t.exp(),
            ShapeKind::Tau => s.tau = 2.0 + t.exp(),
        }
        s
    };
    let t0 = match kind {
        ShapeKind::Sigma => state.shape.sigma.ln(),
        ShapeKind::Nu => state.shape.nu.ln(),
        ShapeKind::Tau => (state.shape.tau - 2.0).ln(),
    };
    let eval = |state: &FitState<'_>, t: f64| -> f64 {
        let s = apply(&state.shape, t);
        data_loglik(state.family, &s, state.y, &state.mu) + state.prior_loglik()
    };

    // Absolute bounds keep small samples away from the degenerate
    // boundary fits (nu -> infinity with sigma -> 0 chases a half-line
    // density forever).
    let (bound_lo, bound_hi) = match kind {
        ShapeKind::Sigma => (state.sigma_floor_ln, 12.0),
        ShapeKind::Nu => (0.2f64.ln(), 5.0f64.ln()),
        ShapeKind::Tau => (0.2f64.ln(), 1e6f64.ln()),
    };
    let (mut lo, mut hi) = ((t0 - 2.0).max(bound_lo), (t0 + 2.0).min(bound_hi));
    if lo >= hi {
        return current_ll;
    }
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval(state, x1);
    let mut f2 = eval(state, x2);
    for _ in 0..48 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(state, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(state, x1);
        }
    }
    let (t_best, f_best) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if f_best > current_ll {
        state.shape = apply(&state.shape, t_best);
        f_best
    } else {
        current_ll
    }
}

pub fn fit_prepared(
    y: &DVector<f64>,
    design: &Design,
    family: Family,
    config: &MixedModelConfig,
    start: Option<StartPoint>,
) -> Result<MixedModelFit> {
    let n = design.n_rows();
    let p = design.n_fixed;
    let q = design.n_random();
    if n == 0 {
        return Err(Error::data("empty design"));
    }

    let (beta, a, shape, variances) = match start {
        Some(s) => (s.beta, s.a, s.shape, s.variances),
        None => {
            // OLS for beta (with the fixed ridge), zero intercepts, moment
            // starts for the shape.
            let mut xtx = DMatrix::<f64>::zeros(p, p);
            let mut xty = DVector::<f64>::zeros(p);
            for i in 0..n {
                let row = design.x_row(i);
                for j in 0..p {
                    xty[j] += row[j] * y[i];
                    for k in j..p {
                        xtx[(j, k)] += row[j] * row[k];
                    }
                }
            }
            for j in 0..p {
                for k in (j + 1)..p {
                    xtx[(k, j)] = xtx[(j, k)];
                }
                xtx[(j, j)] += 1e-8;
            }
            let beta = Cholesky::new(xtx)
                .map(|c| c.solve(&xty))
                .unwrap_or_else(|| DVector::zeros(p));
            let mut resid_ss = 0.0;
            for i in 0..n {
                let mut mu = 0.0;
                for (j, &xv) in design.x_row(i).iter().enumerate() {
                    mu += xv * beta[j];
                }
                resid_ss += (y[i] - mu) * (y[i] - mu);
            }
            let sigma0 = (resid_ss / n.max(2) as f64).sqrt().max(1e-4);
            let shape = ShapeParams {
                sigma: sigma0,
                nu: 1.0,
                tau: 10.0,
            };
            let variances = [0.25 * sigma0 * sigma0 + 1e-4; 3];
            (beta, DVector::zeros(q), shape, variances)
        }
    };

    let sd_y = {
        let mean = y.iter().sum::<f64>() / n as f64;
        (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n.max(2) as f64).sqrt()
    };
    let mut state = FitState {
        y,
        design,
        family,
        config,
        beta,
        a,
        shape,
        variances: config.fixed_variances.unwrap_or(variances),
        mu: DVector::zeros(n),
        sigma_floor_ln: (0.02 * sd_y).max(1e-8).ln(),
        variance_cap: (4.0 * sd_y * sd_y).max(1e-6),
    };
    state.refresh_mu();
    state.shape.validate(family)?;

    let mut ll = state.penalized_loglik();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_chol: Option<Cholesky<f64, nalgebra::Dyn>> = None;
    let mut last_diag: Option<Vec<f64>> = None;
    let mut stable = 0usize;
    let mut prev_params = snapshot_params(&state);
    // ring of recent states for limit-cycle detection (any period <= 8)
    let mut history: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::new();
    // per-group run of same-direction variance steps, for acceleration
    let mut var_streak = [0i32; N_GROUPS];
    let mut cycle_hits = 0usize;
    let mut variances_frozen = false;

    for it in 1..=config.max_iter {
        iterations = it;
        let ll_before = ll;

        for _ in 0..8 {
            match newton_step(&mut state, ll) {
                Some(out) => {
                    let gain = out.ll - ll;
                    ll = out.ll;
                    last_chol = Some(out.chol);
                    last_diag = Some(out.random_data_diag);
                    if gain < config.tol * (1.0 + ll.abs()) {
                        break;
                    }
                }
                None => break,
            }
        }

        for _ in 0..2 {
            for &kind in family.active_shapes() {
                ll = shape_line_search(&mut state, kind, ll);
            }
        }

        if config.fixed_variances.is_none() && !variances_frozen {
            if let Some(diag) = &last_diag {
                // Variance update by local ML on the working model: the
                // unpenalized level estimate z_j = a_j (1 + lambda / w_j)
                // is distributed N(0, var + 1/w_j), and the variance
                // maximizes that marginal. Geometric damping keeps the
                // alternation stable when the data barely identify the
                // split between noise and group variance (one record per
                // level). Levels with no data carry no information.
                for g in 0..N_GROUPS {
                    let off = design.group_offset(g);
                    let n_g = design.groups[g].n_levels();
                    let lambda = 1.0 / state.variances[g];
                    let mut stats: Vec<(f64, f64)> = Vec::with_capacity(n_g);
                    for j in 0..n_g {
                        let w = diag[off + j];
                        if w < 1e-12 {
                            continue;
                        }
                        let z = state.a[off + j] * (1.0 + lambda / w);
                        stats.push((z * z, 1.0 / w));
                    }
                    if stats.is_empty() {
                        continue;
                    }
                    let ml =
                        working_variance_ml(&stats, config.variance_floor, state.variance_cap);
                    let old = state.variances[g];
                    // Half-step in log space: the working approximation is
                    // local and undamped alternation two-cycles on ridges.
                    // Three same-direction steps in a row mean a monotone
                    // valley crawl instead, and the full ML step is safe.
                    let direction = (ml.ln() - old.ln()).signum() as i32;
                    if direction != 0 && direction == var_streak[g].signum() {
                        var_streak[g] += direction;
                    } else {
                        var_streak[g] = direction;
                    }
                    let target_ln = if var_streak[g].abs() >= 3 {
                        ml.ln()
                    } else {
                        old.ln() * 0.5 + ml.ln() * 0.5
                    };
                    let mut next = target_ln
                        .exp()
                        .clamp(config.variance_floor, state.variance_cap);
                    if next <= config.variance_floor * 1.001 {
                        next = config.variance_floor;
                    }
                    state.variances[g] = next;
                }
                ll = state.penalized_loglik();
            }
        }

        log::debug!(
            "iter {it}: ll {ll:.9} (delta {:.3e}) sigma {:.6} nu {:.4} tau {:.4} vars {:?}",
            ll - ll_before,
            state.shape.sigma,
            state.shape.nu,
            state.shape.tau,
            state.variances
        );
        // Converged when the fit stops moving: either the objective is
        // stable (the variance update is not a strict ascent step, so this
        // is a |delta| band, not an ascent test) or every parameter is
        // relatively still. Three consecutive quiet iterations required.
        let params = snapshot_params(&state);
        let rel_move = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs() / (1.0 + x.abs()))
                .fold(0.0f64, f64::max)
        };
        let param_move = rel_move(&prev_params, &params);
        prev_params = params.clone();

        // A recurring state means the alternation fell into a limit cycle
        // (any period up to the ring length); freeze the variances and let
        // the remaining parameters settle.
        let recurs = history.iter().rev().skip(1).any(|h| rel_move(h, &params) < 1e-6);
        if !variances_frozen && param_move > 1e-6 && recurs {
            cycle_hits += 1;
            if cycle_hits >= 3 {
                variances_frozen = true;
                log::debug!("iter {it}: variance limit cycle frozen at {:?}", state.variances);
            }
        } else {
            cycle_hits = 0;
        }
        history.push_back(params);
        if history.len() > 8 {
            history.pop_front();
        }

        let ll_quiet = (ll - ll_before).abs() < config.tol * (1.0 + ll.abs());
        if ll_quiet || param_move < 1e-8 {
            stable += 1;
            if stable >= 3 {
                converged = true;
                break;
            }
        } else {
            stable = 0;
        }
    }

    if config.max_iter == 0 {
        // Evaluation-only call: report the start point as-is.
        converged = true;
    } else if !converged {
        warn!(
            "mixed model ({}) did not converge in {} iterations (last ll {ll:.6})",
            family.as_str(),
            config.max_iter
        );
    }

    // Standard errors from the final factorization.
    let beta_se = match &last_chol {
        Some(chol) => {
            let inv = chol.inverse();
            (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect()
        }
        None => vec![f64::NAN; p],
    };

    let mut groups = Vec::with_capacity(N_GROUPS);
    for g in 0..N_GROUPS {
        let off = design.group_offset(g);
        let n_g = design.groups[g].n_levels();
        groups.push(GroupEffects {
            name: GROUP_NAMES[g].to_string(),
            levels: design.groups[g].levels.clone(),
            intercepts: (0..n_g).map(|j| state.a[off + j]).collect(),
            mean: 0.0,
            variance: state.variances[g],
        });
    }
    let groups: [GroupEffects; N_GROUPS] = groups.try_into().expect("three groups");
    let marginal_loglik = state.marginal_loglik(ll);

    Ok(MixedModelFit {
        family,
        fixed_names: design.fixed_names.clone(),
        beta: state.beta.iter().copied().collect(),
        beta_se,
        groups,
        shape: state.shape,
        converged,
        iterations,
        penalized_loglik: ll,
        marginal_loglik,
    })
}

/// Fit all three families with warm starts up the ladder (normal -> TF ->
/// SST). Each level keeps the best of a cold fit, a warm fit started from
/// the smaller family's solution, and the smaller family's solution itself
/// evaluated inside the larger family. The last candidate makes
/// `SST >= TF` exact by construction: a TF solution is an SST parameter
/// point (`nu = 1`) with an identical marginal log-likelihood.
pub struct FamilyLadder {
    pub normal: MixedModelFit,
    pub tf: MixedModelFit,
    pub sst: MixedModelFit,
}

impl FamilyLadder {
    pub fn by_family(&self, family: Family) -> &MixedModelFit {
        match family {
            Family::Normal => &self.normal,
            Family::Tf => &self.tf,
            Family::Sst => &self.sst,
        }
    }
}

fn embed_start(fit: &MixedModelFit, shape: ShapeParams) -> StartPoint {
    StartPoint {
        beta: DVector::from_column_slice(&fit.beta),
        a: fit.stacked_intercepts(),
        shape,
        variances: [
            fit.groups[0].variance,
            fit.groups[1].variance,
            fit.groups[2].variance,
        ],
    }
}

fn best_fit(candidates: Vec<MixedModelFit>) -> MixedModelFit {
    candidates
        .into_iter()
        .max_by(|a, b| a.marginal_loglik.total_cmp(&b.marginal_loglik))
        .expect("at least one candidate")
}

pub fn fit_family_ladder(records: &[PepRecord], config: &MixedModelConfig) -> Result<FamilyLadder> {
    let (y, design) = build_design(records)?;
    let eval_config = MixedModelConfig {
        max_iter: 0,
        ..config.clone()
    };
    let normal = fit_prepared(&y, &design, Family::Normal, config, None)?;

    let tf_start = embed_start(
        &normal,
        ShapeParams {
            sigma: normal.shape.sigma,
            nu: 1.0,
            tau: 50.0,
        },
    );
    let tf = best_fit(vec![
        fit_prepared(&y, &design, Family::Tf, config, None)?,
        fit_prepared(&y, &design, Family::Tf, config, Some(tf_start))?,
    ]);

    let sst_shape = ShapeParams {
        sigma: tf.shape.sigma,
        nu: 1.0,
        tau: tf.shape.tau,
    };
    let sst = best_fit(vec![
        fit_prepared(&y, &design, Family::Sst, config, None)?,
        fit_prepared(&y, &design, Family::Sst, config, Some(embed_start(&tf, sst_shape)))?,
        fit_prepared(&y, &design, Family::Sst, &eval_config, Some(embed_start(&tf, sst_shape)))?,
    ]);

    Ok(FamilyLadder { normal, tf, sst })
}
