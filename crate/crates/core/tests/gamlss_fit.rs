//! Fitting behavior of the mixed distributional model against simulated
//! ground truth.

use pep_core::gamlss::{
    build_design, drive_bootstrap, fit_family_ladder, fit_gamlss, ks_passes, pearson,
    quantile_residuals, simulate_records, BootstrapConfig, Family, MixedModelConfig,
    ShapeParams, SimPlan,
};

fn recovery_plan() -> SimPlan {
    SimPlan {
        tackle_counts: vec![30; 80],
        tackler_sd: 0.3,
        n_carriers: 40,
        carrier_sd: 0.08,
        n_teams: 12,
        team_sd: 0.04,
        shape: ShapeParams {
            sigma: 0.4,
            nu: 1.5,
            tau: 6.0,
        },
        seed: 101,
        ..Default::default()
    }
}

#[test]
fn sst_fit_recovers_planted_intercepts_and_beta() {
    let plan = recovery_plan();
    let (records, truth) = simulate_records(&plan);
    let fit = fit_gamlss(&records, Family::Sst, &MixedModelConfig::default()).unwrap();
    assert!(fit.converged, "fit did not converge");

    // intercept correlation with the planted truth
    let effects = fit.tackler_effects();
    let mut fitted = Vec::new();
    let mut planted = Vec::new();
    for (t, truth_e) in truth.tackler_effects.iter().enumerate() {
        let label = format!("{:08}", 1_000 + t);
        fitted.push(effects.intercept_of(&label).unwrap());
        planted.push(*truth_e);
    }
    let r = pearson(&fitted, &planted);
    assert!(r > 0.9, "intercept recovery r = {r}");

    // Betas within 3 SE. The centered-intercept convention makes the
    // fitted global intercept absorb the sample means of the planted
    // random effects, so the intercept target shifts by them.
    let absorb = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let shift = absorb(&truth.tackler_effects)
        + absorb(&truth.carrier_effects)
        + absorb(&truth.team_effects);
    for (name, true_beta) in &truth.beta_by_name {
        let j = fit.fixed_names.iter().position(|n| n == name).unwrap();
        let target = if name == "intercept" {
            true_beta + shift
        } else {
            *true_beta
        };
        let dev = (fit.beta[j] - target).abs();
        assert!(
            dev <= 3.0 * fit.beta_se[j],
            "{name}: beta {} target {target} se {}",
            fit.beta[j],
            fit.beta_se[j]
        );
    }

    // shape parameters in the right neighborhood
    assert!((fit.shape.nu - 1.5).abs() < 0.4, "nu {}", fit.shape.nu);
    assert!(fit.shape.sigma > 0.25 && fit.shape.sigma < 0.6, "sigma {}", fit.shape.sigma);
}

#[test]
fn zero_group_variance_data_collapses_variances() {
    // pure fixed-effects normal data: no planted random effects
    let plan = SimPlan {
        tackle_counts: vec![80; 100],
        tackler_sd: 0.0,
        carrier_sd: 0.0,
        team_sd: 0.0,
        family: Family::Normal,
        shape: ShapeParams {
            sigma: 0.5,
            nu: 1.0,
            tau: 10.0,
        },
        seed: 11,
        ..Default::default()
    };
    let (records, truth) = simulate_records(&plan);
    let fit = fit_gamlss(&records, Family::Normal, &MixedModelConfig::default()).unwrap();
    for g in &fit.groups {
        assert!(
            g.variance < 1e-3,
            "group {} variance {} did not shrink",
            g.name,
            g.variance
        );
    }
    for (name, true_beta) in &truth.beta_by_name {
        let j = fit.fixed_names.iter().position(|n| n == name).unwrap();
        assert!(
            (fit.beta[j] - true_beta).abs() <= 2.0 * fit.beta_se[j].max(1e-3),
            "{name}: {} vs {true_beta} (se {})",
            fit.beta[j],
            fit.beta_se[j]
        );
    }
}

#[test]
fn family_ladder_orders_penalized_loglik() {
    let plan = SimPlan {
        tackle_counts: vec![25; 40],
        seed: 33,
        shape: ShapeParams {
            sigma: 0.5,
            nu: 2.2,
            tau: 4.5,
        },
        ..Default::default()
    };
    let (records, _) = simulate_records(&plan);
    let ladder = fit_family_ladder(&records, &MixedModelConfig::default()).unwrap();
    assert!(
        ladder.sst.marginal_loglik >= ladder.tf.marginal_loglik - 1e-6,
        "SST {} < TF {}",
        ladder.sst.marginal_loglik,
        ladder.tf.marginal_loglik
    );
    assert!(
        ladder.tf.marginal_loglik >= ladder.normal.marginal_loglik - 1e-6,
        "TF {} < normal {}",
        ladder.tf.marginal_loglik,
        ladder.normal.marginal_loglik
    );
    // With genuinely skewed heavy-tailed data the gaps are material.
    assert!(ladder.sst.marginal_loglik > ladder.normal.marginal_loglik + 10.0);
}

#[test]
fn residuals_standard_normal_under_true_model() {
    let plan = SimPlan {
        tackle_counts: vec![25; 60],
        seed: 55,
        ..Default::default()
    };
    let (records, _) = simulate_records(&plan);
    let fit = fit_gamlss(&records, Family::Sst, &MixedModelConfig::default()).unwrap();
    let residuals = quantile_residuals(&fit, &records).unwrap();
    assert!(ks_passes(&residuals, 0.01), "KS rejected the residuals");
    // median residual should map near zero
    let mut sorted = residuals.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    assert!(sorted[sorted.len() / 2].abs() < 0.15);
}

#[test]
fn shrinkage_pulls_small_samples_harder() {
    // same planted ability, 8 vs 60 tackles: the small-sample estimate sits
    // closer to the center
    let mut counts = vec![30; 30];
    counts[0] = 60;
    counts[1] = 8;
    let plan = SimPlan {
        tackle_counts: counts,
        tackler_sd: 0.0, // plant explicit equal effects below
        seed: 77,
        family: Family::Normal,
        shape: ShapeParams {
            sigma: 0.5,
            nu: 1.0,
            tau: 10.0,
        },
        ..Default::default()
    };
    let (mut records, _) = simulate_records(&plan);
    // add the same strong effect to both focal tacklers
    for r in records.iter_mut() {
        if r.tackler_id == 1_000 || r.tackler_id == 1_001 {
            r.pep += 0.6;
            r.ep_hyp = r.pep;
        }
    }
    let fit = fit_gamlss(&records, Family::Normal, &MixedModelConfig::default()).unwrap();
    let eff = fit.tackler_effects();
    let big = eff.intercept_of("00001000").unwrap();
    let small = eff.intercept_of("00001001").unwrap();
    assert!(big > small, "60-tackle {big} should exceed 8-tackle {small}");
    assert!(big > 0.3, "large-sample estimate {big} too shrunken");
}

#[test]
fn duplication_with_scaled_penalty_reproduces_estimates() {
    // Doubling every record doubles the likelihood; holding shapes free but
    // halving the variance components (so the penalty doubles too) scales
    // the whole objective by two, which leaves the optimum unchanged.
    let plan = SimPlan {
        tackle_counts: vec![20; 20],
        seed: 13,
        ..Default::default()
    };
    let (records, _) = simulate_records(&plan);
    let vars = [0.04, 0.01, 0.005];
    let cfg_a = MixedModelConfig {
        fixed_variances: Some(vars),
        fixed_ridge: 0.0,
        tol: 1e-12,
        max_iter: 2000,
        ..Default::default()
    };
    let fit_a = fit_gamlss(&records, Family::Sst, &cfg_a).unwrap();

    let mut doubled = records.clone();
    doubled.extend(records.iter().cloned());
    let cfg_b = MixedModelConfig {
        fixed_variances: Some([vars[0] / 2.0, vars[1] / 2.0, vars[2] / 2.0]),
        fixed_ridge: 0.0,
        tol: 1e-12,
        max_iter: 2000,
        ..Default::default()
    };
    let fit_b = fit_gamlss(&doubled, Family::Sst, &cfg_b).unwrap();

    for (a, b) in fit_a.beta.iter().zip(&fit_b.beta) {
        assert!((a - b).abs() < 1e-5, "beta {a} vs {b}");
    }
    for (a, b) in fit_a.tackler_effects().intercepts.iter().zip(&fit_b.tackler_effects().intercepts) {
        assert!((a - b).abs() < 1e-5, "intercept {a} vs {b}");
    }
}

#[test]
fn bootstrap_deterministic_and_absent_at_center() {
    // a few one-tackle players so absences actually occur
    let mut counts = vec![12; 12];
    counts[0] = 1;
    counts[1] = 1;
    counts[2] = 1;
    let plan = SimPlan {
        tackle_counts: counts,
        records_per_drive: 4,
        seed: 21,
        family: Family::Normal,
        shape: ShapeParams {
            sigma: 0.5,
            nu: 1.0,
            tau: 10.0,
        },
        ..Default::default()
    };
    let (records, _) = simulate_records(&plan);
    let bcfg = BootstrapConfig {
        replicates: 6,
        seed: 5,
        ..Default::default()
    };
    let a = drive_bootstrap(&records, Family::Normal, &bcfg).unwrap();
    let b = drive_bootstrap(&records, Family::Normal, &bcfg).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.n_failed, 0);
    // at least one tackler should sit out at least one replicate and be
    // recorded exactly at the center
    let zeros = a
        .samples
        .iter()
        .flat_map(|r| r.iter())
        .filter(|v| **v == 0.0)
        .count();
    assert!(zeros > 0, "expected some absent-tackler center records");
}

#[test]
fn identity_link_additivity() {
    // changing one indicator flips the fitted mean by exactly its beta
    let plan = SimPlan {
        tackle_counts: vec![20; 20],
        seed: 3,
        ..Default::default()
    };
    let (records, _) = simulate_records(&plan);
    let fit = fit_gamlss(&records, Family::Sst, &MixedModelConfig::default()).unwrap();
    let (_, design) = build_design(&records).unwrap();
    let j = fit
        .fixed_names
        .iter()
        .position(|n| n == "short_yardage")
        .unwrap();

    // two records identical except short_yardage
    let mut a = records[0].clone();
    a.short_yardage = false;
    let mut b = records[0].clone();
    b.short_yardage = true;
    let mut probe = records.clone();
    probe[0] = a;
    let (_, d_a) = build_design(&probe).unwrap();
    probe[0] = b;
    let (_, d_b) = build_design(&probe).unwrap();
    let mu_a = fit.mean_at(&d_a, 0);
    let mu_b = fit.mean_at(&d_b, 0);
    assert!(((mu_b - mu_a) - fit.beta[j]).abs() < 1e-12);
    assert_eq!(design.n_rows(), records.len());
}
