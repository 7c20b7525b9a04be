//! Distributional regression with random intercepts for PEP values:
//! families (normal / TF / SST), penalized-ML fitting, quantile-residual
//! diagnostics, drive-level bootstrap, and player rankings.

mod bootstrap;
mod design;
mod diagnostics;
mod families;
mod fit;
mod rank;
mod simulate;

pub use bootstrap::{drive_bootstrap, BootstrapConfig, BootstrapDistribution};
pub use design::{build_design, design_rows_for, Design, Grouping, GROUP_NAMES, N_GROUPS};
pub use diagnostics::{
    ks_critical, ks_passes, ks_statistic, pearson, quantile_residuals,
    quantile_residuals_prepared, spearman, welch_t, wormplot_data, WormPoint, RESIDUAL_CLAMP,
};
pub use families::{
    normal_logdensity, sst_cdf, sst_logdensity, sst_quantile, tf_cdf, tf_logdensity, Family,
    ShapeKind, ShapeParams,
};
pub use fit::{
    fit_family_ladder, fit_gamlss, fit_prepared, FamilyLadder, GroupEffects, MixedModelConfig,
    MixedModelFit, StartPoint,
};
pub use rank::{rank_players, RankingRow};
pub use simulate::{
    simulate_records, SimPlan, SimTruth, SIM_CARRIER_POSITIONS, SIM_TACKLER_POSITIONS,
};
