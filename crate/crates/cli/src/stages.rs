//! Pipeline stages. Every stage validates its inputs, writes its artifacts
//! atomically, and records a manifest with config hash, seed, and file
//! digests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::info;

use pep_core::dataset::FeatureDataset;
use pep_core::ep::{best_constant_mae, evaluate_ep, fit_ep_classifier, load_pbp_csv, EpModel};
use pep_core::forest::{
    fit_weekly_folds, DensityForest, FoldEvaluation, WeeklyFolds,
};
use pep_core::gamlss::{
    drive_bootstrap, fit_family_ladder, quantile_residuals, rank_players, wormplot_data,
    BootstrapConfig, BootstrapDistribution, MixedModelFit,
};
use pep_core::io::{read_to_string, write_atomic, write_csv_atomic};
use pep_core::pep::{
    aggregate_pep, compute_all_missed, compute_all_pep, GroupBy, PepRecord,
};
use pep_core::rng::stream_seed;
use pep_core::synth::{generate_pbp_corpus, generate_tracking_corpus, pbp_to_csv};
use pep_core::tracking::{
    build_dataset, engineer_features, identify_tackle_frame, load_players, parse_tracking,
    PlayKey, TrackingData,
};

use crate::config::PipelineConfig;
use crate::manifest::Manifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Ingest,
    FitForest,
    FitEp,
    Pep,
    FitMixed,
    Bootstrap,
    Rank,
    Report,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Ingest => "ingest",
            Stage::FitForest => "fit-forest",
            Stage::FitEp => "fit-ep",
            Stage::Pep => "pep",
            Stage::FitMixed => "fit-mixed",
            Stage::Bootstrap => "bootstrap",
            Stage::Rank => "rank",
            Stage::Report => "report",
        }
    }
}

pub struct StageContext {
    pub config: PipelineConfig,
    pub master_seed: u64,
    pub config_json: String,
}

impl StageContext {
    fn work_dir(&self) -> &Path {
        &self.config.paths.work_dir
    }

    fn manifest(&self, stage: Stage) -> Manifest {
        Manifest::new(stage.name(), &self.config_json, self.master_seed)
    }

    fn require(&self, path: &Path, produced_by: &str) -> Result<(), CliError> {
        if path.exists() {
            Ok(())
        } else {
            Err(CliError::usage(format!(
                "{} not found; run {produced_by}",
                path.display()
            )))
        }
    }
}

pub fn run_stage(stage: Stage, ctx: &StageContext) -> Result<(), CliError> {
    std::fs::create_dir_all(ctx.work_dir())
        .map_err(|e| CliError::data(format!("cannot create work dir: {e}")))?;
    match stage {
        Stage::Simulate => simulate(ctx),
        Stage::Ingest => ingest(ctx),
        Stage::FitForest => fit_forest(ctx),
        Stage::FitEp => fit_ep(ctx),
        Stage::Pep => pep(ctx),
        Stage::FitMixed => fit_mixed(ctx),
        Stage::Bootstrap => bootstrap(ctx),
        Stage::Rank => rank(ctx),
        Stage::Report => report(ctx),
    }
}

fn simulate(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let corpus = generate_tracking_corpus(
        &ctx.config.simulate.tracking,
        stream_seed(ctx.master_seed, 0x7261_636b),
    );
    corpus.write_to(dir)?;
    let pbp_rows = generate_pbp_corpus(
        &ctx.config.simulate.pbp,
        stream_seed(ctx.master_seed, 0x7062_70),
    );
    write_atomic(&dir.join("pbp.csv"), pbp_to_csv(&pbp_rows).as_bytes())?;

    let mut manifest = ctx.manifest(Stage::Simulate);
    for name in [
        "tracking.csv",
        "plays.csv",
        "tackles.csv",
        "players.csv",
        "oracle_plays.csv",
        "oracle_frames.csv",
        "pbp.csv",
    ] {
        manifest.add_output(&dir.join(name))?;
    }
    manifest.write(dir)?;
    info!(
        "simulate: {} plays, {} pbp rows",
        corpus.oracles.len(),
        pbp_rows.len()
    );
    Ok(())
}

fn load_tracking(ctx: &StageContext) -> Result<TrackingData, CliError> {
    let p = &ctx.config.paths;
    for (path, hint) in [
        (p.tracking(), "simulate (or set paths.tracking)"),
        (p.plays(), "simulate (or set paths.plays)"),
        (p.tackles(), "simulate (or set paths.tackles)"),
        (p.players(), "simulate (or set paths.players)"),
    ] {
        ctx.require(&path, hint)?;
    }
    let (data, report) = parse_tracking(&p.tracking(), &p.plays(), &p.tackles(), &p.players())?;
    info!(
        "parsed {} plays ({} dropped)",
        report.plays_kept, report.plays_dropped
    );
    Ok(data)
}

fn ingest(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let data = load_tracking(ctx)?;
    let feature_config = ctx.config.features.to_core();
    let dataset = build_dataset(&data, &feature_config)?;
    write_atomic(&dir.join("features.csv"), dataset.to_csv().as_bytes())?;

    // Tackle-frame index for every penalty-free tackle play.
    let mut index = String::from("game_id,play_id,tackler_id,frame_id\n");
    for (key, meta) in &data.plays {
        if meta.penalty_flag {
            continue;
        }
        let Some(tackler) = meta.tackler_id else { continue };
        let frames = &data.frames[key];
        let frame_id = identify_tackle_frame(frames, meta.ball_carrier_id, tackler)?;
        let _ = writeln!(index, "{},{},{},{}", key.game_id, key.play_id, tackler, frame_id);
    }
    write_atomic(&dir.join("tackle_frames.csv"), index.as_bytes())?;

    let mut manifest = ctx.manifest(Stage::Ingest);
    let p = &ctx.config.paths;
    for input in [p.tracking(), p.plays(), p.tackles(), p.players()] {
        manifest.add_input(&input)?;
    }
    manifest.add_output(&dir.join("features.csv"))?;
    manifest.add_output(&dir.join("tackle_frames.csv"))?;
    manifest.write(dir)?;
    info!("ingest: {} training rows", dataset.n_rows());
    Ok(())
}

fn fit_forest(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let features_path = dir.join("features.csv");
    ctx.require(&features_path, "ingest")?;
    let dataset = FeatureDataset::from_csv(&read_to_string(&features_path)?)?;
    let folds = fit_weekly_folds(
        &dataset,
        &ctx.config.forest.to_core(),
        stream_seed(ctx.master_seed, 0x666f_7265),
    )?;
    let eval = FoldEvaluation::compute(&folds, &dataset)?;

    let mut manifest = ctx.manifest(Stage::FitForest);
    manifest.add_input(&features_path)?;
    for forest in &folds.forests {
        let week = forest.held_out_week.expect("fold week");
        let path = dir.join(format!("forest_week{week}.bin"));
        forest.save(&path)?;
        manifest.add_output(&path)?;
    }
    let eval_path = dir.join("forest_eval.json");
    let mut body = serde_json::to_string_pretty(&eval)
        .map_err(|e| CliError::data(format!("forest eval encode: {e}")))?;
    body.push('\n');
    write_atomic(&eval_path, body.as_bytes())?;
    manifest.add_output(&eval_path)?;
    manifest.write(dir)?;
    info!(
        "fit-forest: {} folds, avg rmse {:.3}, avg mae {:.3}",
        folds.forests.len(),
        eval.avg_rmse,
        eval.avg_mae
    );
    Ok(())
}

fn fit_ep(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let pbp_path = ctx.config.paths.pbp();
    ctx.require(&pbp_path, "simulate (or set paths.pbp)")?;
    let rows = load_pbp_csv(&pbp_path)?;
    let ep_config = ctx
        .config
        .ep
        .to_core(stream_seed(ctx.master_seed, 0x6570));
    let model = fit_ep_classifier(&rows, &ep_config)?;
    let train_mae = evaluate_ep(&model, &rows)?;
    let baseline = best_constant_mae(&rows)?;

    let model_path = dir.join("ep_model.bin");
    model.save(&model_path)?;

    #[derive(serde::Serialize)]
    struct EpEval<'a> {
        chosen: &'a pep_core::ep::GridPoint,
        cv_table: &'a [(pep_core::ep::GridPoint, f64)],
        training_mae: f64,
        best_constant_mae: f64,
        seasons: &'a [u16],
    }
    let eval_path = dir.join("ep_eval.json");
    let mut body = serde_json::to_string_pretty(&EpEval {
        chosen: &model.chosen,
        cv_table: &model.cv_table,
        training_mae: train_mae,
        best_constant_mae: baseline,
        seasons: &model.seasons,
    })
    .map_err(|e| CliError::data(format!("ep eval encode: {e}")))?;
    body.push('\n');
    write_atomic(&eval_path, body.as_bytes())?;

    let mut manifest = ctx.manifest(Stage::FitEp);
    manifest.add_input(&pbp_path)?;
    manifest.add_output(&model_path)?;
    manifest.add_output(&eval_path)?;
    manifest.write(dir)?;
    info!(
        "fit-ep: chose {:?}, cv over {} seasons, training mae {train_mae:.4}",
        model.chosen,
        model.seasons.len()
    );
    Ok(())
}

fn load_folds(ctx: &StageContext, data: &TrackingData) -> Result<WeeklyFolds, CliError> {
    let dir = ctx.work_dir();
    let mut weeks: Vec<u8> = data.plays.values().map(|m| m.week).collect();
    weeks.sort_unstable();
    weeks.dedup();
    let mut forests = Vec::new();
    for week in weeks {
        let path = dir.join(format!("forest_week{week}.bin"));
        ctx.require(&path, "fit-forest")?;
        forests.push(DensityForest::load(&path)?);
    }
    Ok(WeeklyFolds { forests })
}

fn load_ep_model(ctx: &StageContext) -> Result<EpModel, CliError> {
    let path = ctx.work_dir().join("ep_model.bin");
    ctx.require(&path, "fit-ep")?;
    Ok(EpModel::load(&path)?)
}

fn pep(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let data = load_tracking(ctx)?;
    let folds = load_folds(ctx, &data)?;
    let model = load_ep_model(ctx)?;
    let feature_config = ctx.config.features.to_core();

    let records = compute_all_pep(&data, &folds, &model, &feature_config)?;
    let records_path = dir.join("pep_records.csv");
    write_csv_atomic(&records_path, &records)?;

    let mut manifest = ctx.manifest(Stage::Pep);
    let p = &ctx.config.paths;
    for input in [p.tracking(), p.plays(), p.tackles(), p.players()] {
        manifest.add_input(&input)?;
    }
    manifest.add_input(&dir.join("ep_model.bin"))?;
    manifest.add_output(&records_path)?;

    if ctx.config.pep.missed_tackles {
        let missed = compute_all_missed(&data, &folds, &model, &feature_config)?;
        let missed_path = dir.join("missed_records.csv");
        write_csv_atomic(&missed_path, &missed)?;
        manifest.add_output(&missed_path)?;
        info!("pep: {} tackle records, {} missed-tackle records", records.len(), missed.len());
    } else {
        info!("pep: {} tackle records", records.len());
    }
    manifest.write(dir)?;
    Ok(())
}

pub fn load_pep_records(path: &Path) -> Result<Vec<PepRecord>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<PepRecord>().enumerate() {
        out.push(rec.map_err(|e| {
            CliError::data(format!("{} row {}: {e}", path.display(), i + 2))
        })?);
    }
    Ok(out)
}

fn mixed_fit_json(fit: &MixedModelFit) -> Result<String, CliError> {
    #[derive(serde::Serialize)]
    struct Coef<'a> {
        name: &'a str,
        estimate: f64,
        se: f64,
    }
    #[derive(serde::Serialize)]
    struct FitReport<'a> {
        family: &'a str,
        converged: bool,
        iterations: usize,
        penalized_loglik: f64,
        marginal_loglik: f64,
        sigma: f64,
        nu: f64,
        tau: f64,
        coefficients: Vec<Coef<'a>>,
        groups: &'a [pep_core::gamlss::GroupEffects; 3],
    }
    let report = FitReport {
        family: fit.family.as_str(),
        converged: fit.converged,
        iterations: fit.iterations,
        penalized_loglik: fit.penalized_loglik,
        marginal_loglik: fit.marginal_loglik,
        sigma: fit.shape.sigma,
        nu: fit.shape.nu,
        tau: fit.shape.tau,
        coefficients: fit
            .fixed_names
            .iter()
            .zip(fit.beta.iter().zip(&fit.beta_se))
            .map(|(name, (est, se))| Coef {
                name,
                estimate: *est,
                se: *se,
            })
            .collect(),
        groups: &fit.groups,
    };
    let mut body = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::data(format!("fit report encode: {e}")))?;
    body.push('\n');
    Ok(body)
}

fn fit_mixed(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let records_path = dir.join("pep_records.csv");
    ctx.require(&records_path, "pep")?;
    let records = load_pep_records(&records_path)?;

    let ladder = fit_family_ladder(&records, &ctx.config.mixed.to_core())?;
    let mut manifest = ctx.manifest(Stage::FitMixed);
    manifest.add_input(&records_path)?;

    for fit in [&ladder.normal, &ladder.tf, &ladder.sst] {
        let fit_path = dir.join(format!("mixed_fit_{}.json", fit.family.as_str()));
        write_atomic(&fit_path, mixed_fit_json(fit)?.as_bytes())?;
        manifest.add_output(&fit_path)?;

        let residuals = quantile_residuals(fit, &records)?;
        let worm = wormplot_data(&residuals);
        let worm_path = dir.join(format!("wormplot_{}.csv", fit.family.as_str()));
        write_csv_atomic(&worm_path, &worm)?;
        manifest.add_output(&worm_path)?;
    }
    manifest.write(dir)?;

    let chosen = ctx.config.mixed.family().map_err(CliError::from)?;
    let fit = ladder.by_family(chosen);
    if !fit.converged {
        return Err(CliError::non_convergence(format!(
            "{} fit did not converge in {} iterations",
            fit.family.as_str(),
            fit.iterations
        )));
    }
    info!(
        "fit-mixed: marginal loglik normal {:.3} / tf {:.3} / sst {:.3}",
        ladder.normal.marginal_loglik, ladder.tf.marginal_loglik, ladder.sst.marginal_loglik
    );
    Ok(())
}

fn bootstrap(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let records_path = dir.join("pep_records.csv");
    ctx.require(&records_path, "pep")?;
    let records = load_pep_records(&records_path)?;
    let family = ctx.config.mixed.family().map_err(CliError::from)?;

    let config = BootstrapConfig {
        replicates: ctx.config.bootstrap.replicates,
        seed: stream_seed(ctx.master_seed, 0x626f_6f74),
        min_success_fraction: ctx.config.bootstrap.min_success_fraction,
        fit: ctx.config.mixed.to_core(),
    };
    let dist = drive_bootstrap(&records, family, &config)?;

    let mut body = String::from("tackler_id,replicate,intercept\n");
    for (r, sample) in dist.samples.iter().enumerate() {
        for (t, value) in sample.iter().enumerate() {
            let _ = writeln!(body, "{},{},{}", dist.tackler_levels[t], r, value);
        }
    }
    let out_path = dir.join("bootstrap.csv");
    write_atomic(&out_path, body.as_bytes())?;

    let mut manifest = ctx.manifest(Stage::Bootstrap);
    manifest.add_input(&records_path)?;
    manifest.add_output(&out_path)?;
    manifest.write(dir)?;
    if dist.flagged {
        return Err(CliError::non_convergence(format!(
            "bootstrap flagged: {} of {} replicates failed",
            dist.n_failed, ctx.config.bootstrap.replicates
        )));
    }
    info!(
        "bootstrap: {} replicates ({} failed)",
        dist.replicate_count(),
        dist.n_failed
    );
    Ok(())
}

pub fn load_bootstrap_csv(path: &Path, records: &[PepRecord]) -> Result<BootstrapDistribution, CliError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "tackler_id,replicate,intercept" {
        return Err(CliError::data(format!("{}: unexpected header", path.display())));
    }
    let mut by_replicate: BTreeMap<usize, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let bad = || CliError::data(format!("{} row {}: malformed", path.display(), i + 2));
        let tackler = parts.next().ok_or_else(bad)?.to_string();
        let replicate: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let value: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        by_replicate.entry(replicate).or_default().insert(tackler, value);
    }
    let mut tackler_levels: Vec<String> = by_replicate
        .values()
        .next()
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    tackler_levels.sort();
    let mut samples = Vec::with_capacity(by_replicate.len());
    for (_, m) in by_replicate {
        let mut row = Vec::with_capacity(tackler_levels.len());
        for level in &tackler_levels {
            row.push(*m.get(level).ok_or_else(|| {
                CliError::data(format!("{}: replicate missing tackler {level}", path.display()))
            })?);
        }
        samples.push(row);
    }
    let mut n_tackles = vec![0usize; tackler_levels.len()];
    for r in records {
        let label = format!("{:08}", r.tackler_id);
        if let Ok(pos) = tackler_levels.binary_search(&label) {
            n_tackles[pos] += 1;
        }
    }
    Ok(BootstrapDistribution {
        tackler_levels,
        n_tackles,
        samples,
        n_failed: 0,
        flagged: false,
    })
}

fn rank(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let records_path = dir.join("pep_records.csv");
    let bootstrap_path = dir.join("bootstrap.csv");
    ctx.require(&records_path, "pep")?;
    ctx.require(&bootstrap_path, "bootstrap")?;
    let players_path = ctx.config.paths.players();
    ctx.require(&players_path, "simulate (or set paths.players)")?;

    let records = load_pep_records(&records_path)?;
    let dist = load_bootstrap_csv(&bootstrap_path, &records)?;
    let roster = load_players(&players_path)?;
    let rows = rank_players(&dist, &records, &roster, ctx.config.rank.min_tackles);

    let out_path = dir.join("ranking.csv");
    write_csv_atomic(&out_path, &rows)?;

    let mut manifest = ctx.manifest(Stage::Rank);
    manifest.add_input(&records_path)?;
    manifest.add_input(&bootstrap_path)?;
    manifest.add_input(&players_path)?;
    manifest.add_output(&out_path)?;
    manifest.write(dir)?;
    info!("rank: {} players above threshold", rows.len());
    Ok(())
}

fn report(ctx: &StageContext) -> Result<(), CliError> {
    let dir = ctx.work_dir();
    let records_path = dir.join("pep_records.csv");
    ctx.require(&records_path, "pep")?;
    let records = load_pep_records(&records_path)?;
    let data = load_tracking(ctx)?;
    let folds = load_folds(ctx, &data)?;
    let feature_config = ctx.config.features.to_core();

    // Conditional densities for the chosen play (default: first valued
    // tackle play) under both scenarios.
    let (game_id, play_id) = match (ctx.config.report.game_id, ctx.config.report.play_id) {
        (Some(g), Some(p)) => (g, p),
        _ => {
            let r = records.first().ok_or_else(|| {
                CliError::data("no PEP records to report on".to_string())
            })?;
            (r.game_id, r.play_id)
        }
    };
    let key = PlayKey { game_id, play_id };
    let meta = data
        .plays
        .get(&key)
        .ok_or_else(|| CliError::data(format!("play {game_id}/{play_id} not found")))?;
    let tackler = meta
        .tackler_id
        .ok_or_else(|| CliError::data(format!("play {game_id}/{play_id} has no tackle")))?;
    let frames = &data.frames[&key];
    let frame_id = identify_tackle_frame(frames, meta.ball_carrier_id, tackler)?;
    let frame = frames
        .frame(frame_id)
        .ok_or_else(|| CliError::data("tackle frame missing".to_string()))?;
    let carrier_x = frame
        .entity(meta.ball_carrier_id)
        .ok_or_else(|| CliError::data("carrier missing from tackle frame".to_string()))?
        .x;
    let forest = folds.for_week(meta.week)?;

    let mut density = String::from("game_id,play_id,frame_id,scenario,draw_index,yhat,eopy_x\n");
    for (scenario, exclude) in [("real", None), ("removed", Some(tackler))] {
        let row = engineer_features(frame, meta.ball_carrier_id, &feature_config, exclude)?;
        let draws = forest.predict_density(&row)?;
        for (i, d) in draws.draws.iter().enumerate() {
            let _ = writeln!(
                density,
                "{game_id},{play_id},{frame_id},{scenario},{i},{d},{}",
                carrier_x - d
            );
        }
    }
    let density_path = dir.join("density_play.csv");
    write_atomic(&density_path, density.as_bytes())?;

    // Cumulative and average PEP aggregations for positions and players.
    let pos_path = dir.join("aggregates_position.csv");
    write_csv_atomic(&pos_path, &aggregate_pep(&records, GroupBy::Position))?;
    let player_path = dir.join("aggregates_player.csv");
    write_csv_atomic(&player_path, &aggregate_pep(&records, GroupBy::Player))?;

    let mut manifest = ctx.manifest(Stage::Report);
    manifest.add_input(&records_path)?;
    manifest.add_output(&density_path)?;
    manifest.add_output(&pos_path)?;
    manifest.add_output(&player_path)?;
    manifest.write(dir)?;
    info!("report: densities for play {game_id}/{play_id} at frame {frame_id}");
    Ok(())
}

/// Convenience used by tests: the full pipeline in stage order.
pub const ALL_STAGES: [Stage; 9] = [
    Stage::Simulate,
    Stage::Ingest,
    Stage::FitForest,
    Stage::FitEp,
    Stage::Pep,
    Stage::FitMixed,
    Stage::Bootstrap,
    Stage::Rank,
    Stage::Report,
];
