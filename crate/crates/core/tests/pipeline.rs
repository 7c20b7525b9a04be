//! End-to-end behavior of the tracking -> forest -> EP -> PEP pipeline on
//! generated corpora with known ground truth.

use std::collections::BTreeMap;

use pep_core::dataset::FeatureDataset;
use pep_core::ep::{fit_ep_classifier, EpConfig, GridPoint};
use pep_core::forest::{fit_weekly_folds, ForestConfig};
use pep_core::pep::{compute_all_missed, compute_all_pep, missed_tackle_cost};
use pep_core::synth::{
    generate_pbp_corpus, generate_tracking_corpus, PbpGenConfig, Scenario, TrackingCorpus,
    TrackingGenConfig,
};
use pep_core::tracking::{
    build_dataset, engineer_features, parse_tracking, FeatureConfig, PlayKey, TrackingData,
};

fn parse_corpus(corpus: &TrackingCorpus) -> (TrackingData, pep_core::tracking::ParseReport) {
    let dir = tempfile::tempdir().unwrap();
    corpus.write_to(dir.path()).unwrap();
    parse_tracking(
        &dir.path().join("tracking.csv"),
        &dir.path().join("plays.csv"),
        &dir.path().join("tackles.csv"),
        &dir.path().join("players.csv"),
    )
    .unwrap()
}

fn zero_noise(n_games: usize, plays: usize, weeks: u8) -> TrackingGenConfig {
    TrackingGenConfig {
        n_games: n_games,
        plays_per_game: plays,
        n_weeks: weeks,
        noise_sd: 0.0,
        ..Default::default()
    }
}

#[test]
fn generated_corpus_parses_without_drops() {
    let corpus = generate_tracking_corpus(&zero_noise(6, 12, 3), 42);
    let (data, report) = parse_corpus(&corpus);
    assert_eq!(report.plays_dropped, 0, "zero-noise corpus must validate clean");
    assert_eq!(report.plays_kept, corpus.oracles.len());
    assert_eq!(data.plays.len(), 72);
}

#[test]
fn responses_match_script_truth_at_zero_noise() {
    let corpus = generate_tracking_corpus(&zero_noise(4, 10, 2), 9);
    let (data, _) = parse_corpus(&corpus);
    let config = FeatureConfig::default();
    let mut checked = 0;
    for oracle in &corpus.oracles {
        if oracle.penalty {
            continue;
        }
        let key = PlayKey {
            game_id: oracle.game_id,
            play_id: oracle.play_id,
        };
        let meta = &data.plays[&key];
        let frames = &data.frames[&key];
        let rows = pep_core::tracking::play_feature_rows(key, meta, frames, &config).unwrap();
        let truth: BTreeMap<u32, f64> = oracle.frame_truth.iter().copied().collect();
        for (frame_id, _, response) in &rows.rows {
            let t = truth[frame_id];
            assert!(
                (response - t).abs() < 1e-9,
                "play {} frame {frame_id}: response {response} vs script {t}",
                oracle.play_id
            );
            checked += 1;
        }
    }
    assert!(checked > 200, "only {checked} frames checked");
}

#[test]
fn tackle_frame_response_equals_post_contact_yardage() {
    let corpus = generate_tracking_corpus(&zero_noise(4, 12, 2), 31);
    let (data, _) = parse_corpus(&corpus);
    let mut checked = 0;
    for oracle in &corpus.oracles {
        if oracle.penalty || !oracle.has_tackle {
            continue;
        }
        let key = PlayKey {
            game_id: oracle.game_id,
            play_id: oracle.play_id,
        };
        let meta = &data.plays[&key];
        let frames = &data.frames[&key];
        let tackler = meta.tackler_id.unwrap();
        let frame_id =
            pep_core::tracking::identify_tackle_frame(frames, meta.ball_carrier_id, tackler)
                .unwrap();
        let carrier_x = frames
            .frame(frame_id)
            .unwrap()
            .entity(meta.ball_carrier_id)
            .unwrap()
            .x;
        let response = carrier_x - meta.end_of_play_x;
        assert!(
            (response - oracle.post_contact_yards).abs() < 1e-6,
            "play {}: contact-frame response {response} vs scripted {}",
            oracle.play_id,
            oracle.post_contact_yards
        );
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn mirrored_play_gives_identical_features() {
    use pep_core::tracking::canonical::{raw_angle, raw_x, raw_y, PlayDirection};
    use std::fmt::Write as _;

    // one canonical frame emitted in both play directions
    let mut entities: Vec<(Option<u64>, f64, f64, f64, String)> = Vec::new();
    entities.push((Some(1), 50.0, 2.0, 10.0, "OFF".into())); // carrier, dir 10
    for i in 0..10 {
        entities.push((
            Some(10 + i),
            55.0 + i as f64,
            -10.0 + 2.0 * i as f64,
            90.0,
            "OFF".into(),
        ));
    }
    for i in 0..11 {
        entities.push((
            Some(100 + i),
            44.0 - i as f64,
            3.0 - 0.7 * i as f64,
            170.0 + i as f64,
            "DEF".into(),
        ));
    }
    entities.push((None, 50.0, 2.0, 10.0, "football".into()));

    let emit = |dir: PlayDirection| -> String {
        let mut s = String::from(
            "gameId,playId,nflId,frameId,playDirection,x,y,s,a,dis,o,dir,event,club\n",
        );
        for f in 1..=2u32 {
            for (id, x, y, d, club) in &entities {
                let _ = writeln!(
                    s,
                    "1,1,{},{},{},{:.6},{:.6},5.00,0.10,0.50,{:.6},{:.6},{},{}",
                    id.map(|v| v.to_string()).unwrap_or_default(),
                    f,
                    dir.as_str(),
                    raw_x(*x, dir),
                    raw_y(*y, dir),
                    raw_angle(*d, dir),
                    raw_angle(*d, dir),
                    if f == 1 { "handoff" } else { "tackle" },
                    club,
                );
            }
        }
        s
    };
    let plays = "gameId,playId,week,driveId,quarter,down,yardsToGo,absoluteYardlineNumber,preSnapHomeScore,preSnapVisitorScore,homePossession,timeoutsOff,timeoutsDef,possessionTeam,ballCarrierId,playType,passResult,penaltyFlag,turnover,playResult\n1,1,1,1,1,1,10,60,0,0,1,3,3,OFF,1,run,,0,0,2\n";
    let tackles = "gameId,playId,nflId,tackle,pff_missedTackle\n1,1,100,1,0\n";
    let players = "nflId,position,displayName\n1,RB,Carrier\n";

    let features_for = |dir: PlayDirection| -> Vec<f64> {
        let dir_file = emit(dir);
        let plays = if dir == PlayDirection::Left {
            plays.replace(",60,", ",70,") // raw LOS for left so canonical los matches
        } else {
            plays.replace(",60,", ",50,")
        };
        let dirp = tempfile::tempdir().unwrap();
        std::fs::write(dirp.path().join("tracking.csv"), dir_file).unwrap();
        std::fs::write(dirp.path().join("plays.csv"), plays).unwrap();
        std::fs::write(dirp.path().join("tackles.csv"), tackles).unwrap();
        std::fs::write(dirp.path().join("players.csv"), players).unwrap();
        let (data, report) = parse_tracking(
            &dirp.path().join("tracking.csv"),
            &dirp.path().join("plays.csv"),
            &dirp.path().join("tackles.csv"),
            &dirp.path().join("players.csv"),
        )
        .unwrap();
        assert_eq!(report.plays_dropped, 0);
        let key = PlayKey { game_id: 1, play_id: 1 };
        let frame = data.frames[&key].frame(1).unwrap();
        engineer_features(frame, 1, &FeatureConfig::default(), None).unwrap()
    };

    let left = features_for(PlayDirection::Left);
    let right = features_for(PlayDirection::Right);
    assert_eq!(left.len(), right.len());
    for (i, (a, b)) in left.iter().zip(&right).enumerate() {
        assert!(
            (a - b).abs() < 1e-9,
            "feature {i}: left {a} vs right {b}"
        );
    }
}

#[test]
fn weekly_folds_score_each_tackle_exactly_once() {
    let corpus = generate_tracking_corpus(&zero_noise(9, 8, 9), 77);
    let (data, _) = parse_corpus(&corpus);
    let config = FeatureConfig {
        k_per_side: 3,
        frame_stride: 4,
    };
    let dataset = build_dataset(&data, &config).unwrap();
    assert_eq!(dataset.n_features(), config.n_features());
    let folds = fit_weekly_folds(
        &dataset,
        &ForestConfig {
            n_trees: 10,
            min_node_size: 5,
            mtry: None,
        },
        5,
    )
    .unwrap();
    assert_eq!(folds.held_out_weeks(), (1..=9).collect::<Vec<u8>>());

    // union of evaluation sets == full play set, each covered exactly once
    let mut covered: BTreeMap<u64, usize> = BTreeMap::new();
    for forest in &folds.forests {
        let week = forest.held_out_week.unwrap();
        for r in 0..dataset.n_rows() {
            if dataset.week[r] == week {
                *covered.entry(dataset.play_id[r]).or_insert(0) += 1;
            }
        }
    }
    let all_plays: std::collections::BTreeSet<u64> =
        dataset.play_id.iter().copied().collect();
    assert_eq!(covered.len(), all_plays.len());
}

#[test]
fn dominant_tackles_earn_positive_pep() {
    // densities must notice the tackler's removal: train on a mix heavy in
    // contrast (contains + breakaways), evaluate dominants
    let gen = TrackingGenConfig {
        n_games: 10,
        plays_per_game: 16,
        n_weeks: 5,
        noise_sd: 0.0,
        penalty_rate: 0.0,
        missed_tackle_rate: 0.0,
        dominant_fraction: 0.3,
        breakaway_fraction: 0.25,
        ..Default::default()
    };
    let corpus = generate_tracking_corpus(&gen, 1234);
    let (data, _) = parse_corpus(&corpus);
    let feature_config = FeatureConfig {
        k_per_side: 3,
        frame_stride: 3,
    };
    let dataset = build_dataset(&data, &feature_config).unwrap();
    let folds = fit_weekly_folds(
        &dataset,
        &ForestConfig {
            n_trees: 60,
            min_node_size: 5,
            mtry: None,
        },
        99,
    )
    .unwrap();

    let pbp = generate_pbp_corpus(
        &PbpGenConfig {
            n_seasons: 2,
            games_per_season: 4,
            plays_per_game: 150,
            first_season: 2020,
        },
        8,
    );
    let ep_model = fit_ep_classifier(
        &pbp,
        &EpConfig {
            grid: vec![GridPoint {
                n_rounds: 30,
                max_depth: 3,
            }],
            ..Default::default()
        },
    )
    .unwrap();

    let records = compute_all_pep(&data, &folds, &ep_model, &feature_config).unwrap();
    assert!(!records.is_empty());

    // Eq. (3)/(4) identity on every record
    for r in &records {
        assert!(
            ((r.pep - r.pep_alt) - (r.ep_real_pred - r.ep_real_obs)).abs() < 1e-9,
            "identity violated on play {}",
            r.play_id
        );
        assert!(r.pep.abs() <= 14.0);
    }

    let dominant: Vec<&pep_core::pep::PepRecord> = records
        .iter()
        .filter(|r| {
            corpus
                .oracles
                .iter()
                .any(|o| {
                    o.game_id == r.game_id
                        && o.play_id == r.play_id
                        && o.scenario == Scenario::Dominant
                        && o.counterfactual_gain >= o.scripted_gain + 15.0
                })
        })
        .collect();
    assert!(dominant.len() >= 20, "need dominant plays, got {}", dominant.len());
    let positive = dominant.iter().filter(|r| r.pep > 0.0).count();
    let mean: f64 = dominant.iter().map(|r| r.pep).sum::<f64>() / dominant.len() as f64;
    assert!(mean > 0.0, "mean dominant PEP {mean}");
    assert!(
        positive as f64 >= 0.9 * dominant.len() as f64,
        "{positive}/{} dominant plays positive",
        dominant.len()
    );
}

#[test]
fn missed_tackles_cost_points_after_breakaway() {
    let gen = TrackingGenConfig {
        n_games: 8,
        plays_per_game: 14,
        n_weeks: 4,
        noise_sd: 0.0,
        penalty_rate: 0.0,
        missed_tackle_rate: 0.5,
        dominant_fraction: 0.0,
        breakaway_fraction: 0.3,
        ..Default::default()
    };
    let corpus = generate_tracking_corpus(&gen, 99);
    let (data, _) = parse_corpus(&corpus);
    let feature_config = FeatureConfig {
        k_per_side: 3,
        frame_stride: 3,
    };
    let dataset = build_dataset(&data, &feature_config).unwrap();
    let folds = fit_weekly_folds(
        &dataset,
        &ForestConfig {
            n_trees: 40,
            min_node_size: 5,
            mtry: None,
        },
        3,
    )
    .unwrap();
    let pbp = generate_pbp_corpus(
        &PbpGenConfig {
            n_seasons: 2,
            games_per_season: 3,
            plays_per_game: 120,
            first_season: 2020,
        },
        4,
    );
    let ep_model = fit_ep_classifier(
        &pbp,
        &EpConfig {
            grid: vec![GridPoint {
                n_rounds: 25,
                max_depth: 2,
            }],
            ..Default::default()
        },
    )
    .unwrap();

    let missed = compute_all_missed(&data, &folds, &ep_model, &feature_config).unwrap();
    assert!(!missed.is_empty(), "corpus scripted no missed tackles");
    for r in &missed {
        assert_eq!(r.source, "missed");
        // identity still holds, with ep_real_pred coinciding with ep_hyp
        assert!(((r.pep - r.pep_alt) - (r.ep_real_pred - r.ep_real_obs)).abs() < 1e-9);
        assert_eq!(missed_tackle_cost(r), r.ep_real_obs - r.ep_hyp);
    }
}

#[test]
fn forest_beats_noise_on_tabular_depth3_function() {
    // a zero-noise response representable by a depth-3 tree: out-of-sample
    // MAE collapses once the forest has enough trees
    use pep_core::rng::stream_rng;
    use rand::Rng;

    let mut dataset = FeatureDataset::new((0..6).map(|i| format!("f{i}")).collect());
    let mut rng = stream_rng(2024, 0);
    let depth3 = |x: &[f64]| -> f64 {
        if x[0] <= 0.5 {
            if x[1] <= 0.3 {
                if x[2] <= 0.5 { 2.0 } else { 5.0 }
            } else if x[2] <= 0.7 {
                8.0
            } else {
                11.0
            }
        } else if x[1] <= 0.6 {
            if x[3] <= 0.4 { 14.0 } else { 17.0 }
        } else if x[3] <= 0.8 {
            20.0
        } else {
            23.0
        }
    };
    for i in 0..5400u64 {
        let row: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let y = depth3(&row);
        dataset.push_row(i, 0, (i % 9) as u8 + 1, &row, y);
    }
    let folds = fit_weekly_folds(
        &dataset,
        &ForestConfig {
            n_trees: 100,
            min_node_size: 5,
            mtry: None,
        },
        7,
    )
    .unwrap();
    let eval = pep_core::forest::FoldEvaluation::compute(&folds, &dataset).unwrap();
    assert!(
        eval.avg_mae < 0.5,
        "depth-3 oracle MAE {} (rmse {})",
        eval.avg_mae,
        eval.avg_rmse
    );
}
