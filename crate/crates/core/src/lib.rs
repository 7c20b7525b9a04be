//! Tackle valuation on the expected-points scale.
//!
//! The pipeline turns player-tracking data into a per-tackle value, the
//! prevented expected points (PEP), and attributes tackling ability to
//! players:
//!
//! 1. [`tracking`] parses tracking/play/tackle files, moves everything into a
//!    canonical coordinate frame, and engineers per-frame feature vectors
//!    ranked by distance to the ball carrier. It also builds the
//!    counterfactual feature vector with the tackler removed.
//! 2. [`forest`] fits a regression random forest whose per-tree predictions
//!    are kept as an empirical conditional density of the yards still to be
//!    gained, trained leave-one-week-out.
//! 3. [`ep`] maps an end-of-play yard line to expected points through a
//!    seven-outcome boosted classifier and the next-state rules of the game.
//! 4. [`pep`] Monte-Carlo averages expected points over the counterfactual
//!    density and emits one record per tackle with PEP and PEP_alt.
//! 5. [`gamlss`] fits distributional regression models (normal / t / skew-t)
//!    with three random-intercept groupings to the PEP values, produces
//!    wormplot diagnostics, drive-level bootstrap distributions, and player
//!    rankings.
//! 6. [`synth`] generates scripted tracking corpora and a play-by-play corpus
//!    with a known next-score process, so every stage can be validated
//!    against ground truth.
//!
//! All parallel sections (tree fitting, per-play valuation, bootstrap
//! replicates) use per-task seeded RNG streams and order-preserving merges,
//! so results are byte-identical regardless of thread count. Compile without
//! the `parallel` feature for a fully sequential build.

pub mod dataset;
pub mod ep;
pub mod error;
pub mod exec;
pub mod forest;
pub mod gamlss;
pub mod io;
pub mod pep;
pub mod rng;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
