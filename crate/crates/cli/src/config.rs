//! Pipeline configuration: one TOML file validated up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pep_core::ep::{EpConfig, GridPoint, WeightScheme};
use pep_core::forest::ForestConfig;
use pep_core::gamlss::{Family, MixedModelConfig};
use pep_core::synth::{PbpGenConfig, TrackingGenConfig};
use pep_core::tracking::FeatureConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub forest: ForestSection,
    #[serde(default)]
    pub ep: EpSection,
    #[serde(default)]
    pub pep: PepSection,
    #[serde(default)]
    pub mixed: MixedSection,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub rank: RankSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory holding every pipeline artifact.
    pub work_dir: PathBuf,
    /// Input files; default to the simulate outputs inside `work_dir`.
    pub tracking: Option<PathBuf>,
    pub plays: Option<PathBuf>,
    pub tackles: Option<PathBuf>,
    pub players: Option<PathBuf>,
    pub pbp: Option<PathBuf>,
}

impl Paths {
    pub fn tracking(&self) -> PathBuf {
        self.tracking.clone().unwrap_or_else(|| self.work_dir.join("tracking.csv"))
    }
    pub fn plays(&self) -> PathBuf {
        self.plays.clone().unwrap_or_else(|| self.work_dir.join("plays.csv"))
    }
    pub fn tackles(&self) -> PathBuf {
        self.tackles.clone().unwrap_or_else(|| self.work_dir.join("tackles.csv"))
    }
    pub fn players(&self) -> PathBuf {
        self.players.clone().unwrap_or_else(|| self.work_dir.join("players.csv"))
    }
    pub fn pbp(&self) -> PathBuf {
        self.pbp.clone().unwrap_or_else(|| self.work_dir.join("pbp.csv"))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub tracking: TrackingGenConfig,
    pub pbp: PbpGenConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    pub k_per_side: usize,
    pub frame_stride: usize,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            k_per_side: f.k_per_side,
            frame_stride: f.frame_stride,
        }
    }
}

impl FeaturesConfig {
    pub fn to_core(&self) -> FeatureConfig {
        FeatureConfig {
            k_per_side: self.k_per_side,
            frame_stride: self.frame_stride,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_node_size: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        let f = ForestConfig::default();
        Self {
            n_trees: f.n_trees,
            mtry: f.mtry,
            min_node_size: f.min_node_size,
        }
    }
}

impl ForestSection {
    pub fn to_core(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            mtry: self.mtry,
            min_node_size: self.min_node_size,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpSection {
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub weighting: WeightScheme,
    pub grid: Vec<GridPoint>,
}

impl Default for EpSection {
    fn default() -> Self {
        let e = EpConfig::default();
        Self {
            learning_rate: e.learning_rate,
            lambda: e.lambda,
            min_child_weight: e.min_child_weight,
            weighting: e.weighting,
            grid: e.grid,
        }
    }
}

impl EpSection {
    pub fn to_core(&self, seed: u64) -> EpConfig {
        EpConfig {
            grid: self.grid.clone(),
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
            weighting: self.weighting,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PepSection {
    /// Also value missed tackles (optional stage output, off by default).
    pub missed_tackles: bool,
}

impl Default for PepSection {
    fn default() -> Self {
        Self {
            missed_tackles: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixedSection {
    /// Family whose fit feeds the bootstrap and rankings.
    pub family: String,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MixedSection {
    fn default() -> Self {
        Self {
            family: "sst".into(),
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

impl MixedSection {
    pub fn family(&self) -> Result<Family, pep_core::Error> {
        Family::parse(&self.family)
    }

    pub fn to_core(&self) -> MixedModelConfig {
        MixedModelConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub replicates: usize,
    pub min_success_fraction: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            replicates: 1000,
            min_success_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankSection {
    /// Strictly-greater threshold: players with exactly this many tackles
    /// drop out.
    pub min_tackles: usize,
}

impl Default for RankSection {
    fn default() -> Self {
        Self { min_tackles: 10 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Play whose conditional densities the report emits (defaults to the
    /// first valued tackle play).
    pub game_id: Option<u64>,
    pub play_id: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub master: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { master: 42 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; 0 uses the default pool size.
    pub jobs: usize,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}
impl std::error::Error for ConfigError {}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |name: &str, ok: bool, detail: String| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError(format!("{name}: {detail}")))
            }
        };
        self.features
            .to_core()
            .validate()
            .map_err(|e| ConfigError(format!("features: {e}")))?;
        field(
            "forest.n_trees",
            self.forest.n_trees >= 1,
            format!("must be at least 1, got {}", self.forest.n_trees),
        )?;
        field(
            "forest.min_node_size",
            self.forest.min_node_size >= 1,
            "must be at least 1".into(),
        )?;
        field(
            "ep.grid",
            !self.ep.grid.is_empty(),
            "must contain at least one grid point".into(),
        )?;
        field(
            "ep.learning_rate",
            self.ep.learning_rate > 0.0 && self.ep.learning_rate <= 1.0,
            format!("must be in (0, 1], got {}", self.ep.learning_rate),
        )?;
        self.mixed
            .family()
            .map_err(|e| ConfigError(format!("mixed.family: {e}")))?;
        field("mixed.tol", self.mixed.tol > 0.0, "must be positive".into())?;
        field(
            "bootstrap.replicates",
            self.bootstrap.replicates >= 1,
            "must be at least 1".into(),
        )?;
        field(
            "bootstrap.min_success_fraction",
            (0.0..=1.0).contains(&self.bootstrap.min_success_fraction),
            "must be in [0, 1]".into(),
        )?;
        for (name, v) in [
            ("simulate.noise_sd", self.simulate.tracking.noise_sd),
            ("simulate.run_fraction", self.simulate.tracking.run_fraction),
            ("simulate.penalty_rate", self.simulate.tracking.penalty_rate),
            (
                "simulate.missed_tackle_rate",
                self.simulate.tracking.missed_tackle_rate,
            ),
            (
                "simulate.dominant_fraction",
                self.simulate.tracking.dominant_fraction,
            ),
            (
                "simulate.breakaway_fraction",
                self.simulate.tracking.breakaway_fraction,
            ),
        ] {
            let ok = if name == "simulate.noise_sd" {
                v >= 0.0
            } else {
                (0.0..=1.0).contains(&v)
            };
            field(name, ok, format!("out of range: {v}"))?;
        }
        field(
            "simulate.fractions",
            self.simulate.tracking.dominant_fraction + self.simulate.tracking.breakaway_fraction
                <= 1.0,
            "dominant_fraction + breakaway_fraction must not exceed 1".into(),
        )?;
        field(
            "simulate.pbp.n_seasons",
            self.simulate.pbp.n_seasons >= 2,
            "leave-one-season-out needs at least 2 seasons".into(),
        )?;
        field(
            "simulate.n_weeks",
            (1..=9).contains(&self.simulate.tracking.n_weeks),
            format!("must be in 1..=9, got {}", self.simulate.tracking.n_weeks),
        )?;
        Ok(())
    }

    /// Canonical serialized form hashed into manifests. Filesystem
    /// locations and the parallelism degree are deliberately absent: input
    /// files are digested by content, and neither can change any output.
    pub fn canonical_json(&self, effective_seed: u64) -> String {
        #[derive(Serialize)]
        struct Effective<'a> {
            simulate: &'a SimulateConfig,
            features: &'a FeaturesConfig,
            forest: &'a ForestSection,
            ep: &'a EpSection,
            pep: &'a PepSection,
            mixed: &'a MixedSection,
            bootstrap: &'a BootstrapSection,
            rank: &'a RankSection,
            report: &'a ReportSection,
            effective_seed: u64,
        }
        serde_json::to_string(&Effective {
            simulate: &self.simulate,
            features: &self.features,
            forest: &self.forest,
            ep: &self.ep,
            pep: &self.pep,
            mixed: &self.mixed,
            bootstrap: &self.bootstrap,
            rank: &self.rank,
            report: &self.report,
            effective_seed,
        })
        .expect("config serializes")
    }
}
