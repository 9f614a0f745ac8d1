//! Experiment configuration: one JSON file describing data source, schema,
//! offset, folds, and model, with flag and `--set` overrides layered on top.
//! The resolved config's hash stamps every artifact a run produces.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stormcast::features::SchemaVariant;
use stormcast::flow::FlowParams;
use stormcast::models::{ModelKind, TrainConfig};
use stormcast::raster::{GeoBounds, Timestamp};
use stormcast::sampling::validate_offset;
use stormcast::synth::SceneConfig;

use crate::PipelineError;

/// Where the frames and lightning records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generate a scene on the fly.
    Synthetic { scene: SceneConfig },
    /// Load stored frame files and a lightning CSV. Absence of strikes is
    /// only meaningful inside the stated coverage window.
    Files {
        frames_dir: PathBuf,
        lightning_csv: PathBuf,
        bounds: GeoBounds,
        coverage_start: Timestamp,
        coverage_end: Timestamp,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldConfig {
    pub k: usize,
    pub margin_minutes: i64,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig { k: 3, margin_minutes: 720 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub schema: SchemaVariant,
    /// Forecast offset: labels come from `[t + offset, t + offset + 15 min)`.
    pub offset_minutes: i64,
    pub folds: FoldConfig,
    pub model: TrainConfig,
    pub flow: FlowParams,
    /// Dataset seed: tile balancing and fold bookkeeping. The model's own
    /// seed lives in `model.seed`.
    pub seed: u64,
    /// Output directory; empty means "must be given on the command line".
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic { scene: SceneConfig::default() },
            schema: SchemaVariant::ErrorOnly153,
            offset_minutes: 0,
            folds: FoldConfig::default(),
            model: TrainConfig::random_forest_tuned(7),
            flow: FlowParams::default(),
            seed: 7,
            out: PathBuf::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        match &self.data {
            DataSource::Synthetic { scene } => {
                scene.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
            }
            DataSource::Files { frames_dir, lightning_csv, coverage_start, coverage_end, .. } => {
                if !frames_dir.is_dir() {
                    return bad(format!("frames directory {} does not exist", frames_dir.display()));
                }
                if !lightning_csv.is_file() {
                    return bad(format!("lightning CSV {} does not exist", lightning_csv.display()));
                }
                if coverage_end.unix_minutes() <= coverage_start.unix_minutes() {
                    return bad(format!(
                        "lightning coverage ends {coverage_end} at or before it starts {coverage_start}"
                    ));
                }
            }
        }
        if self.schema == SchemaVariant::Custom {
            return bad("schema must be error153 or ext129".into());
        }
        validate_offset(self.offset_minutes)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.folds.k < 2 {
            return bad(format!("folds.k must be at least 2, got {}", self.folds.k));
        }
        if self.folds.margin_minutes < 0 {
            return bad("folds.margin_minutes must be non-negative".into());
        }
        self.model.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.flow.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Hash of everything that determines the run's outputs. The output
    /// directory is excluded on purpose: the same experiment written to two
    /// places produces byte-identical artifacts, including this hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Applies one `key=value` override using dotted-path JSON addressing, e.g.
/// `model.n_estimators=300` or `data.scene.frames=96`. The value is parsed
/// as JSON when possible, else taken as a string.
pub fn apply_override(config: &mut ExperimentConfig, pair: &str) -> Result<(), PipelineError> {
    let (key, raw) = pair
        .split_once('=')
        .ok_or_else(|| PipelineError::Config(format!("--set needs key=value, got `{pair}`")))?;
    if key.is_empty() {
        return Err(PipelineError::Config(format!("--set has an empty key in `{pair}`")));
    }
    let mut root = serde_json::to_value(&*config).expect("config serializes");
    let mut slot = &mut root;
    for segment in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|map| map.get_mut(segment))
            .ok_or_else(|| PipelineError::Config(format!("--set key `{key}` does not exist")))?;
    }
    *slot = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    *config = serde_json::from_value(root)
        .map_err(|e| PipelineError::Config(format!("--set {key}: {e}")))?;
    Ok(())
}

/// Parses the `--offset` grammar `h:mm`.
pub fn parse_offset(text: &str) -> Result<i64, String> {
    let (h, m) = text.split_once(':').ok_or_else(|| format!("`{text}` is not h:mm"))?;
    let hours: i64 = h.parse().map_err(|_| format!("bad hour in `{text}`"))?;
    let minutes: i64 = m.parse().map_err(|_| format!("bad minutes in `{text}`"))?;
    if h.is_empty() || m.len() != 2 || hours < 0 || !(0..60).contains(&minutes) {
        return Err(format!("`{text}` is not h:mm"));
    }
    Ok(hours * 60 + minutes)
}

/// Formats minutes back into the `h:mm` flag grammar.
pub fn format_offset(minutes: i64) -> String {
    format!("{}:{:02}", minutes / 60, minutes % 60)
}

/// Parses `--schema`. The long form `extended_129` is accepted as an alias.
pub fn parse_schema(text: &str) -> Result<SchemaVariant, String> {
    match text {
        "error153" | "error_153" => Ok(SchemaVariant::ErrorOnly153),
        "ext129" | "extended129" | "extended_129" => Ok(SchemaVariant::Extended129),
        other => Err(format!("`{other}` is not one of error153, ext129")),
    }
}

pub fn parse_model(text: &str) -> Result<ModelKind, String> {
    ModelKind::from_code(text)
        .ok_or_else(|| format!("`{text}` is not one of dt, rf, ab, gb, mlp"))
}

/// Flag overrides in application order: model kind replaces the training
/// config, paper mode then swaps in the published operating point, narrow
/// flags follow, and `--set` pairs apply last so they always win.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model: Option<ModelKind>,
    pub paper_mode: bool,
    pub schema: Option<SchemaVariant>,
    pub offset_minutes: Option<i64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub set: Vec<String>,
}

/// The hyperparameters the published comparison ran each family with.
fn paper_model(kind: ModelKind, seed: u64) -> TrainConfig {
    match kind {
        ModelKind::RandomForest => TrainConfig::random_forest_tuned(seed),
        other => TrainConfig::for_kind(other, seed),
    }
}

pub fn resolve(base: ExperimentConfig, overrides: &Overrides) -> Result<ExperimentConfig, PipelineError> {
    let mut config = base;
    if let Some(kind) = overrides.model {
        config.model = TrainConfig::for_kind(kind, config.model.seed);
    }
    if overrides.paper_mode {
        config.folds = FoldConfig { k: 3, margin_minutes: 720 };
        config.model = paper_model(config.model.kind, config.model.seed);
    }
    if let Some(schema) = overrides.schema {
        config.schema = schema;
    }
    if let Some(offset) = overrides.offset_minutes {
        config.offset_minutes = offset;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
        config.model.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.out = out.clone();
    }
    for pair in &overrides.set {
        apply_override(&mut config, pair)?;
    }
    if config.out.as_os_str().is_empty() {
        return Err(PipelineError::Config(
            "no output directory: pass --out or set `out` in the config".into(),
        ));
    }
    config.validate()?;
    Ok(config)
}
