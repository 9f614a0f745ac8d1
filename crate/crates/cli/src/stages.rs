//! The pipeline stages and their on-disk artifacts.
//!
//! Every stage stamps what it writes with the resolved config's hash and
//! refuses to read a predecessor artifact stamped by a different config, so
//! a run directory can never silently mix experiments. `run_experiment` is
//! nothing but the stages called in order, which is what makes the
//! stage-by-stage decomposition bit-identical to the monolithic run.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use stormcast::eval::{
    metrics, roc_auc, write_importance_csv, write_roc_csv, ConfusionMatrix, EvalReport,
    FeatureImportance, FoldReport,
};
use stormcast::features::{
    assemble, build_schema, normalize, FeatureMatrix, NormalizationStats, SchemaVariant,
};
use stormcast::flow::{error_field, predict_next, FlowParams};
use stormcast::ingest::{
    load_column, load_frame, load_matrix, parse_lightning_csv, store_column, store_frame,
    store_matrix, write_lightning_csv,
};
use stormcast::models::{
    gini_importance, load_model, save_model, train_model, ModelFile, ModelKind, TrainConfig,
    TrainedModel,
};
use stormcast::raster::{
    rasterize, ChannelId, FrameTag, GridFrame, GridGeometry, Timestamp, CHANNELS, WINDOW_MINUTES,
};
use stormcast::sampling::{balance_per_image, frame_seed, label_tiles, make_folds, RasterStore};
use stormcast::synth::generate_scene;

use crate::config::{DataSource, ExperimentConfig};
use crate::{stage_err, PipelineError};

// ---------------------------------------------------------------------------
// Artifact layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StagePaths {
    out: PathBuf,
}

impl StagePaths {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        StagePaths { out: out.into() }
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn lock(&self) -> PathBuf {
        self.out.join(".lock")
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.out.join("config.json")
    }

    pub fn frames_dir(&self) -> PathBuf {
        self.out.join("frames")
    }

    pub fn frames_index(&self) -> PathBuf {
        self.frames_dir().join("index.json")
    }

    pub fn lightning_csv(&self) -> PathBuf {
        self.frames_dir().join("lightning.csv")
    }

    pub fn flow_dir(&self) -> PathBuf {
        self.out.join("flow")
    }

    pub fn flow_index(&self) -> PathBuf {
        self.flow_dir().join("index.json")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.out.join("features")
    }

    pub fn matrix(&self) -> PathBuf {
        self.features_dir().join("matrix.bin")
    }

    pub fn labels(&self) -> PathBuf {
        self.features_dir().join("labels.bin")
    }

    pub fn features_index(&self) -> PathBuf {
        self.features_dir().join("index.json")
    }

    pub fn folds(&self) -> PathBuf {
        self.out.join("folds.json")
    }

    pub fn model(&self) -> PathBuf {
        self.out.join("model.json")
    }

    pub fn model_meta(&self) -> PathBuf {
        self.out.join("model.meta.json")
    }

    pub fn report_json(&self) -> PathBuf {
        self.out.join("report.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.out.join("report.txt")
    }

    pub fn roc_csv(&self) -> PathBuf {
        self.out.join("roc.csv")
    }

    pub fn importance_csv(&self) -> PathBuf {
        self.out.join("importance.csv")
    }
}

/// Held for the duration of a command; at most one experiment runs per
/// output directory.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(paths: &StagePaths) -> Result<Self, PipelineError> {
        fs::create_dir_all(paths.out())
            .map_err(|source| PipelineError::Io { path: paths.out().to_path_buf(), source })?;
        let path = paths.lock();
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(PipelineError::Locked { dir: paths.out().to_path_buf() })
            }
            Err(source) => Err(PipelineError::Io { path, source }),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

// ---------------------------------------------------------------------------
// Stamped JSON artifacts
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolvedConfigFile {
    pub config_hash: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FramesIndex {
    pub config_hash: String,
    pub geometry: GridGeometry,
    /// Frame instants in ascending order; every instant has all 9 channels.
    pub timestamps: Vec<Timestamp>,
    pub channels: Vec<String>,
    /// Lightning record coverage `[start, end)`; absence of strikes is only
    /// meaningful inside it.
    pub coverage_start: Timestamp,
    pub coverage_end: Timestamp,
    pub n_records: usize,
    pub n_skipped_rows: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FlowIndex {
    pub config_hash: String,
    pub params: FlowParams,
    /// Instants that have error frames (both predecessors existed).
    pub timestamps: Vec<Timestamp>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeaturesIndex {
    pub config_hash: String,
    pub schema: SchemaVariant,
    pub schema_fingerprint: String,
    pub offset_minutes: i64,
    pub n_rows: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Frames that contributed at least one row.
    pub frames_used: usize,
    /// Frames where the classes could not be equalized.
    pub degenerate_frames: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FoldsFile {
    pub config_hash: String,
    pub k: usize,
    pub margin_minutes: i64,
    pub spec: stormcast::sampling::FoldSpec,
    /// Fold id per matrix row; -1 means margin-discarded.
    pub row_folds: Vec<i32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub config_hash: String,
    pub report: EvalReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, json).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact { path: path.to_path_buf() })
        }
        Err(source) => return Err(PipelineError::Io { path: path.to_path_buf(), source }),
    };
    serde_json::from_str(&text).map_err(|e| PipelineError::Stage {
        stage: "artifact",
        message: format!("{}: {e}", path.display()),
    })
}

fn check_hash(path: &Path, found: &str, expected: &str) -> Result<(), PipelineError> {
    if found != expected {
        return Err(PipelineError::HashMismatch {
            path: path.to_path_buf(),
            found: found.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

/// `f<unix minutes>_<tag>.bin` with `:` made filesystem-friendly.
fn frame_file(dir: &Path, t: Timestamp, tag: &str) -> PathBuf {
    dir.join(format!("f{:010}_{}.bin", t.unix_minutes(), tag.replace(':', "_")))
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

/// Materializes the frame cache and the canonical lightning CSV, either by
/// rendering the configured synthetic scene or by loading stored data.
pub fn stage_ingest(config: &ExperimentConfig, paths: &StagePaths) -> Result<(), PipelineError> {
    const STAGE: &str = "ingest";
    let fail = |e: &dyn std::fmt::Display| stage_err(STAGE, e);
    let dir = paths.frames_dir();
    fs::create_dir_all(&dir).map_err(|source| PipelineError::Io { path: dir.clone(), source })?;

    let index = match &config.data {
        DataSource::Synthetic { scene } => {
            let rendered = generate_scene(scene).map_err(|e| fail(&e))?;
            for frame in &rendered.frames {
                for grid in &frame.channels {
                    let path = frame_file(&dir, grid.timestamp(), grid.tag().as_str());
                    store_frame(grid, &path).map_err(|e| fail(&e))?;
                }
            }
            write_lightning_csv(&rendered.records, &paths.lightning_csv())
                .map_err(|e| fail(&e))?;
            FramesIndex {
                config_hash: config.hash(),
                geometry: rendered.geometry,
                timestamps: rendered.frames.iter().map(|f| f.timestamp).collect(),
                channels: CHANNELS.iter().map(|c| c.name().to_string()).collect(),
                coverage_start: scene.start,
                coverage_end: scene.start.plus_minutes(scene.frames as i64 * WINDOW_MINUTES),
                n_records: rendered.records.len(),
                n_skipped_rows: 0,
            }
        }
        DataSource::Files { frames_dir, lightning_csv, bounds, coverage_start, coverage_end } => {
            let mut files: Vec<PathBuf> = fs::read_dir(frames_dir)
                .map_err(|source| PipelineError::Io { path: frames_dir.clone(), source })?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "bin"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(fail(&format!("no .bin frames in {}", frames_dir.display())));
            }

            // Group by instant; every instant must carry all nine channels
            // exactly once on a shared geometry.
            let mut by_time: std::collections::BTreeMap<i64, Vec<GridFrame>> = Default::default();
            let mut geometry: Option<GridGeometry> = None;
            for file in &files {
                let frame = load_frame(file, *bounds).map_err(|e| fail(&e))?;
                if frame.tag().channel_id().is_none() {
                    return Err(fail(&format!(
                        "{}: tag `{}` is not a channel",
                        file.display(),
                        frame.tag()
                    )));
                }
                if !frame.timestamp().is_frame_aligned() {
                    return Err(fail(&format!(
                        "{}: timestamp {} is off the 15-minute grid",
                        file.display(),
                        frame.timestamp()
                    )));
                }
                match geometry {
                    None => geometry = Some(*frame.geometry()),
                    Some(g) if g != *frame.geometry() => {
                        return Err(fail(&format!("{}: geometry differs", file.display())))
                    }
                    Some(_) => {}
                }
                by_time.entry(frame.timestamp().unix_minutes()).or_default().push(frame);
            }
            let geometry = geometry.expect("at least one frame");
            let mut timestamps = Vec::with_capacity(by_time.len());
            for (minutes, frames) in &mut by_time {
                frames.sort_by_key(|f| f.tag().channel_id().expect("checked above").index());
                let tags: Vec<ChannelId> =
                    frames.iter().map(|f| f.tag().channel_id().unwrap()).collect();
                if tags != CHANNELS {
                    return Err(fail(&format!(
                        "instant {} has channels {:?}, expected all nine exactly once",
                        Timestamp::from_unix_minutes(*minutes),
                        tags
                    )));
                }
                timestamps.push(frames[0].timestamp());
                for frame in frames.iter() {
                    let path = frame_file(&dir, frame.timestamp(), frame.tag().as_str());
                    store_frame(frame, &path).map_err(|e| fail(&e))?;
                }
            }

            let outcome = parse_lightning_csv(lightning_csv).map_err(|e| fail(&e))?;
            write_lightning_csv(&outcome.records, &paths.lightning_csv())
                .map_err(|e| fail(&e))?;
            FramesIndex {
                config_hash: config.hash(),
                geometry,
                timestamps,
                channels: CHANNELS.iter().map(|c| c.name().to_string()).collect(),
                coverage_start: *coverage_start,
                coverage_end: *coverage_end,
                n_records: outcome.records.len(),
                n_skipped_rows: outcome.skipped.len(),
            }
        }
    };

    if index.timestamps.len() < 3 {
        return Err(stage_err(
            STAGE,
            format!("{} frame instants cannot support prediction", index.timestamps.len()),
        ));
    }
    write_json(&paths.frames_index(), &index)
}

fn read_frames_index(config: &ExperimentConfig, paths: &StagePaths) -> Result<FramesIndex, PipelineError> {
    let index: FramesIndex = read_json(&paths.frames_index())?;
    check_hash(&paths.frames_index(), &index.config_hash, &config.hash())?;
    Ok(index)
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

/// Predicts every frame with two predecessors from those predecessors and
/// stores the per-channel absolute prediction-error fields.
pub fn stage_flow(config: &ExperimentConfig, paths: &StagePaths) -> Result<(), PipelineError> {
    const STAGE: &str = "flow";
    let fail = |e: &dyn std::fmt::Display| stage_err(STAGE, e);
    let frames = read_frames_index(config, paths)?;
    let dir = paths.flow_dir();
    fs::create_dir_all(&dir).map_err(|source| PipelineError::Io { path: dir.clone(), source })?;

    let bounds = frames.geometry.bounds();
    let mut cache: HashMap<(i64, usize), GridFrame> = HashMap::new();
    for &t in &frames.timestamps {
        for ch in CHANNELS {
            let path = frame_file(&paths.frames_dir(), t, ch.name());
            let frame = load_frame(&path, bounds).map_err(|e| fail(&e))?;
            cache.insert((t.unix_minutes(), ch.index()), frame);
        }
    }

    // A frame is predictable when both 15- and 30-minute predecessors exist.
    let eligible: Vec<Timestamp> = frames
        .timestamps
        .iter()
        .copied()
        .filter(|t| {
            let m = t.unix_minutes();
            cache.contains_key(&(m - WINDOW_MINUTES, 0)) && cache.contains_key(&(m - 2 * WINDOW_MINUTES, 0))
        })
        .collect();
    if eligible.is_empty() {
        return Err(fail(&"no frame has two predecessors; need a contiguous run of 3"));
    }

    let tasks: Vec<(Timestamp, ChannelId)> = eligible
        .iter()
        .flat_map(|&t| CHANNELS.iter().map(move |&ch| (t, ch)))
        .collect();
    tasks
        .par_iter()
        .map(|&(t, ch)| -> Result<(), PipelineError> {
            let m = t.unix_minutes();
            let t30 = &cache[&(m - 2 * WINDOW_MINUTES, ch.index())];
            let t15 = &cache[&(m - WINDOW_MINUTES, ch.index())];
            let actual = &cache[&(m, ch.index())];
            let predicted = predict_next(t30, t15, &config.flow).map_err(|e| fail(&e))?;
            let error = error_field(actual, &predicted).map_err(|e| fail(&e))?;
            let path = frame_file(&dir, t, error.tag().as_str());
            store_frame(&error, &path).map_err(|e| fail(&e))?;
            Ok(())
        })
        .collect::<Result<Vec<()>, _>>()?;

    write_json(
        &paths.flow_index(),
        &FlowIndex { config_hash: config.hash(), params: config.flow, timestamps: eligible },
    )
}

fn read_flow_index(config: &ExperimentConfig, paths: &StagePaths) -> Result<FlowIndex, PipelineError> {
    let index: FlowIndex = read_json(&paths.flow_index())?;
    check_hash(&paths.flow_index(), &index.config_hash, &config.hash())?;
    Ok(index)
}

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

/// Labels every predictable frame at the configured offset, balances classes
/// per frame, and assembles the selected tiles into one feature matrix.
pub fn stage_featurize(config: &ExperimentConfig, paths: &StagePaths) -> Result<(), PipelineError> {
    const STAGE: &str = "featurize";
    let fail = |e: &dyn std::fmt::Display| stage_err(STAGE, e);
    let frames = read_frames_index(config, paths)?;
    let flow = read_flow_index(config, paths)?;
    fs::create_dir_all(paths.features_dir())
        .map_err(|source| PipelineError::Io { path: paths.features_dir(), source })?;

    let schema = build_schema(config.schema);
    let needs_raw = schema.names().iter().any(|n| n.starts_with("raw:"));
    let bounds = frames.geometry.bounds();

    // Strike rasters for every covered window; windows without strikes are
    // legitimately all-negative.
    let outcome = parse_lightning_csv(&paths.lightning_csv()).map_err(|e| fail(&e))?;
    let mut store = RasterStore::new(frames.geometry, frames.coverage_start, frames.coverage_end)
        .map_err(|e| fail(&e))?;
    let mut window = frames.coverage_start;
    while window.unix_minutes() < frames.coverage_end.unix_minutes() {
        let rastered = rasterize(&outcome.records, &frames.geometry, window);
        store.insert(rastered.raster).map_err(|e| fail(&e))?;
        window = window.plus_minutes(WINDOW_MINUTES);
    }

    let mut keys = Vec::new();
    let mut values = Vec::new();
    let mut labels: Vec<i32> = Vec::new();
    let mut n_positive = 0usize;
    let mut frames_used = 0usize;
    let mut degenerate_frames = 0usize;

    for &t in &flow.timestamps {
        if !store.covers(t.plus_minutes(config.offset_minutes)) {
            continue;
        }
        let frame_index = frames
            .timestamps
            .iter()
            .position(|&x| x == t)
            .expect("flow instants come from the frames index") as u64;
        let frame_labels =
            label_tiles(&store, t, config.offset_minutes).map_err(|e| fail(&e))?;
        let selection = balance_per_image(&frame_labels, frame_seed(config.seed, frame_index));
        if selection.degenerate {
            degenerate_frames += 1;
        }
        if selection.tiles.is_empty() {
            continue;
        }

        let errors: Vec<GridFrame> = CHANNELS
            .iter()
            .map(|&ch| {
                let tag = FrameTag::error_channel(ch);
                load_frame(&frame_file(&paths.flow_dir(), t, tag.as_str()), bounds)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| fail(&e))?;
        let raws: Option<Vec<GridFrame>> = if needs_raw {
            Some(
                CHANNELS
                    .iter()
                    .map(|&ch| load_frame(&frame_file(&paths.frames_dir(), t, ch.name()), bounds))
                    .collect::<Result<_, _>>()
                    .map_err(|e| fail(&e))?,
            )
        } else {
            None
        };
        let matrix = assemble(&errors, raws.as_deref(), &schema, &selection.tiles)
            .map_err(|e| fail(&e))?;

        keys.extend_from_slice(matrix.keys());
        values.extend_from_slice(matrix.values());
        for &(x, y) in &selection.tiles {
            let label = frame_labels.get(x, y);
            n_positive += usize::from(label);
            labels.push(i32::from(label));
        }
        frames_used += 1;
    }

    if keys.is_empty() {
        return Err(fail(&"no frame produced any labeled tiles; nothing to learn from"));
    }
    let matrix = FeatureMatrix::new(schema.clone(), keys, values).map_err(|e| fail(&e))?;
    store_matrix(&matrix, &paths.matrix()).map_err(|e| fail(&e))?;
    store_column(&labels, "label", &paths.labels()).map_err(|e| fail(&e))?;
    write_json(
        &paths.features_index(),
        &FeaturesIndex {
            config_hash: config.hash(),
            schema: config.schema,
            schema_fingerprint: schema.fingerprint(),
            offset_minutes: config.offset_minutes,
            n_rows: matrix.n_rows(),
            n_positive,
            n_negative: matrix.n_rows() - n_positive,
            frames_used,
            degenerate_frames,
        },
    )
}

fn read_features(
    config: &ExperimentConfig,
    paths: &StagePaths,
) -> Result<(FeaturesIndex, FeatureMatrix, Vec<bool>), PipelineError> {
    const STAGE: &str = "artifact";
    let index: FeaturesIndex = read_json(&paths.features_index())?;
    check_hash(&paths.features_index(), &index.config_hash, &config.hash())?;
    let matrix_path = paths.matrix();
    if !matrix_path.is_file() {
        return Err(PipelineError::MissingArtifact { path: matrix_path });
    }
    let matrix = load_matrix(&matrix_path).map_err(|e| stage_err(STAGE, e))?;
    let labels_path = paths.labels();
    if !labels_path.is_file() {
        return Err(PipelineError::MissingArtifact { path: labels_path });
    }
    let (tag, raw) = load_column(&labels_path).map_err(|e| stage_err(STAGE, e))?;
    if tag != "label" {
        return Err(stage_err(STAGE, format!("label column is tagged `{tag}`")));
    }
    if raw.len() != matrix.n_rows() {
        return Err(stage_err(
            STAGE,
            format!("{} labels for {} rows", raw.len(), matrix.n_rows()),
        ));
    }
    Ok((index, matrix, raw.into_iter().map(|v| v != 0).collect()))
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

/// Builds time-contiguous folds with enforced margins over the matrix's
/// frame instants and assigns each row its fold.
pub fn stage_split(config: &ExperimentConfig, paths: &StagePaths) -> Result<(), PipelineError> {
    const STAGE: &str = "split";
    let (_, matrix, _) = read_features(config, paths)?;
    let times: Vec<Timestamp> = matrix.keys().iter().map(|k| k.timestamp).collect();
    let spec = make_folds(&times, config.folds.k, config.folds.margin_minutes, config.seed)
        .map_err(|e| stage_err(STAGE, &e))?;
    let row_folds = spec.assign(&times);
    write_json(
        &paths.folds(),
        &FoldsFile {
            config_hash: config.hash(),
            k: spec.k(),
            margin_minutes: config.folds.margin_minutes,
            spec,
            row_folds,
        },
    )
}

fn read_folds(config: &ExperimentConfig, paths: &StagePaths) -> Result<FoldsFile, PipelineError> {
    let folds: FoldsFile = read_json(&paths.folds())?;
    check_hash(&paths.folds(), &folds.config_hash, &config.hash())?;
    Ok(folds)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Trains on the selected rows; MLP inputs are min/max scaled first and the
/// scaling is returned so scoring can reproduce it.
fn fit_subset(
    matrix: &FeatureMatrix,
    labels: &[bool],
    rows: &[usize],
    train: &TrainConfig,
) -> Result<(TrainedModel, Option<NormalizationStats>), PipelineError> {
    const STAGE: &str = "train";
    let subset = matrix.select_rows(rows);
    let subset_labels: Vec<bool> = rows.iter().map(|&r| labels[r]).collect();
    if train.kind == ModelKind::Mlp {
        let stats = NormalizationStats::fit_all(&subset).map_err(|e| stage_err(STAGE, &e))?;
        let scaled = normalize(&subset, &stats).map_err(|e| stage_err(STAGE, &e))?;
        let model =
            train_model(&scaled, &subset_labels, train, None).map_err(|e| stage_err(STAGE, &e))?;
        Ok((model, Some(stats)))
    } else {
        let model =
            train_model(&subset, &subset_labels, train, None).map_err(|e| stage_err(STAGE, &e))?;
        Ok((model, None))
    }
}

fn score_subset(
    matrix: &FeatureMatrix,
    rows: &[usize],
    model: &TrainedModel,
    stats: Option<&NormalizationStats>,
) -> Result<Vec<f64>, PipelineError> {
    const STAGE: &str = "evaluate";
    let subset = matrix.select_rows(rows);
    let subset = match stats {
        Some(s) => normalize(&subset, s).map_err(|e| stage_err(STAGE, &e))?,
        None => subset,
    };
    model.predict_proba(&subset).map_err(|e| stage_err(STAGE, &e))
}

/// Trains the deployable model on every non-discarded row and stores it.
pub fn stage_train(config: &ExperimentConfig, paths: &StagePaths) -> Result<(), PipelineError> {
    const STAGE: &str = "train";
    let (_, matrix, labels) = read_features(config, paths)?;
    let folds = read_folds(config, paths)?;
    let rows: Vec<usize> =
        folds.row_folds.iter().enumerate().filter(|&(_, &f)| f >= 0).map(|(i, _)| i).collect();
    if rows.is_empty() {
        return Err(stage_err(STAGE, "every row was margin-discarded; nothing to train on"));
    }
    let (model, stats) = fit_subset(&matrix, &labels, &rows, &config.model)?;
    let file = ModelFile::new(model, config.model.clone(), matrix.schema(), stats);
    save_model(&paths.model(), &file).map_err(|e| stage_err(STAGE, &e))?;
    write_json(&paths.model_meta(), &ModelMeta { config_hash: config.hash() })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Cross-validates fold by fold (train on the others, score the fold),
/// aggregates the confusion counts, pools out-of-fold scores for the ROC,
/// and attaches the stored model's feature importances.
pub fn stage_evaluate(
    config: &ExperimentConfig,
    paths: &StagePaths,
) -> Result<EvalReport, PipelineError> {
    const STAGE: &str = "evaluate";
    let (_, matrix, labels) = read_features(config, paths)?;
    let folds = read_folds(config, paths)?;
    let meta: ModelMeta = read_json(&paths.model_meta())?;
    check_hash(&paths.model_meta(), &meta.config_hash, &config.hash())?;
    if !paths.model().is_file() {
        return Err(PipelineError::MissingArtifact { path: paths.model() });
    }
    let stored = load_model(&paths.model()).map_err(|e| stage_err(STAGE, &e))?;

    let mut per_fold = Vec::with_capacity(folds.k);
    let mut pooled_scores: Vec<f64> = Vec::new();
    let mut pooled_labels: Vec<bool> = Vec::new();
    for fold in 0..folds.k as i32 {
        let train_rows: Vec<usize> = folds
            .row_folds
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f >= 0 && f != fold)
            .map(|(i, _)| i)
            .collect();
        let test_rows: Vec<usize> = folds
            .row_folds
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect();
        let test_labels: Vec<bool> = test_rows.iter().map(|&r| labels[r]).collect();

        let (confusion, auc) = if test_rows.is_empty() || train_rows.is_empty() {
            (ConfusionMatrix::default(), None)
        } else {
            let (model, stats) = fit_subset(&matrix, &labels, &train_rows, &config.model)?;
            let scores = score_subset(&matrix, &test_rows, &model, stats.as_ref())?;
            let confusion = ConfusionMatrix::from_scores(&test_labels, &scores, 0.5)
                .map_err(|e| stage_err(STAGE, &e))?;
            let auc = roc_auc(&scores, &test_labels).ok().map(|(_, a)| a);
            pooled_scores.extend_from_slice(&scores);
            pooled_labels.extend_from_slice(&test_labels);
            (confusion, auc)
        };
        per_fold.push(FoldReport {
            fold: fold as usize,
            metrics: metrics(&confusion),
            confusion,
            auc,
        });
    }

    let mut report = EvalReport::from_folds(per_fold).map_err(|e| stage_err(STAGE, &e))?;
    if let Ok((points, auc)) = roc_auc(&pooled_scores, &pooled_labels) {
        report.roc = points;
        report.auc = Some(auc);
    }
    match gini_importance(&stored.model) {
        Ok(weights) => {
            report.feature_importances = matrix
                .schema()
                .names()
                .iter()
                .zip(weights)
                .map(|(feature, weight)| FeatureImportance { feature: feature.clone(), weight })
                .collect();
        }
        Err(stormcast::models::ModelError::NotTreeModel) => {}
        Err(e) => return Err(stage_err(STAGE, &e)),
    }
    report.validate().map_err(|e| stage_err(STAGE, &e))?;

    write_json(
        &paths.report_json(),
        &ReportArtifact { config_hash: config.hash(), report: report.clone() },
    )?;
    write_roc_csv(&report.roc, &paths.roc_csv()).map_err(|e| stage_err(STAGE, &e))?;
    write_importance_csv(&report.feature_importances, &paths.importance_csv())
        .map_err(|e| stage_err(STAGE, &e))?;
    fs::write(&paths.report_text(), crate::report::render_report(&report))
        .map_err(|source| PipelineError::Io { path: paths.report_text(), source })?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// The whole pipeline in order under one directory lock. Stage commands run
/// the very same functions, so splitting a run into stages changes nothing.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport, PipelineError> {
    config.validate()?;
    let paths = StagePaths::new(&config.out);
    let _lock = DirLock::acquire(&paths)?;
    write_json(
        &paths.resolved_config(),
        &ResolvedConfigFile { config_hash: config.hash(), config: config.clone() },
    )?;
    stage_ingest(config, &paths)?;
    stage_flow(config, &paths)?;
    stage_featurize(config, &paths)?;
    stage_split(config, &paths)?;
    stage_train(config, &paths)?;
    stage_evaluate(config, &paths)
}
