//! Feature schemas and per-tile feature extraction.
//!
//! A feature name is `<source>:<channel>:<kind><size>` where source is `err`
//! (prediction-error frame) or `raw` (original channel frame), kind is one of
//! `id`, `max`, `min`, `avg`, `gauss`, and size is the odd window width.
//! The three scalar features `time_hhmm`, `coord_x`, `coord_y` have no
//! source/channel.

mod filters;

pub use filters::conv_filter;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ChannelId, GridFrame, RasterError, Timestamp, CHANNELS};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("bad kernel: {0}")]
    BadKernel(String),
    #[error("schema/frame mismatch: {0}")]
    SchemaFrameMismatch(String),
    #[error("bad matrix: {0}")]
    BadMatrix(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Max,
    Min,
    Avg,
    Gaussian,
}

impl KernelKind {
    /// Token used inside feature names.
    pub fn token(self) -> &'static str {
        match self {
            KernelKind::Max => "max",
            KernelKind::Min => "min",
            KernelKind::Avg => "avg",
            KernelKind::Gaussian => "gauss",
        }
    }
}

/// Square sliding-window kernel. `sigma` is only meaningful for gaussian
/// kernels; schema-built gaussians use `sigma = size / 6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub size: usize,
    pub sigma: Option<f64>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, size: usize) -> Result<Self, FeatureError> {
        let sigma = match kind {
            KernelKind::Gaussian => Some(size as f64 / 6.0),
            _ => None,
        };
        let spec = Self { kind, size, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(size: usize, sigma: f64) -> Result<Self, FeatureError> {
        let spec = Self { kind: KernelKind::Gaussian, size, sigma: Some(sigma) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.size == 0 || self.size % 2 == 0 {
            return Err(FeatureError::BadKernel(format!(
                "size must be odd and positive, got {}",
                self.size
            )));
        }
        if self.kind == KernelKind::Gaussian {
            match self.sigma {
                Some(s) if s > 0.0 && s.is_finite() => {}
                other => {
                    return Err(FeatureError::BadKernel(format!(
                        "gaussian kernel needs positive sigma, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Dense `size x size` gaussian kernel, row-major, normalized to sum 1.
/// Size 1 degenerates to `[1.0]` for any sigma.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>, FeatureError> {
    if size == 0 || size % 2 == 0 {
        return Err(FeatureError::BadKernel(format!("size must be odd, got {size}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(FeatureError::BadKernel(format!("sigma must be positive, got {sigma}")));
    }
    let r = (size / 2) as isize;
    let mut kernel = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            kernel.push((-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    Ok(kernel)
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// The two frame sources features can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Err,
    Raw,
}

impl FeatureSource {
    pub fn token(self) -> &'static str {
        match self {
            FeatureSource::Err => "err",
            FeatureSource::Raw => "raw",
        }
    }
}

/// Parsed meaning of one feature column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureDef {
    /// Filtered frame value at the tile; `size = 1` with any kind means the
    /// untouched frame value (`id1`).
    Conv { source: FeatureSource, channel: ChannelId, kind: Option<KernelKind>, size: usize },
    TimeHhmm,
    CoordX,
    CoordY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemaVariant {
    #[serde(rename = "error153")]
    ErrorOnly153,
    #[serde(rename = "ext129")]
    Extended129,
    #[serde(rename = "custom")]
    Custom,
}

/// Ordered feature-name list. Equality of schemas is equality of names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub variant: SchemaVariant,
    names: Vec<String>,
}

const SIZES_ERROR_ONLY: [usize; 4] = [3, 5, 7, 9];
const KINDS_ERROR_ONLY: [KernelKind; 4] =
    [KernelKind::Max, KernelKind::Min, KernelKind::Avg, KernelKind::Gaussian];
const SIZES_EXTENDED: [usize; 2] = [7, 13];
const KINDS_EXTENDED: [KernelKind; 3] = [KernelKind::Max, KernelKind::Min, KernelKind::Avg];

fn conv_name(source: FeatureSource, channel: ChannelId, kind: Option<KernelKind>, size: usize) -> String {
    match kind {
        None => format!("{}:{}:id{}", source.token(), channel.name(), size),
        Some(k) => format!("{}:{}:{}{}", source.token(), channel.name(), k.token(), size),
    }
}

/// Builds the canonical name list for a variant.
///
/// * `error153`: per channel, the raw error value plus 4 kinds x 4 sizes
///   {3,5,7,9} of error-frame filters; 9 * 17 = 153 columns.
/// * `ext129`: for both sources, per channel, the identity plus 3 kinds x
///   2 sizes {7,13}; 2 * 9 * 7 = 126, plus `time_hhmm`, `coord_x`, `coord_y`.
pub fn build_schema(variant: SchemaVariant) -> FeatureSchema {
    let mut names = Vec::new();
    match variant {
        SchemaVariant::ErrorOnly153 => {
            for ch in CHANNELS {
                names.push(conv_name(FeatureSource::Err, ch, None, 1));
                for kind in KINDS_ERROR_ONLY {
                    for size in SIZES_ERROR_ONLY {
                        names.push(conv_name(FeatureSource::Err, ch, Some(kind), size));
                    }
                }
            }
        }
        SchemaVariant::Extended129 => {
            for source in [FeatureSource::Err, FeatureSource::Raw] {
                for ch in CHANNELS {
                    names.push(conv_name(source, ch, None, 1));
                    for kind in KINDS_EXTENDED {
                        for size in SIZES_EXTENDED {
                            names.push(conv_name(source, ch, Some(kind), size));
                        }
                    }
                }
            }
            names.push("time_hhmm".to_string());
            names.push("coord_x".to_string());
            names.push("coord_y".to_string());
        }
        SchemaVariant::Custom => {}
    }
    FeatureSchema { variant, names }
}

impl FeatureSchema {
    /// Schema with caller-supplied names; used for ad-hoc matrices.
    pub fn custom(names: Vec<String>) -> Self {
        Self { variant: SchemaVariant::Custom, names }
    }

    /// `n` anonymous columns `f0..f{n-1}`.
    pub fn generic(n: usize) -> Self {
        Self::custom((0..n).map(|i| format!("f{i}")).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Recovers a canonical variant from a bare name list (used when loading
    /// matrices from disk).
    pub fn from_names(names: Vec<String>) -> Self {
        for variant in [SchemaVariant::ErrorOnly153, SchemaVariant::Extended129] {
            if build_schema(variant).names == names {
                return Self { variant, names };
            }
        }
        Self::custom(names)
    }

    /// sha256 over the joined names; recorded in model files so prediction
    /// inputs can be checked against training inputs.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for name in &self.names {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses a feature name back into its definition.
pub fn parse_feature_name(name: &str) -> Result<FeatureDef, FeatureError> {
    match name {
        "time_hhmm" => return Ok(FeatureDef::TimeHhmm),
        "coord_x" => return Ok(FeatureDef::CoordX),
        "coord_y" => return Ok(FeatureDef::CoordY),
        _ => {}
    }
    let err = || FeatureError::SchemaFrameMismatch(format!("unparseable feature name {name:?}"));
    let mut parts = name.splitn(3, ':');
    let source = match parts.next() {
        Some("err") => FeatureSource::Err,
        Some("raw") => FeatureSource::Raw,
        _ => return Err(err()),
    };
    let channel = ChannelId::from_name(parts.next().ok_or_else(err)?).map_err(|_| err())?;
    let tail = parts.next().ok_or_else(err)?;
    let split_at = tail.find(|c: char| c.is_ascii_digit()).ok_or_else(err)?;
    let (kind_token, size_str) = tail.split_at(split_at);
    let size: usize = size_str.parse().map_err(|_| err())?;
    let kind = match kind_token {
        "id" => None,
        "max" => Some(KernelKind::Max),
        "min" => Some(KernelKind::Min),
        "avg" => Some(KernelKind::Avg),
        "gauss" => Some(KernelKind::Gaussian),
        _ => return Err(err()),
    };
    if kind.is_none() && size != 1 {
        return Err(err());
    }
    Ok(FeatureDef::Conv { source, channel, kind, size })
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Identifies the frame tile a matrix row was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub timestamp: Timestamp,
    pub x: u32,
    pub y: u32,
}

/// Row-major N x F feature matrix with per-row tile keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    keys: Vec<RowKey>,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(
        schema: FeatureSchema,
        keys: Vec<RowKey>,
        values: Vec<f32>,
    ) -> Result<Self, FeatureError> {
        if values.len() != keys.len() * schema.len() {
            return Err(FeatureError::BadMatrix(format!(
                "{} values cannot fill {} rows x {} columns",
                values.len(),
                keys.len(),
                schema.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::BadMatrix(format!("non-finite value at index {i}")));
        }
        Ok(Self { schema, keys, values })
    }

    /// Ad-hoc matrix over anonymous columns with synthetic keys; test and
    /// tooling convenience.
    pub fn from_rows(values: Vec<f32>, n_features: usize) -> Result<Self, FeatureError> {
        if n_features == 0 || values.len() % n_features != 0 {
            return Err(FeatureError::BadMatrix(format!(
                "{} values do not form rows of {n_features}",
                values.len()
            )));
        }
        let n = values.len() / n_features;
        let keys = (0..n)
            .map(|i| RowKey { timestamp: Timestamp::from_unix_minutes(0), x: i as u32, y: 0 })
            .collect();
        Self::new(FeatureSchema::generic(n_features), keys, values)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let f = self.n_features();
        &self.values[i * f..(i + 1) * f]
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.n_features() + col]
    }

    /// Copies the given rows into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let f = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * f);
        let mut keys = Vec::with_capacity(rows.len());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            keys.push(self.keys[r]);
        }
        Self { schema: self.schema.clone(), keys, values }
    }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

fn index_by_channel<'a>(
    frames: &'a [GridFrame],
    want_error_tags: bool,
) -> Result<[&'a GridFrame; 9], FeatureError> {
    let mut slots: [Option<&GridFrame>; 9] = [None; 9];
    for frame in frames {
        let ch = if want_error_tags {
            frame.tag().error_channel_id()
        } else {
            frame.tag().channel_id()
        };
        let ch = ch.ok_or_else(|| {
            FeatureError::SchemaFrameMismatch(format!(
                "frame tag {:?} is not a {} channel tag",
                frame.tag().as_str(),
                if want_error_tags { "prediction-error" } else { "raw" }
            ))
        })?;
        if slots[ch.index()].is_some() {
            return Err(FeatureError::SchemaFrameMismatch(format!(
                "duplicate frame for channel {}",
                ch.name()
            )));
        }
        slots[ch.index()] = Some(frame);
    }
    let mut out: Vec<&GridFrame> = Vec::with_capacity(9);
    for (i, slot) in slots.into_iter().enumerate() {
        out.push(slot.ok_or_else(|| {
            FeatureError::SchemaFrameMismatch(format!("missing channel {}", CHANNELS[i].name()))
        })?);
    }
    Ok(out.try_into().expect("nine channels collected"))
}

/// Builds matrix rows for the given tiles of one instant.
///
/// `errors` must hold nine `err:<channel>` frames; `raws` must hold the nine
/// raw channel frames when (and only when) the schema uses the `raw` source.
/// All frames must share geometry and timestamp. Column frames are computed
/// once each, in parallel, then sampled at the tiles.
pub fn assemble(
    errors: &[GridFrame],
    raws: Option<&[GridFrame]>,
    schema: &FeatureSchema,
    tiles: &[(u32, u32)],
) -> Result<FeatureMatrix, FeatureError> {
    let error_frames = index_by_channel(errors, true)?;
    let needs_raw = schema.names().iter().any(|n| n.starts_with("raw:"));
    let raw_frames = match (needs_raw, raws) {
        (true, Some(r)) => Some(index_by_channel(r, false)?),
        (true, None) => {
            return Err(FeatureError::SchemaFrameMismatch(
                "schema uses raw-source features but no raw frames were given".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(FeatureError::SchemaFrameMismatch(
                "raw frames given but the schema has no raw-source features".into(),
            ))
        }
        (false, None) => None,
    };

    let reference = error_frames[0];
    let geometry = *reference.geometry();
    let timestamp = reference.timestamp();
    let mut all: Vec<&GridFrame> = error_frames.to_vec();
    if let Some(r) = &raw_frames {
        all.extend(r.iter().copied());
    }
    for frame in all {
        if *frame.geometry() != geometry {
            return Err(FeatureError::SchemaFrameMismatch("frame geometries differ".into()));
        }
        if frame.timestamp() != timestamp {
            return Err(FeatureError::SchemaFrameMismatch("frame timestamps differ".into()));
        }
    }
    for &(x, y) in tiles {
        if x >= geometry.width || y >= geometry.height {
            return Err(FeatureError::SchemaFrameMismatch(format!(
                "tile ({x}, {y}) outside {}x{} grid",
                geometry.width, geometry.height
            )));
        }
    }

    let defs: Vec<FeatureDef> = schema
        .names()
        .iter()
        .map(|n| parse_feature_name(n))
        .collect::<Result<_, _>>()?;

    // One column of values per feature, tiles in row order.
    let columns: Vec<Vec<f32>> = defs
        .par_iter()
        .map(|def| -> Result<Vec<f32>, FeatureError> {
            match *def {
                FeatureDef::TimeHhmm => {
                    Ok(vec![timestamp.hhmm() as f32; tiles.len()])
                }
                FeatureDef::CoordX => Ok(tiles.iter().map(|&(x, _)| x as f32).collect()),
                FeatureDef::CoordY => Ok(tiles.iter().map(|&(_, y)| y as f32).collect()),
                FeatureDef::Conv { source, channel, kind, size } => {
                    let frame = match source {
                        FeatureSource::Err => error_frames[channel.index()],
                        FeatureSource::Raw => {
                            raw_frames.as_ref().expect("raw frames checked above")[channel.index()]
                        }
                    };
                    let filtered;
                    let sampled = match kind {
                        None => frame,
                        Some(k) => {
                            filtered = conv_filter(frame, &KernelSpec::new(k, size)?)?;
                            &filtered
                        }
                    };
                    Ok(tiles.iter().map(|&(x, y)| sampled.get(x, y)).collect())
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let f = schema.len();
    let mut values = vec![0.0f32; tiles.len() * f];
    for (c, column) in columns.iter().enumerate() {
        for (r, &v) in column.iter().enumerate() {
            values[r * f + c] = v;
        }
    }
    let keys = tiles.iter().map(|&(x, y)| RowKey { timestamp, x, y }).collect();
    FeatureMatrix::new(schema.clone(), keys, values)
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Per-feature min/max collected from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl NormalizationStats {
    /// Collects stats over the given rows (typically the training split).
    pub fn fit(matrix: &FeatureMatrix, rows: &[usize]) -> Result<Self, FeatureError> {
        if rows.is_empty() {
            return Err(FeatureError::BadMatrix("cannot fit normalization on zero rows".into()));
        }
        let f = matrix.n_features();
        let mut min = vec![f32::INFINITY; f];
        let mut max = vec![f32::NEG_INFINITY; f];
        for &r in rows {
            let row = matrix.row(r);
            for c in 0..f {
                min[c] = min[c].min(row[c]);
                max[c] = max[c].max(row[c]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn fit_all(matrix: &FeatureMatrix) -> Result<Self, FeatureError> {
        let rows: Vec<usize> = (0..matrix.n_rows()).collect();
        Self::fit(matrix, &rows)
    }
}

/// Min/max scales every column into [0, 1], clamping values outside the
/// training range. Constant columns map to 0.
pub fn normalize(
    matrix: &FeatureMatrix,
    stats: &NormalizationStats,
) -> Result<FeatureMatrix, FeatureError> {
    let f = matrix.n_features();
    if stats.min.len() != f || stats.max.len() != f {
        return Err(FeatureError::BadMatrix(format!(
            "stats cover {} columns, matrix has {f}",
            stats.min.len()
        )));
    }
    let mut values = Vec::with_capacity(matrix.values().len());
    for r in 0..matrix.n_rows() {
        let row = matrix.row(r);
        for c in 0..f {
            let span = stats.max[c] - stats.min[c];
            let v = if span > 0.0 {
                ((row[c] - stats.min[c]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            values.push(v);
        }
    }
    FeatureMatrix::new(matrix.schema().clone(), matrix.keys().to_vec(), values)
}
