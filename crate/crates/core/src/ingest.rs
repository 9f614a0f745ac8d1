//! Bit-exact persistence for frames, count rasters, feature matrices, and
//! integer columns, plus lightning CSV parsing.
//!
//! Every binary file starts with the same 44-byte header:
//!
//! ```text
//! offset  size  field
//!      0     8  magic `STRMCST1`
//!      8     4  dtype, u32 LE: 1 = f32 LE payload, 2 = i32 LE payload
//!     12     4  width, u32 LE
//!     16     4  height, u32 LE
//!     20    16  tag, zero-padded UTF-8
//!     36     8  timestamp, i64 LE unix seconds
//! ```
//!
//! The payload is `width * height` values, row-major, row 0 first. Feature
//! matrices additionally write `<path>.schema.json` (`{"features": [...]}`)
//! and `<path>.keys.bin` (a dtype-2 file of `minute, x, y` rows).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix, FeatureSchema, RowKey};
use crate::raster::{
    FrameTag, GeoBounds, GridFrame, GridGeometry, LightningRaster, LightningRecord, RasterError,
    Timestamp,
};

const MAGIC: &[u8; 8] = b"STRMCST1";
const HEADER_LEN: usize = 44;
const TAG_LEN: usize = 16;

const DTYPE_F32: u32 = 1;
const DTYPE_I32: u32 = 2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: bad magic")]
    BadMagic { path: PathBuf },
    #[error("{path}: unknown dtype code {code}")]
    UnknownDtype { path: PathBuf, code: u32 },
    #[error("{path}: payload holds {actual} bytes, header claims {expected}")]
    TruncatedPayload { path: PathBuf, expected: usize, actual: usize },
    #[error("{path}: expected dtype {expected}, file has {actual}")]
    WrongDtype { path: PathBuf, expected: u32, actual: u32 },
    #[error("{path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("{path}: schema sidecar lists {names} names for {columns} columns")]
    SchemaMismatch { path: PathBuf, names: usize, columns: usize },
    #[error("{path}: missing header row")]
    MissingHeader { path: PathBuf },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

/// `<path><suffix>`, e.g. `m.bin` -> `m.bin.schema.json`.
fn companion(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// Raw array layer
// ---------------------------------------------------------------------------

struct ArrayHeader {
    dtype: u32,
    width: u32,
    height: u32,
    tag: String,
    unix_seconds: i64,
}

fn write_array(
    path: &Path,
    header: &ArrayHeader,
    payload: &[u8],
) -> Result<(), IngestError> {
    debug_assert_eq!(payload.len(), header.width as usize * header.height as usize * 4);
    let tag_bytes = header.tag.as_bytes();
    if tag_bytes.len() > TAG_LEN || tag_bytes.contains(&0) {
        return Err(IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: format!("tag {:?} does not fit the 16-byte field", header.tag),
        });
    }
    let mut tag = [0u8; TAG_LEN];
    tag[..tag_bytes.len()].copy_from_slice(tag_bytes);

    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(io_err(path))?;
    w.write_all(&header.dtype.to_le_bytes()).map_err(io_err(path))?;
    w.write_all(&header.width.to_le_bytes()).map_err(io_err(path))?;
    w.write_all(&header.height.to_le_bytes()).map_err(io_err(path))?;
    w.write_all(&tag).map_err(io_err(path))?;
    w.write_all(&header.unix_seconds.to_le_bytes()).map_err(io_err(path))?;
    w.write_all(payload).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn read_array(path: &Path) -> Result<(ArrayHeader, Vec<u8>), IngestError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < HEADER_LEN {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(IngestError::BadMagic { path: path.to_path_buf() });
        }
        return Err(IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: format!("file is {} bytes, header needs {HEADER_LEN}", bytes.len()),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(IngestError::BadMagic { path: path.to_path_buf() });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let dtype = u32_at(8);
    if dtype != DTYPE_F32 && dtype != DTYPE_I32 {
        return Err(IngestError::UnknownDtype { path: path.to_path_buf(), code: dtype });
    }
    let width = u32_at(12);
    let height = u32_at(16);
    let tag_raw = &bytes[20..20 + TAG_LEN];
    let tag_end = tag_raw.iter().position(|&b| b == 0).unwrap_or(TAG_LEN);
    if tag_raw[tag_end..].iter().any(|&b| b != 0) {
        return Err(IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: "tag field has bytes after the zero padding".into(),
        });
    }
    let tag = std::str::from_utf8(&tag_raw[..tag_end])
        .map_err(|_| IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: "tag field is not UTF-8".into(),
        })?
        .to_string();
    let unix_seconds = i64::from_le_bytes(bytes[36..44].try_into().unwrap());

    let expected = width as usize * height as usize * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(IngestError::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: format!("{} bytes after the payload", payload.len() - expected),
        });
    }
    Ok((ArrayHeader { dtype, width, height, tag, unix_seconds }, payload.to_vec()))
}

fn expect_dtype(path: &Path, header: &ArrayHeader, want: u32) -> Result<(), IngestError> {
    if header.dtype != want {
        return Err(IngestError::WrongDtype {
            path: path.to_path_buf(),
            expected: want,
            actual: header.dtype,
        });
    }
    Ok(())
}

fn f32_payload(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn i32_payload(values: &[i32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn f32_values(payload: &[u8]) -> Vec<f32> {
    payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

fn i32_values(payload: &[u8]) -> Vec<i32> {
    payload.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect()
}

// ---------------------------------------------------------------------------
// Frames and rasters
// ---------------------------------------------------------------------------

pub fn store_frame(frame: &GridFrame, path: &Path) -> Result<(), IngestError> {
    let g = frame.geometry();
    let header = ArrayHeader {
        dtype: DTYPE_F32,
        width: g.width,
        height: g.height,
        tag: frame.tag().as_str().to_string(),
        unix_seconds: frame.timestamp().unix_seconds(),
    };
    write_array(path, &header, &f32_payload(frame.values()))
}

/// The header carries no geographic extent, so the caller supplies the bounds
/// the file was written under.
pub fn load_frame(path: &Path, bounds: GeoBounds) -> Result<GridFrame, IngestError> {
    let (header, payload) = read_array(path)?;
    expect_dtype(path, &header, DTYPE_F32)?;
    let geometry = GridGeometry::new(header.width, header.height, bounds)?;
    let tag = FrameTag::new(header.tag)?;
    let timestamp = Timestamp::from_unix_seconds(header.unix_seconds);
    Ok(GridFrame::new(geometry, tag, timestamp, f32_values(&payload))?)
}

const RASTER_TAG: &str = "lightning";

pub fn store_raster(raster: &LightningRaster, path: &Path) -> Result<(), IngestError> {
    let g = raster.geometry;
    let counts: Vec<i32> = raster.counts().iter().map(|&c| c as i32).collect();
    let header = ArrayHeader {
        dtype: DTYPE_I32,
        width: g.width,
        height: g.height,
        tag: RASTER_TAG.to_string(),
        unix_seconds: raster.window_start.unix_seconds(),
    };
    write_array(path, &header, &i32_payload(&counts))
}

pub fn load_raster(path: &Path, bounds: GeoBounds) -> Result<LightningRaster, IngestError> {
    let (header, payload) = read_array(path)?;
    expect_dtype(path, &header, DTYPE_I32)?;
    let geometry = GridGeometry::new(header.width, header.height, bounds)?;
    let window_start = Timestamp::from_unix_seconds(header.unix_seconds);
    let counts: Vec<u32> = i32_values(&payload)
        .into_iter()
        .map(|c| {
            u32::try_from(c).map_err(|_| IngestError::CorruptFile {
                path: path.to_path_buf(),
                reason: format!("negative stroke count {c}"),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(LightningRaster::new(geometry, window_start, counts)?)
}

// ---------------------------------------------------------------------------
// Integer columns (labels, fold assignments)
// ---------------------------------------------------------------------------

/// One i32 per row, tagged so readers can tell labels from fold ids.
pub fn store_column(values: &[i32], tag: &str, path: &Path) -> Result<(), IngestError> {
    let header = ArrayHeader {
        dtype: DTYPE_I32,
        width: 1,
        height: values.len() as u32,
        tag: tag.to_string(),
        unix_seconds: 0,
    };
    write_array(path, &header, &i32_payload(values))
}

pub fn load_column(path: &Path) -> Result<(String, Vec<i32>), IngestError> {
    let (header, payload) = read_array(path)?;
    expect_dtype(path, &header, DTYPE_I32)?;
    if header.width != 1 {
        return Err(IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: format!("column file has width {}", header.width),
        });
    }
    Ok((header.tag, i32_values(&payload)))
}

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize, Deserialize)]
struct SchemaSidecar {
    features: Vec<String>,
}

const MATRIX_TAG: &str = "matrix";
const KEYS_TAG: &str = "keys";

/// Writes `<path>` (values), `<path>.schema.json` (ordered feature names) and
/// `<path>.keys.bin` (per-row `minute, x, y`).
pub fn store_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<(), IngestError> {
    let header = ArrayHeader {
        dtype: DTYPE_F32,
        width: matrix.n_features() as u32,
        height: matrix.n_rows() as u32,
        tag: MATRIX_TAG.to_string(),
        unix_seconds: 0,
    };
    write_array(path, &header, &f32_payload(matrix.values()))?;

    let sidecar = SchemaSidecar { features: matrix.schema().names().to_vec() };
    let json = serde_json::to_string_pretty(&sidecar).expect("string list serializes");
    let sidecar_path = companion(path, ".schema.json");
    fs::write(&sidecar_path, json).map_err(io_err(&sidecar_path))?;

    let mut keys = Vec::with_capacity(matrix.n_rows() * 3);
    for key in matrix.keys() {
        let minutes = key.timestamp.unix_minutes();
        let minutes = i32::try_from(minutes).map_err(|_| IngestError::CorruptFile {
            path: path.to_path_buf(),
            reason: format!("row timestamp {minutes} minutes does not fit 32 bits"),
        })?;
        keys.push(minutes);
        keys.push(key.x as i32);
        keys.push(key.y as i32);
    }
    let keys_header = ArrayHeader {
        dtype: DTYPE_I32,
        width: 3,
        height: matrix.n_rows() as u32,
        tag: KEYS_TAG.to_string(),
        unix_seconds: 0,
    };
    write_array(&companion(path, ".keys.bin"), &keys_header, &i32_payload(&keys))
}

pub fn load_matrix(path: &Path) -> Result<FeatureMatrix, IngestError> {
    let (header, payload) = read_array(path)?;
    expect_dtype(path, &header, DTYPE_F32)?;
    let values = f32_values(&payload);

    let sidecar_path = companion(path, ".schema.json");
    let json = fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let sidecar: SchemaSidecar =
        serde_json::from_str(&json).map_err(|e| IngestError::CorruptFile {
            path: sidecar_path.clone(),
            reason: e.to_string(),
        })?;
    if sidecar.features.len() != header.width as usize {
        return Err(IngestError::SchemaMismatch {
            path: path.to_path_buf(),
            names: sidecar.features.len(),
            columns: header.width as usize,
        });
    }
    let schema = FeatureSchema::from_names(sidecar.features);

    let keys_path = companion(path, ".keys.bin");
    let (keys_header, keys_payload) = read_array(&keys_path)?;
    expect_dtype(&keys_path, &keys_header, DTYPE_I32)?;
    if keys_header.width != 3 || keys_header.height != header.height {
        return Err(IngestError::CorruptFile {
            path: keys_path.clone(),
            reason: format!(
                "key table is {}x{}, matrix has {} rows",
                keys_header.width, keys_header.height, header.height
            ),
        });
    }
    let raw = i32_values(&keys_payload);
    let keys: Vec<RowKey> = raw
        .chunks_exact(3)
        .map(|k| RowKey {
            timestamp: Timestamp::from_unix_minutes(k[0] as i64),
            x: k[1] as u32,
            y: k[2] as u32,
        })
        .collect();
    Ok(FeatureMatrix::new(schema, keys, values)?)
}

// ---------------------------------------------------------------------------
// Lightning CSV
// ---------------------------------------------------------------------------

pub const LIGHTNING_CSV_HEADER: [&str; 5] = ["time", "lat", "lon", "charge_ka", "height_km"];

/// A data row the parser refused, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct CsvParseOutcome {
    pub records: Vec<LightningRecord>,
    pub skipped: Vec<SkippedRow>,
}

/// Parses a lightning CSV. The first row must be the header; malformed data
/// rows are skipped and reported, never fatal. Timestamps must carry an
/// explicit UTC offset.
pub fn parse_lightning_csv(path: &Path) -> Result<CsvParseOutcome, IngestError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);

    let missing = || IngestError::MissingHeader { path: path.to_path_buf() };
    let headers = reader.headers().map_err(|_| missing())?.clone();
    let names: Vec<String> =
        headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if names != LIGHTNING_CSV_HEADER {
        return Err(missing());
    }

    let mut outcome = CsvParseOutcome::default();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                outcome.skipped.push(SkippedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let mut skip = |reason: String| outcome.skipped.push(SkippedRow { line, reason });
        if row.len() != 5 {
            skip(format!("expected 5 fields, got {}", row.len()));
            continue;
        }
        let time = match Timestamp::parse(row[0].trim()) {
            Ok(t) => t,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        let mut fields = [0.0f64; 4];
        let mut ok = true;
        for (i, field) in fields.iter_mut().enumerate() {
            match row[i + 1].trim().parse::<f64>() {
                Ok(v) if v.is_finite() => *field = v,
                Ok(v) => {
                    skip(format!("field {} is {v}", LIGHTNING_CSV_HEADER[i + 1]));
                    ok = false;
                    break;
                }
                Err(e) => {
                    skip(format!("field {}: {e}", LIGHTNING_CSV_HEADER[i + 1]));
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let [lat, lon, charge_ka, height_km] = fields;
        outcome.records.push(LightningRecord { time, lat, lon, charge_ka, height_km });
    }
    Ok(outcome)
}

pub fn write_lightning_csv(records: &[LightningRecord], path: &Path) -> Result<(), IngestError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| IngestError::CorruptFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    writer.write_record(LIGHTNING_CSV_HEADER).map_err(wrap)?;
    for r in records {
        writer
            .write_record([
                r.time.to_rfc3339(),
                r.lat.to_string(),
                r.lon.to_string(),
                r.charge_ka.to_string(),
                r.height_km.to_string(),
            ])
            .map_err(wrap)?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}
