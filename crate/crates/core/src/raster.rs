//! Grid geometry, timestamps, satellite channels, and lightning rasterization.
//!
//! Everything downstream (flow, features, sampling) works on dense row-major
//! `f32` grids. Tiles are addressed as `(x, y)` with `x` growing eastward and
//! `y` growing southward, so `(0, 0)` is the north-west corner tile.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the lightning accumulation window and the frame cadence.
pub const WINDOW_MINUTES: i64 = 15;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("point (lat {lat}, lon {lon}) is outside the grid bounds")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("cannot parse timestamp {input:?}: {reason}")]
    BadTimestamp { input: String, reason: String },
    #[error("invalid frame tag {0:?}: must be 1..=16 bytes without NUL")]
    BadTag(String),
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
}

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

/// UTC instant at minute resolution (minutes since the Unix epoch).
///
/// Frame timestamps are additionally aligned to 15-minute boundaries; that is
/// a property of frames, not of `Timestamp` itself.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    minutes: i64,
}

impl Timestamp {
    pub fn from_unix_minutes(minutes: i64) -> Self {
        Self { minutes }
    }

    /// Seconds are truncated toward negative infinity.
    pub fn from_unix_seconds(seconds: i64) -> Self {
        Self { minutes: seconds.div_euclid(60) }
    }

    /// Parses an ISO-8601 timestamp. An explicit UTC offset is required;
    /// timezone-less inputs are rejected rather than assumed UTC.
    pub fn parse(input: &str) -> Result<Self, RasterError> {
        let parsed = chrono::DateTime::parse_from_rfc3339(input).map_err(|e| {
            RasterError::BadTimestamp { input: input.to_string(), reason: e.to_string() }
        })?;
        Ok(Self::from_unix_seconds(parsed.timestamp()))
    }

    pub fn unix_minutes(self) -> i64 {
        self.minutes
    }

    pub fn unix_seconds(self) -> i64 {
        self.minutes * 60
    }

    pub fn to_rfc3339(self) -> String {
        let dt = chrono::DateTime::from_timestamp(self.unix_seconds(), 0)
            .expect("minute-resolution timestamp within chrono range");
        dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }

    /// Compact form for file names: `20170601T1315`.
    pub fn compact(self) -> String {
        let dt = chrono::DateTime::from_timestamp(self.unix_seconds(), 0)
            .expect("minute-resolution timestamp within chrono range");
        dt.format("%Y%m%dT%H%M").to_string()
    }

    /// Local-free UTC clock reading encoded as hour*100 + minute (13:15 -> 1315).
    pub fn hhmm(self) -> u32 {
        let of_day = self.minutes.rem_euclid(24 * 60);
        (of_day / 60 * 100 + of_day % 60) as u32
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Self { minutes: self.minutes + minutes }
    }

    /// Signed minute difference `self - earlier`.
    pub fn minutes_since(self, earlier: Self) -> i64 {
        self.minutes - earlier.minutes
    }

    pub fn is_frame_aligned(self) -> bool {
        self.minutes.rem_euclid(WINDOW_MINUTES) == 0
    }
}

impl std::fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_rfc3339())
    }
}

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_rfc3339())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Start of the 15-minute accumulation window containing `t`.
pub fn window_index(t: Timestamp) -> Timestamp {
    let m = t.unix_minutes();
    Timestamp::from_unix_minutes(m - m.rem_euclid(WINDOW_MINUTES))
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Geographic bounding box of a grid (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

/// Regular lat/lon tile grid. Row 0 is the northernmost row (`lat_max` edge).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: u32,
    pub height: u32,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GridGeometry {
    pub fn new(width: u32, height: u32, bounds: GeoBounds) -> Result<Self, RasterError> {
        let g = Self {
            width,
            height,
            lat_min: bounds.lat_min,
            lat_max: bounds.lat_max,
            lon_min: bounds.lon_min,
            lon_max: bounds.lon_max,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if self.width == 0 || self.height == 0 {
            return Err(RasterError::InvalidGeometry("zero grid dimension".into()));
        }
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(RasterError::InvalidGeometry("non-finite bounds".into()));
        }
        if self.lat_min >= self.lat_max || self.lon_min >= self.lon_max {
            return Err(RasterError::InvalidGeometry(
                "bounds must satisfy lat_min < lat_max and lon_min < lon_max".into(),
            ));
        }
        Ok(())
    }

    pub fn bounds(&self) -> GeoBounds {
        GeoBounds {
            lat_min: self.lat_min,
            lat_max: self.lat_max,
            lon_min: self.lon_min,
            lon_max: self.lon_max,
        }
    }

    pub fn tiles(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Geographic extent of tile `(x, y)`: `(lat_south, lat_north, lon_west, lon_east)`.
    pub fn tile_bounds(&self, x: u32, y: u32) -> (f64, f64, f64, f64) {
        let dlon = (self.lon_max - self.lon_min) / self.width as f64;
        let dlat = (self.lat_max - self.lat_min) / self.height as f64;
        let lon_w = self.lon_min + x as f64 * dlon;
        let lat_n = self.lat_max - y as f64 * dlat;
        (lat_n - dlat, lat_n, lon_w, lon_w + dlon)
    }
}

/// Maps a geographic point to its tile. Points exactly on the east or south
/// outer edge clamp into the last tile; anything else outside errors.
pub fn tile_of(geometry: &GridGeometry, lat: f64, lon: f64) -> Result<(u32, u32), RasterError> {
    if !lat.is_finite() || !lon.is_finite() {
        return Err(RasterError::OutOfBounds { lat, lon });
    }
    if lat < geometry.lat_min || lat > geometry.lat_max || lon < geometry.lon_min || lon > geometry.lon_max
    {
        return Err(RasterError::OutOfBounds { lat, lon });
    }
    let fx = (lon - geometry.lon_min) / (geometry.lon_max - geometry.lon_min) * geometry.width as f64;
    let fy = (geometry.lat_max - lat) / (geometry.lat_max - geometry.lat_min) * geometry.height as f64;
    let x = (fx.floor() as i64).clamp(0, geometry.width as i64 - 1) as u32;
    let y = (fy.floor() as i64).clamp(0, geometry.height as i64 - 1) as u32;
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Channels and frame tags
// ---------------------------------------------------------------------------

/// The nine satellite channels in canonical order, shortest to longest
/// wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    Vis06,
    Vis08,
    Nir16,
    Ir39,
    Wv62,
    Wv73,
    Ir87,
    Ir97,
    Ir108,
}

pub const CHANNELS: [ChannelId; 9] = [
    ChannelId::Vis06,
    ChannelId::Vis08,
    ChannelId::Nir16,
    ChannelId::Ir39,
    ChannelId::Wv62,
    ChannelId::Wv73,
    ChannelId::Ir87,
    ChannelId::Ir97,
    ChannelId::Ir108,
];

impl ChannelId {
    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Vis06 => "VIS0.6",
            ChannelId::Vis08 => "VIS0.8",
            ChannelId::Nir16 => "NIR1.6",
            ChannelId::Ir39 => "IR3.9",
            ChannelId::Wv62 => "WV6.2",
            ChannelId::Wv73 => "WV7.3",
            ChannelId::Ir87 => "IR8.7",
            ChannelId::Ir97 => "IR9.7",
            ChannelId::Ir108 => "IR10.8",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, RasterError> {
        CHANNELS
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| RasterError::UnknownChannel(name.to_string()))
    }

    /// Position in the canonical channel order.
    pub fn index(self) -> usize {
        CHANNELS.iter().position(|c| *c == self).expect("channel present in canonical list")
    }

    /// True for the reflective (solar) channels that go dark at night.
    pub fn is_reflective(self) -> bool {
        matches!(self, ChannelId::Vis06 | ChannelId::Vis08 | ChannelId::Nir16)
    }
}

/// Frame content tag, at most 16 bytes (the frame-file header field width).
/// Plain channel frames use the channel name; derived frames use short
/// prefixed forms such as `err:VIS0.6`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameTag(String);

impl FrameTag {
    pub const MAX_BYTES: usize = 16;

    pub fn new(tag: impl Into<String>) -> Result<Self, RasterError> {
        let tag = tag.into();
        if tag.is_empty() || tag.len() > Self::MAX_BYTES || tag.bytes().any(|b| b == 0) {
            return Err(RasterError::BadTag(tag));
        }
        Ok(Self(tag))
    }

    pub fn channel(channel: ChannelId) -> Self {
        Self(channel.name().to_string())
    }

    pub fn error_channel(channel: ChannelId) -> Self {
        Self(format!("err:{}", channel.name()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The channel this tag names directly, if any.
    pub fn channel_id(&self) -> Option<ChannelId> {
        ChannelId::from_name(&self.0).ok()
    }

    /// The channel behind an `err:` tag, if any.
    pub fn error_channel_id(&self) -> Option<ChannelId> {
        self.0.strip_prefix("err:").and_then(|n| ChannelId::from_name(n).ok())
    }
}

impl std::fmt::Display for FrameTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for FrameTag {
    type Error = RasterError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        FrameTag::new(value)
    }
}

impl From<FrameTag> for String {
    fn from(tag: FrameTag) -> String {
        tag.0
    }
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// One dense single-channel grid image. Values are row-major, row 0 first,
/// and are guaranteed finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFrame {
    geometry: GridGeometry,
    tag: FrameTag,
    timestamp: Timestamp,
    values: Vec<f32>,
}

impl GridFrame {
    pub fn new(
        geometry: GridGeometry,
        tag: FrameTag,
        timestamp: Timestamp,
        values: Vec<f32>,
    ) -> Result<Self, RasterError> {
        geometry.validate()?;
        if values.len() != geometry.tiles() {
            return Err(RasterError::InvalidFrame(format!(
                "value count {} does not match {}x{} grid",
                values.len(),
                geometry.width,
                geometry.height
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::InvalidFrame(format!("non-finite value at index {i}")));
        }
        Ok(Self { geometry, tag, timestamp, values })
    }

    pub fn from_fn(
        geometry: GridGeometry,
        tag: FrameTag,
        timestamp: Timestamp,
        mut f: impl FnMut(u32, u32) -> f32,
    ) -> Result<Self, RasterError> {
        let mut values = Vec::with_capacity(geometry.tiles());
        for y in 0..geometry.height {
            for x in 0..geometry.width {
                values.push(f(x, y));
            }
        }
        Self::new(geometry, tag, timestamp, values)
    }

    pub fn constant(
        geometry: GridGeometry,
        tag: FrameTag,
        timestamp: Timestamp,
        value: f32,
    ) -> Result<Self, RasterError> {
        let tiles = geometry.tiles();
        Self::new(geometry, tag, timestamp, vec![value; tiles])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn tag(&self) -> &FrameTag {
        &self.tag
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        debug_assert!(x < self.geometry.width && y < self.geometry.height);
        self.values[y as usize * self.geometry.width as usize + x as usize]
    }

    /// Same grid and instant, different content. Values are re-validated.
    pub fn with_values(&self, tag: FrameTag, values: Vec<f32>) -> Result<Self, RasterError> {
        Self::new(self.geometry, tag, self.timestamp, values)
    }

    /// Re-stamps the frame; used when a predicted frame takes the slot of the
    /// instant it forecasts.
    pub fn with_timestamp(mut self, timestamp: Timestamp) -> Self {
        self.timestamp = timestamp;
        self
    }
}

// ---------------------------------------------------------------------------
// Lightning
// ---------------------------------------------------------------------------

/// One detected stroke. `time` is minute-truncated at parse time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightningRecord {
    pub time: Timestamp,
    pub lat: f64,
    pub lon: f64,
    pub charge_ka: f64,
    pub height_km: f64,
}

/// Per-tile stroke counts for one 15-minute window starting at `window_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightningRaster {
    pub geometry: GridGeometry,
    pub window_start: Timestamp,
    counts: Vec<u32>,
}

impl LightningRaster {
    pub fn new(
        geometry: GridGeometry,
        window_start: Timestamp,
        counts: Vec<u32>,
    ) -> Result<Self, RasterError> {
        geometry.validate()?;
        if counts.len() != geometry.tiles() {
            return Err(RasterError::InvalidFrame(format!(
                "count vector length {} does not match {}x{} grid",
                counts.len(),
                geometry.width,
                geometry.height
            )));
        }
        Ok(Self { geometry, window_start, counts })
    }

    pub fn zeros(geometry: GridGeometry, window_start: Timestamp) -> Self {
        let tiles = geometry.tiles();
        Self { geometry, window_start, counts: vec![0; tiles] }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.counts[y as usize * self.geometry.width as usize + x as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Result of rasterizing records into one window.
#[derive(Debug)]
pub struct RasterizeOutcome {
    pub raster: LightningRaster,
    /// Records inside the window but outside the grid bounding box.
    pub dropped_out_of_bounds: usize,
    /// Records counted into the raster.
    pub matched: usize,
}

/// Accumulates per-tile counts for the window `[window_start, window_start+15min)`.
/// Records with other window indices are ignored; in-window records outside
/// the box are dropped and reported, never fatal.
pub fn rasterize(
    records: &[LightningRecord],
    geometry: &GridGeometry,
    window_start: Timestamp,
) -> RasterizeOutcome {
    let mut raster = LightningRaster::zeros(*geometry, window_start);
    let mut dropped = 0usize;
    let mut matched = 0usize;
    for record in records {
        if window_index(record.time) != window_start {
            continue;
        }
        match tile_of(geometry, record.lat, record.lon) {
            Ok((x, y)) => {
                raster.counts[y as usize * geometry.width as usize + x as usize] += 1;
                matched += 1;
            }
            Err(_) => dropped += 1,
        }
    }
    RasterizeOutcome { raster, dropped_out_of_bounds: dropped, matched }
}
