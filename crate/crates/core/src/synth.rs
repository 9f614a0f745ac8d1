//! Seeded synthetic scenes: gaussian cloud decks drifting over nine
//! pseudo-channels, with in-place convective brightening events that emit
//! lightning. Stands in for the satellite + lightning-network data so the
//! whole pipeline can be verified end to end on a desk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{
    ChannelId, FrameTag, GeoBounds, GridFrame, GridGeometry, LightningRecord, RasterError,
    Timestamp, CHANNELS, WINDOW_MINUTES,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad scene config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// An event emits lightning only while still growing and only once its
/// accumulated brightening exceeds this (cloud-field intensity units).
pub const GROWTH_LIGHTNING_THRESHOLD: f64 = 4.0;

/// Gaussian kernel weight below which a tile no longer counts as part of an
/// event's region (mask and emission footprint alike).
const MASK_KERNEL_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub geometry: GridGeometry,
    /// Number of 15-minute frames.
    pub frames: usize,
    pub start: Timestamp,
    /// Constant advection in tiles per step, +x east, +y south.
    pub wind: (f64, f64),
    /// Inclusive range for the number of clouds.
    pub cloud_count: (usize, usize),
    /// Inclusive range for cloud radii (gaussian sigma, tiles).
    pub cloud_sigma: (f64, f64),
    /// Inclusive range for cloud peak amplitudes (intensity units).
    pub cloud_intensity: (f64, f64),
    /// Expected convection events spawned per frame.
    pub convection_rate: f64,
    /// Inclusive range for per-step brightening during an event's growth.
    pub growth_rate: (f64, f64),
    /// Expected strikes per window at an emitting event's core tile.
    pub lightning_rate: f64,
    /// 0 leaves reflective channels constant; 1 switches them fully off at
    /// night (daylight 06:00-18:00).
    pub diurnal_amplitude: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let bounds = GeoBounds { lat_min: 46.0, lat_max: 56.0, lon_min: 0.0, lon_max: 10.0 };
        SceneConfig {
            geometry: GridGeometry::new(100, 100, bounds).expect("static bounds"),
            frames: 200,
            start: Timestamp::parse("2017-06-01T00:00:00Z").expect("static time"),
            wind: (0.4, 0.15),
            cloud_count: (8, 14),
            cloud_sigma: (2.5, 5.5),
            cloud_intensity: (30.0, 70.0),
            convection_rate: 0.35,
            growth_rate: (2.0, 10.0),
            lightning_rate: 1.2,
            diurnal_amplitude: 0.9,
            seed: 7,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::BadConfig(msg));
        self.geometry.validate()?;
        if self.frames < 3 {
            return bad(format!("need at least 3 frames, got {}", self.frames));
        }
        if !self.start.is_frame_aligned() {
            return bad(format!("start {} is not on a 15-minute boundary", self.start));
        }
        if !(self.wind.0.is_finite() && self.wind.1.is_finite()) {
            return bad("wind must be finite".into());
        }
        if self.cloud_count.0 == 0 || self.cloud_count.0 > self.cloud_count.1 {
            return bad(format!("bad cloud count range {:?}", self.cloud_count));
        }
        let range_ok = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite();
        if !range_ok(self.cloud_sigma) {
            return bad(format!("bad cloud sigma range {:?}", self.cloud_sigma));
        }
        if !range_ok(self.cloud_intensity) {
            return bad(format!("bad cloud intensity range {:?}", self.cloud_intensity));
        }
        if !range_ok(self.growth_rate) {
            return bad(format!("bad growth rate range {:?}", self.growth_rate));
        }
        if !(self.convection_rate >= 0.0 && self.convection_rate.is_finite()) {
            return bad(format!("convection rate must be >= 0, got {}", self.convection_rate));
        }
        if !(self.lightning_rate >= 0.0 && self.lightning_rate.is_finite()) {
            return bad(format!("lightning rate must be >= 0, got {}", self.lightning_rate));
        }
        if !(0.0..=1.0).contains(&self.diurnal_amplitude) {
            return bad(format!("diurnal amplitude must be in [0,1], got {}", self.diurnal_amplitude));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Channel rendering
// ---------------------------------------------------------------------------

/// How strongly each channel responds to the latent cloud field. The
/// mid-level water-vapor channel reacts strongest, mirroring where real
/// convective growth shows up first.
pub fn channel_gain(channel: ChannelId) -> f64 {
    match channel {
        ChannelId::Vis06 => 0.9,
        ChannelId::Vis08 => 1.0,
        ChannelId::Nir16 => 0.7,
        ChannelId::Ir39 => 0.55,
        ChannelId::Wv62 => 1.0,
        ChannelId::Wv73 => 0.85,
        ChannelId::Ir87 => 0.70,
        ChannelId::Ir97 => 0.60,
        ChannelId::Ir108 => 0.75,
    }
}

/// Clear-sky brightness temperature for the thermal channels.
fn thermal_base(channel: ChannelId) -> f64 {
    match channel {
        ChannelId::Ir39 => 285.0,
        ChannelId::Wv62 => 255.0,
        ChannelId::Wv73 => 265.0,
        ChannelId::Ir87 => 280.0,
        ChannelId::Ir97 => 275.0,
        ChannelId::Ir108 => 282.0,
        _ => unreachable!("reflective channel"),
    }
}

/// Daylight factor: a sine arch over 06:00-18:00 clamped to zero at night,
/// blended toward 1 by `1 - amplitude`.
pub fn daylight_factor(t: Timestamp, amplitude: f64) -> f64 {
    let hhmm = t.hhmm();
    let minute_of_day = (hhmm / 100 * 60 + hhmm % 100) as f64;
    let arch = (std::f64::consts::PI * (minute_of_day - 360.0) / 720.0).sin().max(0.0);
    1.0 - amplitude * (1.0 - arch)
}

fn channel_value(channel: ChannelId, field: f64, daylight: f64) -> f32 {
    if channel.is_reflective() {
        (daylight * channel_gain(channel) * field) as f32
    } else {
        (thermal_base(channel) - channel_gain(channel) * field) as f32
    }
}

// ---------------------------------------------------------------------------
// Scene state
// ---------------------------------------------------------------------------

struct Cloud {
    x0: f64,
    y0: f64,
    sigma: f64,
    amplitude: f64,
}

impl Cloud {
    /// Blobs live on a torus padded by 4 sigma per side, so a cloud drifts
    /// out, fades below numerical relevance, and re-enters on the far side.
    fn center(&self, frame: usize, wind: (f64, f64), geometry: &GridGeometry) -> (f64, f64) {
        let wrap = |start: f64, speed: f64, extent: f64, pad: f64| {
            let period = extent + 2.0 * pad;
            (start + pad + speed * frame as f64).rem_euclid(period) - pad
        };
        let pad = 4.0 * self.sigma;
        (
            wrap(self.x0, wind.0, geometry.width as f64, pad),
            wrap(self.y0, wind.1, geometry.height as f64, pad),
        )
    }
}

struct Event {
    cloud: usize,
    start: usize,
    grow: usize,
    hold: usize,
    decay: usize,
    /// Added intensity per growth step.
    delta: f64,
    core_sigma: f64,
}

impl Event {
    fn boost(&self, frame: usize) -> f64 {
        if frame < self.start {
            return 0.0;
        }
        let age = frame - self.start;
        let peak = self.delta * self.grow as f64;
        if age < self.grow {
            self.delta * (age + 1) as f64
        } else if age < self.grow + self.hold {
            peak
        } else if age < self.grow + self.hold + self.decay {
            let spent = (age - self.grow - self.hold + 1) as f64;
            peak * (1.0 - spent / (self.decay + 1) as f64)
        } else {
            0.0
        }
    }

    fn emits(&self, frame: usize) -> bool {
        frame >= self.start
            && frame - self.start < self.grow
            && self.boost(frame) >= GROWTH_LIGHTNING_THRESHOLD
    }
}

/// Adds `amplitude * exp(-d^2 / 2 sigma^2)` around a float center, truncated
/// at 4 sigma.
fn splat(field: &mut [f64], geometry: &GridGeometry, cx: f64, cy: f64, sigma: f64, amplitude: f64) {
    if amplitude == 0.0 {
        return;
    }
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    let reach = (4.0 * sigma).ceil() as i64;
    let x_lo = ((cx.floor() as i64) - reach).max(0);
    let x_hi = ((cx.ceil() as i64) + reach).min(w - 1);
    let y_lo = ((cy.floor() as i64) - reach).max(0);
    let y_hi = ((cy.ceil() as i64) + reach).min(h - 1);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            field[(y * w + x) as usize] += amplitude * (-d2 * inv).exp();
        }
    }
}

/// Marks tiles whose kernel weight around the center stays above the floor.
fn mark_disc(mask: &mut [bool], geometry: &GridGeometry, cx: f64, cy: f64, sigma: f64) {
    let radius = sigma * (-2.0 * MASK_KERNEL_FLOOR.ln()).sqrt();
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    let reach = radius.ceil() as i64;
    let x_lo = ((cx.floor() as i64) - reach).max(0);
    let x_hi = ((cx.ceil() as i64) + reach).min(w - 1);
    let y_lo = ((cy.floor() as i64) - reach).max(0);
    let y_hi = ((cy.ceil() as i64) + reach).min(h - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d2 <= radius * radius {
                mask[(y * w + x) as usize] = true;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

pub struct SceneFrame {
    pub timestamp: Timestamp,
    /// Nine channels in canonical order.
    pub channels: Vec<GridFrame>,
    /// Latent cloud field the channels were rendered from, boosts included.
    pub cloud: Vec<f32>,
    /// Tiles inside any event's region, whatever its phase.
    pub convective: Vec<bool>,
    /// Tiles eligible for lightning this window (growing events past the
    /// threshold); always a subset of `convective`.
    pub emitting: Vec<bool>,
}

pub struct Scene {
    pub geometry: GridGeometry,
    pub frames: Vec<SceneFrame>,
    pub records: Vec<LightningRecord>,
}

impl Scene {
    /// All frames of one channel, scene order.
    pub fn channel(&self, channel: ChannelId) -> Vec<&GridFrame> {
        self.frames.iter().map(|f| &f.channels[channel.index()]).collect()
    }
}

/// Renders the whole scene. Deterministic per config (single seeded stream,
/// frames generated in order).
pub fn generate_scene(config: &SceneConfig) -> Result<Scene, SynthError> {
    config.validate()?;
    let geometry = config.geometry;
    let tiles = geometry.tiles();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n_clouds = rng.gen_range(config.cloud_count.0..=config.cloud_count.1);
    let clouds: Vec<Cloud> = (0..n_clouds)
        .map(|_| Cloud {
            x0: rng.gen_range(0.0..geometry.width as f64),
            y0: rng.gen_range(0.0..geometry.height as f64),
            sigma: rng.gen_range(config.cloud_sigma.0..=config.cloud_sigma.1),
            amplitude: rng.gen_range(config.cloud_intensity.0..=config.cloud_intensity.1),
        })
        .collect();

    // Spawn events for the whole timeline up front; their effect is a pure
    // function of the frame index afterwards.
    let mut events: Vec<Event> = Vec::new();
    if config.convection_rate > 0.0 {
        let spawner = Poisson::new(config.convection_rate)
            .map_err(|e| SynthError::BadConfig(format!("convection rate: {e}")))?;
        for frame in 0..config.frames {
            let n = spawner.sample(&mut rng) as usize;
            for _ in 0..n.min(8) {
                let cloud = rng.gen_range(0..clouds.len());
                events.push(Event {
                    cloud,
                    start: frame,
                    grow: rng.gen_range(2..=5),
                    hold: rng.gen_range(1..=3),
                    decay: rng.gen_range(2..=5),
                    delta: rng.gen_range(config.growth_rate.0..=config.growth_rate.1),
                    core_sigma: 0.6 * clouds[cloud].sigma,
                });
            }
        }
    }

    let mut frames = Vec::with_capacity(config.frames);
    let mut records = Vec::new();
    for frame_idx in 0..config.frames {
        let timestamp = config.start.plus_minutes(frame_idx as i64 * WINDOW_MINUTES);
        let mut field = vec![0.0f64; tiles];
        let mut convective = vec![false; tiles];
        let mut emitting = vec![false; tiles];

        for cloud in &clouds {
            let (cx, cy) = cloud.center(frame_idx, config.wind, &geometry);
            splat(&mut field, &geometry, cx, cy, cloud.sigma, cloud.amplitude);
        }
        for event in &events {
            let boost = event.boost(frame_idx);
            if boost <= 0.0 {
                continue;
            }
            let cloud = &clouds[event.cloud];
            let (cx, cy) = cloud.center(frame_idx, config.wind, &geometry);
            splat(&mut field, &geometry, cx, cy, event.core_sigma, boost);
            mark_disc(&mut convective, &geometry, cx, cy, event.core_sigma);
            if event.emits(frame_idx) {
                mark_disc(&mut emitting, &geometry, cx, cy, event.core_sigma);
                draw_lightning(
                    &mut records,
                    &mut rng,
                    &geometry,
                    timestamp,
                    (cx, cy),
                    event.core_sigma,
                    config.lightning_rate,
                );
            }
        }

        let daylight = daylight_factor(timestamp, config.diurnal_amplitude);
        let channels = CHANNELS
            .iter()
            .map(|&ch| {
                let values: Vec<f32> =
                    field.iter().map(|&f| channel_value(ch, f, daylight)).collect();
                GridFrame::new(geometry, FrameTag::channel(ch), timestamp, values)
            })
            .collect::<Result<Vec<_>, _>>()?;

        frames.push(SceneFrame {
            timestamp,
            channels,
            cloud: field.iter().map(|&f| f as f32).collect(),
            convective,
            emitting,
        });
    }

    Ok(Scene { geometry, frames, records })
}

/// Draws Poisson strike counts over the event's disc and appends one record
/// per strike at the tile center, stamped inside the frame's window.
fn draw_lightning(
    records: &mut Vec<LightningRecord>,
    rng: &mut ChaCha8Rng,
    geometry: &GridGeometry,
    window_start: Timestamp,
    center: (f64, f64),
    sigma: f64,
    rate: f64,
) {
    if rate <= 0.0 {
        return;
    }
    let radius = sigma * (-2.0 * MASK_KERNEL_FLOOR.ln()).sqrt();
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    let reach = radius.ceil() as i64;
    let x_lo = ((center.0.floor() as i64) - reach).max(0);
    let x_hi = ((center.0.ceil() as i64) + reach).min(w - 1);
    let y_lo = ((center.1.floor() as i64) - reach).max(0);
    let y_hi = ((center.1.ceil() as i64) + reach).min(h - 1);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let d2 = (x as f64 - center.0).powi(2) + (y as f64 - center.1).powi(2);
            if d2 > radius * radius {
                continue;
            }
            let tile_rate = rate * (-d2 * inv).exp();
            if tile_rate <= 1e-9 {
                continue;
            }
            let count = Poisson::new(tile_rate).expect("positive rate").sample(rng) as usize;
            if count == 0 {
                continue;
            }
            let (lat_s, lat_n, lon_w, lon_e) = geometry.tile_bounds(x as u32, y as u32);
            for _ in 0..count.min(40) {
                let magnitude = rng.gen_range(4.0..60.0);
                let sign = if rng.gen_bool(0.8) { -1.0 } else { 1.0 };
                records.push(LightningRecord {
                    time: window_start.plus_minutes(rng.gen_range(0..WINDOW_MINUTES)),
                    lat: (lat_s + lat_n) / 2.0,
                    lon: (lon_w + lon_e) / 2.0,
                    charge_ka: sign * magnitude,
                    height_km: rng.gen_range(4.0..14.0),
                });
            }
        }
    }
}
