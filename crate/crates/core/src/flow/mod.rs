//! Dense TV-L1 optical flow, constant-motion frame extrapolation, and the
//! absolute prediction-error field.

mod tvl1;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{FrameTag, GridFrame, GridGeometry, RasterError, WINDOW_MINUTES};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("frames have different geometries")]
    GeometryMismatch,
    #[error("frames are {minutes} minutes apart, expected {WINDOW_MINUTES}")]
    TimestampGap { minutes: i64 },
    #[error("frames have different timestamps")]
    TimestampMismatch,
    #[error("bad flow parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Solver knobs. Defaults are the operational tuning for satellite imagery
/// at native value scale; images are not normalized before flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    /// Dual ascent step.
    pub tau: f64,
    /// Data attachment weight.
    pub lambda: f64,
    /// Coupling between the flow and the data-term auxiliary field.
    pub theta: f64,
    /// Iterations stop once the mean squared flow update falls below
    /// `epsilon^2`.
    pub epsilon: f64,
    pub outer_iterations: u32,
    pub inner_iterations: u32,
    /// Illumination adaptation weight. Only 0 (term disabled) is supported.
    pub gamma: f64,
    /// Pyramid depth cap; levels stop early once a dimension would drop
    /// below 4 tiles.
    pub nscales: u32,
    /// Per-level downscale factor, in (0, 1).
    pub scale_step: f64,
    /// Relinearizations of the data term per level.
    pub warps: u32,
    /// Flow median filtering: 0 = off, 1 = 3x3, otherwise an odd kernel
    /// width.
    pub median_filtering: u32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            tau: 0.1,
            lambda: 0.0005,
            theta: 0.3,
            epsilon: 0.001,
            outer_iterations: 10,
            inner_iterations: 30,
            gamma: 0.0,
            nscales: 7,
            scale_step: 0.5,
            warps: 5,
            median_filtering: 1,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        let positive: [(&str, f64); 4] = [
            ("tau", self.tau),
            ("lambda", self.lambda),
            ("theta", self.theta),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FlowError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gamma != 0.0 {
            return Err(FlowError::BadParams(
                "illumination adaptation (gamma > 0) is not implemented".into(),
            ));
        }
        if self.outer_iterations == 0 || self.inner_iterations == 0 || self.warps == 0 {
            return Err(FlowError::BadParams("iteration counts must be positive".into()));
        }
        if self.nscales < 1 {
            return Err(FlowError::BadParams("nscales must be at least 1".into()));
        }
        if !(self.scale_step > 0.0 && self.scale_step < 1.0) {
            return Err(FlowError::BadParams(format!(
                "scale_step must be in (0, 1), got {}",
                self.scale_step
            )));
        }
        match self.median_filtering {
            0 | 1 => {}
            k if k % 2 == 1 && k >= 3 => {}
            k => {
                return Err(FlowError::BadParams(format!(
                    "median_filtering must be 0, 1, or an odd width, got {k}"
                )))
            }
        }
        Ok(())
    }

    fn median_kernel(&self) -> usize {
        match self.median_filtering {
            0 => 0,
            1 => 3,
            k => k as usize,
        }
    }

    fn solve_options(&self) -> tvl1::SolveOptions {
        tvl1::SolveOptions {
            tau: self.tau as f32,
            lambda: self.lambda as f32,
            theta: self.theta as f32,
            epsilon: self.epsilon as f32,
            outer_iterations: self.outer_iterations,
            inner_iterations: self.inner_iterations,
            warps: self.warps,
            median_kernel: self.median_kernel(),
        }
    }
}

/// Dense displacement field in tiles per step, anchored at source-frame
/// positions: a source pixel at `p` is found at `p + (u(p), v(p))` in the
/// target frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    geometry: GridGeometry,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn new(geometry: GridGeometry, u: Vec<f32>, v: Vec<f32>) -> Result<Self, FlowError> {
        geometry.validate()?;
        if u.len() != geometry.tiles() || v.len() != geometry.tiles() {
            return Err(FlowError::BadParams(format!(
                "flow components hold {} and {} values for {} tiles",
                u.len(),
                v.len(),
                geometry.tiles()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(FlowError::BadParams("flow contains non-finite values".into()));
        }
        Ok(Self { geometry, u, v })
    }

    pub fn zero(geometry: GridGeometry) -> Result<Self, FlowError> {
        let n = geometry.tiles();
        Self::new(geometry, vec![0.0; n], vec![0.0; n])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn get(&self, x: u32, y: u32) -> (f32, f32) {
        let i = y as usize * self.geometry.width as usize + x as usize;
        (self.u[i], self.v[i])
    }

    /// Mean Euclidean distance to a uniform displacement; the standard
    /// endpoint error against a known translation.
    pub fn mean_endpoint_error(&self, du: f32, dv: f32) -> f64 {
        let n = self.u.len() as f64;
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| (((a - du) * (a - du) + (b - dv) * (b - dv)) as f64).sqrt())
            .sum::<f64>()
            / n
    }
}

// ---------------------------------------------------------------------------
// Pyramid
// ---------------------------------------------------------------------------

/// Level dimensions from finest to coarsest. Levels stop once another
/// `scale_step` would push a dimension below 4 tiles.
fn pyramid_dims(w: usize, h: usize, nscales: u32, step: f64) -> Vec<(usize, usize)> {
    let mut dims = vec![(w, h)];
    for _ in 1..nscales {
        let (pw, ph) = *dims.last().expect("dims never empty");
        let nw = (pw as f64 * step).round() as usize;
        let nh = (ph as f64 * step).round() as usize;
        if nw.min(nh) < 4 {
            break;
        }
        dims.push((nw, nh));
    }
    dims
}

/// Exact box average: each target pixel integrates the source cells its
/// footprint overlaps, weighted by overlap area.
fn area_downscale(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    debug_assert!(dw <= sw && dh <= sh);
    let fx = sw as f64 / dw as f64;
    let fy = sh as f64 / dh as f64;
    let inv_area = 1.0 / (fx * fy);
    let mut dst = Vec::with_capacity(dw * dh);
    for dy in 0..dh {
        let y0 = dy as f64 * fy;
        let y1 = y0 + fy;
        let iy1 = (y1.ceil() as usize).min(sh);
        for dx in 0..dw {
            let x0 = dx as f64 * fx;
            let x1 = x0 + fx;
            let ix1 = (x1.ceil() as usize).min(sw);
            let mut acc = 0.0f64;
            for iy in y0.floor() as usize..iy1 {
                let wy = (y1.min((iy + 1) as f64) - y0.max(iy as f64)).max(0.0);
                for ix in x0.floor() as usize..ix1 {
                    let wx = (x1.min((ix + 1) as f64) - x0.max(ix as f64)).max(0.0);
                    acc += src[iy * sw + ix] as f64 * wx * wy;
                }
            }
            dst.push((acc * inv_area) as f32);
        }
    }
    dst
}

/// Bilinear resize with half-pixel centers.
fn bilinear_resize(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    let fx = sw as f32 / dw as f32;
    let fy = sh as f32 / dh as f32;
    let mut dst = Vec::with_capacity(dw * dh);
    for dy in 0..dh {
        let sy = (dy as f32 + 0.5) * fy - 0.5;
        for dx in 0..dw {
            let sx = (dx as f32 + 0.5) * fx - 0.5;
            dst.push(tvl1::bilinear(src, sw, sh, sx, sy));
        }
    }
    dst
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Dense flow such that `next(p + flow(p)) ~= prev(p)`: where each source
/// pixel of `prev` is found in `next`.
pub fn compute_flow(
    prev: &GridFrame,
    next: &GridFrame,
    params: &FlowParams,
) -> Result<FlowField, FlowError> {
    params.validate()?;
    if prev.geometry() != next.geometry() {
        return Err(FlowError::GeometryMismatch);
    }
    let g = *prev.geometry();
    let w = g.width as usize;
    let h = g.height as usize;

    let dims = pyramid_dims(w, h, params.nscales, params.scale_step);
    let mut pyr0: Vec<Vec<f32>> = vec![prev.values().to_vec()];
    let mut pyr1: Vec<Vec<f32>> = vec![next.values().to_vec()];
    for level in 1..dims.len() {
        let (pw, ph) = dims[level - 1];
        let (nw, nh) = dims[level];
        pyr0.push(area_downscale(&pyr0[level - 1], pw, ph, nw, nh));
        pyr1.push(area_downscale(&pyr1[level - 1], pw, ph, nw, nh));
    }

    let opt = params.solve_options();
    let (cw, ch) = dims[dims.len() - 1];
    let mut u1 = vec![0.0f32; cw * ch];
    let mut u2 = vec![0.0f32; cw * ch];
    for level in (0..dims.len()).rev() {
        let (lw, lh) = dims[level];
        tvl1::solve_scale(&pyr0[level], &pyr1[level], lw, lh, &mut u1, &mut u2, &opt);
        if level > 0 {
            let (fw, fh) = dims[level - 1];
            u1 = bilinear_resize(&u1, lw, lh, fw, fh);
            u2 = bilinear_resize(&u2, lw, lh, fw, fh);
            // Displacements are in tiles of the level they were solved at.
            let sx = fw as f32 / lw as f32;
            let sy = fh as f32 / lh as f32;
            for v in &mut u1 {
                *v *= sx;
            }
            for v in &mut u2 {
                *v *= sy;
            }
        }
    }

    for v in u1.iter_mut().chain(&mut u2) {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    FlowField::new(g, u1, u2)
}

/// Backward warp: `out(p) = frame(p - flow(p))`, bilinear, edge-clamped.
/// Content is pushed forward along the flow.
pub fn warp(frame: &GridFrame, flow: &FlowField) -> Result<GridFrame, FlowError> {
    if frame.geometry() != flow.geometry() {
        return Err(FlowError::GeometryMismatch);
    }
    let g = *frame.geometry();
    let w = g.width as usize;
    let h = g.height as usize;
    let src = frame.values();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = x as f32 - flow.u()[i];
            let sy = y as f32 - flow.v()[i];
            out.push(tvl1::bilinear(src, w, h, sx, sy));
        }
    }
    Ok(frame.with_values(frame.tag().clone(), out)?)
}

/// Extrapolates the frame one step past `t15` by reusing the `t30 -> t15`
/// motion (constant-motion assumption). The result is stamped 15 minutes
/// after `t15`.
pub fn predict_next(
    t30: &GridFrame,
    t15: &GridFrame,
    params: &FlowParams,
) -> Result<GridFrame, FlowError> {
    let minutes = t15.timestamp().minutes_since(t30.timestamp());
    if minutes != WINDOW_MINUTES {
        return Err(FlowError::TimestampGap { minutes });
    }
    let flow = compute_flow(t30, t15, params)?;
    let predicted = warp(t15, &flow)?;
    Ok(predicted.with_timestamp(t15.timestamp().plus_minutes(WINDOW_MINUTES)))
}

/// Per-tile absolute difference, the prediction-error signal. The output tag
/// is the `err:` form of the actual frame's channel when it has one.
pub fn error_field(actual: &GridFrame, predicted: &GridFrame) -> Result<GridFrame, FlowError> {
    if actual.geometry() != predicted.geometry() {
        return Err(FlowError::GeometryMismatch);
    }
    if actual.timestamp() != predicted.timestamp() {
        return Err(FlowError::TimestampMismatch);
    }
    let values = actual
        .values()
        .iter()
        .zip(predicted.values())
        .map(|(a, p)| (a - p).abs())
        .collect();
    let tag = match actual.tag().channel_id() {
        Some(ch) => FrameTag::error_channel(ch),
        None => FrameTag::new(format!("err:{}", actual.tag().as_str()))
            .unwrap_or_else(|_| actual.tag().clone()),
    };
    Ok(actual.with_values(tag, values)?)
}
