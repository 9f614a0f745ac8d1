//! Sliding-window filter bank over grid frames.
//!
//! All four kinds run as two separable 1-D passes (rows, then columns) with
//! reflect padding, so a full frame costs O(N) for max/min/avg and
//! O(N * size) for gaussian. Averaging kinds accumulate in f64 and round to
//! f32 once at the end.

use crate::raster::GridFrame;

use super::{FeatureError, KernelKind, KernelSpec};

/// Reflect index mapping: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
/// The edge sample is repeated, i.e. the reflection axis sits between the
/// last pixel and the first padded one.
#[inline(always)]
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    debug_assert!(n > 0);
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Copies `src` into `dst` with `r` reflect-padded samples on both sides.
fn pad_reflect(src: &[f64], r: usize, dst: &mut Vec<f64>) {
    let n = src.len();
    dst.clear();
    dst.reserve(n + 2 * r);
    for i in 0..n + 2 * r {
        dst.push(src[reflect_index(i as isize - r as isize, n)]);
    }
}

/// Sliding extreme over a padded sequence via a monotonic wedge; one pass,
/// amortized O(1) per output.
fn sliding_extreme(padded: &[f64], window: usize, is_max: bool, out: &mut [f64]) {
    debug_assert_eq!(padded.len(), out.len() + window - 1);
    let mut wedge: Vec<usize> = Vec::with_capacity(window);
    let keep = |a: f64, b: f64| if is_max { a <= b } else { a >= b };
    for (i, &v) in padded.iter().enumerate() {
        while let Some(&back) = wedge.last() {
            if keep(padded[back], v) {
                wedge.pop();
            } else {
                break;
            }
        }
        wedge.push(i);
        if i + 1 >= window {
            let start = i + 1 - window;
            while wedge[0] < start {
                wedge.remove(0);
            }
            out[start] = padded[wedge[0]];
        }
    }
}

/// Sliding mean via prefix sums over the padded sequence.
fn sliding_mean(padded: &[f64], window: usize, out: &mut [f64]) {
    let mut prefix = Vec::with_capacity(padded.len() + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0f64;
    for &v in padded {
        acc += v;
        prefix.push(acc);
    }
    let inv = 1.0 / window as f64;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (prefix[i + window] - prefix[i]) * inv;
    }
}

/// Sliding weighted sum with a symmetric kernel over the padded sequence.
fn sliding_weighted(padded: &[f64], kernel: &[f64], out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        for (k, &w) in kernel.iter().enumerate() {
            acc += w * padded[i + k];
        }
        *slot = acc;
    }
}

/// Normalized 1-D gaussian taps for a `size`-wide window.
pub(super) fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

enum Pass1d<'a> {
    Max,
    Min,
    Mean,
    Weighted(&'a [f64]),
}

fn run_pass(data: &mut [f64], width: usize, height: usize, size: usize, pass: &Pass1d<'_>) {
    let r = size / 2;
    let mut padded = Vec::new();
    let mut row = vec![0.0f64; width.max(height)];
    let mut out = vec![0.0f64; width.max(height)];

    // Rows.
    for y in 0..height {
        let line = &data[y * width..(y + 1) * width];
        row[..width].copy_from_slice(line);
        pad_reflect(&row[..width], r, &mut padded);
        match pass {
            Pass1d::Max => sliding_extreme(&padded, size, true, &mut out[..width]),
            Pass1d::Min => sliding_extreme(&padded, size, false, &mut out[..width]),
            Pass1d::Mean => sliding_mean(&padded, size, &mut out[..width]),
            Pass1d::Weighted(k) => sliding_weighted(&padded, k, &mut out[..width]),
        }
        data[y * width..(y + 1) * width].copy_from_slice(&out[..width]);
    }

    // Columns.
    for x in 0..width {
        for y in 0..height {
            row[y] = data[y * width + x];
        }
        pad_reflect(&row[..height], r, &mut padded);
        match pass {
            Pass1d::Max => sliding_extreme(&padded, size, true, &mut out[..height]),
            Pass1d::Min => sliding_extreme(&padded, size, false, &mut out[..height]),
            Pass1d::Mean => sliding_mean(&padded, size, &mut out[..height]),
            Pass1d::Weighted(k) => sliding_weighted(&padded, k, &mut out[..height]),
        }
        for y in 0..height {
            data[y * width + x] = out[y];
        }
    }
}

/// Applies one sliding-window filter to a whole frame. The output keeps the
/// input's geometry, tag, and timestamp. `size = 1` is the identity for every
/// kind.
pub fn conv_filter(frame: &GridFrame, spec: &KernelSpec) -> Result<GridFrame, FeatureError> {
    spec.validate()?;
    let width = frame.geometry().width as usize;
    let height = frame.geometry().height as usize;
    let mut data: Vec<f64> = frame.values().iter().map(|&v| v as f64).collect();

    if spec.size > 1 {
        let taps;
        let pass = match spec.kind {
            KernelKind::Max => Pass1d::Max,
            KernelKind::Min => Pass1d::Min,
            KernelKind::Avg => Pass1d::Mean,
            KernelKind::Gaussian => {
                taps = gaussian_taps(spec.size, spec.sigma.expect("validated gaussian sigma"));
                Pass1d::Weighted(&taps)
            }
        };
        run_pass(&mut data, width, height, spec.size, &pass);
    }

    let values: Vec<f32> = data.into_iter().map(|v| v as f32).collect();
    frame
        .with_values(frame.tag().clone(), values)
        .map_err(FeatureError::Raster)
}
