//! Primal-dual solver for TV-regularized L1 optical flow at one scale.
//!
//! Buffers are row-major `width * height` slices. The data term linearizes
//! the target frame around the current flow (`warps` relinearizations); the
//! inner loop alternates a pointwise thresholding step on the data term, a
//! proximal step coupling the auxiliary field back to the flow, and a dual
//! ascent step on the total-variation term.

pub(super) struct SolveOptions {
    pub tau: f32,
    pub lambda: f32,
    pub theta: f32,
    pub epsilon: f32,
    pub outer_iterations: u32,
    pub inner_iterations: u32,
    pub warps: u32,
    /// 0 disables flow median filtering; otherwise odd kernel width.
    pub median_kernel: usize,
}

/// Squared-gradient magnitudes below this are treated as flat; the data term
/// cannot constrain the flow there.
const GRAD_FLOOR: f32 = 1e-10;

/// Bilinear sample with edge clamping, in lerp form so constant regions are
/// reproduced exactly.
pub(super) fn bilinear(img: &[f32], w: usize, h: usize, x: f32, y: f32) -> f32 {
    let x = x.clamp(0.0, (w - 1) as f32);
    let y = y.clamp(0.0, (h - 1) as f32);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = x - x0 as f32;
    let ty = y - y0 as f32;
    let top = img[y0 * w + x0] + tx * (img[y0 * w + x1] - img[y0 * w + x0]);
    let bot = img[y1 * w + x0] + tx * (img[y1 * w + x1] - img[y1 * w + x0]);
    top + ty * (bot - top)
}

/// Central differences, one-sided (still halved) at the borders.
fn centered_gradient(img: &[f32], w: usize, h: usize, dx: &mut [f32], dy: &mut [f32]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xp = x.min(w - 2) + 1;
            let xm = x.max(1) - 1;
            dx[i] = 0.5 * (img[y * w + xp] - img[y * w + xm]);
            let yp = y.min(h - 2) + 1;
            let ym = y.max(1) - 1;
            dy[i] = 0.5 * (img[yp * w + x] - img[ym * w + x]);
        }
    }
}

/// Forward differences; zero on the last column/row.
fn forward_gradient(u: &[f32], w: usize, h: usize, ux: &mut [f32], uy: &mut [f32]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            ux[i] = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            uy[i] = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

/// Negative adjoint of `forward_gradient`: backward differences whose first
/// row/column keep only the field value and whose last row/column keep only
/// the preceding difference.
fn divergence(p1: &[f32], p2: &[f32], w: usize, h: usize, div: &mut [f32]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = if x == 0 {
                p1[i]
            } else if x == w - 1 {
                -p1[i - 1]
            } else {
                p1[i] - p1[i - 1]
            };
            let dy = if y == 0 {
                p2[i]
            } else if y == h - 1 {
                -p2[i - w]
            } else {
                p2[i] - p2[i - w]
            };
            div[i] = dx + dy;
        }
    }
}

/// In-place k x k median with edge clamping.
pub(super) fn median_filter(field: &mut [f32], w: usize, h: usize, k: usize) {
    debug_assert!(k % 2 == 1 && k >= 3);
    let r = (k / 2) as isize;
    let src = field.to_vec();
    let mut window = Vec::with_capacity(k * k);
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    window.push(src[sy * w + sx]);
                }
            }
            window.sort_unstable_by(f32::total_cmp);
            field[y as usize * w + x as usize] = window[window.len() / 2];
        }
    }
}

/// Refines the flow `(u1, u2)` in place so that `i1(x + u) ~= i0(x)`.
pub(super) fn solve_scale(
    i0: &[f32],
    i1: &[f32],
    w: usize,
    h: usize,
    u1: &mut [f32],
    u2: &mut [f32],
    opt: &SolveOptions,
) {
    let n = w * h;
    let mut i1x = vec![0.0f32; n];
    let mut i1y = vec![0.0f32; n];
    centered_gradient(i1, w, h, &mut i1x, &mut i1y);

    // Dual fields persist across warps within a scale.
    let mut p11 = vec![0.0f32; n];
    let mut p12 = vec![0.0f32; n];
    let mut p21 = vec![0.0f32; n];
    let mut p22 = vec![0.0f32; n];

    let mut i1w = vec![0.0f32; n];
    let mut i1wx = vec![0.0f32; n];
    let mut i1wy = vec![0.0f32; n];
    let mut grad = vec![0.0f32; n];
    let mut rho_c = vec![0.0f32; n];
    let mut v1 = vec![0.0f32; n];
    let mut v2 = vec![0.0f32; n];
    let mut div_p = vec![0.0f32; n];
    let mut gx = vec![0.0f32; n];
    let mut gy = vec![0.0f32; n];

    let lt = opt.lambda * opt.theta;
    let taut = opt.tau / opt.theta;
    // Mean squared update below epsilon^2 stops the iteration.
    let stop = opt.epsilon * opt.epsilon * n as f32;

    for _ in 0..opt.warps {
        // Relinearize the data term around the current flow.
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let sx = x as f32 + u1[i];
                let sy = y as f32 + u2[i];
                i1w[i] = bilinear(i1, w, h, sx, sy);
                i1wx[i] = bilinear(&i1x, w, h, sx, sy);
                i1wy[i] = bilinear(&i1y, w, h, sx, sy);
            }
        }
        for i in 0..n {
            grad[i] = i1wx[i] * i1wx[i] + i1wy[i] * i1wy[i];
            rho_c[i] = i1w[i] - i1wx[i] * u1[i] - i1wy[i] * u2[i] - i0[i];
        }

        let mut error = f32::INFINITY;
        let mut outer = 0;
        while error > stop && outer < opt.outer_iterations {
            outer += 1;
            if opt.median_kernel >= 3 {
                median_filter(u1, w, h, opt.median_kernel);
                median_filter(u2, w, h, opt.median_kernel);
            }
            let mut inner = 0;
            while error > stop && inner < opt.inner_iterations {
                inner += 1;

                // Thresholding step on the linearized L1 data term.
                for i in 0..n {
                    let rho = rho_c[i] + i1wx[i] * u1[i] + i1wy[i] * u2[i];
                    let (d1, d2) = if rho < -lt * grad[i] {
                        (lt * i1wx[i], lt * i1wy[i])
                    } else if rho > lt * grad[i] {
                        (-lt * i1wx[i], -lt * i1wy[i])
                    } else if grad[i] > GRAD_FLOOR {
                        let f = -rho / grad[i];
                        (f * i1wx[i], f * i1wy[i])
                    } else {
                        (0.0, 0.0)
                    };
                    v1[i] = u1[i] + d1;
                    v2[i] = u2[i] + d2;
                }

                // Proximal step pulling u toward v along the dual divergence.
                let mut update = 0.0f64;
                divergence(&p11, &p12, w, h, &mut div_p);
                for i in 0..n {
                    let next = v1[i] + opt.theta * div_p[i];
                    let d = next - u1[i];
                    update += (d * d) as f64;
                    u1[i] = next;
                }
                divergence(&p21, &p22, w, h, &mut div_p);
                for i in 0..n {
                    let next = v2[i] + opt.theta * div_p[i];
                    let d = next - u2[i];
                    update += (d * d) as f64;
                    u2[i] = next;
                }
                error = update as f32;

                // Dual ascent on the TV term.
                forward_gradient(u1, w, h, &mut gx, &mut gy);
                for i in 0..n {
                    let norm = 1.0 + taut * (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
                    p11[i] = (p11[i] + taut * gx[i]) / norm;
                    p12[i] = (p12[i] + taut * gy[i]) / norm;
                }
                forward_gradient(u2, w, h, &mut gx, &mut gy);
                for i in 0..n {
                    let norm = 1.0 + taut * (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
                    p21[i] = (p21[i] + taut * gx[i]) / norm;
                    p22[i] = (p22[i] + taut * gy[i]) / norm;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_integer_positions_are_exact() {
        let img = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(bilinear(&img, 3, 2, x as f32, y as f32), img[y * 3 + x]);
            }
        }
    }

    #[test]
    fn bilinear_midpoint_and_clamping() {
        let img = vec![0.0, 2.0, 4.0, 6.0];
        assert_eq!(bilinear(&img, 2, 2, 0.5, 0.0), 1.0);
        assert_eq!(bilinear(&img, 2, 2, 0.0, 0.5), 2.0);
        assert_eq!(bilinear(&img, 2, 2, 0.5, 0.5), 3.0);
        assert_eq!(bilinear(&img, 2, 2, -10.0, -10.0), 0.0);
        assert_eq!(bilinear(&img, 2, 2, 10.0, 10.0), 6.0);
    }

    #[test]
    fn gradient_and_divergence_are_negative_adjoints() {
        // <grad u, p> must equal -<u, div p> so the primal-dual updates are
        // consistent; check on random fields.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for &(w, h) in &[(1usize, 1usize), (1, 7), (7, 1), (5, 4), (16, 16)] {
            let n = w * h;
            let u: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p1: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p2: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut ux = vec![0.0; n];
            let mut uy = vec![0.0; n];
            forward_gradient(&u, w, h, &mut ux, &mut uy);
            let mut div = vec![0.0; n];
            // Zero out the dual components the gradient never produces; the
            // solver keeps them at zero for the same reason.
            let mut p1 = p1;
            let mut p2 = p2;
            for y in 0..h {
                p1[y * w + w - 1] = 0.0;
            }
            for x in 0..w {
                p2[(h - 1) * w + x] = 0.0;
            }
            divergence(&p1, &p2, w, h, &mut div);
            let lhs: f64 = (0..n).map(|i| (ux[i] * p1[i] + uy[i] * p2[i]) as f64).sum();
            let rhs: f64 = (0..n).map(|i| (u[i] * div[i]) as f64).sum();
            assert!((lhs + rhs).abs() < 1e-4, "{w}x{h}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn median_filter_removes_impulse() {
        let w = 5;
        let h = 5;
        let mut field = vec![1.0f32; w * h];
        field[2 * w + 2] = 100.0;
        median_filter(&mut field, w, h, 3);
        assert!(field.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn median_filter_preserves_constant() {
        let mut field = vec![3.25f32; 7 * 4];
        median_filter(&mut field, 7, 4, 5);
        assert!(field.iter().all(|&v| v == 3.25));
    }
}
