//! Dilation-group realization of tanh cutoffs of `A`:
//! `tanh((A - m)/w) = int_0^inf w csch(pi w theta / 2) sin(theta (A - m)) dtheta`,
//! with `sin(theta(A - m))` synthesized from the unitary dilations
//! `U_{+-theta}`. The dilations themselves evaluate the band-limited
//! interpolant at the scaled lattice through a chirp-z transform.

use std::cell::RefCell;
use std::f64::consts::PI;

use ndarray::Axis;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Representation, WaveFunction};

use super::CutoffShape;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `y_j = sum_{k=0}^{n-1} c_k e^{i gamma j k}` for j = 0..n-1 (Bluestein).
pub fn chirp_z(input: &[Complex64], gamma: f64) -> Vec<Complex64> {
    let n = input.len();
    let m = (2 * n - 1).next_power_of_two();
    let half = gamma / 2.0;

    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (k, c) in input.iter().enumerate() {
        let kk = (k * k) as f64;
        a[k] = c * Complex64::from_polar(1.0, half * kk);
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    for d in 0..n {
        let dd = (d * d) as f64;
        let v = Complex64::from_polar(1.0, -half * dd);
        b[d] = v;
        if d > 0 {
            b[m - d] = v;
        }
    }

    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m));
    let ifft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m));
    fft.process(&mut a);
    fft.process(&mut b);
    for (x, y) in a.iter_mut().zip(b.iter()) {
        *x *= y;
    }
    ifft.process(&mut a);
    let scale = 1.0 / m as f64;
    (0..n)
        .map(|j| {
            let jj = (j * j) as f64;
            a[j] * Complex64::from_polar(scale, half * jj)
        })
        .collect()
}

/// Band-limited evaluation of one momentum-rep lane at the scaled positions
/// `s x_j`: `g_j = sum_m psihat_m e^{i p_m s x_j}`. The caller multiplies the
/// per-axis synthesis factor `dp / sqrt(2 pi)`.
fn synthesize_lane(lane: &[Complex64], momenta: &[f64], s: f64, half_width: f64) -> Vec<Complex64> {
    let n = lane.len();
    let gamma = 2.0 * PI * s / n as f64;
    // natural order k = 0..n-1 corresponds to m = k - n/2
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for (k, ck) in c.iter_mut().enumerate() {
        let m_signed = k as isize - (n / 2) as isize;
        let fft_index = if m_signed >= 0 { m_signed as usize } else { (m_signed + n as isize) as usize };
        let p = momenta[fft_index];
        *ck = lane[fft_index] * Complex64::from_polar(1.0, -p * s * half_width);
    }
    let raw = chirp_z(&c, gamma);
    let pre = -gamma * (n as f64) / 2.0;
    raw.into_iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, pre * j as f64))
        .collect()
}

/// Local Lagrange interpolation of a position-rep lane at `s x_j`, stencil of
/// `order + 1` points, periodic wrap.
fn lagrange_lane(lane: &[Complex64], s: f64, half_width: f64, dx: f64, order: usize) -> Vec<Complex64> {
    let n = lane.len();
    let stencil = order + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, o) in out.iter_mut().enumerate() {
        let x_target = s * (-half_width + j as f64 * dx);
        let u = (x_target + half_width) / dx;
        let base = u.floor() as isize - (stencil as isize - 1) / 2;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..stencil {
            let node = base + a as isize;
            let mut weight = 1.0;
            for b in 0..stencil {
                if a != b {
                    let nb = base + b as isize;
                    weight *= (u - nb as f64) / (node - nb) as f64;
                }
            }
            let wrapped = node.rem_euclid(n as isize) as usize;
            acc += weight * lane[wrapped];
        }
        *o = acc;
    }
    out
}

/// Dilation without the support audit; `apply_dilation` is the checked entry.
pub(crate) fn dilate_unchecked(psi: &WaveFunction, theta: f64, interpolation_order: usize) -> WaveFunction {
    let grid = psi.grid().clone();
    let dim = grid.dim();
    let s = (-theta).exp();
    let jacobian = (-theta * dim as f64 / 2.0).exp();

    let mut field = if interpolation_order == 0 {
        psi.transform(Representation::Momentum)
    } else {
        psi.transform(Representation::Position)
    };
    let values = field.values_mut();
    let momenta = grid.momenta();
    let synth_factor = grid.momentum_spacing() / (2.0 * PI).sqrt();
    for ax in 0..dim {
        let mut scratch = vec![Complex64::new(0.0, 0.0); grid.points_per_axis()];
        for mut lane in values.lanes_mut(Axis(ax)) {
            for (sv, v) in scratch.iter_mut().zip(lane.iter()) {
                *sv = *v;
            }
            let new = if interpolation_order == 0 {
                let mut out = synthesize_lane(&scratch, momenta, s, grid.half_width());
                for v in out.iter_mut() {
                    *v *= synth_factor;
                }
                out
            } else {
                lagrange_lane(&scratch, s, grid.half_width(), grid.spacing(), interpolation_order)
            };
            for (v, nv) in lane.iter_mut().zip(new.iter()) {
                *v = *nv;
            }
        }
    }
    let out = WaveFunction::new(
        grid,
        field.into_values().mapv(|v| v * jacobian),
        Representation::Position,
        psi.time(),
    );
    out
}

fn csch(z: f64) -> f64 {
    let s = z.sinh();
    if s.is_infinite() {
        0.0
    } else {
        1.0 / s
    }
}

const GL8_NODES: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.5255324099163290,
    -0.1834346424956498,
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.3626837833783620,
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// Scalar version of the synthesis, used by tests as an independent check of
/// the kernel: `tanh(u) = int_0^inf csch(pi phi / 2) sin(phi u) dphi`.
pub fn tanh_by_quadrature(u: f64, theta_max: f64, panels: usize) -> f64 {
    let h = theta_max / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let phi = mid + 0.5 * h * node;
            acc += weight * 0.5 * h * csch(PI * phi / 2.0) * (phi * u).sin();
        }
    }
    acc
}

struct QuadraturePlan {
    theta_max: f64,
    panels: usize,
}

fn plan(psi: &WaveFunction, shape: &CutoffShape, theta_max: f64, nodes: usize) -> Result<QuadraturePlan> {
    let w = shape.width;
    let grid = psi.grid();
    let support_x = psi.support_radius(1e-12);
    let support_p = psi.momentum_support_radius(1e-12);
    // kernel truncation (4/pi) e^{-pi w theta_max / 2} ~ 1e-7
    let theta_needed = if theta_max > 0.0 { theta_max } else { 10.3 / w };
    // the dilations stretch the state by e^{theta_max} in x (one sign of
    // theta) and in p (the other); both must stay on their lattices
    let limit_x = (0.98 * grid.half_width() / support_x.max(grid.spacing())).ln();
    let limit_p = (0.98 * grid.max_momentum() / support_p.max(grid.momentum_spacing())).ln();
    if theta_needed > limit_x {
        return Err(Error::DilationSupportEscape {
            theta: theta_needed,
            support: support_x,
            limit: 0.98 * grid.half_width() * (-theta_needed).exp(),
        });
    }
    if theta_needed > limit_p {
        return Err(Error::DilationSupportEscape {
            theta: -theta_needed,
            support: support_p,
            limit: 0.98 * grid.max_momentum() * (-theta_needed).exp(),
        });
    }
    let panels = if nodes > 0 {
        (nodes / 8).max(1)
    } else {
        // resolve the fastest oscillation e^{i theta a} the state can carry
        let a_content = support_x * support_p + grid.dim() as f64;
        let h = 2.0 * PI / (4.0 * a_content);
        ((theta_needed / h).ceil() as usize).max(8)
    };
    Ok(QuadraturePlan { theta_max: theta_needed, panels })
}

/// `f(A) psi` by dilation-group synthesis of a tanh cutoff shape.
pub fn function_of_a_quadrature(
    psi: &WaveFunction,
    shape: &CutoffShape,
    theta_max: f64,
    nodes: usize,
    interpolation_order: usize,
) -> Result<WaveFunction> {
    let plan = plan(psi, shape, theta_max, nodes)?;
    let full = run_quadrature(psi, shape, plan.theta_max, plan.panels, interpolation_order);
    let coarse = run_quadrature(psi, shape, plan.theta_max, (plan.panels / 2).max(1), interpolation_order);
    let norm = psi.norm_l2().max(1e-300);
    let residual = full.add_scaled(&coarse, Complex64::new(-1.0, 0.0)).norm_l2() / norm;
    let tol = 1e-6;
    if residual > tol {
        return Err(Error::QuadratureNotConverged { residual, tol });
    }
    Ok(full)
}

fn run_quadrature(
    psi: &WaveFunction,
    shape: &CutoffShape,
    theta_max: f64,
    panels: usize,
    interpolation_order: usize,
) -> WaveFunction {
    let (c0, terms) = shape.tanh_terms();
    let w = shape.width;
    let pos = psi.transform(Representation::Position);
    let mut acc = pos.map_values(|v| v * c0);
    let h = theta_max / panels as f64;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let theta = mid + 0.5 * h * node;
            let kernel = 0.5 * h * weight * w * csch(PI * w * theta / 2.0);
            if kernel == 0.0 {
                continue;
            }
            // e^{i theta A} psi = U_{-theta} psi
            let u_minus = dilate_unchecked(&pos, -theta, interpolation_order);
            let u_plus = dilate_unchecked(&pos, theta, interpolation_order);
            let mut coef_minus = Complex64::new(0.0, 0.0);
            let mut coef_plus = Complex64::new(0.0, 0.0);
            for (c, m) in &terms {
                // sin(theta (A - m)) = (e^{-i theta m} U_{-theta} - e^{i theta m} U_{theta}) / (2i)
                let half_i = Complex64::new(0.0, -0.5); // 1/(2i)
                coef_minus += half_i * c * Complex64::from_polar(1.0, -theta * m);
                coef_plus -= half_i * c * Complex64::from_polar(1.0, theta * m);
            }
            acc = acc.add_scaled(&u_minus, kernel * coef_minus);
            acc = acc.add_scaled(&u_plus, kernel * coef_plus);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chirp_z_matches_direct_sum() {
        let input: Vec<Complex64> = (0..13)
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 0.31).cos()))
            .collect();
        let gamma = 0.37;
        let got = chirp_z(&input, gamma);
        for j in 0..input.len() {
            let direct: Complex64 = input
                .iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(1.0, gamma * (j * k) as f64))
                .sum();
            assert!((got[j] - direct).norm() < 1e-10, "j={j}: {} vs {direct}", got[j]);
        }
    }

    #[test]
    fn tanh_kernel_quadrature() {
        for u in [-6.0, -2.5, -0.3, 0.0, 0.4, 1.7, 5.0] {
            let got = tanh_by_quadrature(u, 14.0, 256);
            assert_abs_diff_eq!(got, u.tanh(), epsilon = 1e-8);
        }
    }

    #[test]
    fn spectral_and_lagrange_dilation_agree() {
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[1.0], &[0.5], 1.0);
        let exact = dilate_unchecked(&psi, 0.3, 0);
        let approx9 = dilate_unchecked(&psi, 0.3, 9);
        let diff = exact
            .add_scaled(&approx9, Complex64::new(-1.0, 0.0))
            .norm_l2();
        assert!(diff < 1e-5, "lagrange vs spectral {diff}");
    }
}
