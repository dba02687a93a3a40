//! Chebyshev realization of `f(A)`: expand `f` on `[-b, b]` and apply the
//! polynomial with the three-term recurrence in `A`. Scales to any dimension
//! because it only ever applies `A` to states.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::WaveFunction;

use super::{apply_a, AFunction};

pub const MAX_ORDER: usize = 200_000;

/// Order that resolves a tanh profile of the given width on `[-bound, bound]`
/// to ~1e-10: the profile is analytic in a strip of half-width `pi w / 2`, so
/// coefficients decay like `exp(-k pi w / (2 b))`.
pub fn order_for(bound: f64, min_width: f64) -> usize {
    let k = (2.0 * bound / (std::f64::consts::PI * min_width)) * 23.5;
    (k.ceil() as usize + 128).min(MAX_ORDER)
}

/// Chebyshev coefficients of `f` on `[-bound, bound]`:
/// `f(x) ~ c[0]/2 + sum_{k>=1} c[k] T_k(x/bound)`.
pub fn coefficients<F: Fn(f64) -> f64>(f: F, bound: f64, order: usize) -> Vec<f64> {
    let n = order + 1;
    let samples: Vec<f64> = (0..n)
        .map(|j| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
            f(bound * theta.cos())
        })
        .collect();
    let mut c = dct_ii(&samples);
    for v in c.iter_mut() {
        *v *= 2.0 / n as f64;
    }
    c
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// DCT-II via a same-length complex FFT (even/odd reshuffle):
/// `X_k = sum_j x_j cos(pi k (2j+1) / (2n))`.
fn dct_ii(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..(n + 1) / 2 {
        buf[j] = Complex64::new(x[2 * j], 0.0);
    }
    for j in 0..n / 2 {
        buf[n - 1 - j] = Complex64::new(x[2 * j + 1], 0.0);
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    (0..n)
        .map(|k| {
            let phase = Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2.0 * n as f64));
            (phase * buf[k]).re
        })
        .collect()
}

/// Apply `f(A) psi` through the Chebyshev recurrence.
pub fn function_of_a_chebyshev(
    psi: &WaveFunction,
    f: &AFunction,
    order: usize,
    spectral_bound: f64,
) -> Result<WaveFunction> {
    let required = psi.grid().dilation_bound();
    if spectral_bound < required {
        return Err(Error::ChebyshevBoundTooSmall { bound: spectral_bound, required });
    }
    if order > MAX_ORDER {
        return Err(Error::ChebyshevOrderTooLarge { order, max: MAX_ORDER });
    }
    let coeffs = coefficients(|a| f.eval(a), spectral_bound, order);

    // drop the negligible tail so wide profiles stay cheap
    let cutoff = 1e-14 * coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let last = coeffs
        .iter()
        .rposition(|c| c.abs() > cutoff)
        .unwrap_or(0);

    let scale = 1.0 / spectral_bound;
    let apply_scaled = |field: &WaveFunction| -> WaveFunction {
        apply_a(field).map_values(|v| v * scale)
    };

    let t0 = psi.clone();
    let mut acc = t0.map_values(|v| v * (coeffs[0] / 2.0));
    if last == 0 {
        return Ok(acc);
    }
    let mut t_prev = t0;
    let mut t_curr = apply_scaled(&t_prev);
    acc = acc.add_scaled(&t_curr, Complex64::new(coeffs[1], 0.0));
    for c in coeffs.iter().take(last + 1).skip(2) {
        let mut t_next = apply_scaled(&t_curr);
        t_next = t_next.map_values(|v| 2.0 * v);
        t_next = t_next.add_scaled(&t_prev, Complex64::new(-1.0, 0.0));
        if c.abs() > cutoff {
            acc = acc.add_scaled(&t_next, Complex64::new(*c, 0.0));
        }
        t_prev = t_curr;
        t_curr = t_next;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dct_matches_direct_sum() {
        let x: Vec<f64> = (0..17).map(|i| (i as f64 * 0.37).sin() + 0.2 * i as f64).collect();
        let got = dct_ii(&x);
        for k in 0..x.len() {
            let direct: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    v * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64
                        / (2.0 * x.len() as f64))
                        .cos()
                })
                .sum();
            assert_abs_diff_eq!(got[k], direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn coefficients_reconstruct_function() {
        let bound = 30.0;
        let f = |a: f64| 0.5 * (1.0 + ((a - 3.0) / 2.0).tanh());
        let c = coefficients(f, bound, 400);
        for i in -60..=60 {
            let a = i as f64 * 0.45;
            let x = a / bound;
            // Clenshaw-free direct evaluation
            let mut t_prev = 1.0;
            let mut t_curr = x;
            let mut acc = c[0] / 2.0 + c[1] * t_curr;
            for ck in c.iter().skip(2) {
                let t_next = 2.0 * x * t_curr - t_prev;
                acc += ck * t_next;
                t_prev = t_curr;
                t_curr = t_next;
            }
            assert_abs_diff_eq!(acc, f(a), epsilon = 1e-9);
        }
    }

    #[test]
    fn order_estimate_is_monotone() {
        assert!(order_for(1000.0, 2.0) > order_for(1000.0, 8.0));
        assert!(order_for(2000.0, 4.0) > order_for(1000.0, 4.0));
    }
}
