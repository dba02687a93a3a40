//! Functional calculus of the dilation generator `A = (x.p + p.x)/2`,
//! realized three interchangeable ways (dense eigendecomposition, Chebyshev
//! polynomials in `A`, dilation-group quadrature), plus the free-frame
//! phase-space cutoffs and the dense commutator/decay checks built on them.

pub mod chebyshev;
pub mod dense;
pub mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Representation, WaveFunction};
use crate::propagate::free_evolve;

/// Smooth tanh cutoff profiles of a real spectral variable.
///
/// With threshold `M = center` and width `R = width`:
///
/// - `step_up(a)   = (1 + tanh((a - M)/R)) / 2`   rises at `+M`,
/// - `step_down(a) = (1 - tanh((a + M)/R)) / 2`   falls at `-M`,
/// - `window(a)    = (tanh((a + M)/R) - tanh((a - M)/R)) / 2`.
///
/// The three members with a shared `(M, R)` sum to one pointwise, which is
/// what makes the projection triple a partition of unity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    StepUp,
    StepDown,
    Window,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffShape {
    pub kind: ShapeKind,
    pub center: f64,
    pub width: f64,
}

/// Logistic form of (1 + tanh(z))/2; robust for large |z|.
fn sigma(z: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * z).exp())
}

/// d/dz of sigma: sech^2(z)/2, written to avoid overflow.
fn sigma_prime(z: f64) -> f64 {
    let e = (-2.0 * z.abs()).exp();
    2.0 * e / ((1.0 + e) * (1.0 + e))
}

impl CutoffShape {
    pub fn step_up(center: f64, width: f64) -> CutoffShape {
        assert!(width > 0.0);
        CutoffShape { kind: ShapeKind::StepUp, center, width }
    }

    pub fn step_down(center: f64, width: f64) -> CutoffShape {
        assert!(width > 0.0);
        CutoffShape { kind: ShapeKind::StepDown, center, width }
    }

    pub fn window(center: f64, width: f64) -> CutoffShape {
        assert!(width > 0.0);
        CutoffShape { kind: ShapeKind::Window, center, width }
    }

    pub fn eval(&self, a: f64) -> f64 {
        let (m, r) = (self.center, self.width);
        match self.kind {
            ShapeKind::StepUp => sigma((a - m) / r),
            ShapeKind::StepDown => 1.0 - sigma((a + m) / r),
            ShapeKind::Window => sigma((a + m) / r) - sigma((a - m) / r),
        }
    }

    /// d/da of the profile.
    pub fn derivative(&self, a: f64) -> f64 {
        let (m, r) = (self.center, self.width);
        match self.kind {
            ShapeKind::StepUp => sigma_prime((a - m) / r) / r,
            ShapeKind::StepDown => -sigma_prime((a + m) / r) / r,
            ShapeKind::Window => (sigma_prime((a + m) / r) - sigma_prime((a - m) / r)) / r,
        }
    }

    /// Decomposition `f(a) = c0 + sum_i c_i tanh((a - m_i)/width)` used by the
    /// dilation-group synthesis.
    pub fn tanh_terms(&self) -> (f64, Vec<(f64, f64)>) {
        let m = self.center;
        match self.kind {
            ShapeKind::StepUp => (0.5, vec![(0.5, m)]),
            ShapeKind::StepDown => (0.5, vec![(-0.5, -m)]),
            ShapeKind::Window => (0.0, vec![(0.5, -m), (-0.5, m)]),
        }
    }
}

/// How `f(A)` is realized on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DilationMethod {
    /// Exact spectral calculus of the symmetrized dense `A` matrix
    /// (1D, N <= 2048). The oracle the other two are checked against.
    DenseEigen,
    /// Polynomial `sum c_k T_k(A / spectral_bound)` applied by the Chebyshev
    /// recurrence; `spectral_bound` must dominate the lattice bound.
    Chebyshev { order: usize, spectral_bound: f64 },
    /// Oscillatory synthesis of the tanh profile over the dilation group,
    /// `nodes` Gauss-Legendre points on `[0, theta_max]`. `nodes = 0` picks
    /// both automatically. `interpolation_order = 0` uses exact band-limited
    /// synthesis, otherwise local Lagrange interpolation of that order.
    GroupQuadrature { theta_max: f64, nodes: usize, interpolation_order: usize },
}

impl DilationMethod {
    /// Chebyshev method sized for profiles no sharper than `min_width` on
    /// this grid.
    pub fn chebyshev_auto(grid: &Grid, min_width: f64) -> DilationMethod {
        let bound = grid.dilation_bound();
        let order = chebyshev::order_for(bound, min_width);
        DilationMethod::Chebyshev { order, spectral_bound: bound }
    }

    pub fn group_quadrature_auto() -> DilationMethod {
        DilationMethod::GroupQuadrature { theta_max: 0.0, nodes: 0, interpolation_order: 0 }
    }
}

/// Scalar function of `A` to apply: a tanh cutoff profile or a generic
/// bounded function (the latter is not synthesizable by group quadrature).
pub enum AFunction<'a> {
    Shape(CutoffShape),
    Scalar(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl<'a> AFunction<'a> {
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            AFunction::Shape(s) => s.eval(a),
            AFunction::Scalar(f) => f(a),
        }
    }
}

impl<'a> From<CutoffShape> for AFunction<'a> {
    fn from(s: CutoffShape) -> Self {
        AFunction::Shape(s)
    }
}

/// `A psi = (x.p + p.x)/2 psi`, assembled exactly symmetrized on the grid:
/// `(X (P psi) + P (X psi))/2` per axis with the spectral momentum operator.
/// The discrete operator is then Hermitian with real spectrum inside the
/// lattice bound, which the Chebyshev recurrence relies on.
pub fn apply_a(psi: &WaveFunction) -> WaveFunction {
    let grid = psi.grid().clone();
    let dim = grid.dim();
    let momenta = grid.momenta_odd();
    let positions = grid.positions().to_vec();
    let pos = psi.transform(Representation::Position);
    let hat = pos.transform(Representation::Momentum);

    let mut acc = pos.map_values(|v| v * Complex64::new(0.0, 0.0));
    for axis in 0..dim {
        // X (P psi)
        let mut p_psi = hat.clone();
        for (idx, v) in p_psi.values_mut().indexed_iter_mut() {
            *v *= momenta[idx[axis]];
        }
        let mut x_p_psi = p_psi.transform(Representation::Position);
        for (idx, v) in x_p_psi.values_mut().indexed_iter_mut() {
            *v *= positions[idx[axis]];
        }
        // P (X psi)
        let mut x_psi = pos.clone();
        for (idx, v) in x_psi.values_mut().indexed_iter_mut() {
            *v *= positions[idx[axis]];
        }
        let mut p_x_psi = x_psi.transform(Representation::Momentum);
        for (idx, v) in p_x_psi.values_mut().indexed_iter_mut() {
            *v *= momenta[idx[axis]];
        }
        let p_x_psi = p_x_psi.transform(Representation::Position);
        acc = acc.add_scaled(&x_p_psi, Complex64::new(0.5, 0.0));
        acc = acc.add_scaled(&p_x_psi, Complex64::new(0.5, 0.0));
    }
    acc
}

/// Unitary dilation `(U_theta psi)(x) = e^{-n theta / 2} psi(e^{-theta} x)`.
///
/// `theta > 0` stretches the position support, `theta < 0` stretches the
/// momentum support; either must stay inside its lattice, or the synthesized
/// field aliases. `interpolation_order = 0` evaluates the band-limited
/// interpolant exactly (chirp-z synthesis); higher orders use local Lagrange
/// stencils.
pub fn apply_dilation(psi: &WaveFunction, theta: f64, interpolation_order: usize) -> Result<WaveFunction> {
    if theta == 0.0 {
        return Ok(psi.clone());
    }
    if theta > 0.0 {
        let support = psi.support_radius(1e-12);
        let limit = 0.98 * psi.grid().half_width() * (-theta).exp();
        if support > limit {
            return Err(Error::DilationSupportEscape { theta, support, limit });
        }
    } else {
        let support = psi.momentum_support_radius(1e-12);
        let limit = 0.98 * psi.grid().max_momentum() * theta.exp();
        if support > limit {
            return Err(Error::DilationSupportEscape { theta, support, limit });
        }
    }
    Ok(quadrature::dilate_unchecked(psi, theta, interpolation_order))
}

/// Apply `f(A)` with the chosen backend.
pub fn function_of_a(psi: &WaveFunction, f: &AFunction, method: &DilationMethod) -> Result<WaveFunction> {
    match method {
        DilationMethod::DenseEigen => dense::function_of_a_dense(psi, f),
        DilationMethod::Chebyshev { order, spectral_bound } => {
            chebyshev::function_of_a_chebyshev(psi, f, *order, *spectral_bound)
        }
        DilationMethod::GroupQuadrature { theta_max, nodes, interpolation_order } => match f {
            AFunction::Shape(shape) => quadrature::function_of_a_quadrature(
                psi,
                shape,
                *theta_max,
                *nodes,
                *interpolation_order,
            ),
            AFunction::Scalar(_) => Err(Error::QuadratureNeedsShape),
        },
    }
}

/// Incoming / interior / outgoing split of a state at threshold `M`, width `R`:
/// `(P^+ psi, P^0 psi, P^- psi)` reconstructing `psi` within rounding.
pub fn projection_triple(
    psi: &WaveFunction,
    m: f64,
    r: f64,
    method: &DilationMethod,
) -> Result<(WaveFunction, WaveFunction, WaveFunction)> {
    let plus = function_of_a(psi, &CutoffShape::step_up(m, r).into(), method)?;
    let zero = function_of_a(psi, &CutoffShape::window(m, r).into(), method)?;
    let minus = function_of_a(psi, &CutoffShape::step_down(m, r).into(), method)?;
    Ok((plus, zero, minus))
}

/// Rule for the spatial scale of a phase-space cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleRule {
    Constant { value: f64 },
    /// `R_c(t) = coeff * t^exponent`
    PowerLaw { coeff: f64, exponent: f64 },
}

impl ScaleRule {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ScaleRule::Constant { value } => *value,
            ScaleRule::PowerLaw { coeff, exponent } => coeff * t.powf(*exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffDirection {
    /// `|x - 2pt| <~ R_c`
    Ball,
    /// `|x - 2pt| ~ R_c`
    Shell,
    /// `|x - 2pt| >~ R_c`
    Complement,
}

/// Cutoff on `|x - 2pt| / R_c`, realized exactly as the free-flow conjugation
/// of a radial position cutoff. The operator norm never exceeds 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceCutoff {
    pub direction: CutoffDirection,
    pub scale: ScaleRule,
    /// Transition width relative to the scale.
    pub relative_width: f64,
}

impl PhaseSpaceCutoff {
    pub fn ball(scale: ScaleRule, relative_width: f64) -> PhaseSpaceCutoff {
        PhaseSpaceCutoff { direction: CutoffDirection::Ball, scale, relative_width }
    }

    /// Profile value at radius `u` (in units of the scale, transition at 1).
    pub fn profile(&self, u: f64) -> f64 {
        let w = self.relative_width;
        match self.direction {
            CutoffDirection::Ball => 1.0 - sigma((u - 1.0) / w),
            CutoffDirection::Complement => sigma((u - 1.0) / w),
            CutoffDirection::Shell => {
                sigma((u - (1.0 - 2.0 * w)) / w) - sigma((u - (1.0 + 2.0 * w)) / w)
            }
        }
    }
}

/// Multiply by a radial cutoff of `|x|` at scale `R_c(t)` in the free frame:
/// `e^{+i Lap t} F(|x|/R_c) e^{-i Lap t} psi`, which is the cutoff on
/// `|x - 2pt|` the phase-space localization needs.
pub fn free_frame_cutoff(psi: &WaveFunction, t: f64, cutoff: &PhaseSpaceCutoff) -> WaveFunction {
    let rc = cutoff.scale.at(t);
    assert!(rc > 0.0, "phase-space scale must be positive at t={t}");
    let back = free_evolve(psi, -t);
    let cut = back.apply_multiplier(
        |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            cutoff.profile(r / rc)
        },
        Representation::Position,
    );
    free_evolve(&cut, t).with_time(psi.time())
}

/// Smooth momentum-shell window at `|p| = k` with the given relative width.
pub fn momentum_shell(k: f64, relative_width: f64) -> impl Fn(&[f64]) -> f64 {
    let half = k * relative_width;
    let smooth = half / 2.0;
    move |p: &[f64]| {
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        sigma((r - (k - half)) / smooth) - sigma((r - (k + half)) / smooth)
    }
}

/// Norm series `|| P^-(A) e^{i Lap tau} chi(|p|=k) f ||` over `tau_list`.
///
/// The shell state flies outward, so its incoming component must decay like
/// `(k tau)^{-2}`; the caller fits the log-log slope.
pub fn ld2_decay_probe(
    f: &WaveFunction,
    k: f64,
    tau_list: &[f64],
    m: f64,
    r: f64,
    method: &DilationMethod,
) -> Result<Vec<(f64, f64)>> {
    let chi_f = f.apply_multiplier(momentum_shell(k, 0.25), Representation::Momentum);
    let tau_max = tau_list.iter().cloned().fold(0.0, f64::max);
    let reach = chi_f.support_radius(1e-10) + 2.0 * (k * 1.5) * tau_max;
    let limit = 0.95 * f.grid().half_width();
    if reach > limit {
        return Err(Error::BoxTooSmall { reach, limit });
    }
    let shape = CutoffShape::step_down(m, r);
    let mut series = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let evolved = free_evolve(&chi_f, tau);
        let incoming = function_of_a(&evolved, &shape.into(), method)?;
        series.push((tau, incoming.norm_l2()));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn grid_1d(l: f64, n: usize) -> Arc<Grid> {
        Grid::shared(1, l, n).unwrap()
    }

    fn contained_gaussian(grid: &Arc<Grid>) -> WaveFunction {
        WaveFunction::gaussian_packet(grid.clone(), &[0.0], &[0.0], std::f64::consts::FRAC_1_SQRT_2)
    }

    #[test]
    fn shapes_partition_unity() {
        let (m, r) = (5.0, 4.0);
        let up = CutoffShape::step_up(m, r);
        let down = CutoffShape::step_down(m, r);
        let window = CutoffShape::window(m, r);
        for i in -100..=100 {
            let a = i as f64 * 0.73;
            let s = up.eval(a) + down.eval(a) + window.eval(a);
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
            assert!(up.eval(a) >= 0.0 && up.eval(a) <= 1.0);
            assert!(window.eval(a) >= -1e-15 && window.eval(a) <= 1.0);
        }
    }

    #[test]
    fn shape_matches_saturated_tanh() {
        // step_down(M=5, R=4) at a = -45: (a+M)/R = -10
        let down = CutoffShape::step_down(5.0, 4.0);
        let expect = 0.5 * (1.0 - (-10.0f64).tanh());
        assert_abs_diff_eq!(down.eval(-45.0), expect, epsilon = 1e-12);
        assert!((down.eval(-45.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn shape_derivative_matches_finite_difference() {
        let shapes = [
            CutoffShape::step_up(3.0, 2.0),
            CutoffShape::step_down(3.0, 2.0),
            CutoffShape::window(3.0, 2.0),
        ];
        let h = 1e-6;
        for s in &shapes {
            for i in -40..=40 {
                let a = i as f64 * 0.37;
                let fd = (s.eval(a + h) - s.eval(a - h)) / (2.0 * h);
                assert_abs_diff_eq!(s.derivative(a), fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn tanh_terms_reconstruct_shape() {
        for s in [
            CutoffShape::step_up(4.0, 3.0),
            CutoffShape::step_down(4.0, 3.0),
            CutoffShape::window(4.0, 3.0),
        ] {
            let (c0, terms) = s.tanh_terms();
            for i in -50..=50 {
                let a = i as f64 * 0.61;
                let rebuilt: f64 = c0
                    + terms
                        .iter()
                        .map(|(c, m)| c * ((a - m) / s.width).tanh())
                        .sum::<f64>();
                assert_abs_diff_eq!(s.eval(a), rebuilt, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn apply_a_even_gaussian_expectation_vanishes() {
        let grid = grid_1d(40.0, 512);
        let psi = contained_gaussian(&grid);
        let a_psi = apply_a(&psi);
        let exp = psi.inner(&a_psi);
        assert!(exp.norm() < 1e-10, "expectation {exp}");
    }

    #[test]
    fn apply_a_matches_symbolic_gaussian() {
        // A psi = -i (x psi' + psi/2) for psi = pi^{-1/4} e^{-x^2/2}:
        // psi' = -x psi, so A psi = i (x^2 - 1/2) psi
        let grid = grid_1d(40.0, 512);
        let psi = contained_gaussian(&grid);
        let a_psi = apply_a(&psi);
        let mut worst = 0.0f64;
        for (idx, v) in a_psi.values().indexed_iter() {
            let x = grid.positions()[idx[0]];
            let expect = Complex64::new(0.0, x * x - 0.5) * psi.values()[idx.clone()];
            worst = worst.max((v - expect).norm());
        }
        assert!(worst < 1e-8, "symbolic mismatch {worst}");
    }

    #[test]
    fn apply_a_is_symmetric_on_contained_states() {
        let grid = grid_1d(40.0, 512);
        let phi = WaveFunction::gaussian_packet(grid.clone(), &[2.0], &[0.8], 1.0);
        let psi = WaveFunction::gaussian_packet(grid, &[-1.5], &[-0.4], 1.3);
        let lhs = apply_a(&phi).inner(&psi);
        let rhs = phi.inner(&apply_a(&psi));
        assert!((lhs - rhs).norm() < 1e-8, "asymmetry {}", (lhs - rhs).norm());
    }

    #[test]
    fn dilation_identity_and_norms() {
        let grid = grid_1d(40.0, 512);
        let psi = contained_gaussian(&grid);
        let same = apply_dilation(&psi, 0.0, 0).unwrap();
        assert_eq!(psi.values(), same.values());
        for theta in [-0.4, 0.25, 0.8] {
            let u = apply_dilation(&psi, theta, 0).unwrap();
            assert_abs_diff_eq!(u.norm_l2(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn dilation_matches_closed_form_gaussian() {
        let grid = grid_1d(40.0, 512);
        let psi = contained_gaussian(&grid);
        let theta: f64 = 0.35;
        let u = apply_dilation(&psi, theta, 0).unwrap();
        let pref = (-theta / 2.0).exp() * std::f64::consts::PI.powf(-0.25);
        let mut worst = 0.0f64;
        for (idx, v) in u.values().indexed_iter() {
            let x = grid.positions()[idx[0]];
            let expect = pref * (-(-2.0 * theta).exp() * x * x / 2.0).exp();
            worst = worst.max((v - Complex64::new(expect, 0.0)).norm());
        }
        assert!(worst < 1e-6, "dilated gaussian mismatch {worst}");
    }

    #[test]
    fn dilation_group_law() {
        let grid = grid_1d(40.0, 512);
        let psi = contained_gaussian(&grid);
        let a = apply_dilation(&apply_dilation(&psi, 0.3, 0).unwrap(), 0.2, 0).unwrap();
        let b = apply_dilation(&psi, 0.5, 0).unwrap();
        let diff = a.add_scaled(&b, Complex64::new(-1.0, 0.0)).norm_l2();
        assert!(diff < 1e-5, "group law defect {diff}");
    }

    #[test]
    fn dilation_rejects_support_escape() {
        let grid = grid_1d(20.0, 256);
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[0.0], 3.0);
        assert!(matches!(
            apply_dilation(&psi, 2.5, 0),
            Err(Error::DilationSupportEscape { .. })
        ));
    }

    #[test]
    fn free_frame_cutoff_reduces_to_position_multiplier_at_t0() {
        let grid = grid_1d(40.0, 256);
        let psi = WaveFunction::gaussian_packet(grid, &[1.0], &[0.5], 1.0);
        let cutoff = PhaseSpaceCutoff::ball(ScaleRule::Constant { value: 5.0 }, 0.25);
        let a = free_frame_cutoff(&psi, 0.0, &cutoff);
        let b = psi.apply_multiplier(
            |x| cutoff.profile(x[0].abs() / 5.0),
            Representation::Position,
        );
        let diff = a.add_scaled(&b, Complex64::new(-1.0, 0.0)).norm_l2();
        assert!(diff < 1e-12);
    }

    #[test]
    fn free_frame_cutoff_identity_for_unit_shape() {
        // a sharp ball with transition far outside the box is 1 on it
        let grid = grid_1d(20.0, 256);
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[1.0], 1.0);
        let cutoff = PhaseSpaceCutoff::ball(ScaleRule::Constant { value: 1e6 }, 0.02);
        let out = free_frame_cutoff(&psi, 2.0, &cutoff);
        let diff = out.add_scaled(&psi, Complex64::new(-1.0, 0.0)).norm_l2();
        assert!(diff < 1e-10);
    }

    #[test]
    fn free_frame_cutoff_tracks_moving_packet() {
        // packet launched at the origin with velocity 2k stays inside the
        // comoving ball; a packet at rest leaves it
        let grid = grid_1d(60.0, 1024);
        let k = 1.2;
        let moving = WaveFunction::gaussian_packet(grid.clone(), &[0.0], &[k], 1.0);
        let cutoff = PhaseSpaceCutoff::ball(ScaleRule::Constant { value: 8.0 }, 0.25);
        for t in [2.0, 6.0, 10.0] {
            let evolved = free_evolve(&moving, t);
            let cut = free_frame_cutoff(&evolved, t, &cutoff);
            let weight = evolved.inner(&cut).re / evolved.norm_l2().powi(2);
            assert!(weight > 0.9, "t={t}: comoving weight {weight}");
        }
        // rayleigh quotient never exceeds 1
        let psi = WaveFunction::gaussian_packet(grid, &[3.0], &[0.7], 1.4);
        let cut = free_frame_cutoff(&psi, 4.0, &cutoff);
        let q = psi.inner(&cut).re / psi.norm_l2().powi(2);
        assert!(q <= 1.0 + 1e-8);
    }

    #[test]
    fn momentum_shell_peaks_at_k() {
        let chi = momentum_shell(4.0, 0.25);
        assert!(chi(&[4.0]) > 0.96);
        assert!(chi(&[2.0]) < 0.05);
        assert!(chi(&[6.0]) < 0.05);
    }
}
