//! Periodic-box discretization of R^n (n = 1, 2, 3) with unitary
//! position <-> momentum transforms and the weighted norms used by the
//! propagation diagnostics.
//!
//! The transform convention matches the continuum pair
//! `psi_hat(p) = (2 pi)^{-n/2} int psi(x) e^{-i p x} dx`, discretized so that
//! the weighted l2 norms on both sides agree (Parseval holds on the lattice).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Which side of the transform pair the field values currently live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

/// Uniform periodic box `[-L, L)^dim` with `N` points per axis and its dual
/// momentum lattice `[-pi/dx, pi/dx)` in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    spacing: f64,
    positions: Vec<f64>,
    momenta: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(Error::BadDimension(dim));
        }
        if !(half_width > 0.0) {
            return Err(Error::BadHalfWidth(half_width));
        }
        let n = points_per_axis;
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::PointsNotPowerOfTwo(n));
        }
        let dx = 2.0 * half_width / n as f64;
        let dp = 2.0 * PI / (n as f64 * dx);
        let positions = (0..n).map(|j| -half_width + j as f64 * dx).collect();
        // FFT order: 0, dp, ..., (N/2-1) dp, -N/2 dp, ..., -dp.
        let momenta = (0..n)
            .map(|k| {
                let s = if k < n / 2 { k as isize } else { k as isize - n as isize };
                s as f64 * dp
            })
            .collect();
        Ok(Grid {
            dim,
            half_width,
            points_per_axis: n,
            spacing: dx,
            positions,
            momenta,
        })
    }

    /// Convenience constructor returning the shared handle wavefunctions hold.
    pub fn shared(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Arc<Grid>> {
        Grid::new(dim, half_width, points_per_axis).map(Arc::new)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI / (self.points_per_axis as f64 * self.spacing)
    }

    /// Largest |p| on the dual lattice (the Nyquist momentum `pi/dx`).
    pub fn max_momentum(&self) -> f64 {
        PI / self.spacing
    }

    /// Per-axis position coordinates, `x_j = -L + j dx`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Per-axis momentum coordinates in FFT storage order.
    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// Momentum symbol for odd-order derivative operators: the unpaired
    /// Nyquist mode is zeroed, the standard rule that keeps the spectral
    /// first derivative antisymmetric on an even grid.
    pub fn momenta_odd(&self) -> Vec<f64> {
        let mut p = self.momenta.clone();
        p[self.points_per_axis / 2] = 0.0;
        p
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points_per_axis; self.dim]
    }

    /// Cell volume of the given representation's lattice.
    pub fn cell_volume(&self, rep: Representation) -> f64 {
        match rep {
            Representation::Position => self.spacing.powi(self.dim as i32),
            Representation::Momentum => self.momentum_spacing().powi(self.dim as i32),
        }
    }

    /// Upper bound on the discrete dilation-generator spectrum,
    /// `x_max p_max + n/2`.
    pub fn dilation_bound(&self) -> f64 {
        self.half_width * self.max_momentum() + self.dim as f64 / 2.0
    }

    fn coordinates(&self, rep: Representation) -> &[f64] {
        match rep {
            Representation::Position => &self.positions,
            Representation::Momentum => &self.momenta,
        }
    }
}

/// Complex field over a [`Grid`] tagged with its representation and time.
///
/// Values are immutable from the outside; every operation returns a new field.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: Arc<Grid>,
    values: ArrayD<Complex64>,
    representation: Representation,
    time: f64,
}

impl WaveFunction {
    pub fn new(
        grid: Arc<Grid>,
        values: ArrayD<Complex64>,
        representation: Representation,
        time: f64,
    ) -> WaveFunction {
        assert_eq!(
            values.shape(),
            grid.shape().as_slice(),
            "field shape does not match the grid"
        );
        WaveFunction {
            grid,
            values,
            representation,
            time,
        }
    }

    /// Build a field from a scalar function of the lattice coordinates in the
    /// given representation.
    pub fn from_fn<F>(grid: Arc<Grid>, rep: Representation, time: f64, f: F) -> WaveFunction
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let shape = grid.shape();
        let coords = grid.coordinates(rep);
        let mut values = ArrayD::zeros(IxDyn(&shape));
        let mut buf = [0.0; 3];
        for (idx, v) in values.indexed_iter_mut() {
            for (a, b) in buf.iter_mut().take(grid.dim()).enumerate() {
                *b = coords[idx[a]];
            }
            *v = f(&buf[..grid.dim()]);
        }
        WaveFunction::new(grid, values, rep, time)
    }

    /// Normalized Gaussian packet `(2 pi w^2)^{-n/4} e^{-|x-c|^2/(4 w^2)} e^{i k x}`
    /// with per-axis position variance `w^2` and mean velocity `2k`.
    pub fn gaussian_packet(grid: Arc<Grid>, center: &[f64], momentum: &[f64], width: f64) -> WaveFunction {
        let dim = grid.dim();
        assert!(center.len() == dim && momentum.len() == dim);
        let norm = (2.0 * PI * width * width).powf(-(dim as f64) / 4.0);
        let (c, k) = (center.to_vec(), momentum.to_vec());
        let mut psi = WaveFunction::from_fn(grid, Representation::Position, 0.0, move |x| {
            let mut q2 = 0.0;
            let mut phase = 0.0;
            for a in 0..x.len() {
                let d = x[a] - c[a];
                q2 += d * d;
                phase += k[a] * x[a];
            }
            Complex64::from_polar(norm * (-q2 / (4.0 * width * width)).exp(), phase)
        });
        // Remove the lattice truncation leftover so tests can rely on norm 1.
        let n = psi.norm_l2();
        if n > 0.0 {
            psi.values.mapv_inplace(|v| v / n);
        }
        psi
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> ArrayD<Complex64> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> WaveFunction {
        self.time = time;
        self
    }

    /// Discrete L2 norm, `sqrt(sum |v|^2 dV)`.
    pub fn norm_l2(&self) -> f64 {
        let dv = self.grid.cell_volume(self.representation);
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dv).sqrt()
    }

    /// Sesquilinear inner product `<self, other>` (conjugate-linear in self).
    pub fn inner(&self, other: &WaveFunction) -> Complex64 {
        assert_eq!(self.representation, other.representation, "representation mismatch");
        assert_eq!(self.grid.as_ref(), other.grid.as_ref(), "grid mismatch");
        let dv = self.grid.cell_volume(self.representation);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc += a.conj() * b;
        }
        acc * dv
    }

    /// Unitary transform to the requested representation. Identity when the
    /// field is already there.
    pub fn transform(&self, target: Representation) -> WaveFunction {
        if self.representation == target {
            return self.clone();
        }
        let mut values = self.values.clone();
        match target {
            Representation::Momentum => {
                fft_all_axes(&mut values, true);
                let scale = (self.grid.spacing() / (2.0 * PI).sqrt()).powi(self.grid.dim() as i32);
                apply_sign_and_scale(&mut values, scale);
            }
            Representation::Position => {
                let n = self.grid.points_per_axis() as f64;
                let scale = ((2.0 * PI).sqrt() / self.grid.spacing()).powi(self.grid.dim() as i32)
                    / n.powi(self.grid.dim() as i32);
                apply_sign_and_scale(&mut values, scale);
                fft_all_axes(&mut values, false);
            }
        }
        WaveFunction {
            grid: self.grid.clone(),
            values,
            representation: target,
            time: self.time,
        }
    }

    /// Sobolev norm `|| (1+|p|^2)^{s/2} psi_hat ||_{L2}`. `s = 0` is the L2 norm.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::NegativeSobolevOrder(s));
        }
        let hat = self.transform(Representation::Momentum);
        let dv = self.grid.cell_volume(Representation::Momentum);
        let momenta = self.grid.momenta();
        let mut acc = 0.0;
        for (idx, v) in hat.values.indexed_iter() {
            let mut p2 = 0.0;
            for a in 0..self.grid.dim() {
                let p = momenta[idx[a]];
                p2 += p * p;
            }
            acc += (1.0 + p2).powf(s) * v.norm_sqr();
        }
        Ok((acc * dv).sqrt())
    }

    /// Weighted norm `|| <x>^{-a} |p|^k psi ||_{L2}` for k in {0, 1, 2}.
    pub fn weighted_norm(&self, weight_power: f64, differential_order: u8) -> f64 {
        assert!(weight_power >= 0.0, "weight power must be nonnegative");
        assert!(differential_order <= 2, "differential order must be 0, 1 or 2");
        let mut field = self.clone();
        if differential_order > 0 {
            let k = differential_order as i32;
            field = field.apply_momentum_multiplier(|p2| p2.sqrt().powi(k));
        }
        let pos = field.transform(Representation::Position);
        let dv = self.grid.cell_volume(Representation::Position);
        let positions = self.grid.positions();
        let mut acc = 0.0;
        for (idx, v) in pos.values.indexed_iter() {
            let mut x2 = 0.0;
            for a in 0..self.grid.dim() {
                let x = positions[idx[a]];
                x2 += x * x;
            }
            acc += (1.0 + x2).powf(-weight_power) * v.norm_sqr();
        }
        (acc * dv).sqrt()
    }

    /// Pointwise multiplication by `f(coords)` in the requested representation,
    /// returning the field in its original representation.
    pub fn apply_multiplier<F>(&self, f: F, rep: Representation) -> WaveFunction
    where
        F: Fn(&[f64]) -> f64,
    {
        let original = self.representation;
        let mut field = self.transform(rep);
        let coords = field.grid.coordinates(rep).to_vec();
        let dim = field.grid.dim();
        let mut buf = [0.0; 3];
        for (idx, v) in field.values.indexed_iter_mut() {
            for (a, b) in buf.iter_mut().take(dim).enumerate() {
                *b = coords[idx[a]];
            }
            *v *= f(&buf[..dim]);
        }
        field.transform(original)
    }

    /// Multiplier depending only on |p|^2; stays in whichever representation
    /// the field is in.
    pub fn apply_momentum_multiplier<F>(&self, f: F) -> WaveFunction
    where
        F: Fn(f64) -> f64,
    {
        let original = self.representation;
        let mut field = self.transform(Representation::Momentum);
        let momenta = field.grid.momenta().to_vec();
        let dim = field.grid.dim();
        for (idx, v) in field.values.indexed_iter_mut() {
            let mut p2 = 0.0;
            for a in 0..dim {
                let p = momenta[idx[a]];
                p2 += p * p;
            }
            *v *= f(p2);
        }
        field.transform(original)
    }

    /// Complex phase multiplier in momentum space, `psi_hat *= f(|p|^2)`.
    pub fn apply_momentum_phase<F>(&self, f: F) -> WaveFunction
    where
        F: Fn(f64) -> Complex64,
    {
        let original = self.representation;
        let mut field = self.transform(Representation::Momentum);
        let momenta = field.grid.momenta().to_vec();
        let dim = field.grid.dim();
        for (idx, v) in field.values.indexed_iter_mut() {
            let mut p2 = 0.0;
            for a in 0..dim {
                let p = momenta[idx[a]];
                p2 += p * p;
            }
            *v *= f(p2);
        }
        field.transform(original)
    }

    /// Complex pointwise multiplier in the field's own representation.
    pub fn scale_pointwise<F>(&self, f: F) -> WaveFunction
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let mut field = self.clone();
        let coords = field.grid.coordinates(field.representation).to_vec();
        let dim = field.grid.dim();
        let mut buf = [0.0; 3];
        for (idx, v) in field.values.indexed_iter_mut() {
            for (a, b) in buf.iter_mut().take(dim).enumerate() {
                *b = coords[idx[a]];
            }
            *v *= f(&buf[..dim]);
        }
        field
    }

    /// Fraction of the total mass sitting beyond `|x| > L/2` (Euclidean).
    pub fn boundary_mass(&self) -> f64 {
        let pos = self.transform(Representation::Position);
        let positions = self.grid.positions();
        let r2 = (self.grid.half_width() / 2.0).powi(2);
        let mut outside = 0.0;
        let mut total = 0.0;
        for (idx, v) in pos.values.indexed_iter() {
            let mut x2 = 0.0;
            for a in 0..self.grid.dim() {
                let x = positions[idx[a]];
                x2 += x * x;
            }
            let m = v.norm_sqr();
            total += m;
            if x2 > r2 {
                outside += m;
            }
        }
        if total > 0.0 {
            outside / total
        } else {
            0.0
        }
    }

    /// Smallest radius containing all but `tail` of the mass (position rep).
    pub fn support_radius(&self, tail: f64) -> f64 {
        let pos = self.transform(Representation::Position);
        radius_for_mass(&pos, self.grid.positions(), tail, self.grid.half_width())
    }

    /// Momentum-space analogue of [`Self::support_radius`].
    pub fn momentum_support_radius(&self, tail: f64) -> f64 {
        let hat = self.transform(Representation::Momentum);
        radius_for_mass(&hat, self.grid.momenta(), tail, self.grid.max_momentum())
    }

    /// Expectation `<psi, m(|p|^2) psi>` of a momentum multiplier, normalized
    /// by the squared norm.
    pub fn momentum_expectation<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        let hat = self.transform(Representation::Momentum);
        let dv = self.grid.cell_volume(Representation::Momentum);
        let momenta = self.grid.momenta();
        let mut acc = 0.0;
        let mut norm = 0.0;
        for (idx, v) in hat.values.indexed_iter() {
            let mut p2 = 0.0;
            for a in 0..self.grid.dim() {
                let p = momenta[idx[a]];
                p2 += p * p;
            }
            let m = v.norm_sqr();
            acc += f(p2) * m;
            norm += m;
        }
        if norm > 0.0 {
            acc * dv / (norm * dv)
        } else {
            0.0
        }
    }

    /// Position variance `<|x - <x>|^2>` summed over axes.
    pub fn position_variance(&self) -> f64 {
        let pos = self.transform(Representation::Position);
        let positions = self.grid.positions();
        let dim = self.grid.dim();
        let mut norm = 0.0;
        let mut mean = [0.0; 3];
        let mut second = [0.0; 3];
        for (idx, v) in pos.values.indexed_iter() {
            let m = v.norm_sqr();
            norm += m;
            for a in 0..dim {
                let x = positions[idx[a]];
                mean[a] += x * m;
                second[a] += x * x * m;
            }
        }
        let mut var = 0.0;
        for a in 0..dim {
            let mu = mean[a] / norm;
            var += second[a] / norm - mu * mu;
        }
        var
    }

    /// Elementwise map over the field values (same grid, rep, and time).
    pub fn map_values<F>(&self, f: F) -> WaveFunction
    where
        F: Fn(&Complex64) -> Complex64,
    {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| f(&v));
        out
    }

    /// Seeded random state, band-limited to `band_fraction` of the Nyquist
    /// momentum and enveloped by a Gaussian whose 1e-12 mass radius is
    /// `support_fraction` of the box, normalized. This is what "random state"
    /// means for the dilation-calculus cross-checks: rough inside its
    /// phase-space cell, but leaving the headroom the group synthesis needs.
    pub fn seeded_random_contained(
        grid: Arc<Grid>,
        seed: u64,
        band_fraction: f64,
        support_fraction: f64,
    ) -> WaveFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shape = grid.shape();
        let momenta = grid.momenta().to_vec();
        let cutoff = band_fraction * grid.max_momentum();
        let mut values = ArrayD::zeros(IxDyn(&shape));
        for (idx, v) in values.indexed_iter_mut() {
            let mut p2 = 0.0;
            for a in 0..grid.dim() {
                let p = momenta[idx[a]];
                p2 += p * p;
            }
            if p2.sqrt() < cutoff {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let hat = WaveFunction::new(grid.clone(), values, Representation::Momentum, 0.0);
        // |envelope|^2 mass outside r is ~1e-12 at r = 5.3 sigma
        let sigma = support_fraction * grid.half_width() / 5.3;
        let mut out = hat.transform(Representation::Position).apply_multiplier(
            move |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-r2 / (2.0 * sigma * sigma)).exp()
            },
            Representation::Position,
        );
        let n = out.norm_l2();
        if n > 0.0 {
            out = out.map_values(|v| v / n);
        }
        out
    }

    /// Pointwise linear combination `self + c * other` (same grid and rep).
    pub fn add_scaled(&self, other: &WaveFunction, c: Complex64) -> WaveFunction {
        assert_eq!(self.representation, other.representation, "representation mismatch");
        assert_eq!(self.grid.as_ref(), other.grid.as_ref(), "grid mismatch");
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values)
            .and(&other.values)
            .for_each(|a, b| *a += c * b);
        out
    }

    pub(crate) fn values_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.values
    }
}

fn radius_for_mass(field: &WaveFunction, coords: &[f64], tail: f64, fallback: f64) -> f64 {
    let mut by_radius: Vec<(f64, f64)> = Vec::with_capacity(field.values.len());
    let mut total = 0.0;
    for (idx, v) in field.values.indexed_iter() {
        let mut r2 = 0.0;
        for a in 0..field.grid.dim() {
            let c = coords[idx[a]];
            r2 += c * c;
        }
        let m = v.norm_sqr();
        total += m;
        by_radius.push((r2, m));
    }
    if total == 0.0 {
        return 0.0;
    }
    by_radius.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let budget = total * (1.0 - tail);
    let mut acc = 0.0;
    for (r2, m) in by_radius {
        acc += m;
        if acc >= budget {
            return r2.sqrt();
        }
    }
    fallback
}

/// `sum |psi(x)|^2 dx^n` and `sum |psi_hat(p)|^2 dp^n` agree (Parseval); kept
/// as a helper for tests and audits.
pub fn parseval_mismatch(psi: &WaveFunction) -> f64 {
    let a = psi.transform(Representation::Position).norm_l2();
    let b = psi.transform(Representation::Momentum).norm_l2();
    (a - b).abs()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place FFT along every axis (unnormalized, rustfft convention).
fn fft_all_axes(values: &mut ArrayD<Complex64>, forward: bool) {
    let ndim = values.ndim();
    for ax in 0..ndim {
        let len = values.shape()[ax];
        let fft = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            if forward {
                p.plan_fft_forward(len)
            } else {
                p.plan_fft_inverse(len)
            }
        });
        let mut scratch = vec![Complex64::new(0.0, 0.0); len];
        for mut lane in values.lanes_mut(Axis(ax)) {
            for (s, v) in scratch.iter_mut().zip(lane.iter()) {
                *s = *v;
            }
            fft.process(&mut scratch);
            for (v, s) in lane.iter_mut().zip(scratch.iter()) {
                *v = *s;
            }
        }
    }
}

/// Multiply by `(-1)^{k_1 + ... + k_n} * scale`; the sign carries the `-L`
/// origin offset of the box through the DFT.
fn apply_sign_and_scale(values: &mut ArrayD<Complex64>, scale: f64) {
    for (idx, v) in values.indexed_iter_mut() {
        let ksum: usize = (0..idx.ndim()).map(|a| idx[a]).sum();
        let sign = if ksum % 2 == 0 { scale } else { -scale };
        *v *= sign;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn standard_gaussian(grid: &Arc<Grid>) -> WaveFunction {
        // pi^{-n/4} e^{-|x|^2/2}: width parameter w = 1/sqrt(2).
        WaveFunction::gaussian_packet(grid.clone(), &vec![0.0; grid.dim()], &vec![0.0; grid.dim()], std::f64::consts::FRAC_1_SQRT_2)
    }

    #[test]
    fn grid_examples() {
        let g = Grid::new(1, 50.0, 1024).unwrap();
        assert_eq!(g.spacing(), 0.09765625);
        assert_abs_diff_eq!(g.max_momentum(), 32.169908772759484, epsilon = 1e-9);
        assert_eq!(g.spacing() * g.points_per_axis() as f64, 2.0 * g.half_width());

        let g3 = Grid::new(3, 20.0, 64).unwrap();
        assert_eq!(g3.total_points(), 64 * 64 * 64);
        assert_eq!(g3.spacing(), 0.625);

        assert!(matches!(Grid::new(1, 50.0, 1000), Err(Error::PointsNotPowerOfTwo(1000))));
        assert!(matches!(Grid::new(4, 50.0, 64), Err(Error::BadDimension(4))));
        assert!(matches!(Grid::new(1, -1.0, 64), Err(Error::BadHalfWidth(_))));
    }

    #[test]
    fn momentum_lattice_symmetric_up_to_nyquist() {
        let g = Grid::new(1, 30.0, 64).unwrap();
        let p = g.momenta();
        let dp = g.momentum_spacing();
        assert_eq!(p[0], 0.0);
        assert_abs_diff_eq!(p[1], dp, epsilon = 1e-15);
        assert_abs_diff_eq!(p[63], -dp, epsilon = 1e-15);
        // single Nyquist point at -pi/dx
        assert_abs_diff_eq!(p[32], -g.max_momentum(), epsilon = 1e-12);
        let n_pos = p.iter().filter(|&&v| v > 0.0).count();
        let n_neg = p.iter().filter(|&&v| v < 0.0).count();
        assert_eq!(n_neg, n_pos + 1);
    }

    #[test]
    fn transform_round_trip() {
        let grid = Grid::shared(1, 40.0, 256).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[3.0], &[1.5], 1.0);
        let back = psi
            .transform(Representation::Momentum)
            .transform(Representation::Position);
        let diff: f64 = psi
            .values()
            .iter()
            .zip(back.values().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "round trip error {diff}");
    }

    #[test]
    fn transform_identity_when_same_rep() {
        let grid = Grid::shared(1, 40.0, 128).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[0.0], 1.0);
        let same = psi.transform(Representation::Position);
        assert_eq!(psi.values(), same.values());
    }

    #[test]
    fn gaussian_transform_closed_form() {
        // pi^{-1/4} e^{-x^2/2}  ->  pi^{-1/4} e^{-p^2/2}
        let grid = Grid::shared(1, 50.0, 1024).unwrap();
        let psi = standard_gaussian(&grid);
        let hat = psi.transform(Representation::Momentum);
        let momenta = grid.momenta();
        let norm = PI.powf(-0.25);
        let mut worst = 0.0f64;
        for (idx, v) in hat.values().indexed_iter() {
            let p = momenta[idx[0]];
            let expect = norm * (-p * p / 2.0).exp();
            worst = worst.max((v - Complex64::new(expect, 0.0)).norm());
        }
        assert!(worst < 1e-8, "gaussian transform error {worst}");
    }

    #[test]
    fn transform_is_isometry() {
        let grid = Grid::shared(2, 20.0, 32).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[1.0, -2.0], &[0.5, 0.25], 1.2);
        let hat = psi.transform(Representation::Momentum);
        assert_abs_diff_eq!(psi.norm_l2(), hat.norm_l2(), epsilon = 1e-12);
        assert!(parseval_mismatch(&psi) < 1e-12);
    }

    #[test]
    fn sobolev_norm_gaussian_oracle() {
        let grid = Grid::shared(1, 50.0, 1024).unwrap();
        let psi = standard_gaussian(&grid);
        assert_abs_diff_eq!(psi.sobolev_norm(0.0).unwrap(), 1.0, epsilon = 1e-10);
        // integral (1+p^2)^2 e^{-p^2} / sqrt(pi) dp = 11/4
        assert_abs_diff_eq!(psi.sobolev_norm(2.0).unwrap(), 11.0f64.sqrt() / 2.0, epsilon = 1e-6);
        assert!(psi.sobolev_norm(-1.0).is_err());
        // s = 0 equals the weighted norm with zero weight and order
        assert_eq!(psi.sobolev_norm(0.0).unwrap(), psi.weighted_norm(0.0, 0));
    }

    #[test]
    fn sobolev_homogeneity() {
        let grid = Grid::shared(1, 30.0, 128).unwrap();
        let psi = standard_gaussian(&grid);
        let scaled = psi.map_values(|v| 2.5 * v);
        assert_abs_diff_eq!(
            scaled.sobolev_norm(1.5).unwrap(),
            2.5 * psi.sobolev_norm(1.5).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn weighted_norm_gaussian_oracle() {
        let grid = Grid::shared(1, 50.0, 1024).unwrap();
        let psi = standard_gaussian(&grid);
        // || p^2 psi || = sqrt(3)/2 from the p^4 Gaussian moment
        assert_abs_diff_eq!(psi.weighted_norm(0.0, 2), 3.0f64.sqrt() / 2.0, epsilon = 1e-6);
        assert!(psi.weighted_norm(3.5, 0) <= 1.0 + 1e-12);
        let zero = psi.map_values(|_| Complex64::new(0.0, 0.0));
        assert_eq!(zero.weighted_norm(1.0, 2), 0.0);
    }

    #[test]
    fn multiplier_identity_and_full_band() {
        let grid = Grid::shared(1, 30.0, 128).unwrap();
        let psi = WaveFunction::gaussian_packet(grid.clone(), &[0.0], &[1.0], 1.0);
        let same = psi.apply_multiplier(|_| 1.0, Representation::Position);
        let diff: f64 = psi
            .values()
            .iter()
            .zip(same.values().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-13);

        let full_band = psi.apply_multiplier(
            |p| if p[0].abs() <= grid.max_momentum() { 1.0 } else { 0.0 },
            Representation::Momentum,
        );
        let diff: f64 = psi
            .values()
            .iter()
            .zip(full_band.values().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn multiplier_multiplicativity() {
        let grid = Grid::shared(1, 30.0, 256).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[1.0], &[0.5], 1.0);
        let w = |x: &[f64]| (1.0 + x[0] * x[0]).powf(-1.0);
        let twice = psi
            .apply_multiplier(w, Representation::Position)
            .apply_multiplier(w, Representation::Position);
        let squared = psi.apply_multiplier(|x| w(x) * w(x), Representation::Position);
        let diff: f64 = twice
            .values()
            .iter()
            .zip(squared.values().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn real_multiplier_is_symmetric() {
        let grid = Grid::shared(1, 30.0, 128).unwrap();
        let phi = WaveFunction::gaussian_packet(grid.clone(), &[2.0], &[0.3], 1.0);
        let psi = WaveFunction::gaussian_packet(grid, &[-1.0], &[-0.7], 1.5);
        let f = |x: &[f64]| (-x[0] * x[0] / 8.0).exp();
        let lhs = phi.inner(&psi.apply_multiplier(f, Representation::Position));
        let rhs = phi.apply_multiplier(f, Representation::Position).inner(&psi);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn free_gaussian_variance() {
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi = standard_gaussian(&grid);
        assert_abs_diff_eq!(psi.position_variance(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn boundary_mass_detects_offcenter_packet() {
        let grid = Grid::shared(1, 20.0, 256).unwrap();
        let centered = WaveFunction::gaussian_packet(grid.clone(), &[0.0], &[0.0], 1.0);
        assert!(centered.boundary_mass() < 1e-12);
        let edge = WaveFunction::gaussian_packet(grid, &[12.0], &[0.0], 1.0);
        assert!(edge.boundary_mass() > 0.5);
    }
}
