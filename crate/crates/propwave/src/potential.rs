//! Parametric families of localized, smooth, time-dependent potentials
//! `V(x, t) = env(x - r(t)) m(t)`, together with a numerical checker for the
//! weighted-decay assumptions the propagation diagnostics rely on.
//!
//! All time derivatives are analytic; the decay checker differentiates the
//! sampled field spectrally so it probes the field actually seen by the
//! solver rather than the model formulas.

use ndarray::ArrayD;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, Representation, WaveFunction};

/// Spatial envelope of the potential.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// `depth * exp(-|x-c|^2 / (2 w^2))`
    GaussianBump { depth: f64, width: f64, center: Vec<f64> },
    /// `amplitude * (1 + |x|^2)^{-exponent/2}`
    InversePower { amplitude: f64, exponent: f64 },
}

impl Envelope {
    fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Envelope::GaussianBump { depth, width, center } => {
                let mut q2 = 0.0;
                for (a, &ya) in y.iter().enumerate() {
                    let d = ya - center.get(a).copied().unwrap_or(0.0);
                    q2 += d * d;
                }
                depth * (-q2 / (2.0 * width * width)).exp()
            }
            Envelope::InversePower { amplitude, exponent } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                amplitude * (1.0 + r2).powf(-exponent / 2.0)
            }
        }
    }

    /// Analytic gradient, used for the moving-center time derivative.
    fn grad(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Envelope::GaussianBump { depth, width, center } => {
                let mut q2 = 0.0;
                for (a, &ya) in y.iter().enumerate() {
                    let d = ya - center.get(a).copied().unwrap_or(0.0);
                    q2 += d * d;
                }
                let v = depth * (-q2 / (2.0 * width * width)).exp();
                for (a, o) in out.iter_mut().enumerate().take(y.len()) {
                    let d = y[a] - center.get(a).copied().unwrap_or(0.0);
                    *o = -d / (width * width) * v;
                }
            }
            Envelope::InversePower { amplitude, exponent } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let f = -exponent * amplitude * (1.0 + r2).powf(-exponent / 2.0 - 1.0);
                for (a, o) in out.iter_mut().enumerate().take(y.len()) {
                    *o = f * y[a];
                }
            }
        }
    }
}

/// Time modulation `m(t)`, with values in [-1, 1] and an analytic derivative.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeModulation {
    Constant,
    Sinusoid { omega: f64, phase: f64 },
    /// `sin(omega t + rate t^2 / 2)`, instantaneous frequency `omega + rate t`.
    Chirp { omega: f64, rate: f64 },
    /// 32 random-phase cosines below `cutoff`, amplitudes normalized so
    /// |m(t)| <= 1; fully determined by `seed`.
    BandLimitedNoise { cutoff: f64, seed: u64 },
}

const NOISE_MODES: usize = 32;

#[derive(Clone, Debug)]
struct NoiseTable {
    amp: Vec<f64>,
    omega: Vec<f64>,
    phase: Vec<f64>,
}

fn noise_table(cutoff: f64, seed: u64) -> NoiseTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amp: Vec<f64> = (0..NOISE_MODES).map(|_| rng.gen_range(0.2..1.0)).collect();
    let omega: Vec<f64> = (0..NOISE_MODES).map(|_| rng.gen_range(0.0..cutoff)).collect();
    let phase: Vec<f64> = (0..NOISE_MODES)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    let total: f64 = amp.iter().sum();
    for a in amp.iter_mut() {
        *a /= total;
    }
    NoiseTable { amp, omega, phase }
}

impl TimeModulation {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeModulation::Constant => 1.0,
            TimeModulation::Sinusoid { omega, phase } => (omega * t + phase).sin(),
            TimeModulation::Chirp { omega, rate } => (omega * t + 0.5 * rate * t * t).sin(),
            TimeModulation::BandLimitedNoise { cutoff, seed } => {
                let tab = noise_table(*cutoff, *seed);
                (0..NOISE_MODES)
                    .map(|j| tab.amp[j] * (tab.omega[j] * t + tab.phase[j]).cos())
                    .sum()
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeModulation::Constant => 0.0,
            TimeModulation::Sinusoid { omega, phase } => omega * (omega * t + phase).cos(),
            TimeModulation::Chirp { omega, rate } => {
                (omega + rate * t) * (omega * t + 0.5 * rate * t * t).cos()
            }
            TimeModulation::BandLimitedNoise { cutoff, seed } => {
                let tab = noise_table(*cutoff, *seed);
                (0..NOISE_MODES)
                    .map(|j| -tab.amp[j] * tab.omega[j] * (tab.omega[j] * t + tab.phase[j]).sin())
                    .sum()
            }
        }
    }
}

/// Bounded oscillation of the potential center, `r(t) = r0 sin(omega t)`
/// per axis, so localization is preserved uniformly in time.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CenterMotion {
    pub amplitude: Vec<f64>,
    pub omega: f64,
}

impl CenterMotion {
    fn offset(&self, t: f64, out: &mut [f64]) {
        let s = (self.omega * t).sin();
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.amplitude.get(a).copied().unwrap_or(0.0) * s;
        }
    }

    fn velocity(&self, t: f64, out: &mut [f64]) {
        let c = self.omega * (self.omega * t).cos();
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.amplitude.get(a).copied().unwrap_or(0.0) * c;
        }
    }
}

/// A full potential family `V(x, t) = env(x - r(t)) m(t)` plus the decay
/// exponent it claims to satisfy.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub envelope: Envelope,
    pub modulation: TimeModulation,
    #[serde(default)]
    pub center_motion: Option<CenterMotion>,
    /// Claimed weight exponent sigma for `<x>^sigma V` boundedness.
    pub decay_claim: f64,
}

impl PotentialSpec {
    pub fn static_gaussian(depth: f64, width: f64) -> PotentialSpec {
        PotentialSpec {
            envelope: Envelope::GaussianBump { depth, width, center: vec![0.0; 3] },
            modulation: TimeModulation::Constant,
            center_motion: None,
            decay_claim: 6.5,
        }
    }

    pub fn zero() -> PotentialSpec {
        PotentialSpec {
            envelope: Envelope::GaussianBump { depth: 0.0, width: 1.0, center: vec![0.0; 3] },
            modulation: TimeModulation::Constant,
            center_motion: None,
            decay_claim: 6.5,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(
            self.envelope,
            Envelope::GaussianBump { depth, .. } if depth == 0.0
        ) || matches!(
            self.envelope,
            Envelope::InversePower { amplitude, .. } if amplitude == 0.0
        )
    }

    /// Whether V depends on t at all (static potentials conserve energy).
    pub fn is_static(&self) -> bool {
        matches!(self.modulation, TimeModulation::Constant) && self.center_motion.is_none()
    }

    pub fn value_at(&self, x: &[f64], t: f64) -> f64 {
        let mut y = [0.0; 3];
        let mut r = [0.0; 3];
        if let Some(motion) = &self.center_motion {
            motion.offset(t, &mut r[..x.len()]);
        }
        for (a, ya) in y.iter_mut().enumerate().take(x.len()) {
            *ya = x[a] - r[a];
        }
        self.envelope.eval(&y[..x.len()]) * self.modulation.eval(t)
    }

    pub fn time_derivative_at(&self, x: &[f64], t: f64) -> f64 {
        let dim = x.len();
        let mut y = [0.0; 3];
        let mut r = [0.0; 3];
        let mut v = [0.0; 3];
        if let Some(motion) = &self.center_motion {
            motion.offset(t, &mut r[..dim]);
            motion.velocity(t, &mut v[..dim]);
        }
        for (a, ya) in y.iter_mut().enumerate().take(dim) {
            *ya = x[a] - r[a];
        }
        let m = self.modulation.eval(t);
        let dm = self.modulation.derivative(t);
        let env = self.envelope.eval(&y[..dim]);
        let mut grad = [0.0; 3];
        self.envelope.grad(&y[..dim], &mut grad[..dim]);
        let advect: f64 = (0..dim).map(|a| -grad[a] * v[a]).sum();
        env * dm + advect * m
    }

    /// Sample `V(., t)` on the grid.
    pub fn sample(&self, grid: &Grid, t: f64) -> ArrayD<f64> {
        self.sample_with(grid, |x| self.value_at(x, t))
    }

    /// Sample the analytic time derivative on the grid.
    pub fn sample_time_derivative(&self, grid: &Grid, t: f64) -> ArrayD<f64> {
        self.sample_with(grid, |x| self.time_derivative_at(x, t))
    }

    /// Sample `x . grad V(., t)` (multiplication operator) on the grid;
    /// this is the first-order commutator symbol with the dilation generator.
    pub fn sample_radial_gradient(&self, grid: &Grid, t: f64) -> ArrayD<f64> {
        self.sample_with(grid, |x| {
            let dim = x.len();
            let mut y = [0.0; 3];
            let mut r = [0.0; 3];
            if let Some(motion) = &self.center_motion {
                motion.offset(t, &mut r[..dim]);
            }
            for (a, ya) in y.iter_mut().enumerate().take(dim) {
                *ya = x[a] - r[a];
            }
            let mut grad = [0.0; 3];
            self.envelope.grad(&y[..dim], &mut grad[..dim]);
            let m = self.modulation.eval(t);
            (0..dim).map(|a| x[a] * grad[a] * m).sum()
        })
    }

    fn sample_with<F>(&self, grid: &Grid, f: F) -> ArrayD<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        let shape = grid.shape();
        let positions = grid.positions();
        let mut field = ArrayD::zeros(ndarray::IxDyn(&shape));
        let mut buf = [0.0; 3];
        for (idx, v) in field.indexed_iter_mut() {
            for (a, b) in buf.iter_mut().take(grid.dim()).enumerate() {
                *b = positions[idx[a]];
            }
            *v = f(&buf[..grid.dim()]);
        }
        field
    }
}

/// Measured suprema for the decay assumptions, with the verdict.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub sup_weighted_v: f64,
    pub sup_weighted_derivatives: f64,
    pub sigma_tested: f64,
    pub bound: f64,
    pub grid_points: usize,
    pub times_sampled: usize,
    pub pass: bool,
}

/// Check `<x>^sigma |V|` and `<x>^sigma (|dV/dt| + |grad V| + |lap V|)`
/// against the bound `c` over the lattice and the given time samples.
/// Spatial derivatives are taken spectrally from the sampled field.
pub fn verify_decay_assumptions(
    spec: &PotentialSpec,
    grid: &Grid,
    sigma: f64,
    time_samples: &[f64],
    bound: f64,
) -> AssumptionReport {
    assert!(sigma > 0.0, "sigma must be positive");
    let positions = grid.positions();
    let dim = grid.dim();
    let mut sup_v = 0.0f64;
    let mut sup_d = 0.0f64;
    for &t in time_samples {
        let v = spec.sample(grid, t);
        let dvdt = spec.sample_time_derivative(grid, t);
        let (grad_mag, lap) = spectral_derivatives(grid, &v);
        let mut buf = [0.0; 3];
        for (idx, val) in v.indexed_iter() {
            for (a, b) in buf.iter_mut().take(dim).enumerate() {
                *b = positions[idx[a]];
            }
            let x2: f64 = buf[..dim].iter().map(|x| x * x).sum();
            let w = (1.0 + x2).powf(sigma / 2.0);
            sup_v = sup_v.max(w * val.abs());
            let d = dvdt[idx.clone()].abs() + grad_mag[idx.clone()] + lap[idx.clone()].abs();
            sup_d = sup_d.max(w * d);
        }
    }
    AssumptionReport {
        sup_weighted_v: sup_v,
        sup_weighted_derivatives: sup_d,
        sigma_tested: sigma,
        bound,
        grid_points: grid.total_points(),
        times_sampled: time_samples.len(),
        pass: sup_v.is_finite() && sup_d.is_finite() && sup_v < bound && sup_d < bound,
    }
}

/// |grad V| and lap V of a real field, via the momentum representation.
fn spectral_derivatives(grid: &Grid, field: &ArrayD<f64>) -> (ArrayD<f64>, ArrayD<f64>) {
    let complex = field.mapv(|v| Complex64::new(v, 0.0));
    let wf = WaveFunction::new(
        std::sync::Arc::new(grid.clone()),
        complex,
        Representation::Position,
        0.0,
    );
    let hat = wf.transform(Representation::Momentum);
    let momenta = grid.momenta().to_vec();
    let dim = grid.dim();

    let mut grad_sq: ArrayD<f64> = ArrayD::zeros(field.raw_dim());
    for axis in 0..dim {
        let mut partial = hat.clone();
        for (idx, v) in partial.values_mut().indexed_iter_mut() {
            *v *= Complex64::new(0.0, momenta[idx[axis]]);
        }
        let back = partial.transform(Representation::Position);
        ndarray::Zip::from(&mut grad_sq)
            .and(back.values())
            .for_each(|g, v| *g += v.re * v.re);
    }
    let grad_mag = grad_sq.mapv(f64::sqrt);

    let mut lap_hat = hat.clone();
    for (idx, v) in lap_hat.values_mut().indexed_iter_mut() {
        let mut p2 = 0.0;
        for a in 0..dim {
            let p = momenta[idx[a]];
            p2 += p * p;
        }
        *v *= -p2;
    }
    let lap = lap_hat.transform(Representation::Position).values().mapv(|v| v.re);
    (grad_mag, lap)
}
