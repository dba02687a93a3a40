//! Propagation observables: symmetric time-dependent operators whose
//! expectations along the flow carry the growth/decay information the
//! scenarios fit and judge.

pub mod dyadic;
pub mod fit;
pub mod scenario;

pub use dyadic::{dyadic_scalar_identity, dyadic_sum, slice_schedule, DyadicSums, SliceSchedule};
pub use fit::{fit_exponent, ExponentFit};
pub use scenario::{run_scenario, EstimateReport, Scenario, ScenarioOutcome};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    free_frame_cutoff, function_of_a, AFunction, CutoffShape, DilationMethod, PhaseSpaceCutoff,
    ScaleRule,
};
use crate::error::{Error, Result};
use crate::grid::{Representation, WaveFunction};
use crate::potential::PotentialSpec;
use crate::propagate::{free_evolve, Trajectory};

/// The catalog of propagation observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableName {
    /// `F2(|p|/t^alpha >= 1) H(t) + H(t) F2`: kinetic energy above the
    /// rising momentum threshold.
    KineticThreshold,
    /// `F((A+M)/R <= -1)`: incoming-wave flag.
    IncomingFlag,
    /// `sum_a <p_a psi, g(A) p_a psi>` with `g(a) = a^l F(a) / ln<a>_e`:
    /// the H1-weighted incoming observable.
    IncomingWeighted,
    /// `H F_c + F_c H` with the comoving ball `|x - 2pt| <= R_c`.
    PsEnergy,
    /// `F_A(A/(tM) <= 1/2) F_{A,C}((2p^2 t - A)/t^alpha >= 1) + c.c.`
    AwayBM,
    /// `F_A(A/(tM) >= 1/2) F_{A,C}((A - 2p^2 t)/t^alpha >= 1) + c.c.`
    AwayBMMinus,
    /// `F_{A,M} H(t) F_{A,M}` with `F_{A,M} = F(A/(M t^alpha) >= 1)`.
    OutgoingEnergy,
    /// `H(t) F_c(|x - 2pt|/R <= 1) H(t)` at fixed scale `R`.
    PsHighFreq,
}

impl ObservableName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObservableName::KineticThreshold => "kinetic_threshold",
            ObservableName::IncomingFlag => "incoming_flag",
            ObservableName::IncomingWeighted => "incoming_weighted",
            ObservableName::PsEnergy => "ps_energy",
            ObservableName::AwayBM => "away_b_m",
            ObservableName::AwayBMMinus => "away_b_m_minus",
            ObservableName::OutgoingEnergy => "outgoing_energy",
            ObservableName::PsHighFreq => "ps_high_freq",
        }
    }
}

/// Scale and shape parameters shared by the observable family.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableParams {
    /// Spectral threshold M (>= m0 >= 1).
    pub m: f64,
    /// Profile width R (>= 1).
    pub r: f64,
    /// Dyadic base scale.
    pub m0: f64,
    /// Exponent of the `t^alpha` scale rules, in (0, 1).
    pub alpha: f64,
    /// Secondary exponent, in (0, 1].
    pub beta: f64,
    /// Dyadic weight power.
    pub ell: i32,
    /// Momentum threshold K for shell constructions.
    pub k_threshold: f64,
    /// Scale rule for the comoving cutoffs.
    pub rc: ScaleRule,
    /// Transition width of t-scaled profiles, relative to their scale.
    pub rel_width: f64,
}

impl Default for ObservableParams {
    fn default() -> Self {
        ObservableParams {
            m: 10.0,
            r: 5.0,
            m0: 1.0,
            alpha: 0.2,
            beta: 1.0,
            ell: 1,
            k_threshold: 4.0,
            rc: ScaleRule::PowerLaw { coeff: 1.0, exponent: 0.4 },
            rel_width: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub name: ObservableName,
    pub params: ObservableParams,
}

impl ObservableSpec {
    pub fn new(name: ObservableName, params: ObservableParams) -> Result<ObservableSpec> {
        params.validate()?;
        Ok(ObservableSpec { name, params })
    }
}

impl ObservableParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadObservableParameter {
                name: "alpha",
                value: self.alpha,
                window: "(0, 1)",
            });
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::BadObservableParameter {
                name: "beta",
                value: self.beta,
                window: "(0, 1]",
            });
        }
        if self.r < 1.0 {
            return Err(Error::BadObservableParameter {
                name: "r",
                value: self.r,
                window: "[1, inf)",
            });
        }
        if self.m0 < 1.0 || self.m < self.m0 {
            return Err(Error::BadObservableParameter {
                name: "m",
                value: self.m,
                window: "m >= m0 >= 1",
            });
        }
        if !(self.rel_width > 0.0) {
            return Err(Error::BadObservableParameter {
                name: "rel_width",
                value: self.rel_width,
                window: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// Expectation value plus the imaginary residue of the computed composition
/// (zero by construction for the exactly-symmetrized product forms).
#[derive(Clone, Copy, Debug)]
pub struct ProbValue {
    pub value: f64,
    pub imag_residue: f64,
}

/// `H(t) psi = p^2 psi + V(., t) psi`.
pub fn apply_hamiltonian(psi: &WaveFunction, potential: &PotentialSpec, t: f64) -> WaveFunction {
    let kinetic = psi.apply_momentum_multiplier(|p2| p2);
    if potential.is_zero() {
        return kinetic;
    }
    let v = potential.sample(psi.grid(), t);
    let pos = psi.transform(Representation::Position);
    let mut vpsi = pos.clone();
    ndarray::Zip::from(vpsi.values_mut())
        .and(&v)
        .for_each(|a, &vi| *a *= vi);
    kinetic
        .transform(Representation::Position)
        .add_scaled(&vpsi, Complex64::new(1.0, 0.0))
}

/// Regularized `ln <a>` that stays >= 1, so spectral weights `a / ln<a>` are
/// well defined across the whole axis.
pub fn log_weight(a: f64) -> f64 {
    ((std::f64::consts::E).powi(2) + a * a).sqrt().ln()
}

fn smooth_step_up(u: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * u).exp())
}

/// A-calculus backend for an observable evaluation: either a caller-fixed
/// method or per-shape automatic Chebyshev sizing.
#[derive(Clone, Copy, Debug)]
pub enum MethodPolicy {
    Auto,
    Fixed(DilationMethod),
}

impl MethodPolicy {
    fn resolve(&self, psi: &WaveFunction, shape_width: f64) -> DilationMethod {
        match self {
            MethodPolicy::Fixed(m) => *m,
            MethodPolicy::Auto => DilationMethod::chebyshev_auto(psi.grid(), shape_width),
        }
    }
}

/// Evaluate `<psi, B(t) psi>` for the named observable. Compositions are
/// symmetrized explicitly; sandwich forms report their imaginary residue.
pub fn evaluate_prob(
    psi: &WaveFunction,
    spec: &ObservableSpec,
    potential: &PotentialSpec,
    t: f64,
    policy: &MethodPolicy,
) -> Result<ProbValue> {
    spec.params.validate()?;
    let p = &spec.params;
    let needs_scaled_time = matches!(
        spec.name,
        ObservableName::KineticThreshold
            | ObservableName::AwayBM
            | ObservableName::AwayBMMinus
            | ObservableName::OutgoingEnergy
    );
    if needs_scaled_time && t < 1.0 {
        return Err(Error::ObservableInvalidAt {
            name: spec.name.as_str().to_string(),
            t,
            reason: "t^alpha scale rules need t >= 1".to_string(),
        });
    }

    match spec.name {
        ObservableName::KineticThreshold => {
            let threshold = t.powf(p.alpha);
            let width = p.rel_width * threshold;
            let cut = move |x: &[f64]| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                smooth_step_up((r - threshold) / width)
            };
            let h_psi = apply_hamiltonian(psi, potential, t);
            let f_hpsi = h_psi.apply_multiplier(cut, Representation::Momentum);
            let f_psi = psi.apply_multiplier(cut, Representation::Momentum);
            let h_fpsi = apply_hamiltonian(&f_psi, potential, t);
            let z = psi.inner(&f_hpsi) + psi.inner(&h_fpsi);
            Ok(ProbValue { value: z.re, imag_residue: z.im.abs() })
        }
        ObservableName::IncomingFlag => {
            let shape = CutoffShape::step_down(p.m, p.r);
            let method = policy.resolve(psi, shape.width);
            let f_psi = function_of_a(psi, &shape.into(), &method)?;
            let z = psi.inner(&f_psi);
            Ok(ProbValue { value: z.re, imag_residue: z.im.abs() })
        }
        ObservableName::IncomingWeighted => {
            let shape = CutoffShape::step_down(p.m, p.r);
            let ell = p.ell;
            let g = move |a: f64| a.powi(ell) * shape.eval(a) / log_weight(a);
            let method = policy.resolve(psi, shape.width);
            let dim = psi.grid().dim();
            let momenta = psi.grid().momenta().to_vec();
            let mut z = Complex64::new(0.0, 0.0);
            for axis in 0..dim {
                let momenta = momenta.clone();
                let hat = psi.transform(Representation::Momentum);
                let mut v = hat.clone();
                for (idx, val) in v.values_mut().indexed_iter_mut() {
                    *val *= momenta[idx[axis]];
                }
                let v = v.transform(Representation::Position);
                let u = function_of_a(&v, &AFunction::Scalar(&g), &method)?;
                z += v.inner(&u);
            }
            Ok(ProbValue { value: z.re, imag_residue: z.im.abs() })
        }
        ObservableName::PsEnergy => {
            let rc = p.rc.at(t);
            if !(rc > 0.0) {
                return Err(Error::ObservableInvalidAt {
                    name: spec.name.as_str().to_string(),
                    t,
                    reason: format!("comoving scale R_c = {rc} must be positive"),
                });
            }
            let cutoff = PhaseSpaceCutoff::ball(ScaleRule::Constant { value: rc }, p.rel_width);
            let h_psi = apply_hamiltonian(psi, potential, t);
            let fc_hpsi = free_frame_cutoff(&h_psi, t, &cutoff);
            let fc_psi = free_frame_cutoff(psi, t, &cutoff);
            let h_fcpsi = apply_hamiltonian(&fc_psi, potential, t);
            let z = psi.inner(&fc_hpsi) + psi.inner(&h_fcpsi);
            Ok(ProbValue { value: z.re, imag_residue: z.im.abs() })
        }
        ObservableName::AwayBM | ObservableName::AwayBMMinus => {
            let t_alpha = t.powf(p.alpha);
            let (near, conj) = match spec.name {
                // F_A(A/(tM) <= 1/2): falls at +tM/2 ; conjugated F_A(-A/t^a >= 1)
                ObservableName::AwayBM => (
                    CutoffShape::step_down(-t * p.m / 2.0, p.rel_width * t * p.m),
                    CutoffShape::step_down(t_alpha, p.rel_width * t_alpha),
                ),
                // F_A(A/(tM) >= 1/2) ; conjugated F_A(A/t^a >= 1)
                _ => (
                    CutoffShape::step_up(t * p.m / 2.0, p.rel_width * t * p.m),
                    CutoffShape::step_up(t_alpha, p.rel_width * t_alpha),
                ),
            };
            let near_method = policy.resolve(psi, near.width);
            let conj_method = policy.resolve(psi, conj.width);
            let back = free_evolve(psi, -t);
            let cut = function_of_a(&back, &conj.into(), &conj_method)?;
            let comoving = free_evolve(&cut, t);
            let f1_psi = function_of_a(psi, &near.into(), &near_method)?;
            let z = f1_psi.inner(&comoving);
            Ok(ProbValue { value: 2.0 * z.re, imag_residue: 0.0 })
        }
        ObservableName::OutgoingEnergy => {
            let scale = p.m * t.powf(p.alpha);
            let shape = CutoffShape::step_up(scale, p.rel_width * scale);
            let method = policy.resolve(psi, shape.width);
            let phi = function_of_a(psi, &shape.into(), &method)?;
            let h_phi = apply_hamiltonian(&phi, potential, t);
            let z = phi.inner(&h_phi);
            Ok(ProbValue { value: z.re, imag_residue: z.im.abs() })
        }
        ObservableName::PsHighFreq => {
            let rc = p.rc.at(t);
            if !(rc > 0.0) {
                return Err(Error::ObservableInvalidAt {
                    name: spec.name.as_str().to_string(),
                    t,
                    reason: format!("cutoff scale R = {rc} must be positive"),
                });
            }
            let cutoff = PhaseSpaceCutoff::ball(ScaleRule::Constant { value: rc }, p.rel_width);
            let h_psi = apply_hamiltonian(psi, potential, t);
            let fc_hpsi = free_frame_cutoff(&h_psi, t, &cutoff);
            let z = h_psi.inner(&fc_hpsi);
            Ok(ProbValue { value: z.re, imag_residue: z.im.abs() })
        }
    }
}

/// Exact pieces of `d/dt <F(A)>` along the flow: the kinetic commutator
/// `<i[p^2, F(A)]>` (sign-definite for monotone profiles) and the potential
/// remainder `<i[V, F(A)]>`.
pub fn incoming_flag_derivative_terms(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    t: f64,
    m: f64,
    r: f64,
    policy: &MethodPolicy,
) -> Result<(f64, f64)> {
    let shape = CutoffShape::step_down(m, r);
    let method = policy.resolve(psi, shape.width);
    let f_psi = function_of_a(psi, &shape.into(), &method)?;
    let p2_psi = psi.apply_momentum_multiplier(|p2| p2);
    // <i[p^2, F]> = -2 Im <p^2 psi, F psi>
    let kinetic = -2.0 * p2_psi.inner(&f_psi).im;
    let potential_term = if potential.is_zero() {
        0.0
    } else {
        let v = potential.sample(psi.grid(), t);
        let pos = psi.transform(Representation::Position);
        let mut v_psi = pos.clone();
        ndarray::Zip::from(v_psi.values_mut())
            .and(&v)
            .for_each(|a, &vi| *a *= vi);
        -2.0 * v_psi.inner(&f_psi.transform(Representation::Position)).im
    };
    Ok((kinetic, potential_term))
}

/// Residual series of the comoving-energy balance at constant `R_c`:
/// the centered difference of `<H F_c + F_c H>` against the directly
/// evaluated `<dV/dt F_c + F_c dV/dt> + <H i[V,F_c] + i[V,F_c] H>`.
pub fn heisenberg_consistency(
    traj: &Trajectory,
    potential: &PotentialSpec,
    rc: f64,
    rel_width: f64,
) -> Result<Vec<(f64, f64)>> {
    if traj.snapshots.len() < 3 {
        return Err(Error::SnapshotsTooCoarse { stride: 1, max: traj.snapshots.len() });
    }
    let cutoff = PhaseSpaceCutoff::ball(ScaleRule::Constant { value: rc }, rel_width);
    let spec = ObservableSpec {
        name: ObservableName::PsEnergy,
        params: ObservableParams {
            rc: ScaleRule::Constant { value: rc },
            rel_width,
            ..ObservableParams::default()
        },
    };
    let policy = MethodPolicy::Auto;
    let b: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|(t, psi)| {
            evaluate_prob(psi, &spec, potential, *t, &policy).map(|v| (*t, v.value))
        })
        .collect::<Result<_>>()?;

    let mut residuals = Vec::new();
    for i in 1..traj.snapshots.len() - 1 {
        let (t_prev, _) = b[i - 1];
        let (t, psi) = &traj.snapshots[i];
        let (t_next, _) = b[i + 1];
        let fd = (b[i + 1].1 - b[i - 1].1) / (t_next - t_prev);

        let grid = psi.grid().clone();
        let pos = psi.transform(Representation::Position);
        let fc_psi = free_frame_cutoff(psi, *t, &cutoff);
        // <dV/dt F_c + F_c dV/dt> = 2 Re <dV/dt psi, F_c psi>
        let dvdt = potential.sample_time_derivative(&grid, *t);
        let mut dv_psi = pos.clone();
        ndarray::Zip::from(dv_psi.values_mut())
            .and(&dvdt)
            .for_each(|a, &vi| *a *= vi);
        let term1 = 2.0 * dv_psi.inner(&fc_psi.transform(Representation::Position)).re;

        // C = i[V, F_c]; <H C + C H> = 2 Re <H psi, C psi>
        let v = potential.sample(&grid, *t);
        let mut v_fcpsi = fc_psi.transform(Representation::Position);
        ndarray::Zip::from(v_fcpsi.values_mut())
            .and(&v)
            .for_each(|a, &vi| *a *= vi);
        let mut v_psi = pos.clone();
        ndarray::Zip::from(v_psi.values_mut())
            .and(&v)
            .for_each(|a, &vi| *a *= vi);
        let fc_vpsi = free_frame_cutoff(&v_psi.with_time(*t), *t, &cutoff);
        let c_psi = v_fcpsi
            .add_scaled(&fc_vpsi.transform(Representation::Position), Complex64::new(-1.0, 0.0))
            .map_values(|z| Complex64::new(0.0, 1.0) * z);
        let h_psi = apply_hamiltonian(psi, potential, *t);
        let term2 = 2.0 * h_psi.transform(Representation::Position).inner(&c_psi).re;

        residuals.push((*t, (fd - (term1 + term2)).abs()));
    }
    Ok(residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::potential::{Envelope, TimeModulation};
    use crate::propagate::{evolve, Schedule};
    use approx::assert_abs_diff_eq;

    fn shell_state(k: f64) -> WaveFunction {
        // boost the envelope to |p| ~ k first, then clean it with the shell
        let grid = Grid::shared(1, 60.0, 1024).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[k], 2.0);
        let chi = crate::calculus::momentum_shell(k, 0.25);
        let mut out = psi.apply_multiplier(chi, Representation::Momentum);
        let n = out.norm_l2();
        out = out.map_values(|v| v / n);
        out
    }

    #[test]
    fn ps_energy_with_huge_ball_is_twice_energy() {
        // F_c ~ 1 collapses <H F_c + F_c H> to 2 <H>
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[0.8], 1.0);
        let potential = PotentialSpec::zero();
        let spec = ObservableSpec {
            name: ObservableName::PsEnergy,
            params: ObservableParams {
                rc: ScaleRule::Constant { value: 1e7 },
                rel_width: 0.02,
                ..ObservableParams::default()
            },
        };
        let got = evaluate_prob(&psi, &spec, &potential, 2.0, &MethodPolicy::Auto).unwrap();
        let expect = 2.0 * psi.momentum_expectation(|p2| p2);
        assert_abs_diff_eq!(got.value, expect, epsilon = 1e-8);
        assert!(got.imag_residue < 1e-8);
    }

    #[test]
    fn incoming_flag_vanishes_after_projection_removal() {
        // an outgoing packet (x0 >> 0, k >> 0) has spectral content far
        // above -M; removing its incoming and interior parts leaves a state
        // the flag cannot see
        let grid = Grid::shared(1, 60.0, 1024).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[20.0], &[3.0], 2.0);
        let (plus, zero_part, minus) = crate::calculus::projection_triple(
            &psi,
            10.0,
            5.0,
            &DilationMethod::chebyshev_auto(psi.grid(), 5.0),
        )
        .unwrap();
        let cleaned = psi
            .add_scaled(&minus, Complex64::new(-1.0, 0.0))
            .add_scaled(&zero_part, Complex64::new(-1.0, 0.0));
        let spec = ObservableSpec {
            name: ObservableName::IncomingFlag,
            params: ObservableParams::default(),
        };
        let potential = PotentialSpec::zero();
        let full = evaluate_prob(&psi, &spec, &potential, 1.0, &MethodPolicy::Auto).unwrap();
        let rest = evaluate_prob(&cleaned, &spec, &potential, 1.0, &MethodPolicy::Auto).unwrap();
        assert!(rest.value.abs() < 1e-6, "flag on cleaned state {}", rest.value);
        assert!(full.value >= rest.value);
        // and the outgoing component dominates the incoming one
        assert!(minus.norm_l2() / plus.norm_l2() < 0.1);
    }

    #[test]
    fn kinetic_threshold_on_shell_state() {
        // shell at |p| ~ 4 far above threshold t^alpha = 1: expectation is
        // close to 2 <p^2>
        let psi = shell_state(4.0);
        let potential = PotentialSpec::zero();
        let spec = ObservableSpec {
            name: ObservableName::KineticThreshold,
            params: ObservableParams { alpha: 0.2, ..ObservableParams::default() },
        };
        let got = evaluate_prob(&psi, &spec, &potential, 1.0, &MethodPolicy::Auto).unwrap();
        let p2 = psi.momentum_expectation(|p2| p2);
        assert!(
            (got.value - 2.0 * p2).abs() < 0.1 * 2.0 * p2,
            "threshold expectation {} vs 2<p^2> {}",
            got.value,
            2.0 * p2
        );
    }

    #[test]
    fn kinetic_threshold_requires_t_at_least_one() {
        let psi = shell_state(4.0);
        let spec = ObservableSpec {
            name: ObservableName::KineticThreshold,
            params: ObservableParams::default(),
        };
        assert!(matches!(
            evaluate_prob(&psi, &spec, &PotentialSpec::zero(), 0.5, &MethodPolicy::Auto),
            Err(Error::ObservableInvalidAt { .. })
        ));
    }

    #[test]
    fn params_validation() {
        let mut p = ObservableParams::default();
        p.alpha = 1.5;
        assert!(matches!(
            p.validate(),
            Err(Error::BadObservableParameter { name: "alpha", .. })
        ));
        let mut p = ObservableParams::default();
        p.m = 0.5;
        p.m0 = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn heisenberg_residual_vanishes_for_free_flow() {
        let grid = Grid::shared(1, 40.0, 256).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[0.5], 1.5);
        let potential = PotentialSpec::zero();
        let schedule = Schedule::new(1.0, 1.2, 1e-3, 20).unwrap();
        let traj = evolve(&psi, &potential, &schedule);
        let res = heisenberg_consistency(&traj, &potential, 10.0, 0.25).unwrap();
        for (t, r) in res {
            assert!(r < 1e-8, "free-flow residual {r} at t={t}");
        }
    }

    #[test]
    fn heisenberg_residual_small_for_modulated_potential() {
        let grid = Grid::shared(1, 40.0, 256).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[0.4], 1.5);
        let potential = PotentialSpec {
            envelope: Envelope::GaussianBump { depth: -0.8, width: 1.5, center: vec![0.0] },
            modulation: TimeModulation::Sinusoid { omega: 1.3, phase: 0.3 },
            center_motion: None,
            decay_claim: 6.5,
        };
        let schedule = Schedule::new(1.0, 1.5, 5e-4, 25).unwrap();
        let traj = evolve(&psi, &potential, &schedule);
        let res = heisenberg_consistency(&traj, &potential, 10.0, 0.25).unwrap();
        let worst = res.iter().map(|(_, r)| *r).fold(0.0, f64::max);
        assert!(worst < 1e-3, "heisenberg residual {worst}");
    }

    #[test]
    fn incoming_derivative_terms_balance_flag_change() {
        // d/dt <F> integrates to <F>_T - <F>_0 within quadrature error
        let grid = Grid::shared(1, 50.0, 512).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[-0.6], 1.5);
        let potential = PotentialSpec::static_gaussian(-0.5, 1.5);
        let schedule = Schedule::new(0.0, 2.0, 1e-3, 40).unwrap();
        let traj = evolve(&psi, &potential, &schedule);
        let (m, r) = (2.0, 2.0);
        let policy = MethodPolicy::Auto;
        let spec = ObservableSpec {
            name: ObservableName::IncomingFlag,
            params: ObservableParams { m, r, m0: 1.0, ..ObservableParams::default() },
        };
        let flags: Vec<(f64, f64)> = traj
            .snapshots
            .iter()
            .map(|(t, f)| {
                (
                    *t,
                    evaluate_prob(f, &spec, &potential, *t, &policy).unwrap().value,
                )
            })
            .collect();
        let mut integral = 0.0;
        let terms: Vec<(f64, f64, f64)> = traj
            .snapshots
            .iter()
            .map(|(t, f)| {
                let (k, p) = incoming_flag_derivative_terms(f, &potential, *t, m, r, &policy).unwrap();
                (*t, k, p)
            })
            .collect();
        for w in terms.windows(2) {
            let h = w[1].0 - w[0].0;
            integral += 0.5 * h * (w[0].1 + w[0].2 + w[1].1 + w[1].2);
        }
        let change = flags.last().unwrap().1 - flags[0].1;
        assert!(
            (change - integral).abs() < 1e-3,
            "balance defect {} (change {change}, integral {integral})",
            (change - integral).abs()
        );
    }
}
