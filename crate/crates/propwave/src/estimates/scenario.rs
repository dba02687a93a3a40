//! Scenario runners: evolve once, evaluate the scenario's observable family
//! on the stored snapshots, fit growth exponents, and issue verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{function_of_a, CutoffShape, ScaleRule};
use crate::error::{Error, Result};
use crate::grid::{Grid, Representation, WaveFunction};
use crate::potential::{verify_decay_assumptions, AssumptionReport, PotentialSpec};
use crate::propagate::{evolve, Schedule, Trajectory};

use super::dyadic::{dyadic_sum, slice_schedule, SliceSchedule};
use super::fit::{fit_exponent, ExponentFit};
use super::{
    evaluate_prob, incoming_flag_derivative_terms, log_weight, MethodPolicy, ObservableName,
    ObservableParams, ObservableSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LocalSmoothness,
    KineticGrowth,
    IncomingH2,
    IncomingPres,
    PsEnergy,
    AwayFromPs,
    OutgoingH2,
    PsHighFreq,
}

pub const ALL_SCENARIOS: [Scenario; 8] = [
    Scenario::LocalSmoothness,
    Scenario::KineticGrowth,
    Scenario::IncomingH2,
    Scenario::IncomingPres,
    Scenario::PsEnergy,
    Scenario::AwayFromPs,
    Scenario::OutgoingH2,
    Scenario::PsHighFreq,
];

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::LocalSmoothness => "local_smoothness",
            Scenario::KineticGrowth => "kinetic_growth",
            Scenario::IncomingH2 => "incoming_h2",
            Scenario::IncomingPres => "incoming_pres",
            Scenario::PsEnergy => "ps_energy",
            Scenario::AwayFromPs => "away_from_ps",
            Scenario::OutgoingH2 => "outgoing_h2",
            Scenario::PsHighFreq => "ps_high_freq",
        }
    }

    pub fn parse(s: &str) -> Result<Scenario> {
        ALL_SCENARIOS
            .iter()
            .find(|sc| sc.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }

    /// One-line statement of the bound the scenario checks.
    pub fn anchor(&self) -> &'static str {
        match self {
            Scenario::LocalSmoothness => {
                "weighted H2 norm <x>^{-3.5} Lap psi stays bounded, sup over t"
            }
            Scenario::KineticGrowth => "kinetic energy <p^2>_t grows no faster than t^{2/5}",
            Scenario::IncomingH2 => "incoming component P^-(A) psi stays H2-bounded, uniformly in t",
            Scenario::IncomingPres => {
                "H1 norm on the incoming spectral side is bounded on time average"
            }
            Scenario::PsEnergy => "comoving energy <H F_c + F_c H> is uniformly bounded in time",
            Scenario::AwayFromPs => {
                "dyadic spectral-weight observables away from x ~ 2pt stay bounded"
            }
            Scenario::OutgoingH2 => "outgoing-energy sandwich <F H F> stays bounded, sup over t",
            Scenario::PsHighFreq => {
                "high-frequency comoving energy telescopes over T_n = T_{n-1}^{4/5} slices"
            }
        }
    }

    /// Parameters the scenario actually reads from the observable block.
    pub fn required_params(&self) -> &'static [&'static str] {
        match self {
            Scenario::LocalSmoothness => &["fit_window"],
            Scenario::KineticGrowth => &["alpha", "fit_window"],
            Scenario::IncomingH2 => &["m", "r", "fit_window"],
            Scenario::IncomingPres => &["m", "r", "m0", "ell", "dyadic_terms"],
            Scenario::PsEnergy => &["rc", "rel_width", "fit_window"],
            Scenario::AwayFromPs => &["m0", "alpha", "ell", "dyadic_terms"],
            Scenario::OutgoingH2 => &["m", "alpha", "fit_window"],
            Scenario::PsHighFreq => &["rc", "slice_ratio"],
        }
    }
}

/// Initial state family.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Gaussian packet with mean velocity `2k = velocity`.
    Gaussian { center: Vec<f64>, velocity: Vec<f64>, width: f64 },
    /// Gaussian envelope filtered to the momentum shell `|p| ~ k`.
    MomentumShell { k: f64, rel_width: f64, envelope_width: f64 },
}

impl InitialState {
    pub fn build(&self, grid: &std::sync::Arc<Grid>) -> WaveFunction {
        match self {
            InitialState::Gaussian { center, velocity, width } => {
                let k: Vec<f64> = velocity.iter().map(|v| v / 2.0).collect();
                WaveFunction::gaussian_packet(grid.clone(), center, &k, *width)
            }
            InitialState::MomentumShell { k, rel_width, envelope_width } => {
                // boost along the first axis so the shell filter has signal
                let mut boost = vec![0.0; grid.dim()];
                boost[0] = *k;
                let base = WaveFunction::gaussian_packet(
                    grid.clone(),
                    &vec![0.0; grid.dim()],
                    &boost,
                    *envelope_width,
                );
                let chi = crate::calculus::momentum_shell(*k, *rel_width);
                let mut out = base.apply_multiplier(chi, Representation::Momentum);
                let n = out.norm_l2();
                if n > 0.0 {
                    out = out.map_values(|v| v / n);
                }
                out
            }
        }
    }
}

/// Fully resolved scenario configuration (file defaults already applied).
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub potential: PotentialSpec,
    pub sigma_check: f64,
    pub assumption_bound: f64,
    pub expect_assumption_pass: bool,
    pub initial: InitialState,
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub probe_max: usize,
    pub obs: ObservableParams,
    pub dyadic_terms: usize,
    pub slice_ratio: f64,
    pub fit_window: (f64, f64),
    pub trend_threshold: f64,
    pub growth_bound: f64,
    pub free_exponent_tol: f64,
    pub balance_tolerance: f64,
    pub heisenberg_span: (f64, f64),
    pub heisenberg_dt: f64,
    pub heisenberg_tolerance: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    /// "<=", ">=", or "abs<=" against the threshold.
    pub comparison: &'static str,
}

impl Verdict {
    fn le(name: &str, value: f64, threshold: f64) -> Verdict {
        Verdict {
            name: name.to_string(),
            pass: value <= threshold,
            value,
            threshold,
            comparison: "<=",
        }
    }

    fn abs_le(name: &str, value: f64, threshold: f64) -> Verdict {
        Verdict {
            name: name.to_string(),
            pass: value.abs() <= threshold,
            value,
            threshold,
            comparison: "abs<=",
        }
    }

    fn flag(name: &str, pass: bool) -> Verdict {
        Verdict {
            name: name.to_string(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            comparison: ">=",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedFit {
    pub name: String,
    #[serde(flatten)]
    pub fit: ExponentFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
}

/// Everything a scenario run measures, plus the verdicts; re-evaluable
/// offline from the recorded series and tolerances.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub scenario: String,
    pub meta: RunMeta,
    pub assumption: AssumptionReport,
    pub series: Vec<NamedSeries>,
    pub exponents: Vec<NamedFit>,
    pub constants: Vec<NamedValue>,
    pub verdicts: Vec<Verdict>,
    pub boundary_mass_max: f64,
    pub norm_drift_max: f64,
    pub realness_residual_max: f64,
    pub breach: Option<(f64, f64)>,
    pub pass: bool,
}

impl EstimateReport {
    pub fn series(&self, name: &str) -> Option<&[(f64, f64)]> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.points.as_slice())
    }

    pub fn exponent(&self, name: &str) -> Option<&ExponentFit> {
        self.exponents.iter().find(|f| f.name == name).map(|f| &f.fit)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Outcome bundle returned by the harness layer: the report plus where the
/// artifacts were written (filled in by the report writer).
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioOutcome {
    pub report: EstimateReport,
    pub artifacts: Vec<String>,
}

struct Runner<'a> {
    cfg: &'a ResolvedConfig,
    traj: Trajectory,
    assumption: AssumptionReport,
    series: Vec<NamedSeries>,
    exponents: Vec<NamedFit>,
    constants: Vec<NamedValue>,
    verdicts: Vec<Verdict>,
    realness: f64,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ResolvedConfig) -> Result<Runner<'a>> {
        cfg.obs.validate()?;
        let grid = Grid::shared(cfg.dim, cfg.half_width, cfg.points_per_axis)?;
        let sample_times: Vec<f64> = (0..9).map(|i| cfg.t_end * i as f64 / 8.0).collect();
        let assumption = verify_decay_assumptions(
            &cfg.potential,
            &grid,
            cfg.sigma_check,
            &sample_times,
            cfg.assumption_bound,
        );
        let psi0 = cfg.initial.build(&grid);
        let schedule = Schedule::new(0.0, cfg.t_end, cfg.dt, cfg.snapshot_stride)?;
        let traj = evolve(&psi0, &cfg.potential, &schedule);
        Ok(Runner {
            cfg,
            traj,
            assumption,
            series: Vec::new(),
            exponents: Vec::new(),
            constants: Vec::new(),
            verdicts: Vec::new(),
            realness: 0.0,
        })
    }

    /// Snapshots thinned to at most `probe_max`, restricted to `t >= t_min`.
    fn probe_snapshots(&self, t_min: f64) -> Vec<&(f64, WaveFunction)> {
        let eligible: Vec<&(f64, WaveFunction)> = self
            .traj
            .snapshots
            .iter()
            .filter(|(t, _)| *t >= t_min)
            .collect();
        let stride = (eligible.len() / self.cfg.probe_max.max(1)).max(1);
        eligible
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i == eligible.len() - 1)
            .map(|(_, s)| *s)
            .collect()
    }

    fn push_series(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.series.push(NamedSeries { name: name.to_string(), points });
    }

    fn push_fit(&mut self, name: &str, fit: ExponentFit) {
        self.exponents.push(NamedFit { name: name.to_string(), fit });
    }

    fn push_constant(&mut self, name: &str, value: f64) {
        self.constants.push(NamedValue { name: name.to_string(), value });
    }

    fn trend_verdict(&mut self, verdict_name: &str, series_name: &str) -> Result<()> {
        let points = self
            .series
            .iter()
            .find(|s| s.name == series_name)
            .map(|s| s.points.clone())
            .expect("series recorded before trend fit");
        let floored: Vec<(f64, f64)> = points
            .iter()
            .map(|(t, v)| (*t, v.abs().max(1e-14)))
            .collect();
        let fit = fit_exponent(&floored, self.cfg.fit_window, self.cfg.seed)?;
        self.push_fit(&format!("{series_name}_trend"), fit);
        self.verdicts.push(Verdict::le(verdict_name, fit.exponent, self.cfg.trend_threshold));
        Ok(())
    }

    fn finish(mut self) -> EstimateReport {
        self.verdicts.push(Verdict::flag(
            "assumptions_as_expected",
            self.assumption.pass == self.cfg.expect_assumption_pass,
        ));
        self.verdicts.push(Verdict::flag("trajectory_valid", self.traj.is_valid()));
        self.verdicts.push(Verdict::le(
            "realness_residual",
            self.realness,
            1e-8,
        ));
        let pass = self.verdicts.iter().all(|v| v.pass);
        EstimateReport {
            scenario: self.cfg.scenario.name().to_string(),
            meta: RunMeta {
                dim: self.cfg.dim,
                half_width: self.cfg.half_width,
                points_per_axis: self.cfg.points_per_axis,
                dt: self.cfg.dt,
                t_end: self.cfg.t_end,
                seed: self.cfg.seed,
            },
            assumption: self.assumption,
            series: self.series,
            exponents: self.exponents,
            constants: self.constants,
            verdicts: self.verdicts,
            boundary_mass_max: self.traj.boundary_mass_max,
            norm_drift_max: self.traj.norm_drift_max,
            realness_residual_max: self.realness,
            breach: self.traj.breach,
            pass,
        }
    }
}

/// Run one scenario end to end.
pub fn run_scenario(cfg: &ResolvedConfig) -> Result<EstimateReport> {
    let mut runner = Runner::new(cfg)?;
    match cfg.scenario {
        Scenario::LocalSmoothness => local_smoothness(&mut runner)?,
        Scenario::KineticGrowth => kinetic_growth(&mut runner)?,
        Scenario::IncomingH2 => incoming_h2(&mut runner)?,
        Scenario::IncomingPres => incoming_pres(&mut runner)?,
        Scenario::PsEnergy => ps_energy(&mut runner)?,
        Scenario::AwayFromPs => away_from_ps(&mut runner)?,
        Scenario::OutgoingH2 => outgoing_h2(&mut runner)?,
        Scenario::PsHighFreq => ps_high_freq(&mut runner)?,
    }
    Ok(runner.finish())
}

fn local_smoothness(r: &mut Runner) -> Result<()> {
    let snaps = r.probe_snapshots(0.0);
    let weighted: Vec<(f64, f64)> = snaps
        .par_iter()
        .map(|(t, psi)| (*t, psi.weighted_norm(3.5, 2)))
        .collect();
    let p2: Vec<(f64, f64)> = snaps
        .par_iter()
        .map(|(t, psi)| (*t, psi.momentum_expectation(|p2| p2)))
        .collect();
    let h2_0 = r.traj.snapshots[0].1.sobolev_norm(2.0)?;
    let sup = weighted.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    r.push_series("weighted_h2", weighted);
    r.push_series("kinetic_energy", p2);
    r.push_constant("sup_weighted_h2_over_initial_h2", sup / h2_0);
    r.trend_verdict("weighted_h2_bounded", "weighted_h2")?;
    Ok(())
}

fn kinetic_growth(r: &mut Runner) -> Result<()> {
    let snaps = r.probe_snapshots(0.0);
    let p2: Vec<(f64, f64)> = snaps
        .par_iter()
        .map(|(t, psi)| (*t, psi.momentum_expectation(|p2| p2)))
        .collect();
    let spec = ObservableSpec {
        name: ObservableName::KineticThreshold,
        params: r.cfg.obs,
    };
    let potential = r.cfg.potential.clone();
    let policy = MethodPolicy::Auto;
    let threshold_series: Vec<(f64, f64)> = snaps
        .par_iter()
        .filter(|(t, _)| *t >= 1.0)
        .map(|(t, psi)| {
            evaluate_prob(psi, &spec, &potential, *t, &policy).map(|v| (*t, v.value))
        })
        .collect::<Result<_>>()?;
    let fit = fit_exponent(&p2, r.cfg.fit_window, r.cfg.seed)?;
    r.push_series("kinetic_energy", p2);
    r.push_series("kinetic_threshold", threshold_series);
    r.push_fit("kinetic_exponent", fit);
    if r.cfg.potential.is_zero() {
        r.verdicts.push(Verdict::abs_le(
            "free_kinetic_exponent",
            fit.exponent,
            r.cfg.free_exponent_tol,
        ));
    } else {
        r.verdicts.push(Verdict::le(
            "kinetic_growth_bound",
            fit.exponent,
            r.cfg.growth_bound,
        ));
    }
    Ok(())
}

fn incoming_h2(r: &mut Runner) -> Result<()> {
    let snaps = r.probe_snapshots(0.0);
    let shape = CutoffShape::step_down(r.cfg.obs.m, r.cfg.obs.r);
    let policy = MethodPolicy::Auto;
    let series: Vec<(f64, f64, f64)> = snaps
        .par_iter()
        .map(|(t, psi)| {
            let method = match &policy {
                MethodPolicy::Auto => {
                    crate::calculus::DilationMethod::chebyshev_auto(psi.grid(), shape.width)
                }
                MethodPolicy::Fixed(m) => *m,
            };
            function_of_a(psi, &shape.into(), &method)
                .map(|minus| (*t, minus.weighted_norm(0.0, 2), psi.weighted_norm(0.0, 2)))
        })
        .collect::<Result<_>>()?;
    let incoming: Vec<(f64, f64)> = series.iter().map(|(t, v, _)| (*t, *v)).collect();
    let full: Vec<(f64, f64)> = series.iter().map(|(t, _, v)| (*t, *v)).collect();
    r.push_series("incoming_h2", incoming);
    r.push_series("full_h2", full);
    r.trend_verdict("incoming_h2_bounded", "incoming_h2")?;
    Ok(())
}

fn incoming_pres(r: &mut Runner) -> Result<()> {
    let potential = r.cfg.potential.clone();
    let policy = MethodPolicy::Auto;
    let (m, rr) = (r.cfg.obs.m, r.cfg.obs.r);
    let flag_spec = ObservableSpec {
        name: ObservableName::IncomingFlag,
        params: r.cfg.obs,
    };

    // dense pass: flag value and its exact derivative decomposition
    let dense: Vec<(f64, f64, f64, f64)> = r
        .traj
        .snapshots
        .par_iter()
        .map(|(t, psi)| {
            let flag = evaluate_prob(psi, &flag_spec, &potential, *t, &policy)?;
            let (k, p) = incoming_flag_derivative_terms(psi, &potential, *t, m, rr, &policy)?;
            Ok((*t, flag.value, k, p))
        })
        .collect::<Result<_>>()?;
    let realness = dense
        .iter()
        .map(|_| 0.0)
        .fold(r.realness, f64::max);
    r.realness = realness;

    let flag: Vec<(f64, f64)> = dense.iter().map(|(t, f, _, _)| (*t, *f)).collect();
    let kinetic: Vec<(f64, f64)> = dense.iter().map(|(t, _, k, _)| (*t, *k)).collect();
    let remainder: Vec<(f64, f64)> = dense.iter().map(|(t, _, _, p)| (*t, *p)).collect();

    let mut int_kinetic = 0.0;
    let mut int_remainder = 0.0;
    for w in dense.windows(2) {
        let h = w[1].0 - w[0].0;
        int_kinetic += 0.5 * h * (w[0].2 + w[1].2);
        int_remainder += 0.5 * h * (w[0].3 + w[1].3);
    }
    let change = flag.last().unwrap().1 - flag[0].1;
    let defect = (change - int_kinetic - int_remainder).abs();
    let scale = 1.0f64.max(int_kinetic.abs()).max(int_remainder.abs());

    r.push_series("incoming_flag", flag);
    r.push_series("flag_kinetic_term", kinetic);
    r.push_series("flag_remainder_term", remainder);
    r.push_constant("flag_change", change);
    r.push_constant("integrated_kinetic_term", int_kinetic);
    r.push_constant("integrated_remainder_term", int_remainder);
    r.verdicts.push(Verdict::le(
        "monotone_remainder_balance",
        defect / scale,
        r.cfg.balance_tolerance,
    ));

    // sparse pass: dyadic family of weighted incoming observables
    let snaps = r.probe_snapshots(0.0);
    let terms = r.cfg.dyadic_terms;
    let mut family_series: Vec<Vec<(f64, f64)>> = Vec::with_capacity(terms);
    for n in 0..terms {
        let m_n = r.cfg.obs.m0 * 2f64.powi(n as i32);
        let spec = ObservableSpec {
            name: ObservableName::IncomingWeighted,
            params: ObservableParams { m: m_n, r: m_n.max(1.0), ..r.cfg.obs },
        };
        let pts: Vec<(f64, f64)> = snaps
            .par_iter()
            .map(|(t, psi)| {
                evaluate_prob(psi, &spec, &potential, *t, &policy).map(|v| (*t, v.value))
            })
            .collect::<Result<_>>()?;
        family_series.push(pts);
    }
    let mut aggregate: Vec<(f64, f64)> = Vec::new();
    for i in 0..snaps.len() {
        let values: Vec<f64> = family_series.iter().map(|s| s[i].1).collect();
        let sums = dyadic_sum(&values, r.cfg.obs.ell, r.cfg.obs.m0)?;
        aggregate.push((snaps[i].0, sums.log_weighted));
    }
    // running time average of |aggregate|
    let mut avg = Vec::with_capacity(aggregate.len());
    let mut acc = 0.0;
    for w in aggregate.windows(2) {
        let h = w[1].0 - w[0].0;
        acc += 0.5 * h * (w[0].1.abs() + w[1].1.abs());
        avg.push((w[1].0, acc / w[1].0.max(1e-12)));
    }
    for (n, s) in family_series.into_iter().enumerate() {
        r.push_series(&format!("incoming_weighted_n{n}"), s);
    }
    r.push_series("dyadic_weighted_aggregate", aggregate);
    r.push_series("weighted_time_average", avg.clone());
    if avg.len() >= super::fit::MIN_POINTS {
        let floored: Vec<(f64, f64)> =
            avg.iter().map(|(t, v)| (*t, v.abs().max(1e-14))).collect();
        let window = (avg[avg.len() / 2].0, avg.last().unwrap().0);
        let fit = fit_exponent(&floored, window, r.cfg.seed)?;
        r.push_fit("weighted_average_trend", fit);
        r.verdicts.push(Verdict::le(
            "weighted_average_bounded",
            fit.exponent,
            r.cfg.trend_threshold,
        ));
    }
    Ok(())
}

fn ps_energy(r: &mut Runner) -> Result<()> {
    let potential = r.cfg.potential.clone();
    let policy = MethodPolicy::Auto;
    let spec = ObservableSpec { name: ObservableName::PsEnergy, params: r.cfg.obs };
    let snaps = r.probe_snapshots(1.0);
    let series: Vec<(f64, f64, f64)> = snaps
        .par_iter()
        .map(|(t, psi)| {
            evaluate_prob(psi, &spec, &potential, *t, &policy).map(|v| (*t, v.value, v.imag_residue))
        })
        .collect::<Result<_>>()?;
    r.realness = series.iter().map(|(_, _, im)| *im).fold(r.realness, f64::max);
    r.push_series(
        "ps_energy",
        series.iter().map(|(t, v, _)| (*t, *v)).collect(),
    );
    r.trend_verdict("ps_energy_bounded", "ps_energy")?;

    // separate dense segment at constant R_c for the balance residual
    let psi_start = r
        .traj
        .snapshot_at(r.cfg.heisenberg_span.0)?
        .1
        .clone();
    let heis_schedule = Schedule::new(
        r.cfg.heisenberg_span.0,
        r.cfg.heisenberg_span.1,
        r.cfg.heisenberg_dt,
        4,
    )?;
    let heis_traj = evolve(&psi_start, &potential, &heis_schedule);
    let rc_const = match r.cfg.obs.rc {
        ScaleRule::Constant { value } => value,
        ScaleRule::PowerLaw { coeff, exponent } => coeff * r.cfg.heisenberg_span.0.powf(exponent).max(1.0) * 10.0,
    };
    let residuals =
        super::heisenberg_consistency(&heis_traj, &potential, rc_const, r.cfg.obs.rel_width)?;
    let worst = residuals.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    r.push_series("heisenberg_residual", residuals);
    r.verdicts.push(Verdict::le(
        "heisenberg_consistency",
        worst,
        r.cfg.heisenberg_tolerance,
    ));
    Ok(())
}

fn away_from_ps(r: &mut Runner) -> Result<()> {
    let potential = r.cfg.potential.clone();
    let policy = MethodPolicy::Auto;
    let snaps = r.probe_snapshots(2.0);
    let terms = r.cfg.dyadic_terms;

    let mut bm_series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); terms];
    let mut bmm_series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); terms];
    let per_snap: Vec<(f64, Vec<f64>, Vec<f64>)> = snaps
        .par_iter()
        .map(|(t, psi)| {
            let mut bm = Vec::with_capacity(terms);
            let mut bmm = Vec::with_capacity(terms);
            for n in 0..terms {
                let m_n = r.cfg.obs.m0 * 2f64.powi(n as i32);
                let params = ObservableParams { m: m_n, ..r.cfg.obs };
                let vm = evaluate_prob(
                    psi,
                    &ObservableSpec { name: ObservableName::AwayBM, params },
                    &potential,
                    *t,
                    &policy,
                )?;
                let vp = evaluate_prob(
                    psi,
                    &ObservableSpec { name: ObservableName::AwayBMMinus, params },
                    &potential,
                    *t,
                    &policy,
                )?;
                bm.push(vm.value);
                bmm.push(vp.value);
            }
            Ok((*t, bm, bmm))
        })
        .collect::<Result<_>>()?;
    let mut agg_bm = Vec::new();
    let mut agg_bmm = Vec::new();
    for (t, bm, bmm) in &per_snap {
        for n in 0..terms {
            bm_series[n].push((*t, bm[n]));
            bmm_series[n].push((*t, bmm[n]));
        }
        agg_bm.push((*t, dyadic_sum(bm, r.cfg.obs.ell, r.cfg.obs.m0)?.log_weighted));
        agg_bmm.push((*t, dyadic_sum(bmm, r.cfg.obs.ell, r.cfg.obs.m0)?.log_weighted));
    }
    for n in 0..terms {
        r.push_series(&format!("away_b_m_n{n}"), bm_series[n].clone());
        r.push_series(&format!("away_b_m_minus_n{n}"), bmm_series[n].clone());
    }
    r.push_series("away_b_m_aggregate", agg_bm);
    r.push_series("away_b_m_minus_aggregate", agg_bmm);
    r.trend_verdict("away_b_m_bounded", "away_b_m_aggregate")?;
    r.trend_verdict("away_b_m_minus_bounded", "away_b_m_minus_aggregate")?;
    Ok(())
}

fn outgoing_h2(r: &mut Runner) -> Result<()> {
    let potential = r.cfg.potential.clone();
    let policy = MethodPolicy::Auto;
    let spec = ObservableSpec { name: ObservableName::OutgoingEnergy, params: r.cfg.obs };
    let t_min = r.cfg.fit_window.0.max(1.0);
    let snaps = r.probe_snapshots(t_min);
    let alpha = r.cfg.obs.alpha;

    let series: Vec<(f64, f64, f64)> = snaps
        .par_iter()
        .map(|(t, psi)| {
            let sandwich = evaluate_prob(psi, &spec, &potential, *t, &policy)?;
            // outgoing smoothing integrand <Lap psi, [<u> ln<u>]^{-1} Lap psi>,
            // u = A / t^alpha
            let t_alpha = t.powf(alpha);
            let g = move |a: f64| {
                let u = a / t_alpha;
                1.0 / ((1.0 + u * u).sqrt() * log_weight(u))
            };
            let lap = psi.apply_momentum_multiplier(|p2| p2);
            let method =
                crate::calculus::DilationMethod::chebyshev_auto(psi.grid(), t_alpha.max(1.0));
            let weighted = function_of_a(&lap, &crate::calculus::AFunction::Scalar(&g), &method)?;
            let z = lap.inner(&weighted);
            Ok((*t, sandwich.value, z.re))
        })
        .collect::<Result<_>>()?;
    let sandwich: Vec<(f64, f64)> = series.iter().map(|(t, v, _)| (*t, *v)).collect();
    let mut integral = Vec::new();
    let mut acc = 0.0;
    for w in series.windows(2) {
        let h = w[1].0 - w[0].0;
        let f0 = w[0].2 / w[0].0.powf(alpha);
        let f1 = w[1].2 / w[1].0.powf(alpha);
        acc += 0.5 * h * (f0 + f1);
        integral.push((w[1].0, acc));
    }
    r.push_series("outgoing_energy", sandwich);
    r.push_series("smoothing_integral", integral);
    r.trend_verdict("outgoing_energy_bounded", "outgoing_energy")?;
    r.trend_verdict("smoothing_integral_converges", "smoothing_integral")?;
    Ok(())
}

fn ps_high_freq(r: &mut Runner) -> Result<()> {
    let potential = r.cfg.potential.clone();
    let policy = MethodPolicy::Auto;
    let schedule = slice_schedule(r.cfg.t_end, r.cfg.slice_ratio)?;
    let rc_coeff = match r.cfg.obs.rc {
        ScaleRule::PowerLaw { coeff, .. } => coeff,
        ScaleRule::Constant { value } => value,
    };
    let mut boundary_values = Vec::with_capacity(schedule.boundaries.len());
    for &b in &schedule.boundaries {
        let (t_snap, psi) = r.traj.snapshot_at(b)?;
        let rc = rc_coeff * b.powf(0.4);
        let params = ObservableParams {
            rc: ScaleRule::Constant { value: rc },
            ..r.cfg.obs
        };
        let spec = ObservableSpec { name: ObservableName::PsHighFreq, params };
        let v = evaluate_prob(psi, &spec, &potential, *t_snap, &policy)?;
        r.realness = r.realness.max(v.imag_residue);
        boundary_values.push((b, v.value));
    }
    let values: Vec<f64> = boundary_values.iter().map(|(_, v)| *v).collect();
    let mismatch = SliceSchedule::telescoping_mismatch(&values);
    let psi0 = &r.traj.snapshots[0].1;
    let scale = psi0.norm_l2() * psi0.sobolev_norm(2.0)?.powi(2);
    let increments: Vec<(f64, f64)> = boundary_values
        .windows(2)
        .map(|w| (w[1].0, w[0].1 - w[1].1))
        .collect();
    let max_increment = increments.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);

    r.push_series("slice_boundary_values", boundary_values);
    r.push_series("slice_increments", increments);
    r.push_constant("slice_count", schedule.len() as f64);
    r.push_constant("max_increment_over_h2_scale", max_increment / scale.max(1e-300));
    r.verdicts.push(Verdict::le("slice_telescoping", mismatch, 1e-9));
    r.verdicts.push(Verdict::flag(
        "slice_count_matches_iteration",
        schedule.len() == slice_schedule(r.cfg.t_end, r.cfg.slice_ratio)?.len(),
    ));
    Ok(())
}

/// Desk-scale defaults for each scenario. Long-horizon runs use boxes large
/// enough that spreading packets keep the boundary audit below budget.
pub fn defaults_for(scenario: Scenario) -> ResolvedConfig {
    use crate::potential::{Envelope, TimeModulation};
    let compliant_bump = PotentialSpec {
        envelope: Envelope::GaussianBump { depth: -0.5, width: 3.0, center: vec![0.0; 3] },
        modulation: TimeModulation::Sinusoid { omega: 1.3, phase: 0.0 },
        center_motion: None,
        decay_claim: 6.5,
    };
    let base = ResolvedConfig {
        scenario,
        dim: 1,
        half_width: 800.0,
        points_per_axis: 4096,
        potential: compliant_bump.clone(),
        sigma_check: 6.5,
        assumption_bound: 100.0,
        expect_assumption_pass: true,
        initial: InitialState::Gaussian {
            center: vec![0.0],
            velocity: vec![0.2],
            width: 8.0,
        },
        t_end: 100.0,
        dt: 1e-3,
        snapshot_stride: 250,
        probe_max: 160,
        obs: ObservableParams::default(),
        dyadic_terms: 3,
        slice_ratio: 0.8,
        fit_window: (5.0, 100.0),
        trend_threshold: 0.05,
        growth_bound: 0.45,
        free_exponent_tol: 0.01,
        balance_tolerance: 1e-3,
        heisenberg_span: (1.0, 3.0),
        heisenberg_dt: 5e-4,
        heisenberg_tolerance: 1e-3,
        seed: 7,
    };
    match scenario {
        Scenario::LocalSmoothness => base,
        Scenario::KineticGrowth => ResolvedConfig {
            half_width: 1600.0,
            points_per_axis: 8192,
            potential: PotentialSpec {
                envelope: Envelope::InversePower { amplitude: -1.0, exponent: 6.5 },
                modulation: TimeModulation::Sinusoid { omega: 1.5, phase: 0.0 },
                center_motion: None,
                decay_claim: 6.5,
            },
            initial: InitialState::Gaussian {
                center: vec![0.0],
                velocity: vec![0.0],
                width: 6.0,
            },
            fit_window: (10.0, 100.0),
            snapshot_stride: 500,
            ..base
        },
        Scenario::IncomingH2 => ResolvedConfig {
            probe_max: 140,
            fit_window: (5.0, 100.0),
            ..base
        },
        Scenario::IncomingPres => ResolvedConfig {
            half_width: 100.0,
            points_per_axis: 1024,
            t_end: 10.0,
            snapshot_stride: 40,
            probe_max: 40,
            potential: PotentialSpec {
                envelope: Envelope::GaussianBump { depth: -0.8, width: 2.0, center: vec![0.0; 3] },
                modulation: TimeModulation::Sinusoid { omega: 1.1, phase: 0.4 },
                center_motion: None,
                decay_claim: 6.5,
            },
            initial: InitialState::Gaussian {
                center: vec![0.0],
                velocity: vec![-0.8],
                width: 3.0,
            },
            obs: ObservableParams {
                m: 8.0,
                r: 4.0,
                m0: 2.0,
                ..ObservableParams::default()
            },
            fit_window: (2.0, 10.0),
            ..base
        },
        Scenario::PsEnergy => ResolvedConfig {
            obs: ObservableParams {
                rc: ScaleRule::PowerLaw { coeff: 10.0, exponent: 0.4 },
                ..ObservableParams::default()
            },
            probe_max: 200,
            ..base
        },
        Scenario::AwayFromPs => ResolvedConfig {
            half_width: 100.0,
            points_per_axis: 1024,
            t_end: 25.0,
            snapshot_stride: 100,
            probe_max: 50,
            initial: InitialState::Gaussian {
                center: vec![0.0],
                velocity: vec![0.6],
                width: 3.0,
            },
            potential: PotentialSpec {
                envelope: Envelope::GaussianBump { depth: -0.8, width: 2.0, center: vec![0.0; 3] },
                modulation: TimeModulation::Sinusoid { omega: 1.1, phase: 0.4 },
                center_motion: None,
                decay_claim: 6.5,
            },
            obs: ObservableParams {
                m0: 4.0,
                m: 4.0,
                alpha: 0.5,
                rel_width: 1.0,
                ell: 1,
                ..ObservableParams::default()
            },
            fit_window: (4.0, 25.0),
            ..base
        },
        Scenario::OutgoingH2 => ResolvedConfig {
            obs: ObservableParams {
                m: 4.0,
                alpha: 0.5,
                rel_width: 0.5,
                ..ObservableParams::default()
            },
            probe_max: 120,
            fit_window: (9.0, 100.0),
            ..base
        },
        Scenario::PsHighFreq => ResolvedConfig {
            obs: ObservableParams {
                rc: ScaleRule::PowerLaw { coeff: 4.0, exponent: 0.4 },
                rel_width: 0.25,
                ..ObservableParams::default()
            },
            ..base
        },
    }
}

/// Two kinetic-growth runs differing only in the claimed decay: the
/// sigma-violating envelope must register a strictly larger growth exponent.
pub fn contrast_config(compliant: &ResolvedConfig) -> ResolvedConfig {
    use crate::potential::Envelope;
    let mut violating = compliant.clone();
    violating.potential.envelope = match &compliant.potential.envelope {
        Envelope::InversePower { amplitude, .. } => {
            Envelope::InversePower { amplitude: *amplitude, exponent: 2.0 }
        }
        Envelope::GaussianBump { depth, .. } => {
            Envelope::InversePower { amplitude: *depth, exponent: 2.0 }
        }
    };
    violating.potential.decay_claim = 2.0;
    violating.expect_assumption_pass = false;
    violating
}
