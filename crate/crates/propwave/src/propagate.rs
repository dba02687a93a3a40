//! Time evolution: exact free flow in momentum space, Strang splitting with
//! midpoint potential sampling, and the Duhamel correction integral.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Representation, WaveFunction};
use crate::potential::PotentialSpec;

/// Mass fraction allowed beyond |x| > L/2 before a trajectory is flagged.
pub const BOUNDARY_MASS_BUDGET: f64 = 1e-8;

/// Exact free flow `e^{i Laplacian tau}` (negative tau runs backwards).
pub fn free_evolve(psi: &WaveFunction, tau: f64) -> WaveFunction {
    if tau == 0.0 {
        return psi.clone();
    }
    let t = psi.time() + tau;
    psi.apply_momentum_phase(|p2| Complex64::from_polar(1.0, -p2 * tau))
        .with_time(t)
}

/// One Strang step: half potential phase at the midpoint time, full kinetic
/// phase, half potential phase. Second-order accurate, norm preserving.
pub fn strang_step(psi: &WaveFunction, spec: &PotentialSpec, t: f64, dt: f64) -> WaveFunction {
    let pos = psi.transform(Representation::Position);
    if spec.is_zero() {
        return free_evolve(&pos, dt).with_time(t + dt);
    }
    let v = spec.sample(pos.grid(), t + dt / 2.0);
    let half_phase = |field: &WaveFunction| -> WaveFunction {
        let mut out = field.clone();
        ndarray::Zip::from(out.values_mut())
            .and(&v)
            .for_each(|a, &vi| *a *= Complex64::from_polar(1.0, -vi * dt / 2.0));
        out
    };
    let stepped = free_evolve(&half_phase(&pos), dt);
    half_phase(&stepped).with_time(t + dt)
}

/// Evolution schedule: time span, step, snapshot stride and named probes
/// evaluated at every stored snapshot.
#[derive(Clone)]
pub struct Schedule {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub probes: Vec<Probe>,
}

/// Named observable evaluated on each snapshot.
#[derive(Clone)]
pub struct Probe {
    pub name: String,
    pub eval: std::sync::Arc<dyn Fn(&WaveFunction) -> f64 + Send + Sync>,
}

impl Probe {
    pub fn new<F>(name: &str, f: F) -> Probe
    where
        F: Fn(&WaveFunction) -> f64 + Send + Sync + 'static,
    {
        Probe { name: name.to_string(), eval: std::sync::Arc::new(f) }
    }
}

impl std::fmt::Debug for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Schedule")
            .field("t_start", &self.t_start)
            .field("t_end", &self.t_end)
            .field("dt", &self.dt)
            .field("snapshot_stride", &self.snapshot_stride)
            .field("probes", &self.probes.iter().map(|p| &p.name).collect::<Vec<_>>())
            .finish()
    }
}

impl Schedule {
    pub fn new(t_start: f64, t_end: f64, dt: f64, snapshot_stride: usize) -> Result<Schedule> {
        if !(dt > 0.0) {
            return Err(Error::BadTimeStep(dt));
        }
        let span = t_end - t_start;
        let steps = span / dt;
        if (steps - steps.round()).abs() > 0.5 || steps.round() < 1.0 {
            return Err(Error::BadScheduleSpan { span, dt });
        }
        Ok(Schedule {
            t_start,
            t_end,
            dt,
            snapshot_stride: snapshot_stride.max(1),
            probes: Vec::new(),
        })
    }

    pub fn with_probe(mut self, probe: Probe) -> Schedule {
        self.probes.push(probe);
        self
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }
}

/// Recorded evolution: snapshots at the schedule stride plus probe series and
/// the boundary-mass audit.
#[derive(Debug)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, WaveFunction)>,
    pub probe_series: Vec<(String, Vec<(f64, f64)>)>,
    pub boundary_mass_max: f64,
    pub norm_drift_max: f64,
    /// None when the boundary audit stayed below budget, otherwise the first
    /// breach (time, mass).
    pub breach: Option<(f64, f64)>,
}

impl Trajectory {
    pub fn is_valid(&self) -> bool {
        self.breach.is_none()
    }

    pub fn time_range(&self) -> (f64, f64) {
        (
            self.snapshots.first().map(|s| s.0).unwrap_or(0.0),
            self.snapshots.last().map(|s| s.0).unwrap_or(0.0),
        )
    }

    pub fn snapshot_at(&self, t: f64) -> Result<&(f64, WaveFunction)> {
        let (lo, hi) = self.time_range();
        if t < lo - 1e-9 || t > hi + 1e-9 {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        Ok(self
            .snapshots
            .iter()
            .min_by(|a, b| {
                (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap()
            })
            .expect("trajectory has no snapshots"))
    }

    pub fn probe(&self, name: &str) -> Option<&[(f64, f64)]> {
        self.probe_series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
    }
}

/// Evolve `psi0` under the potential along the schedule, recording snapshots,
/// probes, and the unitarity/boundary audits.
pub fn evolve(psi0: &WaveFunction, spec: &PotentialSpec, schedule: &Schedule) -> Trajectory {
    let steps = schedule.steps();
    let norm0 = psi0.norm_l2();
    let mut psi = psi0.transform(Representation::Position).with_time(schedule.t_start);
    let mut snapshots = Vec::new();
    let mut probe_series: Vec<(String, Vec<(f64, f64)>)> = schedule
        .probes
        .iter()
        .map(|p| (p.name.clone(), Vec::new()))
        .collect();
    let mut boundary_max = 0.0f64;
    let mut norm_drift = 0.0f64;
    let mut breach = None;

    let record = |t: f64, field: &WaveFunction,
                      snapshots: &mut Vec<(f64, WaveFunction)>,
                      probe_series: &mut Vec<(String, Vec<(f64, f64)>)>,
                      boundary_max: &mut f64,
                      norm_drift: &mut f64,
                      breach: &mut Option<(f64, f64)>| {
        let mass = field.boundary_mass();
        *boundary_max = boundary_max.max(mass);
        if mass > BOUNDARY_MASS_BUDGET && breach.is_none() {
            *breach = Some((t, mass));
        }
        *norm_drift = norm_drift.max((field.norm_l2() - norm0).abs());
        for (probe, (_, series)) in schedule.probes.iter().zip(probe_series.iter_mut()) {
            series.push((t, (probe.eval)(field)));
        }
        snapshots.push((t, field.clone()));
    };

    record(
        schedule.t_start,
        &psi,
        &mut snapshots,
        &mut probe_series,
        &mut boundary_max,
        &mut norm_drift,
        &mut breach,
    );
    for step in 0..steps {
        let t = schedule.t_start + step as f64 * schedule.dt;
        psi = strang_step(&psi, spec, t, schedule.dt);
        if (step + 1) % schedule.snapshot_stride == 0 || step + 1 == steps {
            record(
                schedule.t_start + (step + 1) as f64 * schedule.dt,
                &psi,
                &mut snapshots,
                &mut probe_series,
                &mut boundary_max,
                &mut norm_drift,
                &mut breach,
            );
        }
    }

    Trajectory {
        snapshots,
        probe_series,
        boundary_mass_max: boundary_max,
        norm_drift_max: norm_drift,
        breach,
    }
}

/// Trapezoid approximation of the Duhamel correction
/// `-i int_0^t e^{i Laplacian (t-s)} V(s) psi(s) ds` over the recorded
/// snapshots, thinned by `quadrature_stride`.
pub fn duhamel_integral(
    traj: &Trajectory,
    spec: &PotentialSpec,
    t: f64,
    quadrature_stride: usize,
) -> Result<WaveFunction> {
    let (lo, hi) = traj.time_range();
    if t < lo - 1e-9 || t > hi + 1e-9 {
        return Err(Error::TimeOutOfRange { t, lo, hi });
    }
    let stride = quadrature_stride.max(1);
    let nodes: Vec<&(f64, WaveFunction)> = traj
        .snapshots
        .iter()
        .filter(|(s, _)| *s <= t + 1e-12)
        .collect();
    let nodes: Vec<&(f64, WaveFunction)> = nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == nodes.len() - 1)
        .map(|(_, n)| *n)
        .collect();
    if nodes.len() < 2 {
        // the t = 0 case: empty integration interval
        let base = &traj.snapshots[0].1;
        return Ok(base.map_values(|_| Complex64::new(0.0, 0.0)).with_time(t));
    }
    if nodes.len() < 8 && spec.is_zero() == false {
        return Err(Error::SnapshotsTooCoarse { stride, max: nodes.len() });
    }

    let grid = traj.snapshots[0].1.grid().clone();
    let zero = traj.snapshots[0]
        .1
        .map_values(|_| Complex64::new(0.0, 0.0))
        .transform(Representation::Position);
    let mut acc = zero.clone();
    for w in nodes.windows(2) {
        let (s0, psi0) = w[0];
        let (s1, psi1) = w[1];
        let h = s1 - s0;
        if h <= 0.0 {
            continue;
        }
        for (s, psi, weight) in [(s0, psi0, 0.5 * h), (s1, psi1, 0.5 * h)] {
            let v = spec.sample(&grid, *s);
            let mut term = psi.transform(Representation::Position);
            ndarray::Zip::from(term.values_mut())
                .and(&v)
                .for_each(|a, &vi| *a *= vi);
            let propagated = free_evolve(&term, t - s);
            acc = acc.add_scaled(&propagated, Complex64::new(0.0, -weight));
        }
    }
    Ok(acc.with_time(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    fn packet(n: usize, l: f64) -> WaveFunction {
        let grid = Grid::shared(1, l, n).unwrap();
        WaveFunction::gaussian_packet(grid, &[0.0], &[0.0], std::f64::consts::FRAC_1_SQRT_2)
    }

    #[test]
    fn free_evolve_identity_and_group_inverse() {
        let psi = packet(512, 40.0);
        let same = free_evolve(&psi, 0.0);
        assert_eq!(psi.values(), same.values());

        let there_and_back = free_evolve(&free_evolve(&psi, 0.7), -0.7);
        let diff: f64 = psi
            .values()
            .iter()
            .zip(there_and_back.values().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn free_gaussian_spreads_to_known_variance() {
        // Var(x, tau) = 1/2 + 2 tau^2 for the standard packet under e^{i Lap t}
        let psi = packet(1024, 50.0);
        let evolved = free_evolve(&psi, 1.0);
        assert_abs_diff_eq!(evolved.position_variance(), 2.5, epsilon = 1e-6);
        assert_abs_diff_eq!(evolved.norm_l2(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn free_evolve_matches_closed_form_gaussian() {
        // e^{i Lap t} psi0 for psi0 = pi^{-1/4} e^{-x^2/2} is
        // pi^{-1/4} (1 + 2 i t)^{-1/2} e^{-x^2 / (2 (1 + 2 i t))}
        let grid = Grid::shared(1, 50.0, 1024).unwrap();
        let psi = WaveFunction::gaussian_packet(
            grid.clone(),
            &[0.0],
            &[0.0],
            std::f64::consts::FRAC_1_SQRT_2,
        );
        let tau = 1.0;
        let evolved = free_evolve(&psi, tau);
        let z = Complex64::new(1.0, 2.0 * tau);
        let prefactor = Complex64::new(std::f64::consts::PI.powf(-0.25), 0.0) / z.sqrt();
        let mut err2 = 0.0;
        for (idx, v) in evolved.values().indexed_iter() {
            let x = grid.positions()[idx[0]];
            let expect = prefactor * (-Complex64::new(x * x, 0.0) / (2.0 * z)).exp();
            err2 += (v - expect).norm_sqr();
        }
        let err = (err2 * grid.spacing()).sqrt();
        assert!(err < 1e-10, "free flow vs closed form: {err}");
    }

    #[test]
    fn strang_degenerates_to_free_flow() {
        let psi = packet(256, 30.0);
        let spec = PotentialSpec::zero();
        let a = strang_step(&psi, &spec, 0.0, 1e-2);
        let b = free_evolve(&psi, 1e-2);
        let diff: f64 = a
            .values()
            .iter()
            .zip(b.values().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-13);
    }

    #[test]
    fn strang_preserves_norm() {
        let psi = packet(256, 30.0);
        let spec = PotentialSpec::static_gaussian(-1.0, 1.0);
        let stepped = strang_step(&psi, &spec, 0.0, 1e-2);
        assert!((stepped.norm_l2() - psi.norm_l2()).abs() < 1e-14);
    }

    #[test]
    fn strang_is_second_order() {
        // Richardson study against a fine reference for a static potential
        let grid = Grid::shared(1, 30.0, 256).unwrap();
        let psi0 = WaveFunction::gaussian_packet(grid, &[0.0], &[0.5], 1.0);
        let spec = PotentialSpec::static_gaussian(-1.0, 1.5);
        let t_final = 1.0;
        let reference = run(&psi0, &spec, t_final, 1.0 / 4096.0);
        let errs: Vec<f64> = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
            .iter()
            .map(|&dt| {
                let out = run(&psi0, &spec, t_final, dt);
                l2_diff(&out, &reference)
            })
            .collect();
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!((1.9..=2.1).contains(&order1), "order {order1} (errors {errs:?})");
        assert!((1.9..=2.1).contains(&order2), "order {order2} (errors {errs:?})");
    }

    fn run(psi0: &WaveFunction, spec: &PotentialSpec, t_final: f64, dt: f64) -> WaveFunction {
        let mut psi = psi0.clone();
        let steps = (t_final / dt).round() as usize;
        for s in 0..steps {
            psi = strang_step(&psi, spec, s as f64 * dt, dt);
        }
        psi
    }

    fn l2_diff(a: &WaveFunction, b: &WaveFunction) -> f64 {
        let d = a.add_scaled(b, Complex64::new(-1.0, 0.0));
        d.norm_l2()
    }

    #[test]
    fn evolve_conserves_free_kinetic_energy() {
        let psi = packet(512, 40.0);
        let spec = PotentialSpec::zero();
        let schedule = Schedule::new(0.0, 2.0, 1e-2, 20)
            .unwrap()
            .with_probe(Probe::new("kinetic", |f| f.momentum_expectation(|p2| p2)));
        let traj = evolve(&psi, &spec, &schedule);
        let series = traj.probe("kinetic").unwrap();
        let first = series[0].1;
        for (_, v) in series {
            assert_abs_diff_eq!(*v, first, epsilon = 1e-10);
        }
        assert!(traj.is_valid());
    }

    #[test]
    fn evolve_energy_drift_static_potential() {
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi = WaveFunction::gaussian_packet(grid.clone(), &[0.0], &[0.3], 1.0);
        let spec = PotentialSpec::static_gaussian(-1.0, 1.5);
        let vspec = spec.clone();
        let energy = Probe::new("energy", move |f: &WaveFunction| {
            let kinetic = f.momentum_expectation(|p2| p2) * f.norm_l2().powi(2);
            let v = vspec.sample(f.grid(), f.time());
            let pos = f.transform(Representation::Position);
            let dv = f.grid().cell_volume(Representation::Position);
            let pot: f64 = pos
                .values()
                .iter()
                .zip(v.iter())
                .map(|(a, &vi)| vi * a.norm_sqr())
                .sum::<f64>()
                * dv;
            kinetic + pot
        });
        let schedule = Schedule::new(0.0, 10.0, 1e-3, 100).unwrap().with_probe(energy);
        let traj = evolve(&psi, &spec, &schedule);
        let series = traj.probe("energy").unwrap();
        let e0 = series[0].1;
        let drift = series
            .iter()
            .map(|(_, e)| ((e - e0) / e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-6, "energy drift {drift}");
        assert!(traj.norm_drift_max < 1e-9);
    }

    #[test]
    fn evolve_unitarity_modulated_potential() {
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[0.0], 1.5);
        let spec = PotentialSpec {
            envelope: Envelope::GaussianBump { depth: -1.0, width: 1.0, center: vec![0.0] },
            modulation: crate::potential::TimeModulation::Sinusoid { omega: 1.0, phase: 0.0 },
            center_motion: None,
            decay_claim: 6.5,
        };
        let schedule = Schedule::new(0.0, 10.0, 1e-2, 100).unwrap();
        let traj = evolve(&psi, &spec, &schedule);
        assert!(traj.norm_drift_max < 1e-9, "norm drift {}", traj.norm_drift_max);
    }

    use crate::potential::Envelope;

    #[test]
    fn time_reversal_returns_initial_state() {
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi0 = WaveFunction::gaussian_packet(grid, &[0.0], &[0.4], 1.0);
        let spec = PotentialSpec::static_gaussian(-0.8, 1.2);
        let dt: f64 = 1e-3;
        let t_final: f64 = 2.0;
        let steps = (t_final / dt).round() as usize;
        let mut psi = psi0.clone();
        for s in 0..steps {
            psi = strang_step(&psi, &spec, s as f64 * dt, dt);
        }
        // static potential is its own time reversal; run the flow backwards
        for s in (0..steps).rev() {
            psi = strang_step(&psi, &spec, (s + 1) as f64 * dt, -dt);
        }
        let diff = l2_diff(&psi, &psi0);
        assert!(diff < 1e-6, "time reversal defect {diff}");
    }

    #[test]
    fn boundary_breach_flags_trajectory() {
        let grid = Grid::shared(1, 10.0, 128).unwrap();
        // fast packet escapes the box quickly
        let psi = WaveFunction::gaussian_packet(grid, &[0.0], &[3.0], 1.0);
        let spec = PotentialSpec::zero();
        let schedule = Schedule::new(0.0, 2.0, 1e-2, 10).unwrap();
        let traj = evolve(&psi, &spec, &schedule);
        assert!(!traj.is_valid());
        assert!(traj.breach.is_some());
    }

    #[test]
    fn duhamel_zero_potential_and_zero_time() {
        let psi = packet(256, 30.0);
        let spec = PotentialSpec::zero();
        let schedule = Schedule::new(0.0, 1.0, 1e-2, 1).unwrap();
        let traj = evolve(&psi, &spec, &schedule);
        let d = duhamel_integral(&traj, &spec, 1.0, 1).unwrap();
        assert!(d.norm_l2() < 1e-13);
        let d0 = duhamel_integral(&traj, &spec, 0.0, 1).unwrap();
        assert!(d0.norm_l2() == 0.0);
    }

    #[test]
    fn duhamel_consistency_with_solver() {
        // psi(t) = e^{i Lap t} psi0 + duhamel within O(dt^2)
        let grid = Grid::shared(1, 40.0, 512).unwrap();
        let psi0 = WaveFunction::gaussian_packet(grid, &[0.0], &[0.5], 1.0);
        let spec = PotentialSpec::static_gaussian(-0.6, 1.5);
        let schedule = Schedule::new(0.0, 1.0, 1e-3, 1).unwrap();
        let traj = evolve(&psi0, &spec, &schedule);
        let t = 1.0;
        let duhamel = duhamel_integral(&traj, &spec, t, 1).unwrap();
        let free = free_evolve(&psi0, t);
        let psi_t = &traj.snapshots.last().unwrap().1;
        let reconstructed = free.add_scaled(&duhamel, Complex64::new(1.0, 0.0));
        let diff = l2_diff(&reconstructed, psi_t);
        assert!(diff < 1e-4, "duhamel consistency {diff}");
    }

    #[test]
    fn duhamel_rejects_coarse_snapshots() {
        let psi = packet(256, 30.0);
        let spec = PotentialSpec::static_gaussian(-0.6, 1.5);
        let schedule = Schedule::new(0.0, 1.0, 0.25, 1).unwrap();
        let traj = evolve(&psi, &spec, &schedule);
        assert!(matches!(
            duhamel_integral(&traj, &spec, 1.0, 1),
            Err(Error::SnapshotsTooCoarse { .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(0.0, 1.0, -0.1, 1).is_err());
        // span shorter than half a step rounds to zero steps
        assert!(Schedule::new(0.0, 0.04, 0.1, 1).is_err());
        // within half a step of an integer count is accepted
        assert!(Schedule::new(0.0, 1.05, 0.1, 1).is_ok());
        assert!(Schedule::new(0.0, 1.0, 0.1, 1).is_ok());
    }
}
