//! Run-configuration files: TOML with nested sections, strict about unknown
//! keys, with per-scenario defaults for everything not pinned by the file.

use serde::{Deserialize, Serialize};

use crate::calculus::ScaleRule;
use crate::error::{Error, Result};
use crate::estimates::scenario::{defaults_for, InitialState, ResolvedConfig, Scenario};
use crate::potential::PotentialSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub schema_version: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub potential: Option<PotentialSection>,
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub schedule: Option<ScheduleSection>,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(flatten)]
    pub spec: PotentialSpec,
    /// Weight exponent the assumption checker tests against.
    #[serde(default)]
    pub sigma_check: Option<f64>,
    #[serde(default)]
    pub assumption_bound: Option<f64>,
    #[serde(default)]
    pub expect_assumption_pass: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub m0: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub ell: Option<i32>,
    #[serde(default)]
    pub k_threshold: Option<f64>,
    #[serde(default)]
    pub rc: Option<ScaleRule>,
    #[serde(default)]
    pub rel_width: Option<f64>,
    #[serde(default)]
    pub dyadic_terms: Option<usize>,
    #[serde(default)]
    pub slice_ratio: Option<f64>,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default)]
    pub trend_threshold: Option<f64>,
    #[serde(default)]
    pub growth_bound: Option<f64>,
    #[serde(default)]
    pub probe_max: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default)]
    pub formats: Option<Vec<String>>,
}

/// Parse and validate a config document. Errors carry the TOML span/line of
/// the first offending key.
pub fn parse_config(text: &str) -> Result<RunConfigFile> {
    let file: RunConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(v) = file.schema_version {
        if v != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {v} unsupported (expected {SCHEMA_VERSION})"
            )));
        }
    }
    // surface scenario-name and constraint problems before running
    resolve(&file)?;
    Ok(file)
}

/// Fill per-scenario defaults and check every constraint.
pub fn resolve(file: &RunConfigFile) -> Result<ResolvedConfig> {
    let scenario = Scenario::parse(&file.scenario.name)?;
    let mut cfg = defaults_for(scenario);

    if let Some(seed) = file.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = &file.grid {
        cfg.dim = grid.dim;
        cfg.half_width = grid.half_width;
        cfg.points_per_axis = grid.points_per_axis;
    }
    if let Some(pot) = &file.potential {
        cfg.potential = pot.spec.clone();
        if let Some(s) = pot.sigma_check {
            cfg.sigma_check = s;
        }
        if let Some(b) = pot.assumption_bound {
            cfg.assumption_bound = b;
        }
        if let Some(e) = pot.expect_assumption_pass {
            cfg.expect_assumption_pass = e;
        }
    }
    if let Some(init) = &file.initial_state {
        cfg.initial = init.clone();
    }
    if let Some(sch) = &file.schedule {
        cfg.t_end = sch.t_end;
        cfg.dt = sch.dt;
        if let Some(s) = sch.snapshot_stride {
            cfg.snapshot_stride = s;
        }
    }
    let s = &file.scenario;
    if let Some(v) = s.m {
        cfg.obs.m = v;
    }
    if let Some(v) = s.r {
        cfg.obs.r = v;
    }
    if let Some(v) = s.m0 {
        cfg.obs.m0 = v;
    }
    if let Some(v) = s.alpha {
        cfg.obs.alpha = v;
    }
    if let Some(v) = s.beta {
        cfg.obs.beta = v;
    }
    if let Some(v) = s.ell {
        cfg.obs.ell = v;
    }
    if let Some(v) = s.k_threshold {
        cfg.obs.k_threshold = v;
    }
    if let Some(v) = s.rc {
        cfg.obs.rc = v;
    }
    if let Some(v) = s.rel_width {
        cfg.obs.rel_width = v;
    }
    if let Some(v) = s.dyadic_terms {
        cfg.dyadic_terms = v;
    }
    if let Some(v) = s.slice_ratio {
        cfg.slice_ratio = v;
    }
    if let Some(v) = s.fit_window {
        cfg.fit_window = v;
    }
    if let Some(v) = s.trend_threshold {
        cfg.trend_threshold = v;
    }
    if let Some(v) = s.growth_bound {
        cfg.growth_bound = v;
    }
    if let Some(v) = s.probe_max {
        cfg.probe_max = v;
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ResolvedConfig) -> Result<()> {
    cfg.obs.validate().map_err(|e| match e {
        Error::BadObservableParameter { name, value, window } => Error::Config(format!(
            "scenario.{name} = {value} violates its constraint (window {window})"
        )),
        other => other,
    })?;
    if !(cfg.dt > 0.0) {
        return Err(Error::Config(format!("schedule.dt = {} must be positive", cfg.dt)));
    }
    if !(cfg.t_end > cfg.dt) {
        return Err(Error::Config(format!(
            "schedule.t_end = {} must exceed dt",
            cfg.t_end
        )));
    }
    if !(cfg.slice_ratio > 0.0 && cfg.slice_ratio < 1.0) {
        return Err(Error::Config(format!(
            "scenario.slice_ratio = {} must lie in (0, 1)",
            cfg.slice_ratio
        )));
    }
    if cfg.fit_window.0 >= cfg.fit_window.1 {
        return Err(Error::Config(format!(
            "scenario.fit_window = [{}, {}] must be increasing",
            cfg.fit_window.0, cfg.fit_window.1
        )));
    }
    // grid constraints reported through Grid::new
    crate::grid::Grid::new(cfg.dim, cfg.half_width, cfg.points_per_axis)?;
    Ok(())
}

/// Rebuild an equivalent input file from a resolved config (the echo written
/// next to each report; re-ingesting it reproduces the run).
pub fn echo_file(cfg: &ResolvedConfig, output_dir: &str) -> RunConfigFile {
    RunConfigFile {
        schema_version: Some(SCHEMA_VERSION),
        seed: Some(cfg.seed),
        grid: Some(GridSection {
            dim: cfg.dim,
            half_width: cfg.half_width,
            points_per_axis: cfg.points_per_axis,
        }),
        potential: Some(PotentialSection {
            spec: cfg.potential.clone(),
            sigma_check: Some(cfg.sigma_check),
            assumption_bound: Some(cfg.assumption_bound),
            expect_assumption_pass: Some(cfg.expect_assumption_pass),
        }),
        initial_state: Some(cfg.initial.clone()),
        schedule: Some(ScheduleSection {
            t_end: cfg.t_end,
            dt: cfg.dt,
            snapshot_stride: Some(cfg.snapshot_stride),
        }),
        scenario: ScenarioSection {
            name: cfg.scenario.name().to_string(),
            m: Some(cfg.obs.m),
            r: Some(cfg.obs.r),
            m0: Some(cfg.obs.m0),
            alpha: Some(cfg.obs.alpha),
            beta: Some(cfg.obs.beta),
            ell: Some(cfg.obs.ell),
            k_threshold: Some(cfg.obs.k_threshold),
            rc: Some(cfg.obs.rc),
            rel_width: Some(cfg.obs.rel_width),
            dyadic_terms: Some(cfg.dyadic_terms),
            slice_ratio: Some(cfg.slice_ratio),
            fit_window: Some(cfg.fit_window),
            trend_threshold: Some(cfg.trend_threshold),
            growth_bound: Some(cfg.growth_bound),
            probe_max: Some(cfg.probe_max),
        },
        output: Some(OutputSection {
            directory: Some(output_dir.to_string()),
            formats: Some(vec!["csv".to_string(), "json".to_string()]),
        }),
    }
}
