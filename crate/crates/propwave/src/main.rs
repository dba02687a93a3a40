//! Thin command-line front end: run scenario configs, list the scenario
//! catalog, or validate a config without running it.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use propwave::config::{parse_config, resolve};
use propwave::estimates::scenario::ALL_SCENARIOS;
use propwave::report::{verdict_lines, write_artifacts};

#[derive(Parser)]
#[command(name = "propwave", version, about = "Spectral propagation-estimate lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs and write reports.
    Run {
        /// Config file (repeatable).
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Output directory (per-config subdirectories when several configs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run up to this many configs in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the scenario catalog.
    ListScenarios {
        /// Emit JSON instead of text.
        #[arg(long)]
        machine: bool,
    },
    /// Parse and validate a config, printing the resolved settings.
    CheckConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run() -> propwave::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, jobs } => run_configs(config, out, seed, jobs),
        Command::ListScenarios { machine } => {
            list_scenarios(machine)?;
            Ok(true)
        }
        Command::CheckConfig { config } => {
            let text = std::fs::read_to_string(&config)?;
            let file = parse_config(&text)?;
            let resolved = resolve(&file)?;
            println!("config ok: scenario `{}`", resolved.scenario.name());
            println!(
                "  grid: dim {}, L {}, N {}",
                resolved.dim, resolved.half_width, resolved.points_per_axis
            );
            println!(
                "  schedule: t_end {}, dt {}, snapshot stride {}",
                resolved.t_end, resolved.dt, resolved.snapshot_stride
            );
            println!("  seed: {}", resolved.seed);
            Ok(true)
        }
    }
}

fn run_configs(
    configs: Vec<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: usize,
) -> propwave::Result<bool> {
    let multi = configs.len() > 1;
    let mut tasks = Vec::new();
    for path in &configs {
        let text = std::fs::read_to_string(path)?;
        let file = parse_config(&text)?;
        let mut cfg = resolve(&file)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let dir_from_file = file
            .output
            .as_ref()
            .and_then(|o| o.directory.clone())
            .unwrap_or_else(|| "out".to_string());
        let formats = file
            .output
            .as_ref()
            .and_then(|o| o.formats.clone())
            .unwrap_or_else(|| vec!["csv".to_string(), "json".to_string()]);
        let base = out.clone().unwrap_or_else(|| PathBuf::from(dir_from_file));
        let dir = if multi {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "run".to_string());
            base.join(stem)
        } else {
            base
        };
        tasks.push((cfg, dir, formats));
    }

    let jobs = jobs.max(1).min(tasks.len().max(1));
    let results: Vec<propwave::Result<bool>> = if jobs == 1 {
        tasks.iter().map(|t| run_one(t)).collect()
    } else {
        let chunks: Vec<_> = tasks.chunks((tasks.len() + jobs - 1) / jobs).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| scope.spawn(move || chunk.iter().map(run_one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("runner thread panicked"))
                .collect()
        })
    };

    let mut all_pass = true;
    for r in results {
        all_pass &= r?;
    }
    Ok(all_pass)
}

fn run_one(task: &(propwave::estimates::scenario::ResolvedConfig, PathBuf, Vec<String>)) -> propwave::Result<bool> {
    let (cfg, dir, formats) = task;
    let report = propwave::estimates::run_scenario(cfg)?;
    let written = write_artifacts(&report, cfg, dir, formats)?;
    for line in verdict_lines(&report) {
        println!("{line}");
    }
    if let Some((t, mass)) = report.breach {
        println!(
            "note: boundary-mass breach at t={t:.3} (mass {mass:.3e}); enlarge the box"
        );
    }
    println!(
        "{}: {} | artifacts: {}",
        report.scenario,
        if report.pass { "PASS" } else { "FAIL" },
        written
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(report.pass)
}

fn list_scenarios(machine: bool) -> propwave::Result<()> {
    if machine {
        let entries: Vec<serde_json::Value> = ALL_SCENARIOS
            .iter()
            .map(|s| {
                serde_json::json!({
                    "name": s.name(),
                    "checks": s.anchor(),
                    "parameters": s.required_params(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "scenarios": entries }))
                .map_err(|e| propwave::Error::Serialize(e.to_string()))?
        );
    } else {
        for s in ALL_SCENARIOS {
            println!("{:<18} {}", s.name(), s.anchor());
            println!("{:<18}   parameters: {}", "", s.required_params().join(", "));
        }
    }
    Ok(())
}
