//! Report persistence: per-observable CSV time series, a structured JSON
//! report with the full config echo, and a machine-readable pass/fail
//! summary. Output is deterministic for a fixed (config, seed, platform).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{echo_file, RunConfigFile, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::estimates::scenario::{EstimateReport, ResolvedConfig};

#[derive(Serialize)]
struct ReportDocument<'a> {
    schema_version: u32,
    report: &'a EstimateReport,
    config_echo: &'a RunConfigFile,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    scenario: &'a str,
    pass: bool,
    verdicts: Vec<SummaryVerdict<'a>>,
}

#[derive(Serialize)]
struct SummaryVerdict<'a> {
    name: &'a str,
    pass: bool,
    value: f64,
    threshold: f64,
    comparison: &'a str,
}

/// Write all artifacts for one scenario run; returns the paths written.
pub fn write_artifacts(
    report: &EstimateReport,
    cfg: &ResolvedConfig,
    out_dir: &Path,
    formats: &[String],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let want = |f: &str| formats.is_empty() || formats.iter().any(|x| x == f);

    if want("csv") {
        for series in &report.series {
            let path = out_dir.join(format!("{}.csv", series.name));
            let mut buf = String::new();
            buf.push_str(&format!("t,{}\n", series.name));
            for (t, v) in &series.points {
                buf.push_str(&format!("{t:.17e},{v:.17e}\n"));
            }
            fs::write(&path, buf)?;
            written.push(path);
        }
    }

    if want("json") {
        let echo = echo_file(cfg, &out_dir.display().to_string());
        let doc = ReportDocument { schema_version: SCHEMA_VERSION, report, config_echo: &echo };
        let path = out_dir.join("report.json");
        let mut file = fs::File::create(&path)?;
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialize(e.to_string()))?;
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        written.push(path);

        let summary = Summary {
            schema_version: SCHEMA_VERSION,
            scenario: &report.scenario,
            pass: report.pass,
            verdicts: report
                .verdicts
                .iter()
                .map(|v| SummaryVerdict {
                    name: &v.name,
                    pass: v.pass,
                    value: v.value,
                    threshold: v.threshold,
                    comparison: v.comparison,
                })
                .collect(),
        };
        let path = out_dir.join("summary.json");
        let text =
            serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialize(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        written.push(path);

        let echo_path = out_dir.join("config_echo.toml");
        let text = toml::to_string_pretty(&echo).map_err(|e| Error::Serialize(e.to_string()))?;
        fs::write(&echo_path, text)?;
        written.push(echo_path);
    }

    Ok(written)
}

/// One pass/fail line per verdict, for terminal output.
pub fn verdict_lines(report: &EstimateReport) -> Vec<String> {
    report
        .verdicts
        .iter()
        .map(|v| {
            format!(
                "[{}] {} {}: value {:.6e} {} threshold {:.6e}",
                if v.pass { "PASS" } else { "FAIL" },
                report.scenario,
                v.name,
                v.value,
                v.comparison,
                v.threshold,
            )
        })
        .collect()
}
