//! Campaign result files: per-UE CSV, JSON summary, CDF tables and
//! optimizer traces.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ArchitectureKind, CampaignResult};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

pub const RESULTS_HEADER: &str = "drop,arch,side,ue,sinr,se";

/// Empirical CDF: sorted values with probabilities `(i + 1)/N`.
pub fn cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InvalidState("cdf of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect())
}

/// Median; the mean of the two middle values for even lengths. `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Arithmetic mean, summed in order. `None` when empty.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// One row per UE per drop per architecture. Floats are written in shortest
/// round-trip form, so statistics recomputed from the file are exact.
pub fn write_results_csv<W: Write>(result: &CampaignResult, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{RESULTS_HEADER}")?;
    for d in &result.drops {
        for o in &d.outcomes {
            let label = o.arch.label();
            let sides = [("dl", &o.performance.dl), ("ul", &o.performance.ul)];
            for (side, rows) in sides {
                for (ue, b) in rows.iter().enumerate() {
                    writeln!(out, "{},{label},{side},{ue},{},{}", d.drop, b.sinr, b.se)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Two-column CDF table.
pub fn write_cdf<W: Write>(values: &[f64], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "value,probability")?;
    for (x, p) in cdf(values)? {
        writeln!(out, "{x},{p}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSummary {
    pub arch: String,
    pub median_dl_se: Option<f64>,
    pub median_ul_se: Option<f64>,
    pub mean_dl_se: Option<f64>,
    pub mean_ul_se: Option<f64>,
    pub median_objective: Option<f64>,
    pub mean_objective: Option<f64>,
    /// Share of optimizer runs that converged, for optimized architectures.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged_fraction: Option<f64>,
}

/// Ratios `reference / baseline` of the summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRatio {
    pub reference: String,
    pub baseline: String,
    pub median_dl_se: Option<f64>,
    pub median_ul_se: Option<f64>,
    pub mean_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub drops: usize,
    pub seed: u64,
    pub rejections: usize,
    pub config: ScenarioConfig,
    pub architectures: Vec<ArchSummary>,
    pub gain_ratios: Vec<GainRatio>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

/// Summary statistics; gain ratios compare the optimized full-duplex
/// architecture (or the first one listed) against every other.
pub fn summarize(result: &CampaignResult) -> Summary {
    let architectures: Vec<ArchSummary> = result
        .archs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let s = result.series(i);
            let runs: Vec<bool> = result
                .outcomes(i)
                .filter_map(|o| o.optimizer.as_ref().map(|r| r.converged))
                .collect();
            ArchSummary {
                arch: a.label().to_string(),
                median_dl_se: median(&s.dl_se),
                median_ul_se: median(&s.ul_se),
                mean_dl_se: mean(&s.dl_se),
                mean_ul_se: mean(&s.ul_se),
                median_objective: median(&s.objective),
                mean_objective: mean(&s.objective),
                converged_fraction: (!runs.is_empty())
                    .then(|| runs.iter().filter(|&&c| c).count() as f64 / runs.len() as f64),
            }
        })
        .collect();
    let reference = result
        .archs
        .iter()
        .position(|a| a.kind == ArchitectureKind::RaFdOpt)
        .unwrap_or(0);
    let r = &architectures[reference];
    let gain_ratios = architectures
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != reference)
        .map(|(_, b)| GainRatio {
            reference: r.arch.clone(),
            baseline: b.arch.clone(),
            median_dl_se: ratio(r.median_dl_se, b.median_dl_se),
            median_ul_se: ratio(r.median_ul_se, b.median_ul_se),
            mean_objective: ratio(r.mean_objective, b.mean_objective),
        })
        .collect();
    Summary {
        drops: result.num_drops(),
        seed: result.seed,
        rejections: result.rejections(),
        config: result.config.clone(),
        architectures,
        gain_ratios,
    }
}

#[derive(Serialize)]
struct TraceFile<'a> {
    drop: usize,
    arch: &'a str,
    converged: bool,
    iterations: usize,
    residual_slack: f64,
    trace: &'a [crate::sca::TraceEntry],
}

/// Writes `results.csv`, `summary.json` and `cdf_<metric>_<arch>.csv` into
/// `dir`, plus `traces/drop<d>_<arch>.json` for every run that kept a trace.
/// Returns the written paths.
pub fn write_outputs(result: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("results.csv");
    write_results_csv(result, fs::File::create(&path)?)?;
    written.push(path);

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summarize(result)).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&path, json + "\n")?;
    written.push(path);

    for (i, a) in result.archs.iter().enumerate() {
        let s = result.series(i);
        let metrics = [("dl_se", &s.dl_se), ("ul_se", &s.ul_se), ("objective", &s.objective)];
        for (metric, values) in metrics {
            if values.is_empty() {
                continue;
            }
            let path = dir.join(format!("cdf_{metric}_{}.csv", a.slug()));
            write_cdf(values, fs::File::create(&path)?)?;
            written.push(path);
        }
    }

    for d in &result.drops {
        for o in &d.outcomes {
            let Some(opt) = o.optimizer.as_ref().filter(|r| !r.trace.is_empty()) else {
                continue;
            };
            let traces = dir.join("traces");
            fs::create_dir_all(&traces)?;
            let path = traces.join(format!("drop{}_{}.json", d.drop, o.arch.slug()));
            let file = TraceFile {
                drop: d.drop,
                arch: o.arch.label(),
                converged: opt.converged,
                iterations: opt.iterations,
                residual_slack: opt.residual_slack,
                trace: &opt.trace,
            };
            let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Io(e.to_string()))?;
            fs::write(&path, json + "\n")?;
            written.push(path);
        }
    }
    Ok(written)
}
