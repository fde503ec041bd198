//! Parameter grids: one training run per cell of the Cartesian product.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use crate::config::{grid_alias, Settings};
use crate::experiment::{self, ExperimentConfig, RunSummary};

/// Keys a grid may vary.
pub const GRID_KEYS: &[&str] = &[
    "fed.epochs",
    "fed.batch",
    "fed.participation",
    "channel.snr_db",
    "channel.bit_error_rate",
    "strategy.rate",
    "strategy.sparsity",
    "encoder.dim",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `name=v1,v2,...`; `name` may be a short alias such as `d` or `p_e`.
pub fn parse_axis(arg: &str) -> Result<Axis> {
    let (k, vs) = arg.split_once('=').ok_or_else(|| anyhow!("--grid expects name=v1,v2,..., got `{arg}`"))?;
    let key = grid_alias(k.trim());
    if !GRID_KEYS.contains(&key) {
        bail!("`{}` cannot be swept (allowed: E, B, C, snr_db, p_e, rate, S, d)", k.trim());
    }
    let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("grid axis `{key}` has no values");
    }
    Ok(Axis { key: key.to_string(), values })
}

/// Every combination, last axis varying fastest.
pub fn cells(axes: &[Axis]) -> Vec<Vec<&str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.as_str());
                    c
                })
            })
            .collect();
    }
    out
}

fn run_cell(settings: &Settings) -> Result<RunSummary> {
    let cfg = ExperimentConfig::from_settings(settings)?;
    let (train, test) = experiment::load_data(&cfg)?;
    let (train, test) = experiment::encode_splits(&cfg, train, test)?;
    let (summary, _) = experiment::run(&cfg, &train, test.as_ref())?;
    Ok(summary)
}

/// Runs every cell, writing `cell_NNN.csv` metrics and `summary.csv` into
/// `out_dir`. A failing cell is recorded and the sweep moves on. Returns the
/// number of failed cells.
pub fn sweep(base: &Settings, axes: &[Axis], out_dir: &Path, mut log: impl FnMut(&str)) -> Result<usize> {
    if axes.is_empty() {
        bail!("sweep needs at least one --grid axis");
    }
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.key == a.key) {
            bail!("grid axis `{}` given twice", a.key);
        }
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let summary_path = out_dir.join("summary.csv");
    let mut summary = BufWriter::new(File::create(&summary_path).with_context(|| format!("creating {}", summary_path.display()))?);
    let names: Vec<&str> = axes.iter().map(|a| a.key.as_str()).collect();
    writeln!(
        summary,
        "cell,{},status,rounds,final_accuracy,best_accuracy,target_round,uplink_bytes,downlink_bytes,metrics,error",
        names.join(",")
    )?;
    let cells = cells(axes);
    let mut failed = 0;
    for (i, values) in cells.iter().enumerate() {
        let metrics = format!("cell_{i:03}.csv");
        let mut s = base.clone();
        for (k, v) in names.iter().zip(values) {
            s.insert(k, v, "--grid")?;
        }
        s.insert("output.metrics", &out_dir.join(&metrics).display().to_string(), "sweep")?;
        s.remove("output.model");
        s.remove("output.sparse_model");
        let label: Vec<String> = names.iter().zip(values).map(|(k, v)| format!("{k}={v}")).collect();
        let row = match run_cell(&s) {
            Ok(r) => {
                log(&format!("cell {i}: {} accuracy {:.4}", label.join(" "), r.final_accuracy));
                format!(
                    "ok,{},{:.6},{:.6},{},{},{},{metrics},",
                    r.rounds,
                    r.final_accuracy,
                    r.best_accuracy,
                    r.target_round.map(|t| t.to_string()).unwrap_or_default(),
                    r.uplink_bytes,
                    r.downlink_bytes
                )
            }
            Err(e) => {
                failed += 1;
                let msg = format!("{e:#}");
                log(&format!("cell {i}: {} failed: {msg}", label.join(" ")));
                format!("error,,,,,,,,{}", csv_field(&msg))
            }
        };
        writeln!(summary, "{i},{},{row}", values.iter().map(|v| csv_field(v)).collect::<Vec<_>>().join(","))?;
        summary.flush()?;
    }
    Ok(failed)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}
