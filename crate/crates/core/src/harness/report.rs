//! Multi-run execution and result files: JSON lines per run, a CSV summary
//! and a plain-text table of mean ± std.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_learner, run_incremental, Config, FeaturesByClass, HarnessError, OpCounts, Result, RunReport};

/// One run with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: serde_json::Value,
    pub run: RunReport,
}

/// Run every configured learner for every seed over `data`. Runs execute
/// in parallel; the result order is learners as configured, then seeds.
pub fn run_grid(cfg: &Config, data: &FeaturesByClass) -> Result<Vec<RunReport>> {
    let available: Vec<u32> = data.keys().copied().collect();
    let classes = cfg.protocol.protocol_classes(&available)?;
    let dim = data
        .values()
        .flatten()
        .next()
        .map(|v| v.len())
        .ok_or_else(|| HarnessError::MissingData("feature set is empty".into()))?;
    let protocol = cfg.protocol.protocol_config();
    let jobs: Vec<_> = cfg
        .protocol
        .learners
        .iter()
        .flat_map(|&k| cfg.protocol.run_seeds().into_iter().map(move |s| (k, s)))
        .collect();
    jobs.par_iter()
        .map(|&(kind, seed)| {
            let mut learner = build_learner(kind, dim, classes.len(), &cfg.learner, &cfg.norm, seed)?;
            run_incremental(&protocol, &classes, data, seed, learner.as_mut())
        })
        .collect()
}

pub fn records(cfg: &Config, runs: &[RunReport]) -> Vec<RunRecord> {
    let config = serde_json::to_value(cfg).expect("config serializes");
    runs.iter()
        .map(|r| RunRecord {
            config: config.clone(),
            run: r.clone(),
        })
        .collect()
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, rows: &[T]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| HarnessError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Mean and sample standard deviation; std is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub learner: String,
    pub runs: usize,
    pub final_mean: f64,
    pub final_std: f64,
    /// Mean cumulative accuracy after each step.
    pub curve_mean: Vec<f64>,
    /// Mean over runs of the per-run mean forgetting.
    pub forgetting_mean: f64,
    pub parameter_mean: f64,
    pub prototype_mean: f64,
}

/// Group runs by learner in order of first appearance.
pub fn summarize(runs: &[RunReport]) -> Vec<LearnerSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in runs {
        if !names.contains(&r.learner.as_str()) {
            names.push(&r.learner);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&RunReport> = runs.iter().filter(|r| r.learner == name).collect();
            let finals: Vec<f64> = group.iter().map(|r| r.final_accuracy).collect();
            let (final_mean, final_std) = mean_std(&finals);
            let steps = group.iter().map(|r| r.cumulative_accuracy.len()).min().unwrap_or(0);
            let curve_mean = (0..steps)
                .map(|i| group.iter().map(|r| r.cumulative_accuracy[i]).sum::<f64>() / group.len() as f64)
                .collect();
            let forgetting: Vec<f64> = group
                .iter()
                .map(|r| r.forgetting.iter().sum::<f64>() / r.forgetting.len().max(1) as f64)
                .collect();
            let avg = |f: &dyn Fn(&RunReport) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / group.len() as f64;
            LearnerSummary {
                learner: name.to_string(),
                runs: group.len(),
                final_mean,
                final_std,
                curve_mean,
                forgetting_mean: mean_std(&forgetting).0,
                parameter_mean: avg(&|r| r.parameter_count as f64),
                prototype_mean: avg(&|r| r.prototype_count as f64),
            }
        })
        .collect()
}

/// One row per learner; step columns `step_1 ..` hold the mean curve.
pub fn write_summary_csv<W: Write>(out: W, summaries: &[LearnerSummary]) -> Result<()> {
    let steps = summaries.iter().map(|s| s.curve_mean.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "learner",
        "runs",
        "final_mean",
        "final_std",
        "forgetting_mean",
        "parameters",
        "prototypes",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=steps).map(|i| format!("step_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for s in summaries {
        let mut row = vec![
            s.learner.clone(),
            s.runs.to_string(),
            format!("{:.6}", s.final_mean),
            format!("{:.6}", s.final_std),
            format!("{:.6}", s.forgetting_mean),
            format!("{:.1}", s.parameter_mean),
            format!("{:.1}", s.prototype_mean),
        ];
        row.extend((0..steps).map(|i| s.curve_mean.get(i).map_or(String::new(), |v| format!("{v:.6}"))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}

pub fn format_table(summaries: &[LearnerSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>4} {:>17} {:>10} {:>12} {:>10}",
        "learner", "runs", "final accuracy", "forgetting", "parameters", "prototypes"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<14} {:>4} {:>8.2}% ± {:>5.2} {:>10.3} {:>12.0} {:>10.1}",
            s.learner,
            s.runs,
            100.0 * s.final_mean,
            100.0 * s.final_std,
            s.forgetting_mean,
            s.parameter_mean,
            s.prototype_mean
        );
    }
    out
}

/// Op counts of one binning window, for the frequency sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub window_us: u64,
    pub ops: OpCounts,
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "window_us",
        "timesteps",
        "synops",
        "neuron_updates",
        "spikes",
        "saturations",
        "accumulate_adds",
        "norm_multiplies",
        "inv_sqrt_calls",
        "prototype_macs",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let o = &r.ops;
        w.write_record(
            [
                r.window_us,
                o.timesteps,
                o.totals.synops,
                o.totals.neuron_updates,
                o.totals.spikes,
                o.totals.saturations,
                o.accumulate_adds,
                o.head.norm_multiplies,
                o.head.inv_sqrt_calls,
                o.head.prototype_macs,
            ]
            .map(|v| v.to_string()),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>10} {:>9} {:>14} {:>14} {:>12} {:>11}",
        "window", "timesteps", "synops", "neuron_updates", "spikes", "saturations"
    );
    for r in rows {
        let t = &r.ops.totals;
        let _ = writeln!(
            out,
            "{:>8}us {:>9} {:>14} {:>14} {:>12} {:>11}",
            r.window_us, r.ops.timesteps, t.synops, t.neuron_updates, t.spikes, t.saturations
        );
    }
    out
}
