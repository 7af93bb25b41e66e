use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentConfig, OfflineData, RunRecord, SweepResult};
use crate::controller::write_trace_file;
use crate::dataset::DatasetManifest;
use crate::error::Result;
use crate::linalg;

/// gnuplot script for the two traces of a run.
pub const RUN_PLOT_SCRIPT: &str = "\
# gnuplot -p plot.script
set datafile separator ','
set key outside
set multiplot layout 3,1
set ylabel 'x1'
plot 'trace_robust.csv' using 1:2 with linespoints title 'robust', \\
     'trace_adaptive.csv' using 1:2 with linespoints title 'adaptive'
set ylabel 'x2'
plot 'trace_robust.csv' using 1:3 with linespoints title 'robust', \\
     'trace_adaptive.csv' using 1:3 with linespoints title 'adaptive'
set ylabel 'u'
set xlabel 'k'
plot 'trace_robust.csv' using 1:4 with steps title 'robust', \\
     'trace_adaptive.csv' using 1:4 with steps title 'adaptive'
unset multiplot
";

/// gnuplot script for the sweep box plot.
pub const SWEEP_PLOT_SCRIPT: &str = "\
# gnuplot -p plot.script
set datafile separator ','
set datafile missing 'null'
set xlabel 'delta'
set ylabel '(J_R - J_A) / J_R'
set boxwidth 0.04
plot 'sweep_summary.csv' using 1:6:5:9:8 with candlesticks whiskerbars title 'quartiles', \\
     '' using 1:7:7:7:7 with candlesticks lt -1 notitle
";

#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub offline_seed: u64,
    pub offline_attempts: usize,
    pub j_adaptive: f64,
    pub j_robust: f64,
    pub variation: Option<f64>,
    pub pinned_gain: Option<Vec<Vec<f64>>>,
    pub modes_adaptive: BTreeMap<String, usize>,
    pub modes_robust: BTreeMap<String, usize>,
    pub final_norm_adaptive: f64,
    pub final_norm_robust: f64,
    pub max_abs_input: f64,
    pub solver_iterations_adaptive: usize,
    pub solver_iterations_robust: usize,
}

impl RunMetrics {
    pub fn new(cfg: &ExperimentConfig, r: &RunRecord) -> Self {
        let hist = |l: &super::ClosedLoop| {
            l.mode_histogram().into_iter().map(|(m, c)| (m.as_str().to_string(), c)).collect()
        };
        Self {
            offline_seed: cfg.offline.seed,
            offline_attempts: r.offline_attempts,
            j_adaptive: r.j_adaptive(),
            j_robust: r.j_robust(),
            variation: r.variation(),
            pinned_gain: r.pinned_gain.as_ref().map(linalg::mat_to_rows),
            modes_adaptive: hist(&r.adaptive),
            modes_robust: hist(&r.robust),
            final_norm_adaptive: r.adaptive.terminal_state().norm(),
            final_norm_robust: r.robust.terminal_state().norm(),
            max_abs_input: r.adaptive.max_abs_input().max(r.robust.max_abs_input()),
            solver_iterations_adaptive: r.adaptive.decisions.iter().map(|d| d.iterations).sum(),
            solver_iterations_robust: r.robust.decisions.iter().map(|d| d.iterations).sum(),
        }
    }
}

/// Writes the offline datasets and their manifest; returns the manifest path.
pub fn write_offline(offline: &OfflineData, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (i, ds) in offline.datasets.iter().enumerate() {
        let name = PathBuf::from(format!("offline_{}.csv", i + 1));
        ds.write_csv_file(&dir.join(&name))?;
        files.push(name);
    }
    let first = &offline.datasets[0];
    let manifest = DatasetManifest { n: first.n(), m: first.m(), vertices: files };
    let path = dir.join("offline_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// `trace_adaptive.csv`, `trace_robust.csv`, `metrics.json`, `plot.script`.
pub fn write_run(cfg: &ExperimentConfig, record: &RunRecord, dir: &Path) -> Result<RunMetrics> {
    std::fs::create_dir_all(dir)?;
    let timing = cfg.run.record_timing;
    write_trace_file(&record.adaptive.trace(), timing, &dir.join("trace_adaptive.csv"))?;
    write_trace_file(&record.robust.trace(), timing, &dir.join("trace_robust.csv"))?;
    let metrics = RunMetrics::new(cfg, record);
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n")?;
    std::fs::write(dir.join("plot.script"), RUN_PLOT_SCRIPT)?;
    Ok(metrics)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "null".into())
}

/// `sweep_summary.csv`, `sweep_runs.csv`, `plot.script`. Undefined values
/// are written as `null`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("sweep_summary.csv"))?;
    w.write_record(["delta", "runs", "failed", "undefined", "min", "q1", "median", "q3", "max"])?;
    for r in &result.summary {
        w.write_record([
            r.delta.to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            r.undefined.to_string(),
            opt(r.min),
            opt(r.q1),
            opt(r.median),
            opt(r.q3),
            opt(r.max),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("sweep_runs.csv"))?;
    w.write_record(["delta", "run", "x1", "x2", "j_adaptive", "j_robust", "variation", "error"])?;
    for c in &result.cells {
        w.write_record([
            c.delta.to_string(),
            c.run.to_string(),
            c.x0[0].to_string(),
            c.x0[1].to_string(),
            opt(c.j_adaptive),
            opt(c.j_robust),
            opt(c.variation),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    std::fs::write(dir.join("plot.script"), SWEEP_PLOT_SCRIPT)?;
    Ok(())
}
