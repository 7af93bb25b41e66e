//! Reproducible experiments: paired adaptive/robust runs on the benchmark,
//! the constant-parameter sweep, and the artifacts the CLI writes.

mod check;
mod config;
mod output;

pub use check::{check_datasets, check_run_dir, check_trace, CheckItem, CheckReport};
pub use config::{
    ConstraintsConfig, ExperimentConfig, OfflineConfig, PlantConfig, RunConfig, SweepConfig, WeightsConfig,
};
pub use output::{write_offline, write_run, write_sweep, RunMetrics, RUN_PLOT_SCRIPT, SWEEP_PLOT_SCRIPT};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controller::{ControlDecision, ControllerState, Mode, TraceRecord};
use crate::dataset::{consistency_gram, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::lmi::{robust_feasibility_problem, robust_problem, solve, ConicProblem, SynthesisSolution};
use crate::plant::{generate_offline_data, true_cost, DeltaSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Adaptive,
    Robust,
}

/// Offline vertex datasets and how many input draws it took to get them.
#[derive(Debug, Clone)]
pub struct OfflineData {
    pub datasets: Vec<TrajectoryDataset>,
    pub attempts: usize,
}

/// Draws offline experiments on each vertex until the data certify robust
/// stabilization and the robust problem is solvable at the run's initial
/// state.
pub fn generate_offline(cfg: &ExperimentConfig) -> Result<OfflineData> {
    let bp = cfg.benchmark();
    let x0 = Vector::from_column_slice(&cfg.offline.x0);
    let [lo, hi] = cfg.offline.input_range;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.offline.seed);
    let mut last_err = None;
    for attempt in 1..=cfg.offline.max_attempts {
        let datasets = bp
            .vertices()
            .iter()
            .zip(&cfg.offline.lengths)
            .map(|(v, &len)| generate_offline_data(v, len, &x0, lo, hi, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        match certify_offline(cfg, &datasets) {
            Ok(()) => return Ok(OfflineData { datasets, attempts: attempt }),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Infeasible(format!(
        "offline data (seed {}) do not certify robust stabilization after {} draws; last: {}",
        cfg.offline.seed,
        cfg.offline.max_attempts,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Robust stabilization feasibility, then the robust cost problem at the
/// run's initial state.
pub fn certify_offline(cfg: &ExperimentConfig, datasets: &[TrajectoryDataset]) -> Result<()> {
    let grams: Vec<_> = datasets.iter().map(consistency_gram).collect();
    solve(&robust_feasibility_problem(&grams, &cfg.margins)?, &cfg.solver)?;
    let state = ControllerState::new(datasets, cfg.cost_weights()?, cfg.polytope()?, cfg.controller_settings())?;
    state.robust_step(&cfg.run_x0())?;
    Ok(())
}

/// One-shot robust synthesis from vertex datasets.
#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub k: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Cost bound at `x0`; absent when only stability was requested.
    pub gamma: Option<f64>,
    pub status: crate::lmi::SolverStatus,
    pub iterations: usize,
    /// `(delta, spectral radius of A(delta) + B K)` on the benchmark grid.
    pub spectral_radius: Vec<(f64, f64)>,
}

pub fn synthesize(cfg: &ExperimentConfig, datasets: &[TrajectoryDataset], x0: Option<&Vector>) -> Result<SynthReport> {
    let grams: Vec<_> = datasets.iter().map(consistency_gram).collect();
    let sol: SynthesisSolution = match x0 {
        None => solve(&robust_feasibility_problem(&grams, &cfg.margins)?, &cfg.solver)?,
        Some(x) => {
            solve(&robust_problem(&grams, &cfg.cost_weights()?, x, &cfg.polytope()?, &cfg.margins)?, &cfg.solver)?
        }
    };
    let bp = cfg.benchmark();
    let spectral_radius = if sol.k.shape() == (1, 2) {
        delta_grid(bp.delta_min, bp.delta_max, 21)
            .into_iter()
            .map(|d| (d, linalg::spectral_radius(&bp.system(d).closed_loop(&sol.k))))
            .collect()
    } else {
        Vec::new()
    };
    Ok(SynthReport {
        k: linalg::mat_to_rows(&sol.k),
        p: linalg::mat_to_rows(&sol.p),
        gamma: sol.gamma,
        status: sol.status,
        iterations: sol.iterations,
        spectral_radius,
    })
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn delta_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// States `x_0..=x_{T+1}`, decisions at `0..=T`, and the realized cost.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub law: Law,
    pub states: Vec<Vector>,
    pub decisions: Vec<ControlDecision>,
    pub cost: f64,
}

impl ClosedLoop {
    pub fn trace(&self) -> Vec<TraceRecord> {
        self.decisions.iter().enumerate().map(|(k, d)| TraceRecord::new(k, &self.states[k], d)).collect()
    }

    pub fn mode_histogram(&self) -> BTreeMap<Mode, usize> {
        let mut h = BTreeMap::new();
        for d in &self.decisions {
            *h.entry(d.mode).or_insert(0) += 1;
        }
        h
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("a closed loop has at least x0")
    }

    /// State at the end of the horizon, `x_T`.
    pub fn terminal_state(&self) -> &Vector {
        &self.states[self.decisions.len() - 1]
    }

    pub fn max_abs_input(&self) -> f64 {
        self.decisions.iter().flat_map(|d| d.u.iter()).fold(0.0, |a, &v| a.max(v.abs()))
    }
}

/// Runs `law` for steps `0..=horizon` on the benchmark plant.
pub fn run_closed_loop(
    cfg: &ExperimentConfig,
    state: ControllerState,
    schedule: &DeltaSchedule,
    x0: &Vector,
    law: Law,
) -> Result<ClosedLoop> {
    let mut plant = cfg.benchmark().plant(schedule, x0.clone())?;
    let mut state = state;
    let horizon = cfg.run.horizon;
    let mut states = vec![x0.clone()];
    let mut decisions = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        let x = plant.state().clone();
        let (d, next) = match law {
            Law::Adaptive => state.adaptive_step(&x)?,
            Law::Robust => state.robust_step(&x)?,
        };
        states.push(plant.step_plant(&d.u)?);
        decisions.push(d);
        state = next;
    }
    let pairs: Vec<(Vector, Vector)> = states.iter().cloned().zip(decisions.iter().map(|d| d.u.clone())).collect();
    let cost = true_cost(&pairs, &cfg.cost_weights()?, horizon)?;
    Ok(ClosedLoop { law, states, decisions, cost })
}

/// A paired adaptive/robust comparison on identical data and plant.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub offline_attempts: usize,
    pub pinned_gain: Option<Mat>,
    pub adaptive: ClosedLoop,
    pub robust: ClosedLoop,
}

impl RunRecord {
    pub fn j_adaptive(&self) -> f64 {
        self.adaptive.cost
    }

    pub fn j_robust(&self) -> f64 {
        self.robust.cost
    }

    /// `(J_R - J_A) / J_R`, undefined when `J_R = 0`.
    pub fn variation(&self) -> Option<f64> {
        performance_variation(self.j_adaptive(), self.j_robust())
    }
}

pub fn performance_variation(j_adaptive: f64, j_robust: f64) -> Option<f64> {
    (j_robust > 0.0).then(|| (j_robust - j_adaptive) / j_robust)
}

pub fn run_pair(
    cfg: &ExperimentConfig,
    offline: &OfflineData,
    schedule: &DeltaSchedule,
    x0: &Vector,
) -> Result<RunRecord> {
    let state =
        ControllerState::new(&offline.datasets, cfg.cost_weights()?, cfg.polytope()?, cfg.controller_settings())?;
    let pinned_gain = state.pinned_gain().cloned();
    let adaptive = run_closed_loop(cfg, state.clone(), schedule, x0, Law::Adaptive)?;
    let robust = run_closed_loop(cfg, state, schedule, x0, Law::Robust)?;
    Ok(RunRecord { offline_attempts: offline.attempts, pinned_gain, adaptive, robust })
}

/// The nominal run: offline data, then both controllers from `run.x0`
/// under the configured schedule.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let offline = generate_offline(cfg)?;
    run_pair(cfg, &offline, &cfg.schedule()?, &cfg.run_x0())
}

/// The SDP the controller would solve at step `k` of the nominal run, in
/// the normalized form that is actually passed to the solver.
pub fn step_problem(cfg: &ExperimentConfig, k: usize, law: Law) -> Result<ConicProblem> {
    cfg.validate()?;
    let offline = generate_offline(cfg)?;
    let mut state =
        ControllerState::new(&offline.datasets, cfg.cost_weights()?, cfg.polytope()?, cfg.controller_settings())?;
    let mut plant = cfg.benchmark().plant(&cfg.schedule()?, cfg.run_x0())?;
    for _ in 0..k {
        let x = plant.state().clone();
        let (d, next) = match law {
            Law::Adaptive => state.adaptive_step(&x)?,
            Law::Robust => state.robust_step(&x)?,
        };
        plant.step_plant(&d.u)?;
        state = next;
    }
    let x = plant.state().clone();
    let (p, _) = match law {
        Law::Adaptive => state.problem_at(&x)?,
        Law::Robust => state.robust_problem_at(&x)?,
    };
    Ok(p)
}

/// One cell of the sweep. Failed runs keep their error message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub delta: f64,
    pub run: usize,
    pub x0: Vec<f64>,
    pub j_adaptive: Option<f64>,
    pub j_robust: Option<f64>,
    pub variation: Option<f64>,
    pub error: Option<String>,
}

/// Box-plot statistics of the variation at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub runs: usize,
    pub failed: usize,
    pub undefined: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub offline_attempts: usize,
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SweepRow>,
}

/// Initial state of sweep cell `index`: uniform in the `x0_bound` box,
/// drawn from its own stream so cells do not depend on each other.
pub fn sweep_x0(cfg: &ExperimentConfig, index: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sweep.seed);
    rng.set_stream(index as u64);
    let b = cfg.sweep.x0_bound;
    Vector::from_fn(2, |_, _| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 })
}

/// Constant-parameter runs over the configured grid with random initial
/// states. `threads = 0` uses every core, `1` runs sequentially. Cells are
/// merged by index, so the result does not depend on the thread count.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let offline = generate_offline(cfg)?;
    let runs = cfg.sweep.runs_per_delta;
    let jobs: Vec<(usize, f64, usize)> = cfg
        .sweep
        .deltas
        .iter()
        .enumerate()
        .flat_map(|(di, &d)| (0..runs).map(move |r| (di * runs + r, d, r)))
        .collect();
    let cell = |&(index, delta, run): &(usize, f64, usize)| -> SweepCell {
        let x0 = sweep_x0(cfg, index);
        let out = run_pair(cfg, &offline, &DeltaSchedule::constant(delta), &x0);
        match out {
            Ok(r) => SweepCell {
                delta,
                run,
                x0: x0.iter().copied().collect(),
                j_adaptive: Some(r.j_adaptive()),
                j_robust: Some(r.j_robust()),
                variation: r.variation(),
                error: None,
            },
            Err(e) => SweepCell {
                delta,
                run,
                x0: x0.iter().copied().collect(),
                j_adaptive: None,
                j_robust: None,
                variation: None,
                error: Some(e.to_string()),
            },
        }
    };
    let cells = map_cells(&jobs, threads, cell)?;
    let summary = cfg
        .sweep
        .deltas
        .iter()
        .enumerate()
        .map(|(di, &delta)| summarize(delta, &cells[di * runs..(di + 1) * runs]))
        .collect();
    Ok(SweepResult { offline_attempts: offline.attempts, cells, summary })
}

#[cfg(feature = "parallel")]
fn map_cells<T, F>(jobs: &[T], threads: usize, f: F) -> Result<Vec<SweepCell>>
where
    T: Sync,
    F: Fn(&T) -> SweepCell + Sync + Send,
{
    use rayon::prelude::*;
    if threads == 1 {
        return Ok(jobs.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn map_cells<T, F>(jobs: &[T], _threads: usize, f: F) -> Result<Vec<SweepCell>>
where
    F: Fn(&T) -> SweepCell,
{
    Ok(jobs.iter().map(f).collect())
}

fn summarize(delta: f64, cells: &[SweepCell]) -> SweepRow {
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    let mut v: Vec<f64> = cells.iter().filter_map(|c| c.variation).collect();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| quantile(&v, p);
    SweepRow {
        delta,
        runs: cells.len(),
        failed,
        undefined: cells.len() - failed - v.len(),
        min: v.first().copied(),
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v.last().copied(),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_of_small_sets() {
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[3.0], 0.25), Some(3.0));
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
    }

    #[test]
    fn variation_undefined_at_zero_cost() {
        assert_eq!(performance_variation(0.0, 0.0), None);
        assert_eq!(performance_variation(1.0, 2.0), Some(0.5));
    }

    #[test]
    fn grid_endpoints() {
        let g = delta_grid(0.1, 10.0, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.1);
        assert!((g[49] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_states_are_independent_of_order() {
        let cfg = ExperimentConfig::default();
        let a = sweep_x0(&cfg, 7);
        let _ = sweep_x0(&cfg, 3);
        assert_eq!(a, sweep_x0(&cfg, 7));
        assert_ne!(a, sweep_x0(&cfg, 8));
        assert!(a.amax() <= 1.0);
    }

    #[test]
    fn zero_horizon_costs_one_stage() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.horizon = 0;
        let r = run_single(&cfg).unwrap();
        assert_eq!(r.adaptive.decisions.len(), 1);
        let x0 = cfg.run_x0();
        let want = cfg.cost_weights().unwrap().stage_cost(&x0, &r.adaptive.decisions[0].u);
        assert_eq!(r.j_adaptive(), want);
    }

    #[test]
    fn origin_start_has_undefined_variation() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.horizon = 6;
        let offline = generate_offline(&cfg).unwrap();
        let r = run_pair(&cfg, &offline, &DeltaSchedule::constant(0.5), &Vector::zeros(2)).unwrap();
        assert_eq!(r.j_robust(), 0.0);
        assert_eq!(r.variation(), None);
    }
}
