//! Receding-horizon adaptive controller and the robust-only baseline.
//!
//! Every step re-solves a synthesis SDP at the current state. The state is
//! normalized to unit length before solving (the polytope rows are scaled to
//! match); every block is homogeneous in `(H, L, gamma, eps)` except the
//! constraint blocks, so the solution maps back exactly by `s^2` and `K`, `P`
//! are unchanged. This keeps the problem conditioned as the state decays.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{consistency_gram, ConsistencyGram, RollingWindow, SystemPair, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::lmi::{
    adaptive_problem, pinned_gain, robust_problem, solve, ConicProblem, ConstraintPolytope, CostWeights, Margins, SolverSettings, SolverStatus,
    SynthesisSolution,
};

/// Relative least-squares residual above which a window is treated as
/// inconsistent (no single linear system explains it).
pub const DEFAULT_CONTAMINATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SolvedFresh,
    ReusedGain,
    ResolvedPreviousWindow,
    RobustWarmup,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::SolvedFresh, Mode::ReusedGain, Mode::ResolvedPreviousWindow, Mode::RobustWarmup];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SolvedFresh => "solved_fresh",
            Mode::ReusedGain => "reused_gain",
            Mode::ResolvedPreviousWindow => "resolved_previous_window",
            Mode::RobustWarmup => "robust_warmup",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerSettings {
    pub window_len: usize,
    pub margins: Margins,
    pub solver: SolverSettings,
    pub contamination_tol: f64,
    /// Test hook: from this step on, skip solving and reuse the last gain.
    #[serde(skip)]
    pub force_reuse_from: Option<usize>,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            window_len: 5,
            margins: Margins::default(),
            solver: SolverSettings::default(),
            contamination_tol: DEFAULT_CONTAMINATION_TOL,
            force_reuse_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub u: Vector,
    pub k: Mat,
    pub p: Mat,
    pub gamma: f64,
    pub mode: Mode,
    /// `x_k^T P x_k`.
    pub lyapunov: f64,
    /// Interior-point iterations spent on this step (all attempts).
    pub iterations: usize,
    pub solve_seconds: f64,
    /// Whether the accepted solve met the solver tolerances exactly.
    pub accurate: bool,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    offline_grams: Vec<ConsistencyGram>,
    /// Gain fixed exactly by the offline data, when it is. Every solve then
    /// returns it up to rounding; using the exact value keeps decisions from
    /// different problems bit-comparable.
    pinned_gain: Option<Mat>,
    window: RollingWindow,
    last_solution: Option<SynthesisSolution>,
    /// Window of the last successful adaptive solve.
    last_window: Option<RollingWindow>,
    weights: CostWeights,
    polytope: ConstraintPolytope,
    settings: ControllerSettings,
    /// `(x_{k-1}, u_{k-1})`, pushed into the window once `x_k` arrives.
    pending: Option<(Vector, Vector)>,
    modes: Vec<Mode>,
}

impl ControllerState {
    pub fn new(
        offline: &[TrajectoryDataset],
        weights: CostWeights,
        polytope: ConstraintPolytope,
        settings: ControllerSettings,
    ) -> Result<Self> {
        if offline.is_empty() {
            return Err(Error::Empty("no offline vertex datasets"));
        }
        let n = offline[0].n();
        let m = offline[0].m();
        if offline.iter().any(|d| d.n() != n || d.m() != m) {
            return Err(Error::Dimension("offline datasets have different dimensions".into()));
        }
        if weights.n() != n || weights.m() != m {
            return Err(Error::Dimension("cost weights do not match the data".into()));
        }
        if polytope.w_x.ncols() != n || polytope.w_u.ncols() != m {
            return Err(Error::Dimension("constraint polytope does not match the data".into()));
        }
        let offline_grams: Vec<_> = offline.iter().map(normalized_gram).collect();
        Ok(Self {
            pinned_gain: pinned_gain(&offline_grams),
            offline_grams,
            window: RollingWindow::new(settings.window_len)?,
            last_solution: None,
            last_window: None,
            weights,
            polytope,
            settings,
            pending: None,
            modes: Vec::new(),
        })
    }

    pub fn step_index(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn window(&self) -> &RollingWindow {
        &self.window
    }

    pub fn last_solution(&self) -> Option<&SynthesisSolution> {
        self.last_solution.as_ref()
    }

    pub fn pinned_gain(&self) -> Option<&Mat> {
        self.pinned_gain.as_ref()
    }

    pub fn offline_grams(&self) -> &[ConsistencyGram] {
        &self.offline_grams
    }

    pub fn settings(&self) -> &ControllerSettings {
        &self.settings
    }

    fn n(&self) -> usize {
        self.weights.n()
    }

    /// The window after absorbing the sample that ends at `x`.
    fn advanced_window(&self, x: &Vector) -> Result<RollingWindow> {
        match &self.pending {
            Some((xp, up)) => self.window.push_sample(xp.clone(), up.clone(), x.clone()),
            None => Ok(self.window.clone()),
        }
    }

    /// Whether the window's data admit at least one linear system.
    pub fn window_is_consistent(&self, window: &RollingWindow) -> bool {
        match window.dataset() {
            Some(ds) => relative_residual(&ds) <= self.settings.contamination_tol,
            None => false,
        }
    }

    /// The adaptive problem at `x` for a given window, normalized as solved.
    /// Returns the problem and the state scale `s`.
    pub fn adaptive_problem_at(&self, window: &RollingWindow, x: &Vector) -> Result<(ConicProblem, f64)> {
        let ds = window.dataset().ok_or(Error::Empty("online window"))?;
        let online = normalized_gram(&ds);
        let s = state_scale(x);
        let p = adaptive_problem(
            &self.offline_grams,
            &online,
            &self.weights,
            &(x / s),
            &self.polytope.scaled(s),
            &self.settings.margins,
        )?;
        Ok((p, s))
    }

    /// The robust baseline problem at `x`, normalized as solved.
    pub fn robust_problem_at(&self, x: &Vector) -> Result<(ConicProblem, f64)> {
        let s = state_scale(x);
        let p = robust_problem(
            &self.offline_grams,
            &self.weights,
            &(x / s),
            &self.polytope.scaled(s),
            &self.settings.margins,
        )?;
        Ok((p, s))
    }

    /// The problem the adaptive law would solve first at `x`: the adaptive
    /// problem once the window is full, the robust baseline before.
    pub fn problem_at(&self, x: &Vector) -> Result<(ConicProblem, f64)> {
        let window = self.advanced_window(x)?;
        if window.is_full() {
            self.adaptive_problem_at(&window, x)
        } else {
            self.robust_problem_at(x)
        }
    }

    fn solve_scaled(&self, problem: Result<(ConicProblem, f64)>, stats: &mut Stats) -> Result<SynthesisSolution> {
        let (p, s) = problem?;
        let t = Stopwatch::start();
        let out = solve(&p, &self.settings.solver);
        stats.seconds += t.seconds();
        match out {
            Ok(sol) => {
                stats.iterations += sol.iterations;
                let mut sol = sol.rescaled(s * s);
                if let Some(k) = &self.pinned_gain {
                    sol.k = k.clone();
                }
                Ok(sol)
            }
            Err(e) => {
                stats.failures += 1;
                Err(e)
            }
        }
    }

    /// One step of the adaptive law at state `x`.
    pub fn adaptive_step(&self, x: &Vector) -> Result<(ControlDecision, ControllerState)> {
        self.check_state(x)?;
        let window = self.advanced_window(x)?;
        let k = self.step_index();
        let mut stats = Stats::default();
        let mut next = self.clone();
        next.window = window.clone();

        let forced = self.settings.force_reuse_from.is_some_and(|k0| k >= k0) && self.last_solution.is_some();
        let outcome = if forced {
            None
        } else if !window.is_full() {
            self.solve_scaled(self.robust_problem_at(x), &mut stats).ok().map(|s| (s, Mode::RobustWarmup))
        } else {
            let fresh = if self.window_is_consistent(&window) {
                self.solve_scaled(self.adaptive_problem_at(&window, x), &mut stats).ok()
            } else {
                None
            };
            match fresh {
                Some(sol) => {
                    next.last_window = Some(window.clone());
                    Some((sol, Mode::SolvedFresh))
                }
                None => self.last_window.as_ref().and_then(|prev| {
                    self.solve_scaled(self.adaptive_problem_at(prev, x), &mut stats)
                        .ok()
                        .map(|s| (s, Mode::ResolvedPreviousWindow))
                }),
            }
        };
        next.finish(x, outcome, stats)
    }

    /// One step of the robust-only baseline at state `x`.
    pub fn robust_step(&self, x: &Vector) -> Result<(ControlDecision, ControllerState)> {
        self.check_state(x)?;
        let k = self.step_index();
        let mut stats = Stats::default();
        let mut next = self.clone();
        next.window = self.advanced_window(x)?;
        let forced = self.settings.force_reuse_from.is_some_and(|k0| k >= k0) && self.last_solution.is_some();
        let outcome = if forced {
            None
        } else {
            self.solve_scaled(self.robust_problem_at(x), &mut stats).ok().map(|s| (s, Mode::SolvedFresh))
        };
        next.finish(x, outcome, stats)
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!("state has length {}, expected {}", x.len(), self.n())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("state is not finite".into()));
        }
        Ok(())
    }

    /// Applies a solve outcome (or reuses the last gain) and records the step.
    fn finish(
        mut self,
        x: &Vector,
        outcome: Option<(SynthesisSolution, Mode)>,
        stats: Stats,
    ) -> Result<(ControlDecision, ControllerState)> {
        let (sol, mode) = match outcome {
            Some((sol, mode)) => {
                self.last_solution = Some(sol.clone());
                (sol, mode)
            }
            None => match &self.last_solution {
                Some(prev) => (prev.clone(), Mode::ReusedGain),
                None => {
                    return Err(Error::NoControl(format!(
                        "step {}: every synthesis attempt failed and no earlier gain exists \
                         (offline data not informative for robust stabilization?)",
                        self.step_index()
                    )))
                }
            },
        };
        let u = &sol.k * x;
        let decision = ControlDecision {
            lyapunov: sol.lyapunov_value(x),
            gamma: sol.level(),
            k: sol.k.clone(),
            p: sol.p.clone(),
            mode,
            iterations: stats.iterations,
            solve_seconds: stats.seconds,
            accurate: sol.status == SolverStatus::Optimal,
            u: u.clone(),
        };
        self.pending = Some((x.clone(), u));
        self.modes.push(mode);
        Ok((decision, self))
    }
}

#[derive(Debug, Default)]
struct Stats {
    iterations: usize,
    seconds: f64,
    failures: usize,
}

/// Wall-clock timer; reads zero where no clock is available (wasm).
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

fn state_scale(x: &Vector) -> f64 {
    let s = x.norm();
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Gramian of the dataset scaled to unit norm. Scaling the data leaves the
/// consistent set unchanged but keeps the multipliers, and so the multiplier
/// cap, independent of how small the state has become.
fn normalized_gram(ds: &TrajectoryDataset) -> ConsistencyGram {
    let c = ds.stacked().norm();
    if !(c > 0.0 && c.is_finite()) {
        return consistency_gram(ds);
    }
    let scaled = TrajectoryDataset::new(ds.x_plus() / c, ds.x_minus() / c, ds.u_minus() / c)
        .expect("scaling keeps dimensions");
    consistency_gram(&scaled)
}

/// Least-squares residual of the window relative to the size of `X+`.
fn relative_residual(ds: &TrajectoryDataset) -> f64 {
    let scale = ds.x_plus().norm();
    if scale == 0.0 {
        return 0.0;
    }
    ds.least_squares_residual() / scale
}

/// Smallest eigenvalues of `P - F^T P F` for each system and for random
/// convex combinations of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecreaseReport {
    pub per_system: Vec<f64>,
    pub combinations: Vec<f64>,
}

impl DecreaseReport {
    pub fn all_positive(&self) -> bool {
        self.per_system.iter().chain(&self.combinations).all(|&v| v > 0.0)
    }

    pub fn min(&self) -> f64 {
        self.per_system.iter().chain(&self.combinations).copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn decrease_margin(p: &Mat, k: &Mat, sys: &SystemPair) -> f64 {
    let f = sys.closed_loop(k);
    linalg::min_eigenvalue(&(p - f.transpose() * p * &f))
}

pub fn certify_decrease<R: Rng + ?Sized>(
    sol: &SynthesisSolution,
    systems: &[SystemPair],
    combinations: usize,
    rng: &mut R,
) -> DecreaseReport {
    let per_system = systems.iter().map(|s| decrease_margin(&sol.p, &sol.k, s)).collect();
    let combinations = if systems.len() < 2 {
        Vec::new()
    } else {
        (0..combinations)
            .map(|_| {
                let raw: Vec<f64> = systems.iter().map(|_| rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
                decrease_margin(&sol.p, &sol.k, &SystemPair::mix(systems, &w))
            })
            .collect()
    };
    DecreaseReport { per_system, combinations }
}

/// One row of a per-step trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub x: Vector,
    pub u: Vector,
    pub gamma: f64,
    pub mode: Mode,
    pub lyapunov: f64,
    pub iterations: usize,
    pub solve_seconds: f64,
}

impl TraceRecord {
    pub fn new(k: usize, x: &Vector, d: &ControlDecision) -> Self {
        Self {
            k,
            x: x.clone(),
            u: d.u.clone(),
            gamma: d.gamma,
            mode: d.mode,
            lyapunov: d.lyapunov,
            iterations: d.iterations,
            solve_seconds: d.solve_seconds,
        }
    }
}

/// Writes `k,x1..xn,u1..um,gamma,mode,V,iterations,solve_time_s`. With
/// `timing = false` the time column is written as 0 so that repeated runs
/// produce identical bytes.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], timing: bool, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let (n, m) = records.first().map(|r| (r.x.len(), r.u.len())).unwrap_or((0, 0));
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend(["gamma", "mode", "V", "iterations", "solve_time_s"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.k.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.extend(r.u.iter().map(|v| v.to_string()));
        row.push(r.gamma.to_string());
        row.push(r.mode.as_str().to_string());
        row.push(r.lyapunov.to_string());
        row.push(r.iterations.to_string());
        row.push(if timing { r.solve_seconds.to_string() } else { "0".to_string() });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(records: &[TraceRecord], timing: bool, path: &Path) -> Result<()> {
    write_trace_csv(records, timing, std::fs::File::create(path)?)
}

/// Reads a trace written by [`write_trace_csv`].
pub fn read_trace_csv<R: std::io::Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let header = rd.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('u')).count();
    if header.len() != 1 + n + m + 5 {
        return Err(Error::Parse { line: 1, reason: "unexpected trace header".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse { line, reason: format!("column {} is not a number", j + 1) })
        };
        let mode_col = 1 + n + m + 1;
        let mode = rec
            .get(mode_col)
            .and_then(Mode::parse)
            .ok_or_else(|| Error::Parse { line, reason: "unknown mode".into() })?;
        out.push(TraceRecord {
            k: num(0)? as usize,
            x: Vector::from_iterator(n, (1..=n).map(&num).collect::<Result<Vec<_>>>()?),
            u: Vector::from_iterator(m, (1 + n..1 + n + m).map(&num).collect::<Result<Vec<_>>>()?),
            gamma: num(1 + n + m)?,
            mode,
            lyapunov: num(mode_col + 1)?,
            iterations: num(mode_col + 2)? as usize,
            solve_seconds: num(mode_col + 3)?,
        });
    }
    Ok(out)
}
