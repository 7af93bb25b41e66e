use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerSettings, DEFAULT_CONTAMINATION_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::lmi::{ConstraintPolytope, CostWeights, Margins, SolverSettings};
use crate::plant::{BenchmarkPlant, DeltaSchedule};

/// Everything one experiment needs. Every field has the benchmark default,
/// so an empty TOML file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub offline: OfflineConfig,
    pub run: RunConfig,
    pub weights: WeightsConfig,
    pub constraints: ConstraintsConfig,
    pub sweep: SweepConfig,
    pub solver: SolverSettings,
    pub margins: Margins,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub kappa: f64,
    /// Parameter values of the vertex systems, lowest first.
    pub vertex_deltas: [f64; 2],
    /// `(step, delta)` breakpoints of the online run.
    pub schedule: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineConfig {
    /// Experiment length per vertex, same order as `plant.vertex_deltas`.
    pub lengths: Vec<usize>,
    pub x0: Vec<f64>,
    pub input_range: [f64; 2],
    pub seed: u64,
    /// Offline input draws tried until the data certify robust
    /// stabilization. 1 means the first draw must succeed.
    pub max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub window: usize,
    pub x0: Vec<f64>,
    pub contamination_tol: f64,
    /// Write measured solve times into traces. Off by default so that
    /// repeated runs give identical files.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintsConfig {
    /// Symmetric bounds `|u_i| <= u_max[i]`.
    pub u_max: Vec<f64>,
    /// Symmetric bounds `|x_i| <= x_max[i]`; empty for none.
    pub x_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub runs_per_delta: usize,
    pub seed: u64,
    /// Initial states are drawn uniformly from `||x0||_inf <= x0_bound`.
    pub x0_bound: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            offline: OfflineConfig::default(),
            run: RunConfig::default(),
            weights: WeightsConfig::default(),
            constraints: ConstraintsConfig::default(),
            sweep: SweepConfig::default(),
            solver: SolverSettings::default(),
            margins: Margins::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { kappa: 7.87, vertex_deltas: [0.1, 10.0], schedule: vec![(0, 0.15), (15, 0.30)] }
    }
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self { lengths: vec![3, 2], x0: vec![0.95, 0.0], input_range: [-1.0, 1.0], seed: 1, max_attempts: 200 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            window: 5,
            x0: vec![0.95, 0.0],
            contamination_tol: DEFAULT_CONTAMINATION_TOL,
            record_timing: false,
        }
    }
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { q: vec![vec![1.0, 0.0], vec![0.0, 1.0]], r: vec![vec![0.01]] }
    }
}

impl Default for ConstraintsConfig {
    fn default() -> Self {
        Self { u_max: vec![1.0], x_max: Vec::new() }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { deltas: (1..=10).map(|i| i as f64 / 10.0).collect(), runs_per_delta: 15, seed: 2, x0_bound: 1.0 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let [lo, hi] = self.plant.vertex_deltas;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return bad(format!("vertex deltas must be increasing, got [{lo}, {hi}]"));
        }
        if !(self.plant.kappa.is_finite() && self.plant.kappa != 0.0) {
            return bad("kappa must be finite and nonzero".into());
        }
        self.schedule()?;
        if self.plant.schedule.iter().any(|&(_, d)| d < lo || d > hi) {
            return bad(format!("schedule values must lie in [{lo}, {hi}]"));
        }
        if self.sweep.deltas.iter().any(|&d| d < lo || d > hi) {
            return bad(format!("sweep deltas must lie in [{lo}, {hi}]"));
        }
        if self.offline.lengths.len() != 2 || self.offline.lengths.contains(&0) {
            return bad("offline.lengths needs one positive length per vertex".into());
        }
        if self.offline.x0.len() != 2 || self.run.x0.len() != 2 {
            return bad("initial states must have 2 entries".into());
        }
        let [ulo, uhi] = self.offline.input_range;
        if !(ulo <= uhi) {
            return bad("offline.input_range must be [low, high]".into());
        }
        if self.offline.max_attempts == 0 {
            return bad("offline.max_attempts must be positive".into());
        }
        if self.run.window == 0 {
            return bad("run.window must be at least 1".into());
        }
        if self.sweep.runs_per_delta == 0 || !(self.sweep.x0_bound >= 0.0) {
            return bad("sweep needs runs_per_delta >= 1 and x0_bound >= 0".into());
        }
        if !(self.run.contamination_tol >= 0.0) {
            return bad("run.contamination_tol must be nonnegative".into());
        }
        if self.solver.feas_tol <= 0.0 || self.solver.gap_tol <= 0.0 || self.solver.max_iterations == 0 {
            return bad("solver tolerances and iteration limit must be positive".into());
        }
        self.cost_weights()?;
        self.polytope()?;
        Ok(())
    }

    pub fn benchmark(&self) -> BenchmarkPlant {
        let [lo, hi] = self.plant.vertex_deltas;
        BenchmarkPlant { kappa: self.plant.kappa, delta_min: lo, delta_max: hi }
    }

    pub fn schedule(&self) -> Result<DeltaSchedule> {
        DeltaSchedule::new(self.plant.schedule.clone())
    }

    pub fn cost_weights(&self) -> Result<CostWeights> {
        CostWeights::new(matrix(&self.weights.q, "weights.q")?, matrix(&self.weights.r, "weights.r")?)
    }

    pub fn polytope(&self) -> Result<ConstraintPolytope> {
        if self.constraints.u_max.len() != 1 {
            return Err(Error::Config("constraints.u_max needs one bound per input".into()));
        }
        let x_bounds = if self.constraints.x_max.is_empty() { None } else { Some(&self.constraints.x_max[..]) };
        ConstraintPolytope::boxes(x_bounds, &self.constraints.u_max, 2)
    }

    pub fn controller_settings(&self) -> ControllerSettings {
        ControllerSettings {
            window_len: self.run.window,
            margins: self.margins,
            solver: self.solver,
            contamination_tol: self.run.contamination_tol,
            force_reuse_from: None,
        }
    }

    pub fn run_x0(&self) -> Vector {
        Vector::from_column_slice(&self.run.x0)
    }

    /// Applies the `--margin` override to every strict margin.
    pub fn set_margin(&mut self, margin: f64) {
        self.margins.strict = margin;
        self.margins.decrease = margin;
    }

    /// Applies the `--tol` override to the solver tolerances.
    pub fn set_tolerance(&mut self, tol: f64) {
        self.solver.feas_tol = tol;
        self.solver.gap_tol = tol;
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Config(format!("{what} must be a nonempty rectangular matrix")));
    }
    Ok(linalg::mat_from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_benchmark_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.run.horizon, 50);
        assert_eq!(cfg.plant.schedule, vec![(0, 0.15), (15, 0.30)]);
    }

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = ExperimentConfig::from_toml("[run]\nhorizon = 10\n[plant]\nschedule = [[0, 0.5]]\n").unwrap();
        assert_eq!(cfg.run.horizon, 10);
        assert_eq!(cfg.run.window, 5);
        assert_eq!(cfg.plant.schedule, vec![(0, 0.5)]);
    }

    #[test]
    fn rejects_out_of_range_schedule() {
        let err = ExperimentConfig::from_toml("[plant]\nschedule = [[0, 20.0]]\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExperimentConfig::from_toml("[run]\nhorizn = 3\n").is_err());
    }

    #[test]
    fn rejects_zero_window() {
        assert!(ExperimentConfig::from_toml("[run]\nwindow = 0\n").is_err());
    }
}
