//! Simulated time-varying plant, offline vertex experiments, and cost
//! evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{SystemPair, TrajectoryDataset, Triplet};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::lmi::CostWeights;

/// Tolerance used when validating convex weights.
const WEIGHT_TOL: f64 = 1e-12;

/// Piecewise-constant convex weights over the vertices, by step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    breakpoints: Vec<(usize, Vec<f64>)>,
}

impl WeightSchedule {
    pub fn constant(weights: Vec<f64>) -> Self {
        Self { breakpoints: vec![(0, weights)] }
    }

    pub fn new(breakpoints: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        validate_steps(breakpoints.iter().map(|b| b.0))?;
        Ok(Self { breakpoints })
    }

    pub fn weights_at(&self, k: usize) -> &[f64] {
        let i = self.breakpoints.partition_point(|(s, _)| *s <= k);
        &self.breakpoints[i.saturating_sub(1)].1
    }
}

fn validate_steps(steps: impl Iterator<Item = usize>) -> Result<()> {
    let steps: Vec<usize> = steps.collect();
    if steps.first() != Some(&0) {
        return Err(Error::Config("schedule must start at step 0".into()));
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("schedule steps must be strictly increasing".into()));
    }
    Ok(())
}

/// True plant: `(A_k, B_k) = sum_v lambda_v(k) (A^v, B^v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    vertices: Vec<SystemPair>,
    schedule: WeightSchedule,
    state: Vector,
    step: usize,
}

impl PlantModel {
    pub fn new(vertices: Vec<SystemPair>, schedule: WeightSchedule, x0: Vector) -> Result<Self> {
        let first = vertices.first().ok_or(Error::Empty("plant needs at least one vertex"))?;
        if vertices.iter().any(|v| v.n() != first.n() || v.m() != first.m()) {
            return Err(Error::Dimension("vertices have different dimensions".into()));
        }
        if x0.len() != first.n() {
            return Err(Error::Dimension(format!("x0 has length {}, plant has n = {}", x0.len(), first.n())));
        }
        for (_, w) in &schedule.breakpoints {
            check_weights(w, vertices.len())?;
        }
        Ok(Self { vertices, schedule, state: x0, step: 0 })
    }

    pub fn state(&self) -> &Vector {
        &self.state
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn vertices(&self) -> &[SystemPair] {
        &self.vertices
    }

    /// Realized `(A_k, B_k)` at the current step.
    pub fn realization(&self) -> SystemPair {
        SystemPair::mix(&self.vertices, self.schedule.weights_at(self.step))
    }

    /// Applies `u`, advances the step counter, and returns the new state.
    pub fn step_plant(&mut self, u: &Vector) -> Result<Vector> {
        let sys = self.realization();
        if u.len() != sys.m() {
            return Err(Error::Dimension(format!("input has length {}, plant has m = {}", u.len(), sys.m())));
        }
        self.state = sys.step(&self.state, u);
        self.step += 1;
        Ok(self.state.clone())
    }
}

fn check_weights(w: &[f64], nv: usize) -> Result<()> {
    if w.len() != nv {
        return Err(Error::Dimension(format!("{} weights for {nv} vertices", w.len())));
    }
    let sum: f64 = w.iter().sum();
    if w.iter().any(|&l| l < -WEIGHT_TOL) || (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::Config(format!("weights {w:?} are not a convex combination")));
    }
    Ok(())
}

/// Piecewise-constant parameter trace `delta(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub breakpoints: Vec<(usize, f64)>,
}

impl DeltaSchedule {
    pub fn constant(delta: f64) -> Self {
        Self { breakpoints: vec![(0, delta)] }
    }

    pub fn new(breakpoints: Vec<(usize, f64)>) -> Result<Self> {
        validate_steps(breakpoints.iter().map(|b| b.0))?;
        Ok(Self { breakpoints })
    }

    pub fn delta_at(&self, k: usize) -> f64 {
        let i = self.breakpoints.partition_point(|(s, _)| *s <= k);
        self.breakpoints[i.saturating_sub(1)].1
    }
}

/// Angular positioning benchmark:
/// `A(delta) = [[1, 0.1], [0, 1 - 0.1 delta]]`, `B = [[0], [0.1 kappa]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlant {
    pub kappa: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for BenchmarkPlant {
    fn default() -> Self {
        Self { kappa: 7.87, delta_min: 0.1, delta_max: 10.0 }
    }
}

impl BenchmarkPlant {
    pub const SAMPLING_PERIOD: f64 = 0.1;

    pub fn system(&self, delta: f64) -> SystemPair {
        SystemPair {
            a: Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0 - 0.1 * delta]),
            b: Mat::from_row_slice(2, 1, &[0.0, 0.1 * self.kappa]),
        }
    }

    /// The two vertices `delta_min` and `delta_max`.
    pub fn vertices(&self) -> Vec<SystemPair> {
        vec![self.system(self.delta_min), self.system(self.delta_max)]
    }

    /// Convex weights reproducing `A(delta)` from the vertices.
    pub fn weights(&self, delta: f64) -> Result<Vec<f64>> {
        let span = self.delta_max - self.delta_min;
        let w = vec![(self.delta_max - delta) / span, (delta - self.delta_min) / span];
        check_weights(&w, 2).map_err(|_| {
            Error::Config(format!("delta = {delta} is outside [{}, {}]", self.delta_min, self.delta_max))
        })?;
        Ok(w)
    }

    pub fn plant(&self, schedule: &DeltaSchedule, x0: Vector) -> Result<PlantModel> {
        let bps = schedule
            .breakpoints
            .iter()
            .map(|&(k, d)| Ok((k, self.weights(d)?)))
            .collect::<Result<Vec<_>>>()?;
        PlantModel::new(self.vertices(), WeightSchedule::new(bps)?, x0)
    }
}

/// Runs `len` steps of `vertex` from `x0` under inputs uniform on
/// `[u_lo, u_hi]` and returns the contiguous triplets.
pub fn generate_offline_data<R: Rng + ?Sized>(
    vertex: &SystemPair,
    len: usize,
    x0: &Vector,
    u_lo: f64,
    u_hi: f64,
    rng: &mut R,
) -> Result<TrajectoryDataset> {
    if len == 0 {
        return Err(Error::Empty("offline experiment length must be positive"));
    }
    if x0.len() != vertex.n() {
        return Err(Error::Dimension("x0 does not match the vertex".into()));
    }
    let mut x = x0.clone();
    let mut triplets = Vec::with_capacity(len);
    for _ in 0..len {
        let u = Vector::from_fn(vertex.m(), |_, _| rng.random_range(u_lo..=u_hi));
        let next = vertex.step(&x, &u);
        triplets.push(Triplet::new(x, u, next.clone()));
        x = next;
    }
    TrajectoryDataset::from_triplets(&triplets)
}

/// `sum_{k=0}^{T_e} x_k^T Q x_k + u_k^T R u_k`.
pub fn true_cost(trajectory: &[(Vector, Vector)], weights: &CostWeights, horizon: usize) -> Result<f64> {
    if trajectory.len() < horizon + 1 {
        return Err(Error::Dimension(format!(
            "trajectory has {} samples, horizon {horizon} needs {}",
            trajectory.len(),
            horizon + 1
        )));
    }
    Ok(trajectory[..=horizon].iter().map(|(x, u)| weights.stage_cost(x, u)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{consistency_residual, informativity_for_identification, DEFAULT_RANK_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn zero_input_keeps_second_state_zero() {
        let bp = BenchmarkPlant::default();
        let mut p = bp.plant(&DeltaSchedule::constant(0.15), v(&[0.95, 0.0])).unwrap();
        let x = p.step_plant(&v(&[0.0])).unwrap();
        assert!((x - v(&[0.95, 0.0])).norm() < 1e-15);
        assert_eq!(p.step_index(), 1);
    }

    #[test]
    fn delta_ten_zeroes_damping_entry() {
        let a = BenchmarkPlant::default().system(10.0).a;
        assert_eq!(a, Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.0]));
    }

    #[test]
    fn unit_input_from_origin() {
        let bp = BenchmarkPlant::default();
        let mut p = bp.plant(&DeltaSchedule::constant(3.0), v(&[0.0, 0.0])).unwrap();
        let x = p.step_plant(&v(&[1.0])).unwrap();
        assert!((x - v(&[0.0, 0.787])).norm() < 1e-14);
    }

    #[test]
    fn mixed_realization_matches_direct_model() {
        let bp = BenchmarkPlant::default();
        let p = bp.plant(&DeltaSchedule::constant(0.3), v(&[1.0, 0.0])).unwrap();
        let r = p.realization();
        let d = bp.system(0.3);
        assert!((r.a - d.a).norm() < 1e-14 && (r.b - d.b).norm() < 1e-14);
    }

    #[test]
    fn schedule_switches() {
        let s = DeltaSchedule::new(vec![(0, 0.15), (15, 0.3)]).unwrap();
        assert_eq!(s.delta_at(14), 0.15);
        assert_eq!(s.delta_at(15), 0.3);
        assert_eq!(s.delta_at(100), 0.3);
        assert!(DeltaSchedule::new(vec![(0, 0.1), (0, 0.2)]).is_err());
        assert!(DeltaSchedule::new(vec![(3, 0.1)]).is_err());
    }

    #[test]
    fn out_of_range_delta_rejected() {
        let bp = BenchmarkPlant::default();
        assert!(bp.plant(&DeltaSchedule::constant(0.0), v(&[1.0, 0.0])).is_err());
        assert!(bp.plant(&DeltaSchedule::constant(10.5), v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn offline_data_is_consistent_and_deterministic() {
        let bp = BenchmarkPlant::default();
        let vtx = bp.system(0.1);
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let d1 = generate_offline_data(&vtx, 3, &v(&[0.95, 0.0]), -1.0, 1.0, &mut r1).unwrap();
        let d2 = generate_offline_data(&vtx, 3, &v(&[0.95, 0.0]), -1.0, 1.0, &mut r2).unwrap();
        assert_eq!(d1, d2);
        assert!(consistency_residual(&d1, &vtx).unwrap() < 1e-14);
        assert!(informativity_for_identification(&d1, DEFAULT_RANK_TOL).is_identifiable());
        let d3 = generate_offline_data(&bp.system(10.0), 2, &v(&[0.95, 0.0]), -1.0, 1.0, &mut r1).unwrap();
        let rep = informativity_for_identification(&d3, DEFAULT_RANK_TOL);
        assert!(!rep.is_identifiable() && rep.rank <= 2);
    }

    #[test]
    fn zero_length_experiment_rejected() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let vtx = BenchmarkPlant::default().system(0.1);
        assert!(generate_offline_data(&vtx, 0, &v(&[0.95, 0.0]), -1.0, 1.0, &mut r).is_err());
    }

    #[test]
    fn cost_of_single_step() {
        let w = CostWeights::diagonal(&[1.0, 1.0], &[0.01]).unwrap();
        let traj = vec![(v(&[1.0, 0.0]), v(&[1.0]))];
        assert!((true_cost(&traj, &w, 0).unwrap() - 1.01).abs() < 1e-15);
        let zero = vec![(v(&[0.0, 0.0]), v(&[0.0])); 4];
        assert_eq!(true_cost(&zero, &w, 3).unwrap(), 0.0);
        assert!(true_cost(&zero, &w, 4).is_err());
    }
}
