use serde::Serialize;

use super::problem::{ConicProblem, VariableLayout};
use super::sdp::{solve_sdp, FailureKind, SdpSolution, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    /// Primal feasible; dual residual or gap within a small factor of tolerance.
    NearOptimal,
}

/// A solved synthesis problem and the recovered feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSolution {
    pub h: Mat,
    pub l: Mat,
    /// `None` for feasibility problems without a cost bound.
    pub gamma: Option<f64>,
    pub eps_vertex: Vec<f64>,
    pub eps_performance: Vec<f64>,
    pub k: Mat,
    pub p: Mat,
    pub status: SolverStatus,
    pub objective: f64,
    pub iterations: usize,
    pub min_block_eigenvalue: f64,
    pub strict_margin: f64,
    pub decrease_margin: f64,
}

impl SynthesisSolution {
    /// `gamma`, or 1 for problems that only certify stability (`P = H^{-1}`).
    pub fn level(&self) -> f64 {
        self.gamma.unwrap_or(1.0)
    }

    pub fn lyapunov_value(&self, x: &crate::linalg::Vector) -> f64 {
        (x.transpose() * &self.p * x)[(0, 0)]
    }

    /// Maps a solution at state `x / s` back to state `x`, with `c = s^2`.
    /// `K` and `P` are invariant.
    pub fn rescaled(mut self, c: f64) -> Self {
        self.h *= c;
        self.l *= c;
        self.gamma = self.gamma.map(|g| g * c);
        self.eps_vertex.iter_mut().for_each(|e| *e *= c);
        self.eps_performance.iter_mut().for_each(|e| *e *= c);
        self.objective *= c;
        self.min_block_eigenvalue *= c;
        self
    }
}

/// `K = L H^{-1}`, `P = gamma H^{-1}`.
pub fn recover_gain(h: &Mat, l: &Mat, gamma: f64) -> Result<(Mat, Mat)> {
    let hs = linalg::symmetrize(h);
    let lmin = linalg::min_eigenvalue(&hs);
    let lmax = linalg::max_eigenvalue(&hs);
    if !(lmin > 0.0) || lmax / lmin > 1e14 {
        return Err(Error::Numerical(format!("H is numerically singular (eigenvalues {lmin:.3e}..{lmax:.3e})")));
    }
    let hinv = nalgebra::Cholesky::new(hs)
        .ok_or_else(|| Error::Numerical("H is not positive definite".into()))?
        .inverse();
    let k = l * &hinv;
    let p = linalg::symmetrize(&(hinv * gamma));
    Ok((k, p))
}

fn from_sdp(layout: &VariableLayout, problem: &ConicProblem, sol: &SdpSolution) -> Result<SynthesisSolution> {
    let x = &sol.x;
    let h = layout.extract_h(x);
    let l = layout.extract_l(x);
    let gamma = layout.gamma_index().map(|g| x[g]);
    let (k, p) = recover_gain(&h, &l, gamma.unwrap_or(1.0))?;
    let eps_vertex = (0..layout.vertex_multipliers).map(|v| x[layout.vertex_multiplier_index(v)]).collect();
    let eps_performance =
        (0..layout.performance_multipliers).map(|v| x[layout.performance_multiplier_index(v)]).collect();
    Ok(SynthesisSolution {
        h,
        l,
        gamma,
        eps_vertex,
        eps_performance,
        k,
        p,
        status: if sol.accurate { SolverStatus::Optimal } else { SolverStatus::NearOptimal },
        objective: sol.primal_objective,
        iterations: sol.iterations,
        min_block_eigenvalue: sol.block_min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        strict_margin: problem.blocks.iter().map(|b| b.margin).fold(0.0, f64::max),
        decrease_margin: problem.blocks.iter().map(|b| b.decrease_margin).fold(0.0, f64::max),
    })
}

/// Solves a synthesis problem and recovers `(K, P)`.
///
/// Infeasibility and numerical breakdown map to [`Error::Infeasible`] and
/// [`Error::Numerical`].
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<SynthesisSolution> {
    match solve_sdp(problem, settings) {
        Ok(sol) => from_sdp(&problem.layout, problem, &sol),
        Err(f) => match f.kind {
            FailureKind::Infeasible => Err(Error::Infeasible(f.message)),
            FailureKind::NumericalFailure => Err(Error::Numerical(f.message)),
        },
    }
}
