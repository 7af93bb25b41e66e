//! Data-driven LMI synthesis: block construction, problem assembly, the
//! interior-point solver, and SDPA export.

pub mod affine;
pub mod blocks;
pub mod problem;
pub mod sdp;
pub mod sdpa;
pub mod solution;

use serde::{Deserialize, Serialize};

pub use affine::AffineMatrix;
pub use blocks::{
    constraint_blocks, lyapunov_positivity_block, multiplier_cap_blocks, performance_block, pinned_gain, robust_stabilization_blocks, unexcited_equalities, ConstraintPolytope,
    CostWeights, EllipsoidalSet,
};
pub use problem::{assemble, ConicProblem, LinearEquality, LmiBlock, Objective, VariableLayout};
pub use sdp::{solve_sdp, SolverSettings};
pub use sdpa::{export_sdpa, parse_sdpa};
pub use solution::{recover_gain, solve, SolverStatus, SynthesisSolution};

use crate::dataset::ConsistencyGram;
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const DEFAULT_MULTIPLIER_CAP: f64 = 1e3;

/// Margins used to represent strict inequalities and open positivity
/// constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Margins {
    /// Relative margin for strictly positive blocks (ellipsoid, constraints, `H`).
    pub strict: f64,
    /// Relative Lyapunov-decrease margin in the robust stabilization blocks.
    pub decrease: f64,
    /// Floor for `gamma` and the multipliers.
    pub positivity: f64,
    /// Upper bound on each multiplier relative to `gamma` in cost-bound problems.
    pub multiplier_cap: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self {
            strict: problem::DEFAULT_STRICT_MARGIN,
            decrease: problem::DEFAULT_STRICT_MARGIN,
            positivity: problem::DEFAULT_POSITIVITY_FLOOR,
            multiplier_cap: DEFAULT_MULTIPLIER_CAP,
        }
    }
}

fn dims_of(grams: &[ConsistencyGram]) -> Result<(usize, usize)> {
    let g = grams.first().ok_or(Error::Empty("no vertex Gramians"))?;
    if grams.iter().any(|h| h.n != g.n || h.m != g.m) {
        return Err(Error::Dimension("vertex Gramians have different dimensions".into()));
    }
    Ok((g.n, g.m))
}

fn vertex_equalities(layout: &VariableLayout, grams: &[ConsistencyGram]) -> Vec<LinearEquality> {
    grams
        .iter()
        .enumerate()
        .flat_map(|(v, g)| unexcited_equalities(layout, g, &format!("vertex {}", v + 1)))
        .collect()
}

/// Robust stabilization feasibility problem over the vertex datasets.
pub fn robust_feasibility_problem(grams: &[ConsistencyGram], margins: &Margins) -> Result<ConicProblem> {
    let (n, m) = dims_of(grams)?;
    let layout = VariableLayout::new(n, m, false, grams.len(), 0);
    let mut blocks = robust_stabilization_blocks(&layout, grams, margins.decrease)?;
    blocks.push(lyapunov_positivity_block(&layout, margins.strict));
    let equalities = vertex_equalities(&layout, grams);
    let mut p = problem::assemble_with_floor(layout, blocks, Objective::Feasibility, margins.positivity)?;
    p.equalities = equalities;
    Ok(p)
}

/// Cost-bound minimization over one dataset (no vertex blocks), with the
/// state `x` constrained to the level set and optional polytope containment.
pub fn cost_bound_problem(
    gram: &ConsistencyGram,
    weights: &CostWeights,
    x: &Vector,
    poly: &ConstraintPolytope,
    margins: &Margins,
) -> Result<ConicProblem> {
    let layout = VariableLayout::new(gram.n, gram.m, true, 0, 1);
    let mut blocks = performance_block(&layout, gram, weights, 0)?.to_vec();
    blocks.extend(constraint_blocks(&layout, x, poly, margins.strict)?);
    blocks.extend(multiplier_cap_blocks(&layout, margins.multiplier_cap)?);
    let equalities = unexcited_equalities(&layout, gram, "online");
    let mut p = problem::assemble_with_floor(layout, blocks, Objective::MinimizeGamma, margins.positivity)?;
    p.equalities = equalities;
    Ok(p)
}

/// The receding-horizon problem: robust stabilization over every vertex
/// dataset, cost bound over the online dataset, and constraint containment
/// at `x`.
pub fn adaptive_problem(
    vertex_grams: &[ConsistencyGram],
    online: &ConsistencyGram,
    weights: &CostWeights,
    x: &Vector,
    poly: &ConstraintPolytope,
    margins: &Margins,
) -> Result<ConicProblem> {
    let (n, m) = dims_of(vertex_grams)?;
    let layout = VariableLayout::new(n, m, true, vertex_grams.len(), 1);
    let mut blocks = robust_stabilization_blocks(&layout, vertex_grams, margins.decrease)?;
    blocks.extend(performance_block(&layout, online, weights, 0)?);
    blocks.extend(constraint_blocks(&layout, x, poly, margins.strict)?);
    blocks.extend(multiplier_cap_blocks(&layout, margins.multiplier_cap)?);
    let mut equalities = vertex_equalities(&layout, vertex_grams);
    equalities.extend(unexcited_equalities(&layout, online, "online"));
    let mut p = problem::assemble_with_floor(layout, blocks, Objective::MinimizeGamma, margins.positivity)?;
    p.equalities = equalities;
    Ok(p)
}

/// Robust-only baseline: the cost bound is enforced once per vertex dataset.
pub fn robust_problem(
    vertex_grams: &[ConsistencyGram],
    weights: &CostWeights,
    x: &Vector,
    poly: &ConstraintPolytope,
    margins: &Margins,
) -> Result<ConicProblem> {
    let (n, m) = dims_of(vertex_grams)?;
    let nv = vertex_grams.len();
    let layout = VariableLayout::new(n, m, true, nv, nv);
    let mut blocks = robust_stabilization_blocks(&layout, vertex_grams, margins.decrease)?;
    for (v, g) in vertex_grams.iter().enumerate() {
        blocks.extend(performance_block(&layout, g, weights, v)?);
    }
    blocks.extend(constraint_blocks(&layout, x, poly, margins.strict)?);
    blocks.extend(multiplier_cap_blocks(&layout, margins.multiplier_cap)?);
    let equalities = vertex_equalities(&layout, vertex_grams);
    let mut p = problem::assemble_with_floor(layout, blocks, Objective::MinimizeGamma, margins.positivity)?;
    p.equalities = equalities;
    Ok(p)
}
