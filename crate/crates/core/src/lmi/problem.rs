//! Solver-agnostic conic problem: a linear objective over scalar variables
//! and a list of affine symmetric blocks, each required to be PSD.

use serde::{Deserialize, Serialize};

use super::affine::AffineMatrix;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Floor applied to `gamma` and every multiplier (open `> 0` constraints).
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-6;
/// Relative margin for strict inequalities: `margin = rel * block scale`.
pub const DEFAULT_STRICT_MARGIN: f64 = 1e-7;

/// Fixed ordering of the decision variables: upper triangle of `H`
/// row-major, `L` row-major, `gamma`, vertex multipliers, performance
/// multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n: usize,
    pub m: usize,
    pub has_gamma: bool,
    pub vertex_multipliers: usize,
    pub performance_multipliers: usize,
}

impl VariableLayout {
    pub fn new(n: usize, m: usize, has_gamma: bool, vertex_multipliers: usize, performance_multipliers: usize) -> Self {
        Self { n, m, has_gamma, vertex_multipliers, performance_multipliers }
    }

    pub fn h_count(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn len(&self) -> usize {
        self.h_count()
            + self.n * self.m
            + usize::from(self.has_gamma)
            + self.vertex_multipliers
            + self.performance_multipliers
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of `H[i][j]` (symmetric, either order).
    pub fn h_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row i starts after sum_{r<i} (n - r) entries
        i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn l_index(&self, i: usize, j: usize) -> usize {
        self.h_count() + i * self.n + j
    }

    pub fn gamma_index(&self) -> Option<usize> {
        self.has_gamma.then(|| self.h_count() + self.n * self.m)
    }

    fn eps_base(&self) -> usize {
        self.h_count() + self.n * self.m + usize::from(self.has_gamma)
    }

    pub fn vertex_multiplier_index(&self, v: usize) -> usize {
        assert!(v < self.vertex_multipliers);
        self.eps_base() + v
    }

    pub fn performance_multiplier_index(&self, p: usize) -> usize {
        assert!(p < self.performance_multipliers);
        self.eps_base() + self.vertex_multipliers + p
    }

    /// Indices that carry a positivity floor (`gamma` and all multipliers).
    pub fn positive_indices(&self) -> Vec<usize> {
        let start = self.h_count() + self.n * self.m;
        (start..self.len()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n {
            for j in i..self.n {
                out.push(format!("H{}{}", i + 1, j + 1));
            }
        }
        for i in 0..self.m {
            for j in 0..self.n {
                out.push(format!("L{}{}", i + 1, j + 1));
            }
        }
        if self.has_gamma {
            out.push("gamma".into());
        }
        for v in 0..self.vertex_multipliers {
            out.push(format!("eps_v{}", v + 1));
        }
        if self.performance_multipliers == 1 {
            out.push("eps_o".into());
        } else {
            for p in 0..self.performance_multipliers {
                out.push(format!("eps_p{}", p + 1));
            }
        }
        out
    }

    /// `H` as an affine `n x n` matrix.
    pub fn h(&self) -> AffineMatrix {
        let n = self.n;
        let mut out = AffineMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut e = Mat::zeros(n, n);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                out = out.add(&AffineMatrix::variable(self.h_index(i, j), e));
            }
        }
        out
    }

    /// `L` as an affine `m x n` matrix.
    pub fn l(&self) -> AffineMatrix {
        let mut out = AffineMatrix::zeros(self.m, self.n);
        for i in 0..self.m {
            for j in 0..self.n {
                let mut e = Mat::zeros(self.m, self.n);
                e[(i, j)] = 1.0;
                out = out.add(&AffineMatrix::variable(self.l_index(i, j), e));
            }
        }
        out
    }

    /// `gamma * I_dim`.
    pub fn gamma_identity(&self, dim: usize) -> Result<AffineMatrix> {
        let g = self.gamma_index().ok_or_else(|| Error::Dimension("layout has no gamma variable".into()))?;
        Ok(AffineMatrix::variable(g, Mat::identity(dim, dim)))
    }

    /// `eps * coeff` for a multiplier index.
    pub fn scalar_times(&self, var: usize, coeff: Mat) -> AffineMatrix {
        AffineMatrix::variable(var, coeff)
    }

    pub fn extract_h(&self, x: &[f64]) -> Mat {
        Mat::from_fn(self.n, self.n, |i, j| x[self.h_index(i, j)])
    }

    pub fn extract_l(&self, x: &[f64]) -> Mat {
        Mat::from_fn(self.m, self.n, |i, j| x[self.l_index(i, j)])
    }
}

/// One PSD constraint `expr(x) >= margin * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub label: String,
    pub expr: AffineMatrix,
    /// Whole-block strictness margin.
    pub margin: f64,
    /// Lyapunov-decrease margin already folded into `expr` (informational).
    pub decrease_margin: f64,
}

impl LmiBlock {
    pub fn new(label: impl Into<String>, expr: AffineMatrix) -> Self {
        Self { label: label.into(), expr, margin: 0.0, decrease_margin: 0.0 }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.expr.rows()
    }

    /// `expr(x) - margin * I`.
    pub fn eval_shifted(&self, x: &[f64]) -> Mat {
        let d = self.dim();
        self.expr.eval(x) - Mat::identity(d, d) * self.margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinimizeGamma,
    Feasibility,
}

/// `coeffs^T x = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquality {
    pub label: String,
    pub coeffs: Vector,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub layout: VariableLayout,
    pub names: Vec<String>,
    pub objective: Vector,
    pub blocks: Vec<LmiBlock>,
    /// Equalities implied by the blocks (see [`super::blocks::unexcited_equalities`]).
    /// The solver eliminates them before iterating.
    pub equalities: Vec<LinearEquality>,
}

impl ConicProblem {
    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(LmiBlock::dim).collect()
    }

    /// Largest `|coeffs^T x - rhs|` over the equalities.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        let x = Vector::from_column_slice(x);
        self.equalities.iter().map(|e| (e.coeffs.dot(&x) - e.rhs).abs()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of each shifted block at `x`.
    pub fn block_min_eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        self.blocks.iter().map(|b| crate::linalg::min_eigenvalue(&b.eval_shifted(x))).collect()
    }
}

/// Collects blocks into a problem and appends positivity floors for
/// `gamma` and every multiplier present in the layout.
pub fn assemble(layout: VariableLayout, blocks: Vec<LmiBlock>, objective: Objective) -> Result<ConicProblem> {
    assemble_with_floor(layout, blocks, objective, DEFAULT_POSITIVITY_FLOOR)
}

pub fn assemble_with_floor(
    layout: VariableLayout,
    mut blocks: Vec<LmiBlock>,
    objective: Objective,
    floor: f64,
) -> Result<ConicProblem> {
    if blocks.is_empty() {
        return Err(Error::Empty("no LMI blocks to assemble"));
    }
    let nv = layout.len();
    for b in &blocks {
        if b.expr.rows() != b.expr.cols() {
            return Err(Error::Dimension(format!("block '{}' is not square", b.label)));
        }
        if let Some(k) = b.expr.max_variable() {
            if k >= nv {
                return Err(Error::Dimension(format!(
                    "block '{}' references variable {k}, layout has {nv}",
                    b.label
                )));
            }
        }
        if !b.expr.is_symmetric(1e-12 * b.expr.scale_norm().max(1.0)) {
            return Err(Error::Dimension(format!("block '{}' is not symmetric", b.label)));
        }
    }
    let names = layout.names();
    for idx in layout.positive_indices() {
        blocks.push(
            LmiBlock::new(format!("{} > 0", names[idx]), AffineMatrix::variable(idx, Mat::identity(1, 1)))
                .with_margin(floor),
        );
    }
    let mut c = Vector::zeros(nv);
    match objective {
        Objective::MinimizeGamma => {
            let g = layout
                .gamma_index()
                .ok_or_else(|| Error::Dimension("minimize gamma requires a gamma variable".into()))?;
            c[g] = 1.0;
        }
        Objective::Feasibility => {}
    }
    Ok(ConicProblem { layout, names, objective: c, blocks, equalities: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_indices_are_packed_row_major() {
        let l = VariableLayout::new(3, 1, true, 2, 1);
        let idx: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            .iter()
            .map(|&(i, j)| l.h_index(i, j))
            .collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(l.h_index(2, 0), 2);
        assert_eq!(l.l_index(0, 0), 6);
        assert_eq!(l.gamma_index(), Some(9));
        assert_eq!(l.vertex_multiplier_index(1), 11);
        assert_eq!(l.performance_multiplier_index(0), 12);
        assert_eq!(l.len(), 13);
    }

    #[test]
    fn benchmark_layout_has_nine_scalars() {
        let l = VariableLayout::new(2, 1, true, 2, 1);
        assert_eq!(l.len(), 9);
        assert_eq!(l.names(), vec!["H11", "H12", "H22", "L11", "L12", "gamma", "eps_v1", "eps_v2", "eps_o"]);
    }

    #[test]
    fn h_roundtrips_through_eval() {
        let l = VariableLayout::new(2, 1, false, 0, 0);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let h = l.h().eval(&x);
        assert_eq!(h, Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
        assert_eq!(l.extract_h(&x), h);
        assert_eq!(l.l().eval(&x), Mat::from_row_slice(1, 2, &[4.0, 5.0]));
    }

    #[test]
    fn empty_block_list_rejected() {
        let l = VariableLayout::new(1, 1, true, 0, 0);
        assert!(matches!(assemble(l, vec![], Objective::MinimizeGamma), Err(Error::Empty(_))));
    }
}
