//! The matrix-inequality blocks of the synthesis problem, written as
//! affine functions of `(H, L, gamma, eps)`.

use serde::{Deserialize, Serialize};

use super::affine::AffineMatrix;
use super::problem::{LinearEquality, LmiBlock, VariableLayout};
use crate::dataset::ConsistencyGram;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Quadratic stage-cost weights with their square-root factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Mat,
    pub r: Mat,
    pub q_factor: Mat,
    pub r_factor: Mat,
}

impl CostWeights {
    /// Factors are the symmetric PSD square roots, so `Qh^T Qh = Q`.
    pub fn new(q: Mat, r: Mat) -> Result<Self> {
        if q.nrows() != q.ncols() || r.nrows() != r.ncols() {
            return Err(Error::Dimension("Q and R must be square".into()));
        }
        let q = linalg::symmetrize(&q);
        let r = linalg::symmetrize(&r);
        let qscale = q.norm().max(1.0);
        if linalg::min_eigenvalue(&q) < -1e-12 * qscale {
            return Err(Error::Config("Q must be positive semidefinite".into()));
        }
        if linalg::min_eigenvalue(&r) <= 0.0 {
            return Err(Error::Config("R must be positive definite".into()));
        }
        let q_factor = linalg::psd_sqrt(&q);
        let r_factor = linalg::psd_sqrt(&r);
        Ok(Self { q, r, q_factor, r_factor })
    }

    pub fn diagonal(q: &[f64], r: &[f64]) -> Result<Self> {
        Self::new(
            Mat::from_diagonal(&Vector::from_column_slice(q)),
            Mat::from_diagonal(&Vector::from_column_slice(r)),
        )
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn stage_cost(&self, x: &Vector, u: &Vector) -> f64 {
        (x.transpose() * &self.q * x)[(0, 0)] + (u.transpose() * &self.r * u)[(0, 0)]
    }
}

/// `W_x x <= 1`, `W_u u <= 1`. Either matrix may have zero rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPolytope {
    pub w_x: Mat,
    pub w_u: Mat,
}

impl ConstraintPolytope {
    pub fn new(w_x: Mat, w_u: Mat) -> Result<Self> {
        for (name, w) in [("W_x", &w_x), ("W_u", &w_u)] {
            for i in 0..w.nrows() {
                if w.row(i).iter().all(|&v| v == 0.0) {
                    return Err(Error::Config(format!("{name} row {i} is zero")));
                }
            }
        }
        Ok(Self { w_x, w_u })
    }

    /// Symmetric box `|u_i| <= bound_i` and, optionally, `|x_i| <= bound_i`.
    pub fn boxes(x_bounds: Option<&[f64]>, u_bounds: &[f64], n: usize) -> Result<Self> {
        let w_x = match x_bounds {
            Some(b) => box_rows(b),
            None => Mat::zeros(0, n),
        };
        Self::new(w_x, box_rows(u_bounds))
    }

    pub fn unconstrained(n: usize, m: usize) -> Self {
        Self { w_x: Mat::zeros(0, n), w_u: Mat::zeros(0, m) }
    }

    pub fn state_rows(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn input_rows(&self) -> usize {
        self.w_u.nrows()
    }

    /// Same constraint set expressed in coordinates `x = s * x_tilde`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { w_x: &self.w_x * s, w_u: &self.w_u * s }
    }

    pub fn max_state_violation(&self, x: &Vector) -> f64 {
        (&self.w_x * x).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_input_violation(&self, u: &Vector) -> f64 {
        (&self.w_u * u).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn box_rows(bounds: &[f64]) -> Mat {
    let d = bounds.len();
    let mut w = Mat::zeros(2 * d, d);
    for (i, b) in bounds.iter().enumerate() {
        w[(2 * i, i)] = 1.0 / b;
        w[(2 * i + 1, i)] = -1.0 / b;
    }
    w
}

/// `{x : x^T P x <= gamma}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidalSet {
    pub p: Mat,
    pub gamma: f64,
}

impl EllipsoidalSet {
    pub fn contains(&self, x: &Vector) -> bool {
        (x.transpose() * &self.p * x)[(0, 0)] <= self.gamma
    }

    /// Maps a unit vector `d` onto the boundary: `x = sqrt(gamma) P^{-1/2} d`.
    pub fn boundary_point(&self, d: &Vector) -> Vector {
        let eig = nalgebra::SymmetricEigen::new(self.p.clone());
        let inv_sqrt = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
        let p_inv_sqrt = &eig.eigenvectors * Mat::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        p_inv_sqrt * d * (self.gamma.sqrt() / d.norm())
    }
}

fn zeros(r: usize, c: usize) -> AffineMatrix {
    AffineMatrix::zeros(r, c)
}

fn check_gram(layout: &VariableLayout, g: &ConsistencyGram) -> Result<()> {
    if g.n != layout.n || g.m != layout.m {
        return Err(Error::Dimension(format!(
            "Gramian is for (n={}, m={}), layout is (n={}, m={})",
            g.n, g.m, layout.n, layout.m
        )));
    }
    Ok(())
}

/// Zero-pads the `(2n+m)` Gramian to `dim`.
fn padded(g: &ConsistencyGram, dim: usize) -> Mat {
    let mut out = Mat::zeros(dim, dim);
    let d = g.dim();
    out.view_mut((0, 0), (d, d)).copy_from(&g.gram);
    out
}

/// One block per vertex dataset:
///
/// ```text
/// [ H-μI   0    0   0 ]
/// [ 0     -H  -L^T  0 ]  - eps_v * pad(N_v)  ⪰ 0
/// [ 0     -L    0   L ]
/// [ 0      0   L^T  H ]
/// ```
///
/// `μ = decrease_rel * scale`, where `scale` is the block's largest data norm.
/// The block is non-strict; `μ` makes the Lyapunov decrease strict on every
/// consistent system.
pub fn robust_stabilization_blocks(
    layout: &VariableLayout,
    grams: &[ConsistencyGram],
    decrease_rel: f64,
) -> Result<Vec<LmiBlock>> {
    if grams.is_empty() {
        return Err(Error::Empty("no vertex Gramians"));
    }
    if grams.len() > layout.vertex_multipliers {
        return Err(Error::Dimension(format!(
            "{} vertex Gramians but layout has {} vertex multipliers",
            grams.len(),
            layout.vertex_multipliers
        )));
    }
    let (n, m) = (layout.n, layout.m);
    let h = layout.h();
    let l = layout.l();
    let lt = l.transpose();
    let m_block = AffineMatrix::block(&[
        vec![h.clone(), zeros(n, n), zeros(n, m), zeros(n, n)],
        vec![zeros(n, n), h.neg(), lt.neg(), zeros(n, n)],
        vec![zeros(m, n), l.neg(), zeros(m, m), l.clone()],
        vec![zeros(n, n), zeros(n, n), lt, h],
    ]);
    let dim = 3 * n + m;
    grams
        .iter()
        .enumerate()
        .map(|(v, g)| {
            check_gram(layout, g)?;
            let eps = layout.vertex_multiplier_index(v);
            let mut expr = m_block.sub(&layout.scalar_times(eps, padded(g, dim)));
            let mu = decrease_rel * expr.scale_norm();
            for i in 0..n {
                expr.constant_part_mut()[(i, i)] -= mu;
            }
            let mut b = LmiBlock::new(format!("robust stabilization, vertex {}", v + 1), expr);
            b.decrease_margin = mu;
            Ok(b)
        })
        .collect()
}

/// Linear equalities every solution of a Finsler block over `gram` must
/// satisfy: `a^T H + b^T L = 0` for each unexcited direction `(a; b)`.
///
/// Along such a direction the consistent set is unbounded, so the block can
/// only hold if the closed loop does not depend on it. The block is then
/// singular on a fixed subspace; stating the equalities lets the solver
/// remove that subspace instead of chasing a nonexistent interior.
pub fn unexcited_equalities(layout: &VariableLayout, gram: &ConsistencyGram, label: &str) -> Vec<LinearEquality> {
    let (n, m) = (layout.n, layout.m);
    let mut out = Vec::new();
    for (d, dir) in gram.unexcited.column_iter().enumerate() {
        for col in 0..n {
            let mut coeffs = Vector::zeros(layout.len());
            for i in 0..n {
                coeffs[layout.h_index(i.min(col), i.max(col))] += dir[i];
            }
            for k in 0..m {
                coeffs[layout.l_index(k, col)] += dir[n + k];
            }
            out.push(LinearEquality { label: format!("{label}, direction {}, column {}", d + 1, col + 1), coeffs, rhs: 0.0 });
        }
    }
    out
}

/// The gain forced by the equalities of [`unexcited_equalities`] across all
/// `grams`: `a^T + b^T K = 0` for each direction. `None` unless the
/// directions determine `K` completely and consistently.
pub fn pinned_gain(grams: &[ConsistencyGram]) -> Option<Mat> {
    let (n, m) = grams.first().map(|g| (g.n, g.m))?;
    let dirs: Vec<_> = grams.iter().flat_map(|g| g.unexcited.column_iter()).collect();
    if dirs.is_empty() {
        return None;
    }
    let z = Mat::from_columns(&dirs);
    let az = z.rows(0, n).transpose();
    let bz = z.rows(n, m).transpose();
    if linalg::rank(&bz, crate::dataset::DEFAULT_RANK_TOL) < m {
        return None;
    }
    let k = -bz.clone().pseudo_inverse(0.0).ok()? * &az;
    let resid = (&az + &bz * &k).norm();
    (resid <= 1e-9 * (1.0 + az.norm())).then_some(k)
}

/// `cap * gamma - eps ⪰ 0` for every multiplier. When the consistency class
/// is a single system, the cost bound is approached only as its multiplier
/// grows without bound; the cap keeps the optimum attained. Homogeneous, so
/// it does not depend on the scale of the state.
pub fn multiplier_cap_blocks(layout: &VariableLayout, cap: f64) -> Result<Vec<LmiBlock>> {
    let g = layout
        .gamma_index()
        .ok_or_else(|| Error::Dimension("multiplier cap requires a gamma variable".into()))?;
    let eps = (0..layout.vertex_multipliers)
        .map(|v| layout.vertex_multiplier_index(v))
        .chain((0..layout.performance_multipliers).map(|p| layout.performance_multiplier_index(p)));
    let names = layout.names();
    Ok(eps
        .map(|e| {
            let expr = AffineMatrix::variable(g, Mat::from_element(1, 1, cap))
                .sub(&AffineMatrix::variable(e, Mat::identity(1, 1)));
            LmiBlock::new(format!("{} <= cap * gamma", names[e]), expr)
        })
        .collect())
}

/// `H ⪰ margin * I`.
pub fn lyapunov_positivity_block(layout: &VariableLayout, strict_rel: f64) -> LmiBlock {
    let h = layout.h();
    let margin = strict_rel * h.scale_norm();
    LmiBlock::new("H > 0", h).with_margin(margin)
}

/// `Phi = [Qh H; Rh L]`.
fn phi(layout: &VariableLayout, weights: &CostWeights) -> AffineMatrix {
    let qh = layout.h().left_mul(&weights.q_factor);
    let rl = layout.l().left_mul(&weights.r_factor);
    AffineMatrix::block(&[vec![qh], vec![rl]])
}

/// The cost-bound block `M_Phi - eps * pad(N)` with rows ordered
/// `(I, A^T, B^T, slack, Phi-slack)`, and the companion `[H Phi^T; Phi gamma I]`.
pub fn performance_block(
    layout: &VariableLayout,
    gram: &ConsistencyGram,
    weights: &CostWeights,
    multiplier: usize,
) -> Result<[LmiBlock; 2]> {
    check_gram(layout, gram)?;
    if weights.n() != layout.n || weights.m() != layout.m {
        return Err(Error::Dimension("cost weights do not match the layout".into()));
    }
    if multiplier >= layout.performance_multipliers {
        return Err(Error::Dimension(format!("performance multiplier {multiplier} out of range")));
    }
    let (n, m) = (layout.n, layout.m);
    let p = n + m;
    let h = layout.h();
    let l = layout.l();
    let ph = phi(layout, weights);
    let gi = layout.gamma_identity(p)?;
    let m_phi = AffineMatrix::block(&[
        vec![h.clone(), zeros(n, n), zeros(n, m), zeros(n, n), zeros(n, p)],
        vec![zeros(n, n), zeros(n, n), zeros(n, m), h.clone(), zeros(n, p)],
        vec![zeros(m, n), zeros(m, n), zeros(m, m), l.clone(), zeros(m, p)],
        vec![zeros(n, n), h.clone(), l.transpose(), h.clone(), ph.transpose()],
        vec![zeros(p, n), zeros(p, n), zeros(p, m), ph.clone(), gi.clone()],
    ]);
    let dim = 4 * n + 2 * m;
    let eps = layout.performance_multiplier_index(multiplier);
    let finsler = m_phi.sub(&layout.scalar_times(eps, padded(gram, dim)));
    let schur = AffineMatrix::block(&[vec![h, ph.transpose()], vec![ph, gi]]);
    Ok([
        LmiBlock::new(format!("cost bound, class {}", multiplier + 1), finsler),
        LmiBlock::new(format!("cost factor, class {}", multiplier + 1), schur),
    ])
}

/// Ellipsoid membership of `x` plus containment in the state and input
/// polytopes: `1 + r + l` blocks, all strict.
pub fn constraint_blocks(
    layout: &VariableLayout,
    x: &Vector,
    poly: &ConstraintPolytope,
    strict_rel: f64,
) -> Result<Vec<LmiBlock>> {
    let (n, m) = (layout.n, layout.m);
    if x.len() != n || poly.w_x.ncols() != n || poly.w_u.ncols() != m {
        return Err(Error::Dimension("state or polytope does not match the layout".into()));
    }
    let h = layout.h();
    let l = layout.l();
    let one = AffineMatrix::identity(1);
    let strict = |label: String, expr: AffineMatrix| {
        let margin = strict_rel * expr.scale_norm();
        LmiBlock::new(label, expr).with_margin(margin)
    };
    let xm = AffineMatrix::constant(Mat::from_column_slice(n, 1, x.as_slice()));
    let mut out = vec![strict(
        "state in ellipsoid".into(),
        AffineMatrix::block(&[vec![one.clone(), xm.transpose()], vec![xm, h.clone()]]),
    )];
    for i in 0..poly.state_rows() {
        let row = poly.w_x.rows(i, 1).into_owned();
        let wh = h.left_mul(&row);
        out.push(strict(
            format!("state constraint {}", i + 1),
            AffineMatrix::block(&[vec![one.clone(), wh.clone()], vec![wh.transpose(), h.clone()]]),
        ));
    }
    for j in 0..poly.input_rows() {
        let row = poly.w_u.rows(j, 1).into_owned();
        let wl = l.left_mul(&row);
        out.push(strict(
            format!("input constraint {}", j + 1),
            AffineMatrix::block(&[vec![one.clone(), wl.clone()], vec![wl.transpose(), h.clone()]]),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{consistency_gram, TrajectoryDataset};

    fn scalar_gram() -> ConsistencyGram {
        let ds = TrajectoryDataset::new(Mat::zeros(1, 1), Mat::zeros(1, 1), Mat::zeros(1, 1)).unwrap();
        consistency_gram(&ds)
    }

    #[test]
    fn m_at_identity_has_hand_eigenvalues() {
        // n = m = 1, H = 1, L = 0, eps = 0
        let layout = VariableLayout::new(1, 1, false, 1, 0);
        let blocks = robust_stabilization_blocks(&layout, &[scalar_gram()], 0.0).unwrap();
        let val = blocks[0].expr.eval(&[1.0, 0.0, 0.0]);
        let want = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0, 0.0, 1.0]));
        assert_eq!(val, want);
        let ev = linalg::sym_eigenvalues(&val);
        assert_eq!(ev, vec![-1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn two_sample_vertex_pins_gain_to_data() {
        // T = n: the only gain robust to the whole class is U- X-^{-1}
        let xm = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let um = Mat::from_row_slice(1, 2, &[1.0, -3.0]);
        let xp = Mat::from_row_slice(2, 2, &[0.3, 0.1, -0.2, 0.7]);
        let g = consistency_gram(&TrajectoryDataset::new(xp, xm.clone(), um.clone()).unwrap());
        let k = pinned_gain(&[g]).unwrap();
        let want = &um * xm.try_inverse().unwrap();
        assert!((k - want).norm() < 1e-12);
    }

    #[test]
    fn identifiable_data_pins_nothing() {
        let xm = Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.3, 0.0, 1.0, 0.2]);
        let um = Mat::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
        let g = consistency_gram(&TrajectoryDataset::new(Mat::zeros(2, 3), xm, um).unwrap());
        assert!(pinned_gain(&[g]).is_none());
    }

    #[test]
    fn constraint_block_count() {
        let layout = VariableLayout::new(2, 1, true, 0, 0);
        let poly = ConstraintPolytope::boxes(None, &[1.0], 2).unwrap();
        assert_eq!(poly.w_u, Mat::from_column_slice(2, 1, &[1.0, -1.0]));
        let b = constraint_blocks(&layout, &Vector::zeros(2), &poly, 0.0).unwrap();
        assert_eq!(b.len(), 3);
        let poly = ConstraintPolytope::boxes(Some(&[2.0, 2.0]), &[1.0], 2).unwrap();
        let b = constraint_blocks(&layout, &Vector::zeros(2), &poly, 0.0).unwrap();
        assert_eq!(b.len(), 7);
    }

    #[test]
    fn origin_membership_block_reduces_to_h() {
        let layout = VariableLayout::new(2, 1, false, 0, 0);
        let poly = ConstraintPolytope::unconstrained(2, 1);
        let b = constraint_blocks(&layout, &Vector::zeros(2), &poly, 0.0).unwrap();
        let x = [2.0, 0.5, 3.0, 0.0, 0.0];
        let v = b[0].expr.eval(&x);
        assert_eq!(v[(0, 0)], 1.0);
        assert_eq!(v.view((0, 1), (1, 2)).norm(), 0.0);
        assert_eq!(v.view((1, 1), (2, 2)).into_owned(), layout.extract_h(&x));
    }

    #[test]
    fn zero_row_rejected() {
        let w = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(ConstraintPolytope::new(Mat::zeros(0, 1), w).is_err());
    }

    #[test]
    fn cost_factors_square_to_weights() {
        let q = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let w = CostWeights::new(q.clone(), Mat::from_element(1, 1, 0.01)).unwrap();
        assert!((&w.q_factor.transpose() * &w.q_factor - &q).norm() <= 1e-12 * q.norm());
        assert!((&w.r_factor.transpose() * &w.r_factor - &w.r).norm() <= 1e-12);
    }

    #[test]
    fn indefinite_r_rejected() {
        assert!(CostWeights::diagonal(&[1.0], &[0.0]).is_err());
        assert!(CostWeights::diagonal(&[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_cost_phi_vanishes() {
        let layout = VariableLayout::new(1, 1, true, 0, 1);
        let w = CostWeights::diagonal(&[0.0], &[1e-300]).unwrap();
        let [_, schur] = performance_block(&layout, &scalar_gram(), &w, 0).unwrap();
        // H = 1, L = 5, gamma = 1e-3: the Phi entries are ~0, block is diag(H, gamma I)
        let v = schur.expr.eval(&[1.0, 5.0, 1e-3, 0.0]);
        assert!(linalg::min_eigenvalue(&v) > 0.0);
    }
}
