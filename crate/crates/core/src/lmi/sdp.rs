//! Dense primal-dual interior-point method for small block-diagonal SDPs.
//!
//! Solves
//!
//! ```text
//! minimize  c^T x   subject to  S_j(x) = C_j + sum_i x_i A_ij ⪰ 0,  j = 1..J
//! ```
//!
//! together with its dual `maximize -sum_j C_j • Z_j` s.t.
//! `sum_j A_ij • Z_j = c_i`, `Z_j ⪰ 0`. Infeasible start, HKM search
//! direction, Mehrotra predictor-corrector. Sized for problems with tens of
//! variables and blocks of dimension up to a few dozen.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use super::problem::ConicProblem;
use crate::linalg::{self, Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-8, max_iterations: 200, step_fraction: 0.98 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpFailure {
    pub kind: FailureKind,
    pub iterations: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Relative residual of `S(x) - S`.
    pub primal_residual: f64,
    /// Relative residual of `A^T Z - c`.
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// False when the dual residual or gap only reached within
    /// `NEAR_OPTIMAL_FACTOR` of tolerance (primal feasibility is always met).
    pub accurate: bool,
    /// Smallest eigenvalue of each block (margin included) at `x`, unscaled.
    pub block_min_eigenvalues: Vec<f64>,
}

struct Block {
    c: Mat,
    a: Vec<(usize, Mat)>,
}

struct Data {
    blocks: Vec<Block>,
    cost: Vector,
    c_norm: f64,
    total_dim: usize,
}

/// Relative singular-value threshold for dependent equalities and for the
/// fixed kernel of a block.
const PRESOLVE_TOL: f64 = 1e-9;

/// Iterates whose dual residual and gap are within this factor of tolerance
/// are returned, flagged inaccurate, when the iteration stalls.
pub const NEAR_OPTIMAL_FACTOR: f64 = 100.0;

/// Iterations without halving the best merit before giving up.
const STALL_WINDOW: usize = 20;

/// `|A^T Z| / |C • Z|` below which a breakdown counts as infeasibility: no
/// `x` with `|x| < 1 / CERTIFICATE_TOL` (in block-normalized units) is feasible.
const CERTIFICATE_TOL: f64 = 1e-4;

/// Reduced coordinates: `x = offset + basis * y`.
struct Reduction {
    offset: Vector,
    basis: Mat,
}

impl Reduction {
    fn identity(nv: usize) -> Self {
        Self { offset: Vector::zeros(nv), basis: Mat::identity(nv, nv) }
    }

    /// Solves the equality system in least squares and parametrizes its
    /// solution set. `None` if the equalities are inconsistent.
    fn from_equalities(p: &ConicProblem) -> Option<Self> {
        let nv = p.num_variables();
        if p.equalities.is_empty() {
            return Some(Self::identity(nv));
        }
        let mut e = Mat::zeros(p.equalities.len(), nv);
        let mut f = Vector::zeros(p.equalities.len());
        for (r, eq) in p.equalities.iter().enumerate() {
            let scale = eq.coeffs.amax();
            let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            e.row_mut(r).copy_from(&(eq.coeffs.transpose() * s));
            f[r] = eq.rhs * s;
        }
        let basis = linalg::null_space(&e, PRESOLVE_TOL);
        let offset = crate::dataset::pseudo_inverse(&e) * &f;
        let resid = (&e * &offset - &f).amax();
        if resid > PRESOLVE_TOL.sqrt() * (1.0 + f.amax()) {
            return None;
        }
        Some(Self { offset, basis })
    }

    /// Rescales each reduced coordinate so that its coefficient matrices,
    /// measured relative to their block's size, sum to one.
    fn equilibrated(mut self, p: &ConicProblem) -> Self {
        let nr = self.basis.ncols();
        let mut weight = vec![0.0; nr];
        for b in &p.blocks {
            let scale = b.expr.scale_norm().max(b.margin.abs());
            if scale == 0.0 {
                continue;
            }
            for (k, wk) in weight.iter_mut().enumerate() {
                let d = b.dim();
                let mut t = Mat::zeros(d, d);
                for (i, a) in b.expr.terms() {
                    let w = self.basis[(*i, k)];
                    if w != 0.0 {
                        t += a * w;
                    }
                }
                *wk += t.norm() / scale;
            }
        }
        for (k, w) in weight.into_iter().enumerate() {
            if w > 0.0 {
                let mut col = self.basis.column_mut(k);
                col /= w;
            }
        }
        self
    }

    fn lift(&self, y: &Vector) -> Vector {
        &self.offset + &self.basis * y
    }
}

impl Data {
    fn from_problem(p: &ConicProblem, red: &Reduction) -> Self {
        let nr = red.basis.ncols();
        let blocks: Vec<Block> = p
            .blocks
            .iter()
            .filter_map(|b| {
                let d = b.dim();
                let mut constant = b.expr.constant_part() - Mat::identity(d, d) * b.margin;
                let mut a: Vec<Mat> = vec![Mat::zeros(d, d); nr];
                for (i, t) in b.expr.terms() {
                    constant += t * red.offset[*i];
                    for (k, ak) in a.iter_mut().enumerate() {
                        let w = red.basis[(*i, k)];
                        if w != 0.0 {
                            *ak += t * w;
                        }
                    }
                }
                let scale = a.iter().map(|t| t.norm()).fold(constant.norm(), f64::max);
                let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
                let mut c = linalg::symmetrize(&(constant * s));
                let mut a: Vec<(usize, Mat)> = a
                    .into_iter()
                    .enumerate()
                    .map(|(k, t)| (k, linalg::symmetrize(&(t * s))))
                    .filter(|(_, t)| t.amax() > 1e-15)
                    .collect();
                // A non-strict block that vanishes on a fixed subspace for
                // every x is restricted to the complement of that subspace.
                if b.margin == 0.0 {
                    let stacked = linalg::vstack(&std::iter::once(&c).chain(a.iter().map(|(_, t)| t)).collect::<Vec<_>>());
                    let kernel = linalg::null_space(&stacked, PRESOLVE_TOL);
                    if kernel.ncols() == d {
                        return None;
                    }
                    if kernel.ncols() > 0 {
                        let range = linalg::null_space(&kernel.transpose(), PRESOLVE_TOL);
                        c = linalg::symmetrize(&(range.transpose() * &c * &range));
                        for (_, t) in a.iter_mut() {
                            *t = linalg::symmetrize(&(range.transpose() * &*t * &range));
                        }
                    }
                }
                Some(Block { c, a })
            })
            .collect();
        let c_norm = blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt();
        let total_dim = blocks.iter().map(|b| b.c.nrows()).sum();
        Self { blocks, cost: red.basis.transpose() * &p.objective, c_norm, total_dim }
    }

    fn nvars(&self) -> usize {
        self.cost.len()
    }

    /// `C_j + sum_i x_i A_ij`.
    fn slack(&self, x: &Vector) -> Vec<Mat> {
        self.blocks
            .iter()
            .map(|b| {
                let mut s = b.c.clone();
                for (i, a) in &b.a {
                    s += a * x[*i];
                }
                s
            })
            .collect()
    }

    /// `sum_i dx_i A_ij` per block.
    fn apply(&self, dx: &Vector) -> Vec<Mat> {
        self.blocks
            .iter()
            .map(|b| {
                let d = b.c.nrows();
                let mut s = Mat::zeros(d, d);
                for (i, a) in &b.a {
                    s += a * dx[*i];
                }
                s
            })
            .collect()
    }

    /// `(sum_j A_ij • W_j)_i`.
    fn adjoint(&self, w: &[Mat]) -> Vector {
        let mut out = Vector::zeros(self.nvars());
        for (b, wj) in self.blocks.iter().zip(w) {
            for (i, a) in &b.a {
                out[*i] += a.dot(wj);
            }
        }
        out
    }
}

fn inner(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &[Mat]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Largest `alpha` with `x + alpha * dx ⪰ 0`, given `x ≻ 0`.
fn max_step(x: &Mat, dx: &Mat) -> Option<f64> {
    let chol = Cholesky::new(x.clone())?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let w = &linv * dx * linv.transpose();
    let lmin = linalg::min_eigenvalue(&w);
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn step_length(xs: &[Mat], dxs: &[Mat]) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (x, dx) in xs.iter().zip(dxs) {
        alpha = alpha.min(max_step(x, dx)?);
    }
    Some(alpha)
}

fn fail(kind: FailureKind, iterations: usize, message: impl Into<String>) -> SdpFailure {
    SdpFailure { kind, iterations, message: message.into() }
}

struct Direction {
    dx: Vector,
    ds: Vec<Mat>,
    dz: Vec<Mat>,
}

/// An iterate that is primal feasible to tolerance.
struct Candidate {
    x: Vector,
    iterations: usize,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

impl Candidate {
    fn merit(&self, settings: &SolverSettings) -> f64 {
        (self.dinf / settings.feas_tol).max(self.gap / settings.gap_tol)
    }

    fn finish(self, problem: &ConicProblem, red: &Reduction, accurate: bool) -> SdpSolution {
        let full = red.lift(&self.x);
        let block_min_eigenvalues = problem.block_min_eigenvalues(full.as_slice());
        SdpSolution {
            iterations: self.iterations,
            primal_objective: problem.objective.dot(&full),
            dual_objective: self.dobj + problem.objective.dot(&red.offset),
            primal_residual: self.pinf,
            dual_residual: self.dinf,
            relative_gap: self.gap,
            accurate,
            block_min_eigenvalues,
            x: full.iter().copied().collect(),
        }
    }
}

/// Solves the block SDP. Deterministic for identical inputs.
///
/// If the iteration stalls or breaks down after reaching a primal-feasible
/// iterate whose dual residual and gap are within [`NEAR_OPTIMAL_FACTOR`] of
/// tolerance, that iterate is returned with `accurate = false`.
pub fn solve_sdp(problem: &ConicProblem, settings: &SolverSettings) -> Result<SdpSolution, SdpFailure> {
    let Some(red) = Reduction::from_equalities(problem) else {
        return Err(fail(FailureKind::Infeasible, 0, "implied equalities are inconsistent"));
    };
    let red = red.equilibrated(problem);
    let mut best = None;
    match iterate(problem, &red, settings, &mut best) {
        Ok(sol) => Ok(sol),
        Err(f) => match best {
            Some(b) if f.kind == FailureKind::NumericalFailure && b.merit(settings) <= NEAR_OPTIMAL_FACTOR => {
                Ok(b.finish(problem, &red, false))
            }
            _ => Err(f),
        },
    }
}

fn iterate(
    problem: &ConicProblem,
    red: &Reduction,
    settings: &SolverSettings,
    best: &mut Option<Candidate>,
) -> Result<SdpSolution, SdpFailure> {
    let data = Data::from_problem(problem, red);
    let nv = data.nvars();
    if data.blocks.is_empty() {
        return Err(fail(FailureKind::NumericalFailure, 0, "problem has no blocks"));
    }
    for b in &data.blocks {
        if b.a.is_empty() && linalg::min_eigenvalue(&b.c) < -settings.feas_tol {
            return Err(fail(FailureKind::Infeasible, 0, "constant block is not PSD"));
        }
    }
    let cost_norm = data.cost.norm();

    let xi = 10.0_f64.max(data.c_norm.sqrt());
    let mut x = Vector::zeros(nv);
    let mut s: Vec<Mat> = data.blocks.iter().map(|b| Mat::identity(b.c.nrows(), b.c.nrows()) * xi).collect();
    let mut z: Vec<Mat> = s.clone();

    let mut stall = 0usize;
    let mut best_pinf = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut reference_merit = f64::INFINITY;
    let mut best_certificate = f64::INFINITY;
    // A breakdown after the dual iterate came close to a ray is reported as
    // infeasibility rather than a numerical failure.
    let breakdown = |it: usize, best_certificate: f64, message: &str| {
        let kind = if best_certificate < CERTIFICATE_TOL {
            FailureKind::Infeasible
        } else {
            FailureKind::NumericalFailure
        };
        fail(kind, it, message)
    };
    for it in 0..settings.max_iterations {
        let s_x = data.slack(&x);
        let r_s: Vec<Mat> = s_x.iter().zip(&s).map(|(a, b)| a - b).collect();
        let r_d = &data.cost - data.adjoint(&z);
        let mu = inner(&s, &z) / data.total_dim as f64;
        let pobj = data.cost.dot(&x);
        let dobj = -inner(
            &data.blocks.iter().map(|b| b.c.clone()).collect::<Vec<_>>(),
            &z,
        );
        let pinf = norm(&r_s) / (1.0 + data.c_norm);
        let dinf = r_d.norm() / (1.0 + cost_norm);
        let gap = inner(&s, &z).max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        best_pinf = best_pinf.min(pinf);

        let candidate = Candidate { x: x.clone(), iterations: it, dobj, pinf, dinf, gap };
        if pinf <= settings.feas_tol && dinf <= settings.feas_tol && gap <= settings.gap_tol {
            return Ok(candidate.finish(problem, red, true));
        }
        if pinf <= settings.feas_tol {
            let merit = candidate.merit(settings);
            if merit < 0.5 * reference_merit {
                reference_merit = merit;
                last_improvement = it;
            }
            if best.as_ref().is_none_or(|b| merit < b.merit(settings)) {
                *best = Some(candidate);
            }
            if it - last_improvement >= STALL_WINDOW {
                return Err(fail(FailureKind::NumericalFailure, it, "progress stalled"));
            }
        }
        // Z with A^T Z ≈ 0 and C • Z < 0 certifies that no x makes every block PSD.
        let cz = -dobj;
        if cz < 0.0 && pinf > settings.feas_tol {
            let ratio = data.adjoint(&z).norm() / (-cz);
            best_certificate = best_certificate.min(ratio);
            if ratio < settings.feas_tol * 1e-1 {
                return Err(fail(FailureKind::Infeasible, it, "dual ray certifies infeasibility"));
            }
        }
        if !pobj.is_finite() || pobj < -1e12 {
            return Err(fail(FailureKind::NumericalFailure, it, "objective unbounded below"));
        }

        let s_inv: Vec<Mat> = match s.iter().map(|m| Cholesky::new(m.clone()).map(|c| c.inverse())).collect() {
            Some(v) => v,
            None => return Err(breakdown(it, best_certificate, "slack lost positive definiteness")),
        };

        // Schur complement M_ij = sum_blocks tr(A_i Z A_j S^{-1})
        let mut schur = Mat::zeros(nv, nv);
        for ((b, zj), sij) in data.blocks.iter().zip(&z).zip(&s_inv) {
            for (j, aj) in &b.a {
                let g = zj * aj * sij;
                for (i, ai) in &b.a {
                    schur[(*i, *j)] += ai.dot(&g.transpose());
                }
            }
        }
        let schur = linalg::symmetrize(&schur);
        let diag_max = schur.diagonal().amax().max(1e-300);
        let mut reg = 0.0;
        let chol = loop {
            let mut mm = schur.clone();
            for i in 0..nv {
                mm[(i, i)] += reg * diag_max;
                if mm[(i, i)] == 0.0 {
                    mm[(i, i)] = 1e-14 * diag_max;
                }
            }
            if let Some(c) = Cholesky::new(mm) {
                break c;
            }
            reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
            if reg > 1e-4 {
                return Err(breakdown(it, best_certificate, "Schur complement is singular"));
            }
        };

        let direction = |sigma_mu: f64, corr: Option<&[Mat]>| -> Direction {
            // target_j = sigma mu S^{-1} - Z - Z R_S S^{-1} - corr_j
            let targets: Vec<Mat> = (0..data.blocks.len())
                .map(|j| {
                    let mut t = &s_inv[j] * sigma_mu - &z[j] - &z[j] * &r_s[j] * &s_inv[j];
                    if let Some(c) = corr {
                        t -= &c[j];
                    }
                    t
                })
                .collect();
            let rhs = data.adjoint(&targets) - &r_d;
            let mut dx = chol.solve(&rhs);
            // iterative refinement against the unregularized Schur matrix
            for _ in 0..2 {
                let res = &rhs - &schur * &dx;
                dx += chol.solve(&res);
            }
            let adx = data.apply(&dx);
            let ds: Vec<Mat> = r_s.iter().zip(&adx).map(|(r, a)| r + a).collect();
            let dz: Vec<Mat> = (0..data.blocks.len())
                .map(|j| {
                    let mut d = &s_inv[j] * sigma_mu - &z[j] - &z[j] * &ds[j] * &s_inv[j];
                    if let Some(c) = corr {
                        d -= &c[j];
                    }
                    linalg::symmetrize(&d)
                })
                .collect();
            Direction { dx, ds, dz }
        };

        // predictor
        let aff = direction(0.0, None);
        let (ap_max, ad_max) = match (step_length(&s, &aff.ds), step_length(&z, &aff.dz)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(breakdown(it, best_certificate, "Cholesky failed in step length")),
        };
        let ap = ap_max.min(1.0);
        let ad = ad_max.min(1.0);
        let s_aff: Vec<Mat> = s.iter().zip(&aff.ds).map(|(a, b)| a + b * ap).collect();
        let z_aff: Vec<Mat> = z.iter().zip(&aff.dz).map(|(a, b)| a + b * ad).collect();
        let mu_aff = inner(&s_aff, &z_aff) / data.total_dim as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let corr: Vec<Mat> = (0..data.blocks.len()).map(|j| &aff.dz[j] * &aff.ds[j] * &s_inv[j]).collect();
        let dir = direction(sigma * mu, Some(&corr));
        let (ap_max, ad_max) = match (step_length(&s, &dir.ds), step_length(&z, &dir.dz)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(breakdown(it, best_certificate, "Cholesky failed in step length")),
        };
        let ap = (settings.step_fraction * ap_max).min(1.0);
        let ad = (settings.step_fraction * ad_max).min(1.0);

        // The eigenvalue-based step bound can overshoot by rounding on
        // ill-conditioned iterates; shrink until both stay factorizable.
        let (mut ap, mut ad) = (ap, ad);
        let (s_new, z_new) = loop {
            let s_new: Vec<Mat> = s.iter().zip(&dir.ds).map(|(a, d)| linalg::symmetrize(&(a + d * ap))).collect();
            let z_new: Vec<Mat> = z.iter().zip(&dir.dz).map(|(a, d)| linalg::symmetrize(&(a + d * ad))).collect();
            let s_ok = s_new.iter().all(|m| Cholesky::new(m.clone()).is_some());
            let z_ok = z_new.iter().all(|m| Cholesky::new(m.clone()).is_some());
            if s_ok && z_ok {
                break (s_new, z_new);
            }
            if !s_ok {
                ap *= 0.5;
            }
            if !z_ok {
                ad *= 0.5;
            }
            if ap < 1e-14 && ad < 1e-14 {
                return Err(breakdown(it, best_certificate, "iterates left the cone"));
            }
        };
        x += &dir.dx * ap;
        s = s_new;
        z = z_new;

        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
            if stall >= 5 {
                let kind = if best_pinf > settings.feas_tol.sqrt() || best_certificate < CERTIFICATE_TOL {
                    FailureKind::Infeasible
                } else {
                    FailureKind::NumericalFailure
                };
                return Err(fail(kind, it, "step lengths collapsed"));
            }
        } else {
            stall = 0;
        }
    }
    let s_x = data.slack(&x);
    let pinf = norm(&s_x.iter().zip(&s).map(|(a, b)| a - b).collect::<Vec<_>>()) / (1.0 + data.c_norm);
    let kind = if pinf > settings.feas_tol.sqrt() || best_certificate < CERTIFICATE_TOL {
        FailureKind::Infeasible
    } else {
        FailureKind::NumericalFailure
    };
    Err(fail(kind, settings.max_iterations, format!("iteration limit reached (primal residual {pinf:.2e})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::affine::AffineMatrix;
    use crate::lmi::problem::{LmiBlock, VariableLayout};

    fn problem(blocks: Vec<LmiBlock>, c: Vec<f64>) -> ConicProblem {
        let n = c.len();
        ConicProblem {
            layout: VariableLayout::new(0, 0, false, 0, 0),
            names: (0..n).map(|i| format!("x{i}")).collect(),
            objective: Vector::from_vec(c),
            blocks,
            equalities: Vec::new(),
        }
    }

    #[test]
    fn implied_equality_is_eliminated() {
        // x0 - x1 >= 0 and x1 - x0 >= 0 have no interior; with x0 = x1 stated
        // the pair vanishes and min x0 s.t. x1 >= 2 is 2.
        let d = AffineMatrix::variable(0, Mat::identity(1, 1)).sub(&AffineMatrix::variable(1, Mat::identity(1, 1)));
        let lower = AffineMatrix::variable(1, Mat::identity(1, 1)).add(&AffineMatrix::constant(Mat::from_element(1, 1, -2.0)));
        let mut p = problem(
            vec![LmiBlock::new("a", d.clone()), LmiBlock::new("b", d.neg()), LmiBlock::new("c", lower)],
            vec![1.0, 0.0],
        );
        p.equalities.push(crate::lmi::problem::LinearEquality {
            label: "x0 = x1".into(),
            coeffs: Vector::from_vec(vec![1.0, -1.0]),
            rhs: 0.0,
        });
        let sol = solve_sdp(&p, &SolverSettings::default()).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-6, "{:?}", sol.x);
        assert!((sol.x[1] - 2.0).abs() < 1e-6, "{:?}", sol.x);
    }

    #[test]
    fn fixed_kernel_is_dropped() {
        // [[x, 0], [0, 0]] >= 0 is singular for every x; min x s.t. x >= 1
        let mut e = Mat::zeros(2, 2);
        e[(0, 0)] = 1.0;
        let blk = AffineMatrix::variable(0, e).add(&AffineMatrix::constant(Mat::from_diagonal(&Vector::from_vec(vec![-1.0, 0.0]))));
        let p = problem(vec![LmiBlock::new("k", blk)], vec![1.0]);
        let sol = solve_sdp(&p, &SolverSettings::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_lp() {
        // min x s.t. x >= 2
        let b = LmiBlock::new("x>=2", AffineMatrix::variable(0, Mat::identity(1, 1))).with_margin(2.0);
        let sol = solve_sdp(&problem(vec![b], vec![1.0]), &SolverSettings::default()).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-7, "{}", sol.x[0]);
    }

    #[test]
    fn negative_identity_is_infeasible() {
        let b = LmiBlock::new("-I", AffineMatrix::constant(-Mat::identity(2, 2)));
        let b2 = LmiBlock::new("x", AffineMatrix::variable(0, Mat::identity(1, 1)));
        let err = solve_sdp(&problem(vec![b, b2], vec![1.0]), &SolverSettings::default()).unwrap_err();
        assert_eq!(err.kind, FailureKind::Infeasible);
    }

    #[test]
    fn infeasible_with_variables() {
        // x <= -1 and x >= 1
        let a = LmiBlock::new("x>=1", AffineMatrix::variable(0, Mat::identity(1, 1))).with_margin(1.0);
        let b = LmiBlock::new("-x>=1", AffineMatrix::variable(0, -Mat::identity(1, 1))).with_margin(1.0);
        let err = solve_sdp(&problem(vec![a, b], vec![0.0]), &SolverSettings::default()).unwrap_err();
        assert_eq!(err.kind, FailureKind::Infeasible);
    }

    #[test]
    fn max_eigenvalue_minimization() {
        // min t s.t. t I - A ⪰ 0  => t = lambda_max(A)
        let a = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let expr = AffineMatrix::variable(0, Mat::identity(3, 3)).sub(&AffineMatrix::constant(a.clone()));
        let sol = solve_sdp(&problem(vec![LmiBlock::new("tI-A", expr)], vec![1.0]), &SolverSettings::default())
            .unwrap();
        assert!((sol.x[0] - linalg::max_eigenvalue(&a)).abs() < 1e-7);
    }

    #[test]
    fn two_variable_sdp() {
        // min x0 + x1 s.t. [[x0, 1], [1, x1]] ⪰ 0  => x0 = x1 = 1
        let mut e00 = Mat::zeros(2, 2);
        e00[(0, 0)] = 1.0;
        let mut e11 = Mat::zeros(2, 2);
        e11[(1, 1)] = 1.0;
        let expr = AffineMatrix::variable(0, e00)
            .add(&AffineMatrix::variable(1, e11))
            .add(&AffineMatrix::constant(Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])));
        let sol =
            solve_sdp(&problem(vec![LmiBlock::new("b", expr)], vec![1.0, 1.0]), &SolverSettings::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 1.0).abs() < 1e-6, "{:?}", sol.x);
    }
}
