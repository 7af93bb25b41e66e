//! Trajectory datasets, the online rolling window, and the data Gramian
//! that encodes the class of systems consistent with a dataset.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Default relative tolerance for singular-value rank tests.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// A linear system `x+ = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPair {
    pub a: Mat,
    pub b: Mat,
}

impl SystemPair {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!("A is {}x{}, expected square", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Dimension(format!("B has {} rows, A has {}", b.nrows(), a.nrows())));
        }
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn closed_loop(&self, k: &Mat) -> Mat {
        &self.a + &self.b * k
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    /// Convex combination `sum_v w_v (A^v, B^v)`.
    pub fn mix(vertices: &[SystemPair], weights: &[f64]) -> SystemPair {
        let n = vertices[0].n();
        let m = vertices[0].m();
        let mut a = Mat::zeros(n, n);
        let mut b = Mat::zeros(n, m);
        for (v, w) in vertices.iter().zip(weights) {
            a += &v.a * *w;
            b += &v.b * *w;
        }
        SystemPair { a, b }
    }
}

/// One `(x_k, u_k, x_{k+1})` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub x: Vector,
    pub u: Vector,
    pub x_next: Vector,
}

impl Triplet {
    pub fn new(x: Vector, u: Vector, x_next: Vector) -> Self {
        Self { x, u, x_next }
    }
}

/// The `(X+, X-, U-)` matrix triple of one experiment, columns oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    x_plus: Mat,
    x_minus: Mat,
    u_minus: Mat,
}

impl TrajectoryDataset {
    pub fn new(x_plus: Mat, x_minus: Mat, u_minus: Mat) -> Result<Self> {
        let t = x_minus.ncols();
        if t == 0 {
            return Err(Error::Empty("dataset needs at least one sample"));
        }
        if x_plus.ncols() != t || u_minus.ncols() != t {
            return Err(Error::Dimension(format!(
                "column counts differ: X+ {}, X- {}, U- {}",
                x_plus.ncols(),
                t,
                u_minus.ncols()
            )));
        }
        if x_plus.nrows() != x_minus.nrows() {
            return Err(Error::Dimension(format!(
                "X+ has {} rows, X- has {}",
                x_plus.nrows(),
                x_minus.nrows()
            )));
        }
        Ok(Self { x_plus, x_minus, u_minus })
    }

    /// Arranges an ordered list of triplets column by column.
    pub fn from_triplets(triplets: &[Triplet]) -> Result<Self> {
        let first = triplets.first().ok_or(Error::Empty("triplet list"))?;
        let n = first.x.len();
        let m = first.u.len();
        for (index, t) in triplets.iter().enumerate() {
            if t.x.len() != n || t.x_next.len() != n || t.u.len() != m {
                return Err(Error::BadTriplet {
                    index,
                    reason: format!(
                        "expected (x:{n}, u:{m}, x_next:{n}), got ({}, {}, {})",
                        t.x.len(),
                        t.u.len(),
                        t.x_next.len()
                    ),
                });
            }
        }
        let cols = triplets.len();
        let x_minus = Mat::from_fn(n, cols, |i, j| triplets[j].x[i]);
        let u_minus = Mat::from_fn(m, cols, |i, j| triplets[j].u[i]);
        let x_plus = Mat::from_fn(n, cols, |i, j| triplets[j].x_next[i]);
        Self::new(x_plus, x_minus, u_minus)
    }

    pub fn x_plus(&self) -> &Mat {
        &self.x_plus
    }

    pub fn x_minus(&self) -> &Mat {
        &self.x_minus
    }

    pub fn u_minus(&self) -> &Mat {
        &self.u_minus
    }

    pub fn n(&self) -> usize {
        self.x_minus.nrows()
    }

    pub fn m(&self) -> usize {
        self.u_minus.nrows()
    }

    pub fn len(&self) -> usize {
        self.x_minus.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn triplet(&self, j: usize) -> Triplet {
        Triplet {
            x: self.x_minus.column(j).into_owned(),
            u: self.u_minus.column(j).into_owned(),
            x_next: self.x_plus.column(j).into_owned(),
        }
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        (0..self.len()).map(|j| self.triplet(j)).collect()
    }

    /// `S = [X+; -X-; -U-]`, the stack whose left kernel contains `[I A B]`
    /// for every consistent `(A, B)`.
    pub fn stacked(&self) -> Mat {
        linalg::vstack(&[&self.x_plus, &(-&self.x_minus), &(-&self.u_minus)])
    }

    /// `[X-; U-]`.
    pub fn regressor(&self) -> Mat {
        linalg::vstack(&[&self.x_minus, &self.u_minus])
    }

    /// `min_{A,B} ||X+ - [A B][X-; U-]||_F`. Zero iff the consistency class is nonempty.
    pub fn least_squares_residual(&self) -> f64 {
        let w = self.regressor();
        let pinv = pseudo_inverse(&w);
        let fit = &self.x_plus * &pinv * &w;
        (&self.x_plus - fit).norm()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.extend((1..=n).map(|i| format!("xnext{i}")));
        w.write_record(&header)?;
        for j in 0..self.len() {
            let mut rec = vec![j.to_string()];
            rec.extend(self.x_minus.column(j).iter().map(|v| v.to_string()));
            rec.extend(self.u_minus.column(j).iter().map(|v| v.to_string()));
            rec.extend(self.x_plus.column(j).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV dataset format. State and input dimensions are taken from
    /// the header (`x*`, `u*`, `xnext*` columns).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let n = headers.iter().filter(|h| h.starts_with('x') && !h.starts_with("xnext")).count();
        let m = headers.iter().filter(|h| h.starts_with('u')).count();
        let n_next = headers.iter().filter(|h| h.starts_with("xnext")).count();
        if headers.get(0) != Some("k") || n == 0 || n_next != n || headers.len() != 1 + 2 * n + m {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header k,x1..xn,u1..um,xnext1..xnextn, got {:?}", headers),
            });
        }
        let mut triplets = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line, reason: e.to_string() })?;
            if vals.len() != 2 * n + m {
                return Err(Error::Parse { line, reason: format!("expected {} values", 2 * n + m + 1) });
            }
            triplets.push(Triplet::new(
                Vector::from_column_slice(&vals[..n]),
                Vector::from_column_slice(&vals[n..n + m]),
                Vector::from_column_slice(&vals[n + m..]),
            ));
        }
        Self::from_triplets(&triplets)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Moore-Penrose pseudo-inverse via SVD with the default rank tolerance.
pub(crate) fn pseudo_inverse(w: &Mat) -> Mat {
    let svd = w.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Mat::zeros(w.ncols(), w.nrows());
    }
    svd.pseudo_inverse(DEFAULT_RANK_TOL * smax).expect("svd computed with u and v")
}

/// Fixed-capacity buffer of the latest samples, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingWindow {
    capacity: usize,
    samples: VecDeque<Triplet>,
}

impl RollingWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("window capacity must be positive".into()));
        }
        Ok(Self { capacity, samples: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    /// Returns a new window with the sample appended, evicting the oldest
    /// sample once capacity is exceeded.
    pub fn push_sample(&self, x_prev: Vector, u_prev: Vector, x_next: Vector) -> Result<Self> {
        if let Some(first) = self.samples.front() {
            if x_prev.len() != first.x.len() || x_next.len() != first.x.len() || u_prev.len() != first.u.len() {
                return Err(Error::BadTriplet {
                    index: self.samples.len(),
                    reason: "dimensions differ from stored samples".into(),
                });
            }
        } else if x_prev.len() != x_next.len() {
            return Err(Error::BadTriplet { index: 0, reason: "x_prev and x_next lengths differ".into() });
        }
        let mut next = self.clone();
        if next.samples.len() == next.capacity {
            next.samples.pop_front();
        }
        next.samples.push_back(Triplet::new(x_prev, u_prev, x_next));
        Ok(next)
    }

    pub fn samples(&self) -> impl Iterator<Item = &Triplet> {
        self.samples.iter()
    }

    /// The stored samples as a dataset, or `None` while empty.
    pub fn dataset(&self) -> Option<TrajectoryDataset> {
        if self.samples.is_empty() {
            return None;
        }
        let v: Vec<Triplet> = self.samples.iter().cloned().collect();
        TrajectoryDataset::from_triplets(&v).ok()
    }
}

/// `N = -S S^T` for the stacked data `S = [X+; -X-; -U-]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyGram {
    pub gram: Mat,
    pub n: usize,
    pub m: usize,
    pub len: usize,
    pub stack_rank: usize,
    /// Orthonormal columns `(a; b)` with `a^T X- + b^T U- = 0`: input/state
    /// directions the data never excited. Every consistent `(A, B)` can be
    /// moved along them without changing the fit.
    pub unexcited: Mat,
}

impl ConsistencyGram {
    pub fn dim(&self) -> usize {
        2 * self.n + self.m
    }
}

pub fn consistency_gram(ds: &TrajectoryDataset) -> ConsistencyGram {
    let s = ds.stacked();
    let mut gram = -(&s * s.transpose());
    // exact symmetry; the product is symmetric only up to rounding
    gram = linalg::symmetrize(&gram);
    ConsistencyGram {
        gram,
        n: ds.n(),
        m: ds.m(),
        len: ds.len(),
        stack_rank: linalg::rank(&s, DEFAULT_RANK_TOL),
        unexcited: linalg::null_space(&ds.regressor().transpose(), DEFAULT_RANK_TOL),
    }
}

/// `|| [I A B] [X+; -X-; -U-] ||_F`.
pub fn consistency_residual(ds: &TrajectoryDataset, sys: &SystemPair) -> Result<f64> {
    if sys.n() != ds.n() || sys.m() != ds.m() {
        return Err(Error::Dimension(format!(
            "system is (n={}, m={}), dataset is (n={}, m={})",
            sys.n(),
            sys.m(),
            ds.n(),
            ds.m()
        )));
    }
    let r = ds.x_plus() - &sys.a * ds.x_minus() - &sys.b * ds.u_minus();
    Ok(r.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identifiability {
    Identifiable,
    NotIdentifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub verdict: Identifiability,
    pub rank: usize,
    pub required: usize,
    pub singular_values: Vec<f64>,
}

impl IdentifiabilityReport {
    pub fn is_identifiable(&self) -> bool {
        self.verdict == Identifiability::Identifiable
    }
}

/// Rank test of `[X-; U-]` against `n + m`.
pub fn informativity_for_identification(ds: &TrajectoryDataset, rank_tol: f64) -> IdentifiabilityReport {
    let w = ds.regressor();
    let singular_values = linalg::singular_values(&w);
    let rank = match singular_values.first() {
        Some(&smax) if smax > 0.0 => singular_values.iter().filter(|&&s| s > rank_tol * smax).count(),
        _ => 0,
    };
    let required = ds.n() + ds.m();
    IdentifiabilityReport {
        verdict: if rank == required { Identifiability::Identifiable } else { Identifiability::NotIdentifiable },
        rank,
        required,
        singular_values,
    }
}

/// Least-squares `(A, B)` with `[A B][X-; U-] = X+`. Requires persistent excitation.
pub fn identify_system(ds: &TrajectoryDataset) -> Result<SystemPair> {
    let report = informativity_for_identification(ds, DEFAULT_RANK_TOL);
    if !report.is_identifiable() {
        return Err(Error::NotIdentifiable { rank: report.rank, required: report.required });
    }
    let w = ds.regressor();
    // [A B] = X+ W^T (W W^T)^{-1}; solve the normal equations through Cholesky-free LU
    let gram = &w * w.transpose();
    let rhs = (ds.x_plus() * w.transpose()).transpose();
    let sol = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular regressor Gramian".into()))?
        .transpose();
    let n = ds.n();
    let a = sol.columns(0, n).into_owned();
    let b = sol.columns(n, ds.m()).into_owned();
    SystemPair::new(a, b)
}

/// JSON manifest listing one CSV file per vertex experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub m: usize,
    pub vertices: Vec<PathBuf>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads every listed dataset; relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Vec<TrajectoryDataset>> {
        if self.vertices.is_empty() {
            return Err(Error::Empty("manifest lists no vertex datasets"));
        }
        self.vertices
            .iter()
            .map(|p| {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                let ds = TrajectoryDataset::read_csv_file(&full)?;
                if ds.n() != self.n || ds.m() != self.m {
                    return Err(Error::Dimension(format!(
                        "{}: dataset is (n={}, m={}), manifest says (n={}, m={})",
                        full.display(),
                        ds.n(),
                        ds.m(),
                        self.n,
                        self.m
                    )));
                }
                Ok(ds)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_from_rows;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn single_triplet_arranges_columns() {
        let ds = TrajectoryDataset::from_triplets(&[Triplet::new(v(&[0.95, 0.0]), v(&[0.3]), v(&[0.95, 0.2361]))])
            .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.x_minus().column(0).as_slice(), &[0.95, 0.0]);
        assert_eq!(ds.u_minus()[(0, 0)], 0.3);
        assert_eq!(ds.x_plus().column(0).as_slice(), &[0.95, 0.2361]);
    }

    #[test]
    fn empty_triplets_rejected() {
        assert!(matches!(TrajectoryDataset::from_triplets(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn mismatched_triplet_reports_index() {
        let ts = [
            Triplet::new(v(&[1.0, 0.0]), v(&[0.0]), v(&[1.0, 0.0])),
            Triplet::new(v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 0.0])),
        ];
        match TrajectoryDataset::from_triplets(&ts) {
            Err(Error::BadTriplet { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_fills_then_evicts() {
        let mut w = RollingWindow::new(5).unwrap();
        for i in 0..4 {
            w = w.push_sample(v(&[i as f64]), v(&[0.0]), v(&[i as f64 + 1.0])).unwrap();
        }
        assert_eq!(w.len(), 4);
        w = w.push_sample(v(&[4.0]), v(&[0.0]), v(&[5.0])).unwrap();
        assert_eq!(w.len(), 5);
        let w2 = w.push_sample(v(&[5.0]), v(&[0.0]), v(&[6.0])).unwrap();
        assert_eq!(w2.len(), 5);
        assert_eq!(w2.samples().next().unwrap().x[0], 1.0);
        // the original value is untouched
        assert_eq!(w.samples().next().unwrap().x[0], 0.0);
    }

    #[test]
    fn window_after_seven_pushes_holds_three_to_seven() {
        let mut w = RollingWindow::new(5).unwrap();
        for i in 1..=7 {
            w = w.push_sample(v(&[i as f64]), v(&[0.0]), v(&[0.0])).unwrap();
        }
        let xs: Vec<f64> = w.samples().map(|t| t.x[0]).collect();
        assert_eq!(xs, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn window_rejects_dimension_change() {
        let w = RollingWindow::new(3).unwrap().push_sample(v(&[1.0]), v(&[0.0]), v(&[1.0])).unwrap();
        assert!(w.push_sample(v(&[1.0, 2.0]), v(&[0.0]), v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn gram_of_zero_dataset_is_zero() {
        let ds = TrajectoryDataset::new(Mat::zeros(2, 3), Mat::zeros(2, 3), Mat::zeros(1, 3)).unwrap();
        let g = consistency_gram(&ds);
        assert_eq!(g.gram, Mat::zeros(5, 5));
        assert_eq!(g.stack_rank, 0);
    }

    #[test]
    fn gram_of_unit_successor() {
        let ds = TrajectoryDataset::new(mat_from_rows(&[vec![1.0], vec![0.0]]), Mat::zeros(2, 1), Mat::zeros(1, 1))
            .unwrap();
        let g = consistency_gram(&ds);
        let mut expected = Mat::zeros(5, 5);
        expected[(0, 0)] = -1.0;
        assert_eq!(g.gram, expected);
    }

    #[test]
    fn residual_against_wrong_system() {
        // data from A = I, B = 0; tested against A = 2I gives ||X-||_F
        let xm = mat_from_rows(&[vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 3.0]]);
        let ds = TrajectoryDataset::new(xm.clone(), xm.clone(), Mat::zeros(1, 3)).unwrap();
        let truth = SystemPair::new(Mat::identity(2, 2), Mat::zeros(2, 1)).unwrap();
        assert!(consistency_residual(&ds, &truth).unwrap() < 1e-14);
        let wrong = SystemPair::new(Mat::identity(2, 2) * 2.0, Mat::zeros(2, 1)).unwrap();
        let r = consistency_residual(&ds, &wrong).unwrap();
        assert!((r - xm.norm()).abs() < 1e-12);
    }

    #[test]
    fn identification_needs_rank() {
        let ds = TrajectoryDataset::new(Mat::zeros(2, 2), Mat::identity(2, 2), Mat::zeros(1, 2)).unwrap();
        let rep = informativity_for_identification(&ds, DEFAULT_RANK_TOL);
        assert_eq!(rep.verdict, Identifiability::NotIdentifiable);
        assert!(matches!(identify_system(&ds), Err(Error::NotIdentifiable { .. })));
    }

    #[test]
    fn zero_data_not_identifiable() {
        let ds = TrajectoryDataset::new(Mat::zeros(2, 4), Mat::zeros(2, 4), Mat::zeros(1, 4)).unwrap();
        let rep = informativity_for_identification(&ds, DEFAULT_RANK_TOL);
        assert_eq!(rep.rank, 0);
        assert!(!rep.is_identifiable());
    }

    #[test]
    fn csv_round_trip() {
        let ds = TrajectoryDataset::from_triplets(&[
            Triplet::new(v(&[0.95, 0.0]), v(&[0.25]), v(&[0.95, 0.19675])),
            Triplet::new(v(&[0.95, 0.19675]), v(&[-0.5]), v(&[0.969675, -0.2])),
        ])
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,x1,x2,u1,xnext1,xnext2\n"));
        let back = TrajectoryDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_bad_header_rejected() {
        let text = "k,a,b\n0,1,2\n";
        assert!(matches!(TrajectoryDataset::read_csv(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_bad_value_reports_line() {
        let text = "k,x1,u1,xnext1\n0,1,2,3\n1,1,zz,3\n";
        assert!(matches!(TrajectoryDataset::read_csv(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }
}
