//! Matrices that depend affinely on the scalar decision variables.

use std::collections::BTreeMap;

use crate::linalg::Mat;

/// `constant + sum_i x_i * terms[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl AffineMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, constant: Mat::zeros(rows, cols), terms: BTreeMap::new() }
    }

    pub fn constant(m: Mat) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), constant: m, terms: BTreeMap::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(Mat::identity(dim, dim))
    }

    /// `x_var * coeff`.
    pub fn variable(var: usize, coeff: Mat) -> Self {
        let mut out = Self::zeros(coeff.nrows(), coeff.ncols());
        out.terms.insert(var, coeff);
        out
    }

    pub fn from_parts(constant: Mat, terms: BTreeMap<usize, Mat>) -> Self {
        Self { rows: constant.nrows(), cols: constant.ncols(), constant, terms }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> &BTreeMap<usize, Mat> {
        &self.terms
    }

    pub fn constant_part_mut(&mut self) -> &mut Mat {
        &mut self.constant
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "affine add: shape mismatch");
        let mut out = self.clone();
        out.constant += &other.constant;
        for (k, v) in &other.terms {
            out.terms.entry(*k).and_modify(|t| *t += v).or_insert_with(|| v.clone());
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            constant: &self.constant * s,
            terms: self.terms.iter().map(|(k, v)| (*k, v * s)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(k, v)| (*k, v.transpose())).collect(),
        }
    }

    /// `m * self`.
    pub fn left_mul(&self, m: &Mat) -> Self {
        assert_eq!(m.ncols(), self.rows, "affine left_mul: shape mismatch");
        Self {
            rows: m.nrows(),
            cols: self.cols,
            constant: m * &self.constant,
            terms: self.terms.iter().map(|(k, v)| (*k, m * v)).collect(),
        }
    }

    /// `self * m`.
    pub fn right_mul(&self, m: &Mat) -> Self {
        assert_eq!(self.cols, m.nrows(), "affine right_mul: shape mismatch");
        Self {
            rows: self.rows,
            cols: m.ncols(),
            constant: &self.constant * m,
            terms: self.terms.iter().map(|(k, v)| (*k, v * m)).collect(),
        }
    }

    /// Assembles a block matrix. Every row of `grid` must have the same number
    /// of entries, and heights/widths must agree along rows/columns.
    pub fn block(grid: &[Vec<AffineMatrix>]) -> Self {
        let heights: Vec<usize> = grid.iter().map(|row| row[0].rows).collect();
        let widths: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
        for (r, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), widths.len(), "affine block: ragged grid");
            for (c, b) in row.iter().enumerate() {
                assert_eq!((b.rows, b.cols), (heights[r], widths[c]), "affine block: entry ({r},{c}) shape");
            }
        }
        let rows: usize = heights.iter().sum();
        let cols: usize = widths.iter().sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for (r, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (c, b) in row.iter().enumerate() {
                out.constant.view_mut((r0, c0), (heights[r], widths[c])).copy_from(&b.constant);
                for (k, v) in &b.terms {
                    let t = out.terms.entry(*k).or_insert_with(|| Mat::zeros(rows, cols));
                    t.view_mut((r0, c0), (heights[r], widths[c])).copy_from(v);
                }
                c0 += widths[c];
            }
            r0 += heights[r];
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (k, v) in &self.terms {
            out += v * x[*k];
        }
        out
    }

    pub fn max_variable(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    /// Largest Frobenius norm over the constant and all coefficient matrices.
    pub fn scale_norm(&self) -> f64 {
        self.terms.values().map(|t| t.norm()).fold(self.constant.norm(), f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (&self.constant - self.constant.transpose()).amax() <= tol
            && self.terms.values().all(|t| (t - t.transpose()).amax() <= tol)
    }
}
