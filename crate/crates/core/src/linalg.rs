//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Symmetric PSD square root with negative eigenvalues clipped to zero.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Singular values, descending.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values strictly above `rel_tol * sigma_max`.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the right null space of `m`, using the
/// same relative singular-value threshold as [`rank`].
pub fn null_space(m: &Mat, rel_tol: f64) -> Mat {
    let c = m.ncols();
    if c == 0 {
        return Mat::zeros(0, 0);
    }
    // pad to at least c rows so the SVD returns a full V
    let r = m.nrows().max(c);
    let mut padded = Mat::zeros(r, c);
    padded.view_mut((0, 0), (m.nrows(), c)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cols: Vec<Vector> = (0..c)
        .filter(|&i| smax <= 0.0 || svd.singular_values[i] <= rel_tol * smax)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(c, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

/// Stacks matrices vertically. All inputs must share a column count.
pub fn vstack(parts: &[&Mat]) -> Mat {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), (p.nrows(), cols)).copy_from(*p);
        r += p.nrows();
    }
    out
}

pub fn mat_from_rows(rows: &[Vec<f64>]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_sqrt_squares_back() {
        let m = mat_from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let r = psd_sqrt(&m);
        assert!((&r.transpose() * &r - &m).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_clips_negative() {
        let m = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, 4.0]));
        let r = psd_sqrt(&m);
        assert!((r[(0, 0)]).abs() < 1e-15);
        assert!((r[(1, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rank_of_zero_is_zero() {
        assert_eq!(rank(&Mat::zeros(3, 4), 1e-8), 0);
    }

    #[test]
    fn spectral_radius_rotation() {
        let m = mat_from_rows(&[vec![0.0, -0.5], vec![0.5, 0.0]]);
        assert!((spectral_radius(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = mat_from_rows(&[vec![1.0, 1.0, 0.0]]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
        assert!((ns.transpose() * &ns - Mat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn null_space_of_full_rank_is_empty() {
        let m = mat_from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]);
        assert_eq!(null_space(&m, 1e-10).ncols(), 0);
    }
}
