//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Diagonal jitter added before the PSD Cholesky test.
pub const PSD_JITTER: f64 = 1e-12;

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0_f64.max(m[(i, j)].abs()).max(m[(j, i)].abs());
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Lower Cholesky factor of `m + jitter·I`, or `None` if `m` is not symmetric
/// positive semidefinite.
pub fn psd_factor(m: &Matrix) -> Option<Matrix> {
    if !is_symmetric(m, 1e-10) || m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let n = m.nrows();
    let jittered = m + Matrix::identity(n, n) * PSD_JITTER;
    nalgebra::Cholesky::new(jittered).map(|c| c.l())
}

pub fn psd_factor_named(m: &Matrix, name: &str) -> Result<Matrix> {
    psd_factor(m).ok_or_else(|| Error::NotPsd { name: name.into() })
}

/// `wᵀ S w`.
pub fn quad_form(w: &Vector, s: &Matrix) -> f64 {
    w.dot(&(s * w))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue_sym(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_detection() {
        let eye = Matrix::identity(3, 3);
        assert!(psd_factor(&eye).is_some());
        let zero = Matrix::zeros(2, 2);
        assert!(psd_factor(&zero).is_some());
        let neg = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_factor(&neg).is_none());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(psd_factor(&asym).is_none());
    }

    #[test]
    fn rows_roundtrip() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let m = matrix_from_rows(&rows).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(matrix_to_rows(&m), rows);
        assert!(matrix_from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
