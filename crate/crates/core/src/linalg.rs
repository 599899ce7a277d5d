//! Dense helpers shared by the geometry, assembly and verification code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{QbError, Result};

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Symmetric part `(M + Mᵀ)/2`.
pub(crate) fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Checks `P = Pᵀ ≻ 0` and returns its eigendecomposition.
pub(crate) fn spd_eigen(p: &DMatrix<f64>) -> Result<SymmetricEigen<f64, Dyn>> {
    if !p.is_square() {
        return Err(QbError::Shape(format!(
            "expected a square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(QbError::InvalidArgument("matrix has non-finite entries".into()));
    }
    let scale = p.amax().max(1.0);
    if (p - p.transpose()).amax() > 1e-10 * scale {
        return Err(QbError::InvalidArgument("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(sym(p));
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue <= 0.0 {
        return Err(QbError::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(eig)
}

pub(crate) fn spd_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(p)?;
    Ok(eig_map(&eig, f64::sqrt))
}

pub(crate) fn spd_inv_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(p)?;
    Ok(eig_map(&eig, |l| 1.0 / l.sqrt()))
}

pub(crate) fn spd_cholesky(p: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    spd_eigen(p)?;
    Cholesky::new(sym(p)).ok_or(QbError::NotPositiveDefinite {
        min_eigenvalue: min_eigenvalue(p),
    })
}

fn eig_map(eig: &SymmetricEigen<f64, Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let v = &eig.eigenvectors;
    sym(&(v * DMatrix::from_diagonal(&d) * v.transpose()))
}

/// Row-major nested vectors, the on-disk matrix layout.
pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(QbError::Schema(format!(
            "{what}: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_squares_back() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = spd_sqrt(&p).unwrap();
        assert!((&r * &r - &p).amax() < 1e-12);
        let ri = spd_inv_sqrt(&p).unwrap();
        assert!((&ri * &r - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match spd_sqrt(&p) {
            Err(QbError::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
