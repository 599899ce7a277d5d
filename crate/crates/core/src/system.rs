//! Quadratic-bilinear systems
//!
//! ```text
//! ẋ = A x + H (x ⊗ x) + Σⱼ Dⱼ x uⱼ + B u
//! ```
//!
//! `H` is `n × n²` in Kronecker order: column `i·n + j` (0-based) multiplies
//! `xᵢ xⱼ`, so the `i`-th `n × n` column block `Hᵢ` satisfies
//! `H (x ⊗ x) = Σᵢ xᵢ Hᵢ x`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};

/// Relative threshold under which `H` counts as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct QbSystem {
    a: DMatrix<f64>,
    h: DMatrix<f64>,
    b: DMatrix<f64>,
    d: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dims_ok: bool,
    pub h_symmetric: bool,
    pub max_symmetry_defect: f64,
    pub a_hurwitz: bool,
    pub spectral_abscissa: f64,
}

impl QbSystem {
    /// Builds a system, checking every dimension against `n = A.nrows()` and
    /// `m = B.ncols()`. Pass a `n × 0` matrix for `B` when there is no input.
    pub fn new(
        a: DMatrix<f64>,
        h: DMatrix<f64>,
        b: DMatrix<f64>,
        d: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(QbError::Shape(format!(
                "A must be square with n >= 1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if h.nrows() != n || h.ncols() != n * n {
            return Err(QbError::Shape(format!(
                "H must be {n}x{}, got {}x{}",
                n * n,
                h.nrows(),
                h.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(QbError::Shape(format!("B must have {n} rows, got {}", b.nrows())));
        }
        let m = b.ncols();
        if m > n {
            return Err(QbError::Shape(format!("input dimension m = {m} exceeds n = {n}")));
        }
        if d.len() != m {
            return Err(QbError::Shape(format!("expected {m} D matrices, got {}", d.len())));
        }
        if let Some(j) = d.iter().position(|dj| dj.shape() != (n, n)) {
            return Err(QbError::Shape(format!("D[{j}] must be {n}x{n}")));
        }
        let all = a.iter().chain(h.iter()).chain(b.iter()).chain(d.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(QbError::InvalidArgument("system has non-finite coefficients".into()));
        }
        Ok(Self { a, h, b, d })
    }

    /// An autonomous quadratic system (`m = 0`).
    pub fn quadratic(a: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, h, DMatrix::zeros(n, 0), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_quadratic(&self) -> bool {
        self.m() == 0
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn d(&self) -> &[DMatrix<f64>] {
        &self.d
    }

    /// The `i`-th `n × n` block `Hᵢ`.
    pub fn h_block(&self, i: usize) -> DMatrix<f64> {
        let n = self.n();
        self.h.columns(i * n, n).into_owned()
    }

    /// Drops inputs, keeping `A` and `H`.
    pub fn autonomous(&self) -> Self {
        Self {
            a: self.a.clone(),
            h: self.h.clone(),
            b: DMatrix::zeros(self.n(), 0),
            d: Vec::new(),
        }
    }

    /// Same system with `A` replaced.
    pub fn with_a(&self, a: DMatrix<f64>) -> Result<Self> {
        Self::new(a, self.h.clone(), self.b.clone(), self.d.clone())
    }

    /// `H (x ⊗ y)`.
    pub fn quad(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let mut out = DVector::zeros(n);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                out.gemv(xi, &self.h.columns(i * n, n), y, 1.0);
            }
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let n = self.n();
        let dims_ok = self.a.shape() == (n, n)
            && self.h.shape() == (n, n * n)
            && self.b.nrows() == n
            && self.d.len() == self.m()
            && self.d.iter().all(|d| d.shape() == (n, n));
        let defect = symmetry_defect(&self.h, n);
        let spectral_abscissa = spectral_abscissa(&self.a);
        ValidationReport {
            dims_ok,
            h_symmetric: defect <= SYMMETRY_TOL * self.h.amax().max(1.0),
            max_symmetry_defect: defect,
            a_hurwitz: spectral_abscissa < 0.0,
            spectral_abscissa,
        }
    }

    pub fn eval_dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, m) = (self.n(), self.m());
        if x.len() != n || u.len() != m {
            return Err(QbError::Shape(format!(
                "expected x of length {n} and u of length {m}, got {} and {}",
                x.len(),
                u.len()
            )));
        }
        let mut f = &self.a * x + self.quad(x, x);
        for (dj, &uj) in self.d.iter().zip(u.iter()) {
            if uj != 0.0 {
                f.gemv(uj, dj, x, 1.0);
            }
        }
        if m > 0 {
            f.gemv(1.0, &self.b, u, 1.0);
        }
        Ok(f)
    }

    /// Autonomous vector field `f(x)` with `u = 0`.
    pub fn vector_field(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        self.vector_field_into(x, &mut out);
        out
    }

    /// [`QbSystem::vector_field`] into a caller-owned buffer.
    pub fn vector_field_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.n();
        out.gemv(1.0, &self.a, x, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                out.gemv(xi, &self.h.columns(i * n, n), x, 1.0);
            }
        }
    }

    /// Moves the equilibrium `x_e` to the origin: `A' = A + 2H(I ⊗ x_e)` for
    /// symmetric `H`. Default tolerance is `1e-8·(1 + ‖x_e‖)`.
    pub fn shift_equilibrium(&self, x_e: &DVector<f64>, tol: Option<f64>) -> Result<Self> {
        if !self.is_quadratic() {
            return Err(QbError::InvalidArgument(
                "equilibrium shift is defined for quadratic systems (m = 0)".into(),
            ));
        }
        let n = self.n();
        if x_e.len() != n {
            return Err(QbError::Shape(format!("x_e must have length {n}")));
        }
        let tol = tol.unwrap_or(1e-8 * (1.0 + x_e.norm()));
        let residual = self.vector_field(x_e).norm();
        if residual > tol {
            return Err(QbError::NotEquilibrium { residual, tol });
        }
        // Column c of the Jacobian of H(x⊗x) at x_e: H(e_c ⊗ x_e) + H(x_e ⊗ e_c).
        let mut a = self.a.clone();
        for c in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == c { 1.0 } else { 0.0 });
            let col = self.quad(&e, x_e) + self.quad(x_e, &e);
            let mut ac = a.column_mut(c);
            ac += col;
        }
        Self::quadratic(a, self.h.clone())
    }

    /// Closed loop under `u = Kx`: `A + BK` and block `i` of `H` gaining
    /// `Σⱼ K[j,i] Dⱼ`, then symmetrized.
    pub fn close_loop(&self, k: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = (self.n(), self.m());
        if m == 0 {
            return Err(QbError::InvalidArgument("closing the loop requires m >= 1".into()));
        }
        if k.shape() != (m, n) {
            return Err(QbError::Shape(format!(
                "K must be {m}x{n}, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        let a = &self.a + &self.b * k;
        let mut h = self.h.clone();
        for i in 0..n {
            let mut block = h.columns_mut(i * n, n);
            for (j, dj) in self.d.iter().enumerate() {
                block += dj * k[(j, i)];
            }
        }
        Self::quadratic(a, symmetrize_quadratic(&h, n)?)
    }

    /// `k` decoupled copies on the block diagonal.
    pub fn stack(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(QbError::InvalidArgument("stack factor must be positive".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let (n, m) = (self.n(), self.m());
        let big = k * n;
        let mut a = DMatrix::zeros(big, big);
        let mut b = DMatrix::zeros(big, k * m);
        let mut h = DMatrix::zeros(big, big * big);
        let mut d = vec![DMatrix::zeros(big, big); k * m];
        for r in 0..k {
            let o = r * n;
            a.view_mut((o, o), (n, n)).copy_from(&self.a);
            b.view_mut((o, r * m), (n, m)).copy_from(&self.b);
            for i in 0..n {
                for j in 0..n {
                    let src = self.h.column(i * n + j);
                    if src.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let col = (o + i) * big + (o + j);
                    h.view_mut((o, col), (n, 1)).copy_from(&src);
                }
            }
            for (j, dj) in self.d.iter().enumerate() {
                d[r * m + j].view_mut((o, o), (n, n)).copy_from(dj);
            }
        }
        Self::new(a, h, b, d)
    }
}

/// Averages column `(i,j)` with column `(j,i)`; leaves `H(x⊗x)` unchanged.
pub fn symmetrize_quadratic(h_raw: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if h_raw.nrows() != n || h_raw.ncols() != n * n {
        return Err(QbError::Shape(format!(
            "H must be {n}x{}, got {}x{}",
            n * n,
            h_raw.nrows(),
            h_raw.ncols()
        )));
    }
    let mut h = h_raw.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let (cij, cji) = (i * n + j, j * n + i);
            for r in 0..n {
                let v = 0.5 * (h_raw[(r, cij)] + h_raw[(r, cji)]);
                h[(r, cij)] = v;
                h[(r, cji)] = v;
            }
        }
    }
    Ok(h)
}

/// `max |H(eᵢ⊗eⱼ) − H(eⱼ⊗eᵢ)|`, which bounds the defect on any probe pair by
/// bilinearity.
pub fn symmetry_defect(h: &DMatrix<f64>, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for r in 0..n {
                worst = worst.max((h[(r, i * n + j)] - h[(r, j * n + i)]).abs());
            }
        }
    }
    worst
}

pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, h: f64) -> QbSystem {
        QbSystem::quadratic(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, h)).unwrap()
    }

    #[test]
    fn symmetrize_splits_cross_term() {
        let raw = DMatrix::from_row_slice(2, 4, &[0.0, 13.8, 0.0, 0.0, 0.0, 5.5, 0.0, 0.0]);
        let h = symmetrize_quadratic(&raw, 2).unwrap();
        let want = DMatrix::from_row_slice(2, 4, &[0.0, 6.9, 6.9, 0.0, 0.0, 2.75, 2.75, 0.0]);
        assert!((h - want).amax() < 1e-15);
        assert_eq!(symmetrize_quadratic(&DMatrix::from_element(1, 1, 3.0), 1).unwrap()[(0, 0)], 3.0);
        assert!(symmetrize_quadratic(&raw, 3).is_err());
    }

    #[test]
    fn unsymmetrized_h_is_flagged() {
        let raw = DMatrix::from_row_slice(2, 4, &[0.0, 13.8, 0.0, 0.0, 0.0, 5.5, 0.0, 0.0]);
        let sys = QbSystem::quadratic(DMatrix::identity(2, 2) * -1.0, raw).unwrap();
        let rep = sys.validate();
        assert!(!rep.h_symmetric);
        assert!((rep.max_symmetry_defect - 13.8).abs() < 1e-12);
    }

    #[test]
    fn identity_is_not_hurwitz() {
        let sys = QbSystem::quadratic(DMatrix::identity(3, 3), DMatrix::zeros(3, 9)).unwrap();
        let rep = sys.validate();
        assert!(!rep.a_hurwitz);
        assert!((rep.spectral_abscissa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_dynamics_and_shift() {
        let sys = scalar(-1.0, 1.0);
        let f = sys.eval_dynamics(&DVector::from_element(1, 1.0), &DVector::zeros(0)).unwrap();
        assert_eq!(f[0], 0.0);
        let shifted = sys.shift_equilibrium(&DVector::from_element(1, 1.0), None).unwrap();
        assert_eq!(shifted.a()[(0, 0)], 1.0);
        assert_eq!(shifted.h()[(0, 0)], 1.0);
        let unchanged = sys.shift_equilibrium(&DVector::zeros(1), None).unwrap();
        assert_eq!(unchanged, sys);
        match sys.shift_equilibrium(&DVector::from_element(1, 0.5), None) {
            Err(QbError::NotEquilibrium { residual, .. }) => assert!((residual - 0.25).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scalar_close_loop() {
        let (a, h, b, d, k) = (-1.0, 0.5, 2.0, 3.0, -0.25);
        let m1 = |v: f64| DMatrix::from_element(1, 1, v);
        let sys = QbSystem::new(m1(a), m1(h), m1(b), vec![m1(d)]).unwrap();
        let cl = sys.close_loop(&m1(k)).unwrap();
        assert_eq!(cl.a()[(0, 0)], a + b * k);
        assert_eq!(cl.h()[(0, 0)], h + d * k);
        assert!(cl.is_quadratic());
        assert!(sys.autonomous().close_loop(&m1(k)).is_err());
    }

    #[test]
    fn dimension_errors() {
        assert!(QbSystem::quadratic(DMatrix::zeros(2, 2), DMatrix::zeros(2, 3)).is_err());
        assert!(QbSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 4), DMatrix::zeros(2, 1), vec![])
            .is_err());
        let sys = scalar(-1.0, 0.0);
        assert!(sys.eval_dynamics(&DVector::zeros(2), &DVector::zeros(0)).is_err());
        assert!(sys.stack(0).is_err());
    }
}
