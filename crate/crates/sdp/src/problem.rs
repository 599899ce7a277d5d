//! Block LMI problems in the form
//!
//! ```text
//! maximize    cᵀx
//! subject to  F₀⁽ᵇ⁾ + Σᵢ xᵢ Fᵢ⁽ᵇ⁾ ⪯ 0    for every block b
//! ```
//!
//! Coefficient matrices are symmetric and stored sparsely by their upper
//! triangle, which is all the assembled stability LMIs need.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::SdpError;

/// Symmetric matrix stored as upper-triangular `(row, col, value)` entries
/// with `row <= col`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymSparse {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Identity scaled by `value`.
    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        let mut m = Self::zeros(dim);
        if value != 0.0 {
            m.entries = (0..dim).map(|i| (i, i, value)).collect();
        }
        m
    }

    /// Builds from a dense matrix, reading the upper triangle. Entries with
    /// magnitude at or below `drop_tol` are discarded.
    pub fn from_dense_upper(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let dim = m.nrows();
        let mut entries = Vec::new();
        for j in 0..dim {
            for i in 0..=j {
                let v = m[(i, j)];
                if v.abs() > drop_tol {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim, entries }
    }

    /// Builds from a dense matrix after checking symmetry.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self, SdpError> {
        if m.nrows() != m.ncols() {
            return Err(SdpError::Shape(format!(
                "coefficient matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        for j in 0..m.ncols() {
            for i in 0..j {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(SdpError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_dense_upper(m, 0.0))
    }

    /// Adds `value` at `(i, j)` and, implicitly, `(j, i)`.
    pub fn push(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        if value != 0.0 {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            self.entries.push((r, c, value));
        }
    }

    /// Sorts entries column-major, merges duplicates and drops zeros.
    pub fn compress(&mut self) {
        self.entries
            .sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        self.entries = merged;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_to(1.0, &mut m);
        m
    }

    /// `target += scale · self`.
    pub fn add_to(&self, scale: f64, target: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            target[(i, j)] += scale * v;
            if i != j {
                target[(j, i)] += scale * v;
            }
        }
    }

    /// Trace inner product `tr(self · z)` for a symmetric `z`.
    pub fn inner(&self, z: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            if i == j {
                acc += v * z[(i, i)];
            } else {
                acc += v * (z[(i, j)] + z[(j, i)]);
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.2 *= factor;
        }
    }

    /// Number of distinct rows touched, counting both triangles.
    pub(crate) fn row_support(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .entries
            .iter()
            .flat_map(|&(i, j, _)| [i, j])
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

/// One LMI block `F₀ + Σ xᵢ Fᵢ ⪯ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub dim: usize,
    pub constant: SymSparse,
    /// One coefficient per decision variable; empty when the variable does
    /// not enter this block.
    pub coefficients: Vec<SymSparse>,
}

impl LmiBlock {
    pub fn new(dim: usize, num_vars: usize) -> Self {
        Self {
            dim,
            constant: SymSparse::zeros(dim),
            coefficients: vec![SymSparse::zeros(dim); num_vars],
        }
    }

    /// Evaluates `F₀ + Σ xᵢ Fᵢ` densely.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.to_dense();
        for (xi, fi) in x.iter().zip(&self.coefficients) {
            if *xi != 0.0 {
                fi.add_to(*xi, &mut m);
            }
        }
        m
    }

    /// Evaluates the linear part `Σ xᵢ Fᵢ` only.
    pub fn apply_linear(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (xi, fi) in x.iter().zip(&self.coefficients) {
            if *xi != 0.0 {
                fi.add_to(*xi, &mut m);
            }
        }
        m
    }
}

/// Maximize `cᵀx` subject to a list of LMI blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub c: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl SdpProblem {
    pub fn new(c: Vec<f64>) -> Self {
        Self {
            c,
            blocks: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    /// Adds a block sized for this problem's variable count and returns a
    /// mutable handle to it.
    pub fn add_block(&mut self, dim: usize) -> &mut LmiBlock {
        let nv = self.num_vars();
        self.blocks.push(LmiBlock::new(dim, nv));
        self.blocks.last_mut().expect("block just pushed")
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let nv = self.num_vars();
        if nv == 0 {
            return Err(SdpError::Shape("problem has no decision variables".into()));
        }
        if self.blocks.is_empty() {
            return Err(SdpError::Shape("problem has no LMI blocks".into()));
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::NonFinite("objective".into()));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            if block.dim == 0 {
                return Err(SdpError::Shape(format!("block {b} has dimension 0")));
            }
            if block.coefficients.len() != nv {
                return Err(SdpError::Shape(format!(
                    "block {b} has {} coefficients for {nv} variables",
                    block.coefficients.len()
                )));
            }
            let mats = std::iter::once(&block.constant).chain(&block.coefficients);
            for m in mats {
                if m.dim != block.dim {
                    return Err(SdpError::Shape(format!(
                        "block {b}: coefficient of size {} in block of size {}",
                        m.dim, block.dim
                    )));
                }
                for &(i, j, v) in &m.entries {
                    if i > j || j >= block.dim {
                        return Err(SdpError::Shape(format!(
                            "block {b}: entry ({i}, {j}) outside upper triangle"
                        )));
                    }
                    if !v.is_finite() {
                        return Err(SdpError::NonFinite(format!("block {b}")));
                    }
                }
            }
        }
        let mut used = vec![false; nv];
        for block in &self.blocks {
            for (i, f) in block.coefficients.iter().enumerate() {
                used[i] |= !f.is_empty();
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(SdpError::Shape(format!(
                "decision variable {i} appears in no block"
            )));
        }
        Ok(())
    }

    /// Per-block `F₀ + Σ xᵢ Fᵢ`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.evaluate(x)).collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `(Σ_b ⟨Fᵢ⁽ᵇ⁾, Z⁽ᵇ⁾⟩)ᵢ`, the adjoint of the linear map.
    pub fn adjoint(&self, z: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for (block, zb) in self.blocks.iter().zip(z) {
            for (o, f) in out.iter_mut().zip(&block.coefficients) {
                if !f.is_empty() {
                    *o += f.inner(zb);
                }
            }
        }
        out
    }

    /// `Σ_b ⟨F₀⁽ᵇ⁾, Z⁽ᵇ⁾⟩`.
    pub fn constant_inner(&self, z: &[DMatrix<f64>]) -> f64 {
        self.blocks
            .iter()
            .zip(z)
            .map(|(b, zb)| b.constant.inner(zb))
            .sum()
    }

    /// Returns a copy with every block multiplied by `factor` (constant and
    /// coefficients alike), which leaves the feasible set unchanged.
    pub fn with_blocks_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for block in &mut out.blocks {
            block.constant.scale(factor);
            for f in &mut block.coefficients {
                f.scale(factor);
            }
        }
        out
    }

    /// JSON listing of every block's constant and coefficient triplets.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let blocks: Vec<serde_json::Value> = self
            .blocks
            .iter()
            .map(|b| {
                let coeffs: Vec<serde_json::Value> = b
                    .coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| !f.is_empty())
                    .map(|(i, f)| serde_json::json!({ "var": i, "triplets": f.entries }))
                    .collect();
                serde_json::json!({
                    "dim": b.dim,
                    "F0": b.constant.entries,
                    "F": coeffs,
                })
            })
            .collect();
        serde_json::json!({ "c": self.c, "blocks": blocks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_inner_matches_dense_trace() {
        let mut f = SymSparse::zeros(3);
        f.push(0, 0, 2.0);
        f.push(2, 1, -1.5);
        f.push(0, 2, 0.5);
        f.compress();
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.2, 2.0, 0.7, 0.3, 0.7, 3.0]);
        let dense = f.to_dense();
        let expected = (&dense * &z).trace();
        assert!((f.inner(&z) - expected).abs() < 1e-14);
        assert_eq!(dense[(1, 2)], -1.5);
        assert_eq!(dense[(2, 1)], -1.5);
    }

    #[test]
    fn compress_merges_duplicates() {
        let mut f = SymSparse::zeros(2);
        f.push(0, 1, 1.0);
        f.push(1, 0, 2.0);
        f.push(1, 1, 1.0);
        f.push(1, 1, -1.0);
        f.compress();
        assert_eq!(f.entries(), &[(0, 1, 3.0)]);
    }

    #[test]
    fn from_dense_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(matches!(
            SymSparse::from_dense(&m),
            Err(SdpError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn validate_flags_unused_variable() {
        let mut p = SdpProblem::new(vec![1.0, 0.0]);
        let b = p.add_block(1);
        b.coefficients[0].push(0, 0, 1.0);
        assert!(p.validate().is_err());
    }
}
