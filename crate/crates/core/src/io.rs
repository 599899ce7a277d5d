//! JSON system documents.
//!
//! ```json
//! { "n": 2, "m": 0,
//!   "A": [[-50, -16], [13, -9]],
//!   "H": {"triplets": [[0, 0, 1, 13.8], [1, 0, 1, 5.5]]},
//!   "B": [], "D": [] }
//! ```
//!
//! `H` is either a dense `n × n²` row list or sparse `[row, i, j, value]`
//! quadruples (0-based) for the coefficient of `xᵢ xⱼ` in `ẋ_row`; repeated
//! quadruples add up. `H` may be unsymmetrized; loading averages the `(i,j)`
//! and `(j,i)` columns and reports the defect it removed.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};
use crate::linalg::{from_rows, to_rows};
use crate::system::{symmetrize_quadratic, symmetry_defect, QbSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuadraticSpec {
    Dense(Vec<Vec<f64>>),
    Sparse { triplets: Vec<(usize, usize, usize, f64)> },
}

/// Affine parameter dependence `A(p) = A + A_coefficient / p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    #[serde(rename = "A_coefficient")]
    pub a_coefficient: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: QuadraticSpec,
    #[serde(rename = "B", default)]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "D", default)]
    pub d: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, ParameterSpec>,
}

#[derive(Clone, Debug)]
pub struct LoadedSystem {
    pub system: QbSystem,
    /// Largest `|H(eᵢ⊗eⱼ) − H(eⱼ⊗eᵢ)|` in the file before symmetrization.
    pub max_symmetry_defect: f64,
}

impl SystemDocument {
    pub fn from_system(sys: &QbSystem) -> Self {
        let n = sys.n();
        let h = sys.h();
        let nnz = h.iter().filter(|v| **v != 0.0).count();
        let h = if nnz * 4 < h.len() {
            let mut triplets = Vec::with_capacity(nnz);
            for i in 0..n {
                for j in 0..n {
                    for r in 0..n {
                        let v = h[(r, i * n + j)];
                        if v != 0.0 {
                            triplets.push((r, i, j, v));
                        }
                    }
                }
            }
            QuadraticSpec::Sparse { triplets }
        } else {
            QuadraticSpec::Dense(to_rows(h))
        };
        Self {
            n,
            m: sys.m(),
            a: to_rows(sys.a()),
            h,
            b: if sys.m() == 0 { Vec::new() } else { to_rows(sys.b()) },
            d: sys.d().iter().map(to_rows).collect(),
            name: None,
            provenance: None,
            parameters: BTreeMap::new(),
        }
    }

    /// Raw `H` exactly as stored, before symmetrization.
    pub fn raw_h(&self) -> Result<DMatrix<f64>> {
        let n = self.n;
        match &self.h {
            QuadraticSpec::Dense(rows) => {
                if rows.len() != n {
                    return Err(QbError::Schema(format!("H: expected {n} rows, got {}", rows.len())));
                }
                from_rows(rows, n * n, "H")
            }
            QuadraticSpec::Sparse { triplets } => {
                let mut h = DMatrix::zeros(n, n * n);
                for &(r, i, j, v) in triplets {
                    if r >= n || i >= n || j >= n {
                        return Err(QbError::Schema(format!(
                            "H triplet ({r}, {i}, {j}) out of range for n = {n}"
                        )));
                    }
                    h[(r, i * n + j)] += v;
                }
                Ok(h)
            }
        }
    }

    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        square(&self.a, self.n, "A")
    }

    pub fn to_system(&self) -> Result<LoadedSystem> {
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return Err(QbError::Schema("n must be positive".into()));
        }
        let a = self.a_matrix()?;
        let h_raw = self.raw_h()?;
        let b = if m == 0 && self.b.iter().all(|r| r.is_empty()) {
            if !self.b.is_empty() && self.b.len() != n {
                return Err(QbError::Schema(format!("B: expected {n} rows, got {}", self.b.len())));
            }
            DMatrix::zeros(n, 0)
        } else {
            if self.b.len() != n {
                return Err(QbError::Schema(format!("B: expected {n} rows, got {}", self.b.len())));
            }
            from_rows(&self.b, m, "B")?
        };
        if self.d.len() != m {
            return Err(QbError::Schema(format!("D: expected {m} matrices, got {}", self.d.len())));
        }
        let d = self
            .d
            .iter()
            .enumerate()
            .map(|(j, dj)| square(dj, n, &format!("D[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let defect = symmetry_defect(&h_raw, n);
        let h = symmetrize_quadratic(&h_raw, n)?;
        Ok(LoadedSystem {
            system: QbSystem::new(a, h, b, d)?,
            max_symmetry_defect: defect,
        })
    }

    /// The system at parameter value `value`, applying `A + A_coefficient/value`.
    pub fn to_system_at(&self, parameter: &str, value: f64) -> Result<LoadedSystem> {
        let spec = self.parameters.get(parameter).ok_or_else(|| {
            QbError::Schema(format!("document has no parameter named {parameter:?}"))
        })?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(QbError::InvalidArgument(format!(
                "{parameter} must be positive and finite, got {value}"
            )));
        }
        let coef = square(&spec.a_coefficient, self.n, "A_coefficient")?;
        let loaded = self.to_system()?;
        let a = loaded.system.a() + coef / value;
        Ok(LoadedSystem {
            system: loaded.system.with_a(a)?,
            ..loaded
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn square(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(QbError::Schema(format!("{what}: expected {n} rows, got {}", rows.len())));
    }
    from_rows(rows, n, what)
}

pub fn load_system(path: &Path) -> Result<LoadedSystem> {
    SystemDocument::load(path)?.to_system()
}

pub fn save_system(path: &Path, sys: &QbSystem) -> Result<()> {
    SystemDocument::from_system(sys).save(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_symmetrized_on_load() {
        let doc: SystemDocument = serde_json::from_str(
            r#"{"n": 2, "m": 0, "A": [[-50, -16], [13, -9]],
                "H": {"triplets": [[0, 0, 1, 13.8], [1, 0, 1, 5.5]]}}"#,
        )
        .unwrap();
        let loaded = doc.to_system().unwrap();
        assert!((loaded.max_symmetry_defect - 13.8).abs() < 1e-12);
        let h = loaded.system.h();
        assert!((h[(0, 1)] - 6.9).abs() < 1e-15 && (h[(0, 2)] - 6.9).abs() < 1e-15);
        assert!((h[(1, 1)] - 2.75).abs() < 1e-15 && (h[(1, 2)] - 2.75).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0 / 3.0, 0.1, 0.2, -7.0]);
        let h = DMatrix::from_row_slice(2, 4, &[0.0, 0.3, 0.3, 0.0, 1e-17, 0.0, 0.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, std::f64::consts::PI]);
        let d = vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5])];
        let sys = QbSystem::new(a, h, b, d).unwrap();
        let text = serde_json::to_string(&SystemDocument::from_system(&sys)).unwrap();
        let back: SystemDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_system().unwrap().system, sys);
    }

    #[test]
    fn schema_violations_are_reported() {
        let bad = [
            r#"{"n": 2, "m": 0, "A": [[1, 0]], "H": [[0,0,0,0],[0,0,0,0]]}"#,
            r#"{"n": 2, "m": 0, "A": [[1, 0], [0, 1]], "H": {"triplets": [[2, 0, 0, 1.0]]}}"#,
            r#"{"n": 1, "m": 1, "A": [[1]], "H": [[0]], "B": [[1]], "D": []}"#,
        ];
        for text in bad {
            let doc: SystemDocument = serde_json::from_str(text).unwrap();
            assert!(matches!(doc.to_system(), Err(QbError::Schema(_))), "{text}");
        }
    }
}
