//! Stability and stabilizability certificates and their JSON form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use qbstab_sdp::SdpStatus;

use crate::error::{QbError, Result};
use crate::geometry::Ellipsoid;
use crate::lmi::Mode;
use crate::linalg::{from_rows, min_eigenvalue, spd_cholesky, to_rows};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub backend: String,
    pub status: SdpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iters: usize,
    /// Largest eigenvalue of each LMI block at the reported `(P, Y)`.
    pub block_max_eigenvalues: Vec<f64>,
    /// Factor applied to the raw solver point to land inside the cone.
    pub pullback: f64,
    /// Trace slack given up to bound the gain, when that stage ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<f64>,
}

/// `(P, ε, α)` proving that `{xᵀP⁻¹x ≤ 1}` lies in the region of attraction,
/// plus `Y` and `K = YP⁻¹` for synthesis.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub p: DMatrix<f64>,
    pub y: Option<DMatrix<f64>>,
    pub k: Option<DMatrix<f64>>,
    pub trace_p: f64,
    pub report: SolverReport,
}

impl Certificate {
    pub fn ellipsoid(&self) -> Ellipsoid {
        Ellipsoid::new_unchecked(self.p.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CertificateDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CertificateDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Solves `K P = Y` through a Cholesky factorization of `P`.
pub fn extract_gain(cert: &Certificate) -> Result<DMatrix<f64>> {
    let y = match (cert.mode, &cert.y) {
        (Mode::Synthesis, Some(y)) => y,
        _ => return Err(QbError::NotSynthesis),
    };
    gain_from(&cert.p, y)
}

pub(crate) fn gain_from(p: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = spd_cholesky(p)?;
    // K P = Y  ⟺  P Kᵀ = Yᵀ
    Ok(chol.solve(&y.transpose()).transpose())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Y", default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    pub trace: f64,
    pub residuals: SolverReport,
    pub tool_version: String,
}

impl From<&Certificate> for CertificateDocument {
    fn from(c: &Certificate) -> Self {
        Self {
            mode: c.mode,
            n: c.n,
            m: c.m,
            epsilon: c.epsilon,
            alpha: c.alpha,
            p: to_rows(&c.p),
            y: c.y.as_ref().map(to_rows),
            k: c.k.as_ref().map(to_rows),
            trace: c.trace_p,
            residuals: c.report.clone(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }
}

impl TryFrom<CertificateDocument> for Certificate {
    type Error = QbError;

    fn try_from(doc: CertificateDocument) -> Result<Self> {
        let n = doc.n;
        if n == 0 || doc.p.len() != n {
            return Err(QbError::Schema(format!("P must have n = {n} rows")));
        }
        let p = from_rows(&doc.p, n, "P")?;
        if p != p.transpose() {
            return Err(QbError::Schema("P is not symmetric".into()));
        }
        let lmin = min_eigenvalue(&p);
        if !(lmin > 0.0) {
            return Err(QbError::NotPositiveDefinite { min_eigenvalue: lmin });
        }
        if !(doc.epsilon > 0.0) || !(doc.alpha >= 0.0) {
            return Err(QbError::Schema("epsilon must be positive and alpha non-negative".into()));
        }
        let trace = p.trace();
        if (trace - doc.trace).abs() > 1e-12 * trace.abs().max(1.0) {
            return Err(QbError::Schema(format!("trace {} does not match trace(P) = {trace}", doc.trace)));
        }
        let read = |rows: &Option<Vec<Vec<f64>>>, what: &str| -> Result<Option<DMatrix<f64>>> {
            match rows {
                None => Ok(None),
                Some(r) if r.len() == doc.m => from_rows(r, n, what).map(Some),
                Some(_) => Err(QbError::Schema(format!("{what} must have m = {} rows", doc.m))),
            }
        };
        let y = read(&doc.y, "Y")?;
        let k = read(&doc.k, "K")?;
        match doc.mode {
            Mode::Analysis if y.is_some() || k.is_some() => {
                return Err(QbError::Schema("analysis certificates carry no Y or K".into()))
            }
            Mode::Synthesis => {
                let (Some(y), Some(k)) = (&y, &k) else {
                    return Err(QbError::Schema("synthesis certificates need Y and K".into()));
                };
                let res = (k * &p - y).norm() / y.norm().max(f64::MIN_POSITIVE);
                if res > 1e-8 && (k * &p - y).norm() > 1e-12 {
                    return Err(QbError::Schema(format!("K P differs from Y (relative {res:.3e})")));
                }
            }
            _ => {}
        }
        Ok(Certificate {
            mode: doc.mode,
            n,
            m: doc.m,
            epsilon: doc.epsilon,
            alpha: doc.alpha,
            p,
            y,
            k,
            trace_p: doc.trace,
            report: doc.residuals,
        })
    }
}
