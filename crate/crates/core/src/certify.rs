//! Trace maximization over `P`, epsilon sweeps and the epsilon line search.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qbstab_sdp::{
    check_block_feasibility, check_certificate, CertificateCheck, InfeasibilityCertificate, InteriorPoint,
    SdpBackend, SdpStatus, SolverConfig, SymSparse,
};

use crate::certificate::{gain_from, Certificate, SolverReport};
use crate::error::{QbError, Result};
use crate::lmi::{assemble, LmiProblem, Mode};
use crate::system::QbSystem;

/// Points in the logarithmic pre-scan of [`Certifier::optimize_epsilon`].
pub const PRESCAN_POINTS: usize = 16;

#[derive(Clone, Debug)]
pub struct InfeasibilityEvidence {
    pub epsilon: f64,
    pub check: CertificateCheck,
    pub certificate: InfeasibilityCertificate,
}

#[derive(Clone, Debug)]
pub enum MaxTrace {
    Certified(Box<Certificate>),
    Infeasible(InfeasibilityEvidence),
}

impl MaxTrace {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            MaxTrace::Certified(c) => Some(c),
            MaxTrace::Infeasible(_) => None,
        }
    }

    pub fn into_certificate(self) -> Option<Certificate> {
        match self {
            MaxTrace::Certified(c) => Some(*c),
            MaxTrace::Infeasible(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub status: SdpStatus,
    pub certificate: Option<Certificate>,
    pub infeasibility: Option<CertificateCheck>,
}

impl SweepEntry {
    pub fn feasible(&self) -> bool {
        self.certificate.is_some()
    }

    pub fn trace_p(&self) -> Option<f64> {
        self.certificate.as_ref().map(|c| c.trace_p)
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub mode: Mode,
    pub alpha: f64,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn certificates(&self) -> impl Iterator<Item = &Certificate> {
        self.entries.iter().filter_map(|e| e.certificate.as_ref())
    }

    /// Largest-trace certificate.
    ///
    /// Traces are often flat across a range of epsilon. Every certificate
    /// within [`TRACE_TIE_RTOL`] of the maximum counts as tied, and the tie
    /// goes to the largest ellipsoid (`det P`), then to the smaller epsilon.
    pub fn best(&self) -> Option<&Certificate> {
        let max = self.certificates().map(|c| c.trace_p).fold(f64::NEG_INFINITY, f64::max);
        let floor = max - TRACE_TIE_RTOL * max.abs();
        self.certificates()
            .filter(|c| c.trace_p >= floor)
            .map(|c| (c, c.p.determinant()))
            .fold(None, |acc: Option<(&Certificate, f64)>, (c, det)| match acc {
                Some((b, bd)) if bd >= det => Some((b, bd)),
                _ => Some((c, det)),
            })
            .map(|(c, _)| c)
    }

    /// `epsilon,feasible,trace_P` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epsilon,feasible,trace_P")?;
        for e in &self.entries {
            match e.trace_p() {
                Some(t) => writeln!(out, "{:.16e},true,{:.16e}", e.epsilon, t)?,
                None => writeln!(out, "{:.16e},false,", e.epsilon)?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub epsilon: f64,
    pub trace_p: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EpsilonSearch {
    pub best: Certificate,
    /// Every evaluation in the order it was made.
    pub history: Vec<Evaluation>,
}

/// Retreat from a trace-optimal synthesis point whose gain is out of scale.
///
/// Trace maximization can drive `P` onto the `δI` floor, and `K = YP⁻¹`
/// then grows like `1/δ`. When `‖BK‖_F > trigger·‖A‖_F` a second problem
/// maximizes `λ_min(P)` over the same LMIs with
/// `trace(P) ≥ (1 − trace_slack)·trace*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainConditioning {
    pub trace_slack: f64,
    pub trigger: f64,
}

impl Default for GainConditioning {
    fn default() -> Self {
        Self {
            trace_slack: 1e-2,
            trigger: 1e3,
        }
    }
}

/// Relative trace window treated as a tie by [`SweepResult::best`].
pub const TRACE_TIE_RTOL: f64 = 1e-6;

/// Runs the trace-maximization protocols against an SDP backend.
#[derive(Clone)]
pub struct Certifier {
    backend: Arc<dyn SdpBackend>,
    config: SolverConfig,
    conditioning: Option<GainConditioning>,
}

impl Default for Certifier {
    fn default() -> Self {
        Self::new(SolverConfig::default())
    }
}

impl std::fmt::Debug for Certifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Certifier")
            .field("backend", &self.backend.name())
            .field("config", &self.config)
            .field("conditioning", &self.conditioning)
            .finish()
    }
}

impl Certifier {
    pub fn new(config: SolverConfig) -> Self {
        Self::with_backend(Arc::new(InteriorPoint), config)
    }

    pub fn with_backend(backend: Arc<dyn SdpBackend>, config: SolverConfig) -> Self {
        Self {
            backend,
            config,
            conditioning: Some(GainConditioning::default()),
        }
    }

    /// `None` keeps the raw trace-optimal point even when its gain is huge.
    pub fn with_conditioning(mut self, conditioning: Option<GainConditioning>) -> Self {
        self.conditioning = conditioning;
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Maximizes `trace(P)` subject to the assembled LMIs at fixed `ε`, `α`.
    pub fn max_trace(&self, sys: &QbSystem, epsilon: f64, alpha: f64, mode: Mode) -> Result<MaxTrace> {
        let lmi = assemble(sys, epsilon, alpha, mode)?;
        let sol = self.backend.solve(&lmi.sdp, &self.config)?;
        match sol.status {
            SdpStatus::Optimal => {
                let cert = self.certificate_from(sys, &lmi, &sol, &sol.x, None)?;
                let cert = match self.conditioning {
                    Some(gc) if needs_conditioning(sys, &cert, gc) => {
                        self.condition(sys, &lmi, &cert, gc).unwrap_or(cert)
                    }
                    _ => cert,
                };
                Ok(MaxTrace::Certified(Box::new(cert)))
            }
            SdpStatus::Infeasible => match sol.certificate {
                Some(certificate) => Ok(MaxTrace::Infeasible(InfeasibilityEvidence {
                    epsilon,
                    check: check_certificate(&lmi.sdp, &certificate),
                    certificate,
                })),
                None => Err(QbError::Solver {
                    epsilon,
                    status: SdpStatus::NumericalFailure,
                }),
            },
            status => Err(QbError::Solver { epsilon, status }),
        }
    }

    /// Builds a certificate from the first `layout.d()` entries of `raw`.
    fn certificate_from(
        &self,
        sys: &QbSystem,
        lmi: &LmiProblem,
        sol: &qbstab_sdp::SdpSolution,
        raw: &[f64],
        conditioning: Option<f64>,
    ) -> Result<Certificate> {
        let raw = &raw[..lmi.layout.d()];
        // Interior-point iterates can sit a hair outside the cone; shrink
        // (P, Y) towards zero by the smallest t = 1 − 10⁻ᵏ that fixes it.
        let mut x = raw.to_vec();
        let mut pullback = 1.0;
        let mut feas = check_block_feasibility(&lmi.sdp, &x, 0.0);
        if !feas.feasible() {
            for k in (3..=12).rev() {
                let t = 1.0 - 10f64.powi(-k);
                let xt: Vec<f64> = raw.iter().map(|v| v * t).collect();
                let ft = check_block_feasibility(&lmi.sdp, &xt, 0.0);
                if ft.feasible() {
                    x = xt;
                    feas = ft;
                    pullback = t;
                    break;
                }
            }
        }
        if feas.worst() > 10.0 * self.config.feas_tol {
            return Err(QbError::Solver {
                epsilon: lmi.epsilon,
                status: SdpStatus::NumericalFailure,
            });
        }
        let (p, y) = lmi.layout.unpack(&x)?;
        let k = y.as_ref().map(|y| gain_from(&p, y)).transpose()?;
        Ok(Certificate {
            mode: lmi.layout.mode,
            n: sys.n(),
            m: lmi.layout.m,
            epsilon: lmi.epsilon,
            alpha: lmi.alpha,
            trace_p: p.trace(),
            p,
            y,
            k,
            report: SolverReport {
                backend: self.backend.name().to_string(),
                status: sol.status,
                primal_residual: sol.primal_residual,
                dual_residual: sol.dual_residual,
                duality_gap: sol.duality_gap,
                iters: sol.iters,
                block_max_eigenvalues: feas.max_eigenvalues,
                pullback,
                conditioning,
            },
        })
    }

    /// Maximizes `s` subject to the LMIs, `P ⪰ sI` and
    /// `trace(P) ≥ (1 − slack)·trace*`. The extra variable `s` is last.
    fn condition(&self, sys: &QbSystem, lmi: &LmiProblem, cert: &Certificate, gc: GainConditioning) -> Option<Certificate> {
        let lay = &lmi.layout;
        let d = lay.d();
        let n = lay.n;
        let mut c = vec![0.0; d + 1];
        c[d] = 1.0;
        let mut sdp = qbstab_sdp::SdpProblem::new(c);
        let mut main = lmi.sdp.blocks[0].clone();
        main.coefficients.push(SymSparse::zeros(main.dim));
        sdp.blocks.push(main);
        // sI − P ⪯ 0
        let mut floor = lmi.sdp.blocks[1].clone();
        floor.constant = SymSparse::zeros(n);
        floor.coefficients.push(SymSparse::scaled_identity(n, 1.0));
        sdp.blocks.push(floor);
        // (1 − slack)·trace* − trace(P) ≤ 0
        let target = (1.0 - gc.trace_slack) * cert.trace_p;
        let tr = sdp.add_block(1);
        tr.constant = SymSparse::scaled_identity(1, target);
        for i in 0..n {
            tr.coefficients[lay.p_index(i, i)].push(0, 0, -1.0);
        }
        let sol = self.backend.solve(&sdp, &self.config).ok()?;
        if sol.status != SdpStatus::Optimal {
            return None;
        }
        self.certificate_from(sys, lmi, &sol, &sol.x, Some(gc.trace_slack)).ok()
    }

    /// One [`Certifier::max_trace`] per grid point, in grid order. `jobs`
    /// bounds the worker count; results do not depend on it.
    pub fn sweep_epsilon(
        &self,
        sys: &QbSystem,
        grid: &[f64],
        alpha: f64,
        mode: Mode,
        jobs: Option<usize>,
    ) -> Result<SweepResult> {
        if grid.is_empty() {
            return Err(QbError::InvalidArgument("epsilon grid is empty".into()));
        }
        if grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(QbError::InvalidArgument("epsilon grid must be positive".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QbError::InvalidArgument("epsilon grid must be strictly increasing".into()));
        }
        // Reject bad systems and scalars once instead of per point.
        assemble(sys, grid[0], alpha, mode)?;
        let run = || -> Vec<SweepEntry> {
            grid.par_iter()
                .map(|&eps| match self.max_trace(sys, eps, alpha, mode) {
                    Ok(MaxTrace::Certified(c)) => SweepEntry {
                        epsilon: eps,
                        status: SdpStatus::Optimal,
                        certificate: Some(*c),
                        infeasibility: None,
                    },
                    Ok(MaxTrace::Infeasible(ev)) => SweepEntry {
                        epsilon: eps,
                        status: SdpStatus::Infeasible,
                        certificate: None,
                        infeasibility: Some(ev.check),
                    },
                    Err(QbError::Solver { status, .. }) => SweepEntry {
                        epsilon: eps,
                        status,
                        certificate: None,
                        infeasibility: None,
                    },
                    Err(_) => SweepEntry {
                        epsilon: eps,
                        status: SdpStatus::NumericalFailure,
                        certificate: None,
                        infeasibility: None,
                    },
                })
                .collect()
        };
        let entries = match jobs {
            Some(j) => rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| QbError::Config(e.to_string()))?
                .install(run),
            None => run(),
        };
        Ok(SweepResult { mode, alpha, entries })
    }

    /// Log-spaced pre-scan over `[lo, hi]` followed by golden-section
    /// refinement inside the bracket around the best pre-scan point.
    pub fn optimize_epsilon(
        &self,
        sys: &QbSystem,
        lo: f64,
        hi: f64,
        rel_tol: f64,
        alpha: f64,
        mode: Mode,
    ) -> Result<EpsilonSearch> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(QbError::InvalidArgument(format!("need 0 < lo < hi, got ({lo}, {hi})")));
        }
        if !(rel_tol > 0.0) {
            return Err(QbError::InvalidArgument("rel_tol must be positive".into()));
        }
        let grid = log_grid(lo, hi, PRESCAN_POINTS);
        let scan = self.sweep_epsilon(sys, &grid, alpha, mode, None)?;
        let mut history: Vec<Evaluation> = scan
            .entries
            .iter()
            .map(|e| Evaluation {
                epsilon: e.epsilon,
                trace_p: e.trace_p(),
            })
            .collect();
        let Some(mut best) = scan.best().cloned() else {
            return Err(QbError::AllInfeasible { evaluated: grid });
        };
        let bi = grid.iter().position(|&e| e == best.epsilon).unwrap_or(0);
        let mut a = grid[bi.saturating_sub(1)];
        let mut b = grid[(bi + 1).min(grid.len() - 1)];

        let eval = |eps: f64, best: &mut Certificate, history: &mut Vec<Evaluation>| -> f64 {
            let cert = self.max_trace(sys, eps, alpha, mode).ok().and_then(MaxTrace::into_certificate);
            let t = cert.as_ref().map(|c| c.trace_p);
            history.push(Evaluation { epsilon: eps, trace_p: t });
            match cert {
                Some(c) => {
                    if c.trace_p > best.trace_p {
                        *best = c;
                    }
                    t.unwrap_or(f64::NEG_INFINITY)
                }
                None => f64::NEG_INFINITY,
            }
        };

        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = eval(c, &mut best, &mut history);
        let mut fd = eval(d, &mut best, &mut history);
        for _ in 0..200 {
            if b - a <= rel_tol * 0.5 * (a + b) {
                break;
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = eval(c, &mut best, &mut history);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = eval(d, &mut best, &mut history);
            }
        }
        Ok(EpsilonSearch { best, history })
    }
}

fn needs_conditioning(sys: &QbSystem, cert: &Certificate, gc: GainConditioning) -> bool {
    match &cert.k {
        Some(k) => (sys.b() * k).norm() > gc.trigger * sys.a().norm().max(f64::MIN_POSITIVE),
        None => false,
    }
}

/// `count` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

/// `count` points from `lo` to `hi` inclusive, evenly spaced in `log ε`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    linear_grid(l, h, count)
        .into_iter()
        .enumerate()
        .map(|(i, v)| if i == 0 { lo } else if i + 1 == count { hi } else { v.exp() })
        .collect()
}

pub fn max_trace(sys: &QbSystem, epsilon: f64, alpha: f64, mode: Mode) -> Result<MaxTrace> {
    Certifier::default().max_trace(sys, epsilon, alpha, mode)
}

pub fn sweep_epsilon(sys: &QbSystem, grid: &[f64], alpha: f64, mode: Mode) -> Result<SweepResult> {
    Certifier::default().sweep_epsilon(sys, grid, alpha, mode, None)
}

pub fn optimize_epsilon(
    sys: &QbSystem,
    range: (f64, f64),
    rel_tol: f64,
    alpha: f64,
    mode: Mode,
) -> Result<EpsilonSearch> {
    Certifier::default().optimize_epsilon(sys, range.0, range.1, rel_tol, alpha, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_hit_their_endpoints() {
        let g = linear_grid(0.01, 0.8, 20);
        assert_eq!((g[0], g[19], g.len()), (0.01, 0.8, 20));
        let l = log_grid(1e-3, 1.0, 4);
        assert_eq!((l[0], l[3]), (1e-3, 1.0));
        assert!((l[1] - 1e-2).abs() < 1e-15 && (l[2] - 1e-1).abs() < 1e-14);
    }
}
