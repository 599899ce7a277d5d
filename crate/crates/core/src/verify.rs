//! Empirical checks of certificates: sampled Lyapunov decrease and
//! simulated trajectories from the ellipsoid boundary.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{extract_gain, Certificate};
use crate::error::{QbError, Result};
use crate::lmi::Mode;
use crate::linalg::{spd_cholesky, spd_sqrt};
use crate::system::QbSystem;

/// `V(x) = xᵀP⁻¹x` with `P⁻¹` precomputed.
#[derive(Clone, Debug)]
pub struct Lyapunov {
    q: DMatrix<f64>,
}

impl Lyapunov {
    pub fn new(p: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            q: spd_cholesky(p)?.inverse(),
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.q.column_iter().zip(x.iter()).map(|(c, xj)| c.dot(x) * xj).sum()
    }

    /// `2 xᵀP⁻¹ f(x)` given `f(x)`.
    pub fn derivative_with(&self, x: &DVector<f64>, f: &DVector<f64>) -> f64 {
        2.0 * self.q.column_iter().zip(x.iter()).map(|(c, xj)| c.dot(f) * xj).sum::<f64>()
    }
}

/// `V̇(x) = 2 xᵀP⁻¹ f(x)` along the autonomous flow of `sys`.
pub fn vdot(sys: &QbSystem, p: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    if x.len() != sys.n() || p.shape() != (sys.n(), sys.n()) {
        return Err(QbError::Shape("x and P must match the system dimension".into()));
    }
    let v = Lyapunov::new(p)?;
    Ok(v.derivative_with(x, &sys.vector_field(x)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub terminated_early: bool,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectories hold at least x0")
    }

    /// `t,x1,...,xn` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.16e}")?;
            for v in x.iter() {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Fixed-step classical Runge-Kutta on `ẋ = f(x)` with reusable buffers.
struct Rk4<'a> {
    sys: &'a QbSystem,
    k: [DVector<f64>; 4],
    tmp: DVector<f64>,
}

impl<'a> Rk4<'a> {
    fn new(sys: &'a QbSystem) -> Self {
        let z = DVector::zeros(sys.n());
        Self {
            sys,
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    fn step(&mut self, x: &mut DVector<f64>, h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.sys.vector_field_into(x, k1);
        self.tmp.copy_from(x);
        self.tmp.axpy(0.5 * h, k1, 1.0);
        self.sys.vector_field_into(&self.tmp, k2);
        self.tmp.copy_from(x);
        self.tmp.axpy(0.5 * h, k2, 1.0);
        self.sys.vector_field_into(&self.tmp, k3);
        self.tmp.copy_from(x);
        self.tmp.axpy(h, k3, 1.0);
        self.sys.vector_field_into(&self.tmp, k4);
        x.axpy(h / 6.0, k1, 1.0);
        x.axpy(h / 3.0, k2, 1.0);
        x.axpy(h / 3.0, k3, 1.0);
        x.axpy(h / 6.0, k4, 1.0);
    }
}

fn step_count(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0 && dt > 0.0 && t_final.is_finite()) {
        return Err(QbError::InvalidArgument("t_final and dt must be positive".into()));
    }
    let steps = ((t_final / dt).round() as usize).max(1);
    Ok((steps, t_final / steps as f64))
}

fn diverged(x: &DVector<f64>, limit: f64) -> bool {
    x.iter().any(|v| !v.is_finite()) || x.norm() > limit
}

/// Default step `1e-3 / ‖A‖_F`.
pub fn default_dt(sys: &QbSystem) -> f64 {
    let na = sys.a().norm();
    if na > 0.0 {
        1e-3 / na
    } else {
        1e-3
    }
}

/// Integrates the autonomous part of `sys` (inputs held at zero). The step
/// is `dt` adjusted so a whole number of steps ends at `t_final`. Stops
/// early once `‖x‖ > 1e6·(1 + ‖x0‖)` or the state stops being finite.
pub fn simulate(sys: &QbSystem, x0: &DVector<f64>, t_final: f64, dt: f64) -> Result<Trajectory> {
    if x0.len() != sys.n() {
        return Err(QbError::Shape(format!("x0 must have length {}", sys.n())));
    }
    let (steps, h) = step_count(t_final, dt)?;
    let limit = 1e6 * (1.0 + x0.norm());
    let mut rk = Rk4::new(sys);
    let mut x = x0.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    let mut terminated_early = false;
    for s in 1..=steps {
        rk.step(&mut x, h);
        times.push(if s == steps { t_final } else { s as f64 * h });
        states.push(x.clone());
        if diverged(&x, limit) {
            terminated_early = true;
            break;
        }
    }
    Ok(Trajectory {
        times,
        states,
        terminated_early,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub samples_tested: usize,
    /// Largest `V̇/V` over samples; a valid certificate keeps it at or below `−α`.
    pub max_vdot_ratio: f64,
    /// Smallest `−V̇/V − α` over samples.
    pub min_decay_margin: f64,
    pub violations: usize,
    pub vdot_violations: usize,
    pub monotonicity_violations: usize,
    pub envelope_violations: usize,
    pub trajectories_converged: usize,
    pub trajectories_total: usize,
    pub diverged: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.trajectories_converged == self.trajectories_total
    }

    /// Combines a sampling report with a trajectory report.
    pub fn merge(&self, other: &Self) -> Self {
        let sampled = |r: &Self| r.samples_tested > 0;
        let (ratio, margin) = match (sampled(self), sampled(other)) {
            (true, true) => (
                self.max_vdot_ratio.max(other.max_vdot_ratio),
                self.min_decay_margin.min(other.min_decay_margin),
            ),
            (true, false) => (self.max_vdot_ratio, self.min_decay_margin),
            _ => (other.max_vdot_ratio, other.min_decay_margin),
        };
        Self {
            samples_tested: self.samples_tested + other.samples_tested,
            max_vdot_ratio: ratio,
            min_decay_margin: margin,
            violations: self.violations + other.violations,
            vdot_violations: self.vdot_violations + other.vdot_violations,
            monotonicity_violations: self.monotonicity_violations + other.monotonicity_violations,
            envelope_violations: self.envelope_violations + other.envelope_violations,
            trajectories_converged: self.trajectories_converged + other.trajectories_converged,
            trajectories_total: self.trajectories_total + other.trajectories_total,
            diverged: self.diverged + other.diverged,
        }
    }
}

/// The autonomous system a certificate speaks about: the closed loop under
/// `K` for synthesis, the unforced system for analysis.
pub fn certified_system(sys: &QbSystem, cert: &Certificate) -> Result<QbSystem> {
    if cert.n != sys.n() {
        return Err(QbError::Shape(format!(
            "certificate has n = {}, system has n = {}",
            cert.n,
            sys.n()
        )));
    }
    match cert.mode {
        Mode::Analysis => Ok(sys.autonomous()),
        Mode::Synthesis => {
            if cert.m != sys.m() {
                return Err(QbError::Shape(format!(
                    "certificate has m = {}, system has m = {}",
                    cert.m,
                    sys.m()
                )));
            }
            let k = match &cert.k {
                Some(k) => k.clone(),
                None => extract_gain(cert)?,
            };
            sys.close_loop(&k)
        }
    }
}

/// Samples per RNG stream.
const CHUNK: usize = 4096;

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm > 1e-300 {
            return z / norm;
        }
    }
}

/// Checks `V̇ ≤ −αV + 1e-9·(1 + |V̇|)` on points drawn uniformly from the
/// certified ellipsoid.
pub fn sample_check(sys: &QbSystem, cert: &Certificate, n_samples: usize, seed: u64) -> Result<VerificationReport> {
    let cl = certified_system(sys, cert)?;
    let n = cl.n();
    let lyap = Lyapunov::new(&cert.p)?;
    let root = spd_sqrt(&cert.p)?;
    let alpha = cert.alpha;
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<(usize, usize, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n_samples - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut f = DVector::zeros(n);
            let (mut tested, mut bad, mut worst, mut margin) = (0, 0, f64::NEG_INFINITY, f64::INFINITY);
            for _ in 0..len {
                let r: f64 = rng.random::<f64>().powf(1.0 / n as f64);
                let x = &root * (unit_direction(&mut rng, n) * r);
                let v = lyap.value(&x);
                if !(v > 0.0) {
                    continue;
                }
                cl.vector_field_into(&x, &mut f);
                let vd = lyap.derivative_with(&x, &f);
                tested += 1;
                if vd > -alpha * v + 1e-9 * (1.0 + vd.abs()) {
                    bad += 1;
                }
                worst = worst.max(vd / v);
                margin = margin.min(-vd / v - alpha);
            }
            (tested, bad, worst, margin)
        })
        .collect();
    let mut rep = VerificationReport {
        max_vdot_ratio: f64::NEG_INFINITY,
        min_decay_margin: f64::INFINITY,
        ..Default::default()
    };
    for (tested, bad, worst, margin) in parts {
        rep.samples_tested += tested;
        rep.vdot_violations += bad;
        rep.max_vdot_ratio = rep.max_vdot_ratio.max(worst);
        rep.min_decay_margin = rep.min_decay_margin.min(margin);
    }
    rep.violations = rep.vdot_violations;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub n_traj: usize,
    pub t_final: f64,
    /// Defaults to `1e-3 / ‖A‖_F` of the certified system.
    pub dt: Option<f64>,
    pub seed: u64,
    /// Converged when `√(V(T)/V(0))` is at most this.
    pub attraction_ratio: f64,
    /// Relative slack on `V(t) ≤ V(0) e^{−αt}`.
    pub envelope_tol: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            n_traj: 100,
            t_final: 20.0,
            dt: None,
            seed: 0,
            attraction_ratio: 1e-3,
            envelope_tol: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct TrajectoryAudit {
    converged: bool,
    diverged: bool,
    monotonicity: bool,
    envelope: bool,
}

fn audit(cl: &QbSystem, lyap: &Lyapunov, x0: &DVector<f64>, alpha: f64, steps: usize, h: f64, opts: &ConvergenceOptions) -> TrajectoryAudit {
    let mut out = TrajectoryAudit::default();
    let mut rk = Rk4::new(cl);
    let limit = 1e6 * (1.0 + x0.norm());
    let mut x = x0.clone();
    let v0 = lyap.value(&x);
    let mut v_prev = v0;
    for s in 1..=steps {
        rk.step(&mut x, h);
        if diverged(&x, limit) {
            out.diverged = true;
            return out;
        }
        let v = lyap.value(&x);
        if v - v_prev > 1e-10 * v_prev {
            out.monotonicity = true;
        }
        if alpha > 0.0 && v > v0 * (-alpha * s as f64 * h).exp() * (1.0 + opts.envelope_tol) {
            out.envelope = true;
        }
        v_prev = v;
    }
    out.converged = v_prev <= opts.attraction_ratio.powi(2) * v0;
    out
}

/// Integrates from `n_traj` uniformly drawn boundary points (scaled by
/// `1 − 1e-6`) and audits invariance, attraction and the decay envelope.
pub fn convergence_check(sys: &QbSystem, cert: &Certificate, opts: &ConvergenceOptions) -> Result<VerificationReport> {
    let cl = certified_system(sys, cert)?;
    let n = cl.n();
    let lyap = Lyapunov::new(&cert.p)?;
    let root = spd_sqrt(&cert.p)?;
    let (steps, h) = step_count(opts.t_final, opts.dt.unwrap_or_else(|| default_dt(&cl)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<DVector<f64>> = (0..opts.n_traj)
        .map(|_| &root * (unit_direction(&mut rng, n) * (1.0 - 1e-6)))
        .collect();
    let audits: Vec<TrajectoryAudit> = starts
        .par_iter()
        .map(|x0| audit(&cl, &lyap, x0, cert.alpha, steps, h, opts))
        .collect();
    let count = |f: fn(&TrajectoryAudit) -> bool| audits.iter().filter(|a| f(a)).count();
    let mut rep = VerificationReport {
        trajectories_total: opts.n_traj,
        trajectories_converged: count(|a| a.converged),
        diverged: count(|a| a.diverged),
        monotonicity_violations: count(|a| a.monotonicity),
        envelope_violations: count(|a| a.envelope),
        ..Default::default()
    };
    rep.violations = rep.monotonicity_violations + rep.envelope_violations;
    Ok(rep)
}
