//! Homogeneous self-dual primal–dual interior-point method with
//! Nesterov–Todd scaling and a Mehrotra predictor–corrector.
//!
//! Internally the LMI problem is written as the conic pair
//!
//! ```text
//! minimize  qᵀx   s.t.  G x + s = h,  s ⪰ 0        (q = −c, G x = Σ xᵢ Fᵢ, h = −F₀)
//! maximize −⟨h,z⟩ s.t.  Gᵀz + q = 0,  z ⪰ 0
//! ```
//!
//! and embedded with the homogenizing pair `(τ, κ)`:
//!
//! ```text
//! r_x = Gᵀz + qτ,  r_z = Gx + s − hτ,  r_τ = qᵀx + ⟨h,z⟩ + κ.
//! ```
//!
//! Optimal points have `τ > 0`; an improving dual ray (`⟨h,z⟩ < 0`,
//! `Gᵀz ≈ 0`) certifies that the LMI itself is infeasible.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::config::SolverConfig;
use crate::equilibrate::Equilibration;
use crate::error::SdpError;
use crate::problem::{SdpProblem, SymSparse};
use crate::residuals::{check_certificate, min_eigenvalue, residuals_at};
use crate::solution::{InfeasibilityCertificate, IterationRecord, SdpSolution, SdpStatus};

type Blocks = Vec<DMatrix<f64>>;

fn binner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn bnorm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn vnorm(a: &[f64]) -> f64 {
    vdot(a, a).sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Nesterov–Todd scaling of one block: `R` with `Rᵀ Z R = R⁻¹ S R⁻ᵀ = Λ`.
struct NtScaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    /// `(R Rᵀ)⁻¹`
    winv: DMatrix<f64>,
    /// `R Rᵀ`
    wm: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl NtScaling {
    fn new(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let ls = Cholesky::new(s.clone())?.unpack();
        let lz = Cholesky::new(z.clone())?.unpack();
        let svd = (lz.transpose() * &ls).svd(true, true);
        let u = svd.u?;
        let v = svd.v_t?.transpose();
        let lambda = svd.singular_values;
        if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return None;
        }
        let inv_sqrt = lambda.map(|l| 1.0 / l.sqrt());
        let mut r = ls * v;
        for (j, f) in inv_sqrt.iter().enumerate() {
            r.column_mut(j).scale_mut(*f);
        }
        let mut rinv = u.transpose() * lz.transpose();
        for (i, f) in inv_sqrt.iter().enumerate() {
            rinv.row_mut(i).scale_mut(*f);
        }
        let mut winv = rinv.transpose() * &rinv;
        symmetrize(&mut winv);
        let mut wm = &r * r.transpose();
        symmetrize(&mut wm);
        Some(Self {
            r,
            rinv,
            winv,
            wm,
            lambda,
        })
    }

    /// `W z = Rᵀ z R`
    fn scale_z(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = self.r.transpose() * z * &self.r;
        symmetrize(&mut m);
        m
    }

    /// `W⁻ᵀ s = R⁻¹ s R⁻ᵀ`
    fn scale_s(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = &self.rinv * s * self.rinv.transpose();
        symmetrize(&mut m);
        m
    }

    /// `Wᵀ x = R x Rᵀ`
    fn scale_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = &self.r * x * self.r.transpose();
        symmetrize(&mut m);
        m
    }

    /// `(WᵀW)⁻¹ x = W⁻¹ x W⁻¹` with `W⁻¹ = (R Rᵀ)⁻¹`.
    fn wtw_inv(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = &self.winv * x * &self.winv;
        symmetrize(&mut m);
        m
    }

    fn wtw(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = &self.wm * x * &self.wm;
        symmetrize(&mut m);
        m
    }

    /// Inverse of `λ ∘ ·`.
    fn lambda_div(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let l = &self.lambda;
        DMatrix::from_fn(x.nrows(), x.ncols(), |p, q| 2.0 * x[(p, q)] / (l[p] + l[q]))
    }

    /// Largest step `a` with `λ + a·d ⪰ 0`.
    fn max_step(&self, d: &DMatrix<f64>) -> f64 {
        let l = &self.lambda;
        let mut m = DMatrix::from_fn(d.nrows(), d.ncols(), |p, q| {
            d[(p, q)] / (l[p] * l[q]).sqrt()
        });
        symmetrize(&mut m);
        let lmin = min_eigenvalue(&m);
        if lmin >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lmin
        }
    }
}

/// `(A ∘ B)` Jordan product for symmetric matrices.
fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ab = a * b;
    (&ab + ab.transpose()) * 0.5
}

struct Embedding<'a> {
    p: &'a SdpProblem,
    h: Blocks,
    q: Vec<f64>,
    /// Variables with a nonzero coefficient, per block.
    active: Vec<Vec<usize>>,
    nu: usize,
}

impl<'a> Embedding<'a> {
    fn new(p: &'a SdpProblem) -> Self {
        let h = p
            .blocks
            .iter()
            .map(|b| -b.constant.to_dense())
            .collect();
        let q = p.c.iter().map(|c| -c).collect();
        let active = p
            .blocks
            .iter()
            .map(|b| {
                b.coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| !f.is_empty())
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let nu = p.blocks.iter().map(|b| b.dim).sum();
        Self {
            p,
            h,
            q,
            active,
            nu,
        }
    }

    fn g(&self, x: &[f64]) -> Blocks {
        self.p.blocks.iter().map(|b| b.apply_linear(x)).collect()
    }

    fn gt(&self, z: &[DMatrix<f64>]) -> Vec<f64> {
        self.p.adjoint(z)
    }

    fn identity_blocks(&self) -> Blocks {
        self.p
            .blocks
            .iter()
            .map(|b| DMatrix::identity(b.dim, b.dim))
            .collect()
    }

    /// `M_ij = Σ_b ⟨Fᵢ, W⁻¹ Fⱼ W⁻¹⟩` where `winv[b]` is symmetric.
    fn schur(&self, winv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let nv = self.p.num_vars();
        let mut m = DMatrix::zeros(nv, nv);
        for (b, block) in self.p.blocks.iter().enumerate() {
            let w = &winv[b];
            let k = block.dim;
            let act = &self.active[b];
            for (jj, &j) in act.iter().enumerate() {
                let fj = &block.coefficients[j];
                let t = transformed(fj, w, k);
                for &i in &act[..=jj] {
                    m[(i, j)] += block.coefficients[i].inner(&t);
                }
            }
        }
        for j in 0..nv {
            for i in 0..j {
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }
}

/// `W F W` for a sparse symmetric `F` and dense symmetric `W`.
fn transformed(f: &SymSparse, w: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let support = f.row_support();
    if support.len() * 2 < k {
        // W F W = W[:, S] F[S, S] W[S, :]
        let s = support.len();
        let mut fs = DMatrix::zeros(s, s);
        let pos = |r: usize| support.binary_search(&r).expect("row in support");
        for &(i, j, v) in f.entries() {
            let (a, b) = (pos(i), pos(j));
            fs[(a, b)] += v;
            if a != b {
                fs[(b, a)] += v;
            }
        }
        let ws = w.select_columns(&support);
        let mut t = &ws * fs * ws.transpose();
        symmetrize(&mut t);
        t
    } else {
        let fd = f.to_dense();
        let mut t = w * fd * w;
        symmetrize(&mut t);
        t
    }
}

/// Cholesky of the Schur matrix with escalating diagonal regularization.
fn factor(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut mr = m.clone();
        for i in 0..mr.nrows() {
            mr[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(mr) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

struct KktFactor<'e, 'a> {
    emb: &'e Embedding<'a>,
    nts: Vec<NtScaling>,
    chol: Cholesky<f64, Dyn>,
}

impl KktFactor<'_, '_> {
    /// Solves `[0 Gᵀ; G −WᵀW] [ux; uz] = [bx; bz]` with one refinement step.
    fn solve(&self, bx: &[f64], bz: &[DMatrix<f64>]) -> (Vec<f64>, Blocks) {
        let (mut ux, mut uz) = self.solve_once(bx, bz);
        let gtuz = self.emb.gt(&uz);
        let r1: Vec<f64> = bx.iter().zip(&gtuz).map(|(b, g)| b - g).collect();
        let gux = self.emb.g(&ux);
        let r2: Blocks = bz
            .iter()
            .zip(gux.iter().zip(&uz).zip(&self.nts))
            .map(|(b, ((g, u), nt))| b - (g - nt.wtw(u)))
            .collect();
        let scale = vnorm(bx).max(bnorm(bz)).max(1e-300);
        if vnorm(&r1).max(bnorm(&r2)) > 1e-14 * scale {
            let (dx, dz) = self.solve_once(&r1, &r2);
            for (u, d) in ux.iter_mut().zip(dx) {
                *u += d;
            }
            for (u, d) in uz.iter_mut().zip(dz) {
                *u += d;
            }
        }
        (ux, uz)
    }

    fn solve_once(&self, bx: &[f64], bz: &[DMatrix<f64>]) -> (Vec<f64>, Blocks) {
        let wbz: Blocks = bz.iter().zip(&self.nts).map(|(b, nt)| nt.wtw_inv(b)).collect();
        let gt = self.emb.gt(&wbz);
        let rhs = DVector::from_iterator(bx.len(), bx.iter().zip(&gt).map(|(a, b)| a + b));
        let ux = self.chol.solve(&rhs);
        let ux: Vec<f64> = ux.iter().copied().collect();
        let gux = self.emb.g(&ux);
        let uz = gux
            .iter()
            .zip(bz)
            .zip(&self.nts)
            .map(|((g, b), nt)| nt.wtw_inv(&(g - b)))
            .collect();
        (ux, uz)
    }
}

struct Iterate {
    x: Vec<f64>,
    s: Blocks,
    z: Blocks,
    tau: f64,
    kappa: f64,
}

/// Shifts every block by a multiple of the identity so the whole list is
/// strictly inside the cone.
fn shift_into_cone(v: &mut Blocks) {
    let t = v
        .iter()
        .map(|b| -min_eigenvalue(b))
        .fold(f64::NEG_INFINITY, f64::max);
    let nrm = bnorm(v);
    if t >= -1e-8 * nrm.max(1.0) {
        for b in v.iter_mut() {
            for i in 0..b.nrows() {
                b[(i, i)] += 1.0 + t;
            }
        }
    }
}

fn initial_point(emb: &Embedding) -> Option<Iterate> {
    let ident = emb.identity_blocks();
    let gram = factor(emb.schur(&ident))?;
    let gth = emb.gt(&emb.h);
    let x = gram.solve(&DVector::from_vec(gth));
    let x: Vec<f64> = x.iter().copied().collect();
    let gx = emb.g(&x);
    let mut s: Blocks = emb.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
    let y = gram.solve(&DVector::from_vec(emb.q.clone()));
    let y: Vec<f64> = y.iter().copied().collect();
    let mut z: Blocks = emb.g(&y).into_iter().map(|b| -b).collect();
    shift_into_cone(&mut s);
    shift_into_cone(&mut z);
    Some(Iterate {
        x,
        s,
        z,
        tau: 1.0,
        kappa: 1.0,
    })
}

/// Gram-matrix projection onto `{Z : Σ_b ⟨Fᵢ, Z⟩ = 0 ∀i}` alternated with
/// clipping negative eigenvalues, starting from a nearly feasible ray.
fn clean_certificate(problem: &SdpProblem, mut z: Blocks) -> Option<InfeasibilityCertificate> {
    let emb = Embedding::new(problem);
    let ident = emb.identity_blocks();
    let gram = factor(emb.schur(&ident))?;
    let normalize = |z: &mut Blocks| {
        let tr: f64 = z.iter().map(|b| b.trace()).sum();
        if tr > 0.0 {
            for b in z.iter_mut() {
                *b /= tr;
            }
        }
    };
    normalize(&mut z);
    let mut best: Option<(f64, InfeasibilityCertificate)> = None;
    for _ in 0..20 {
        let cert = InfeasibilityCertificate { blocks: z.clone() };
        let chk = check_certificate(problem, &cert);
        if chk.is_valid() {
            return Some(cert);
        }
        if chk.constant_inner > 0.0 {
            let score = chk.max_abs_coefficient_inner.max(-chk.min_eigenvalue);
            if best.as_ref().map_or(true, |(s, _)| score < *s) {
                best = Some((score, cert));
            }
        }
        // Project out the coefficient components.
        let r = emb.gt(&z);
        let y = gram.solve(&DVector::from_vec(r));
        let y: Vec<f64> = y.iter().copied().collect();
        let gy = emb.g(&y);
        for (b, g) in z.iter_mut().zip(gy) {
            *b -= g;
        }
        // Clip to the PSD cone.
        for b in z.iter_mut() {
            symmetrize(b);
            let eig = SymmetricEigen::new(b.clone());
            let vals = eig.eigenvalues.map(|l| l.max(0.0));
            *b = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
            symmetrize(b);
        }
        normalize(&mut z);
    }
    best.map(|(_, c)| c)
}

#[derive(Default)]
struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    mu: f64,
}

fn failure(status: SdpStatus, nv: usize, z: Blocks, iters: usize, log: Vec<IterationRecord>) -> SdpSolution {
    SdpSolution {
        status,
        x: vec![0.0; nv],
        z,
        objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        duality_gap: f64::INFINITY,
        iters,
        certificate: None,
        log,
    }
}

/// Solves `maximize cᵀx s.t. F₀⁽ᵇ⁾ + Σ xᵢ Fᵢ⁽ᵇ⁾ ⪯ 0`.
///
/// Malformed input is an error; every numerical outcome, including
/// breakdown, is reported through [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    config.validate()?;

    let eq = if config.equilibration_sweeps > 0 {
        Equilibration::compute(problem, config.equilibration_sweeps)
    } else {
        Equilibration::identity(problem)
    };
    let scaled = eq.apply(problem);
    let emb = Embedding::new(&scaled);
    let nv = problem.num_vars();
    let nb = problem.blocks.len();
    let zero_blocks = || problem.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect();

    let Some(mut it) = initial_point(&emb) else {
        return Ok(failure(SdpStatus::NumericalFailure, nv, zero_blocks(), 0, Vec::new()));
    };

    let h_norm = bnorm(&emb.h).max(1.0);
    let q_norm = vnorm(&emb.q).max(1.0);
    let mut log = Vec::new();
    let mut last_step = 0.0;
    let mut stalls = 0usize;

    for iter in 0..=config.max_iters {
        // Residuals of the embedding.
        let gtz = emb.gt(&it.z);
        let rx: Vec<f64> = gtz.iter().zip(&emb.q).map(|(g, q)| g + q * it.tau).collect();
        let gx = emb.g(&it.x);
        let rz: Blocks = gx
            .iter()
            .zip(&it.s)
            .zip(&emb.h)
            .map(|((g, s), h)| g + s - h * it.tau)
            .collect();
        let qx = vdot(&emb.q, &it.x);
        let hz = binner(&emb.h, &it.z);
        let rt = qx + hz + it.kappa;
        let sz = binner(&it.s, &it.z);
        let mu = (sz + it.tau * it.kappa) / (emb.nu as f64 + 1.0);

        let pobj = -qx / it.tau;
        let dobj = hz / it.tau;
        let m = Metrics {
            pres: bnorm(&rz) / it.tau / h_norm,
            dres: vnorm(&rx) / it.tau / q_norm,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            mu,
        };
        log.push(IterationRecord {
            iter,
            mu: m.mu,
            primal_res: m.pres,
            dual_res: m.dres,
            step: last_step,
        });
        if !(m.pres.is_finite() && m.dres.is_finite() && mu.is_finite()) {
            return Ok(failure(SdpStatus::NumericalFailure, nv, zero_blocks(), iter, log));
        }

        // Optimality, judged finally on the unscaled data.
        if m.pres <= config.feas_tol && m.dres <= config.feas_tol && m.gap <= config.gap_tol {
            let xs: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
            let zs: Blocks = it.z.iter().map(|b| b / it.tau).collect();
            let x = eq.unscale_x(&xs);
            let z = eq.unscale_z(&zs);
            let res = residuals_at(problem, &x, &z);
            if res.primal <= config.feas_tol
                && res.dual <= config.feas_tol
                && res.gap <= config.gap_tol
            {
                return Ok(SdpSolution {
                    status: SdpStatus::Optimal,
                    objective: problem.objective(&x),
                    dual_objective: -problem.constant_inner(&z),
                    x,
                    z,
                    primal_residual: res.primal,
                    dual_residual: res.dual,
                    duality_gap: res.gap,
                    iters: iter,
                    certificate: None,
                    log,
                });
            }
        }

        // Infeasibility: dual improving ray.
        if hz < 0.0 {
            let pinf = vnorm(&gtz) / (-hz);
            if pinf <= config.feas_tol {
                let ray = eq.unscale_ray(&it.z);
                if let Some(cert) = clean_certificate(problem, ray) {
                    if check_certificate(problem, &cert).is_valid() {
                        return Ok(SdpSolution {
                            status: SdpStatus::Infeasible,
                            x: vec![0.0; nv],
                            z: cert.blocks.clone(),
                            objective: f64::NAN,
                            dual_objective: f64::INFINITY,
                            primal_residual: m.pres,
                            dual_residual: pinf,
                            duality_gap: f64::NAN,
                            iters: iter,
                            certificate: Some(cert),
                            log,
                        });
                    }
                }
            }
        }

        // Unboundedness: primal improving ray.
        if qx < 0.0 {
            let dinf = gx
                .iter()
                .zip(&it.s)
                .map(|(g, s)| (g + s).norm_squared())
                .sum::<f64>()
                .sqrt()
                / (-qx);
            if dinf <= config.feas_tol {
                let x = eq.unscale_x(&it.x);
                return Ok(SdpSolution {
                    status: SdpStatus::Unbounded,
                    objective: f64::INFINITY,
                    dual_objective: f64::NAN,
                    x,
                    z: zero_blocks(),
                    primal_residual: m.pres,
                    dual_residual: dinf,
                    duality_gap: f64::NAN,
                    iters: iter,
                    certificate: None,
                    log,
                });
            }
        }

        if iter == config.max_iters {
            break;
        }

        // Scaling and factorization.
        let mut nts = Vec::with_capacity(nb);
        for (s, z) in it.s.iter().zip(&it.z) {
            match NtScaling::new(s, z) {
                Some(nt) => nts.push(nt),
                None => {
                    return Ok(failure(SdpStatus::NumericalFailure, nv, zero_blocks(), iter, log))
                }
            }
        }
        let winv: Blocks = nts.iter().map(|nt| nt.winv.clone()).collect();
        let Some(chol) = factor(emb.schur(&winv)) else {
            return Ok(failure(SdpStatus::NumericalFailure, nv, zero_blocks(), iter, log));
        };
        let kkt = KktFactor {
            emb: &emb,
            nts,
            chol,
        };
        let nts = &kkt.nts;

        let negq: Vec<f64> = emb.q.iter().map(|q| -q).collect();
        let (x1, z1) = kkt.solve(&negq, &emb.h);
        let denom = vdot(&emb.q, &x1) + binner(&emb.h, &z1) - it.kappa / it.tau;

        // Predictor (affine) then combined direction.
        let mut affine: Option<(Blocks, Blocks, f64, f64)> = None;
        let mut sigma = 0.0;
        let mut chosen = None;
        for pass in 0..2 {
            let (eta, ds_l, dk): (f64, Blocks, f64) = if pass == 0 {
                let ds = nts
                    .iter()
                    .map(|nt| -DMatrix::from_diagonal(&nt.lambda.map(|l| l * l)))
                    .collect();
                (1.0, ds, -it.tau * it.kappa)
            } else {
                let (dsa, dza, dta, dka) = affine.as_ref().expect("affine pass ran");
                let ds = nts
                    .iter()
                    .zip(dsa.iter().zip(dza))
                    .map(|(nt, (a, b))| {
                        let mut d = -DMatrix::from_diagonal(&nt.lambda.map(|l| l * l));
                        for i in 0..d.nrows() {
                            d[(i, i)] += sigma * mu;
                        }
                        d - jordan(a, b)
                    })
                    .collect();
                (1.0 - sigma, ds, -it.tau * it.kappa + sigma * mu - dta * dka)
            };
            // λ ⋄ ds, mapped back by Wᵀ.
            let ldiv: Blocks = nts.iter().zip(&ds_l).map(|(nt, d)| nt.lambda_div(d)).collect();
            let bx: Vec<f64> = rx.iter().map(|r| -eta * r).collect();
            let bz: Blocks = rz
                .iter()
                .zip(nts.iter().zip(&ldiv))
                .map(|(r, (nt, l))| -(r * eta) - nt.scale_t(l))
                .collect();
            let (x2, z2) = kkt.solve(&bx, &bz);
            let dtau = (-eta * rt - vdot(&emb.q, &x2) - binner(&emb.h, &z2) - dk / it.tau) / denom;
            let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
            let dz: Blocks = z2.iter().zip(&z1).map(|(a, b)| a + b * dtau).collect();
            let dz_l: Blocks = nts.iter().zip(&dz).map(|(nt, d)| nt.scale_z(d)).collect();
            // Δs and Δκ from the linear equations so the residuals shrink
            // by exactly (1 − η·step).
            let gdx = emb.g(&dx);
            let ds: Blocks = rz
                .iter()
                .zip(gdx.iter().zip(&emb.h))
                .map(|(r, (g, h))| -(r * eta) - g + h * dtau)
                .collect();
            let ds_t: Blocks = nts.iter().zip(&ds).map(|(nt, d)| nt.scale_s(d)).collect();
            let dkappa = -eta * rt - vdot(&emb.q, &dx) - binner(&emb.h, &dz);

            let mut step = f64::INFINITY;
            for (nt, (a, b)) in nts.iter().zip(ds_t.iter().zip(&dz_l)) {
                step = step.min(nt.max_step(a)).min(nt.max_step(b));
            }
            if dtau < 0.0 {
                step = step.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                step = step.min(-it.kappa / dkappa);
            }

            if pass == 0 {
                let a = step.min(1.0);
                sigma = (1.0 - a).powi(3).clamp(0.0, 1.0);
                affine = Some((ds_t, dz_l, dtau, dkappa));
            } else {
                chosen = Some((dx, ds, dz, dtau, dkappa, step));
            }
        }

        let (dx, ds, dz, dtau, dkappa, step_max) = chosen.expect("combined pass ran");
        let step = (config.step_fraction * step_max).min(1.0);
        if !step.is_finite() || step <= 0.0 {
            return Ok(failure(SdpStatus::NumericalFailure, nv, zero_blocks(), iter, log));
        }
        for (x, d) in it.x.iter_mut().zip(&dx) {
            *x += step * d;
        }
        for (s, d) in it.s.iter_mut().zip(&ds) {
            *s += d * step;
            symmetrize(s);
        }
        for (z, d) in it.z.iter_mut().zip(&dz) {
            *z += d * step;
            symmetrize(z);
        }
        it.tau += step * dtau;
        it.kappa += step * dkappa;
        last_step = step;

        if step < 1e-10 {
            stalls += 1;
            if stalls >= 5 {
                return Ok(failure(SdpStatus::NumericalFailure, nv, zero_blocks(), iter + 1, log));
            }
        } else {
            stalls = 0;
        }
    }

    let x = eq.unscale_x(&it.x.iter().map(|v| v / it.tau).collect::<Vec<_>>());
    let z = eq.unscale_z(&it.z.iter().map(|b| b / it.tau).collect::<Vec<_>>());
    let res = residuals_at(problem, &x, &z);
    Ok(SdpSolution {
        status: SdpStatus::IterLimit,
        objective: problem.objective(&x),
        dual_objective: -problem.constant_inner(&z),
        x,
        z,
        primal_residual: res.primal,
        dual_residual: res.dual,
        duality_gap: res.gap,
        iters: config.max_iters,
        certificate: None,
        log,
    })
}
