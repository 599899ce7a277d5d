//! Block LMIs for region-of-attraction analysis and state-feedback synthesis.
//!
//! Decision vector `x = svec(P) ⊕ vec(Y)`. The main block (maximize trace P):
//!
//! ```text
//! ⎡ AP + PAᵀ + BY + YᵀBᵀ + ε Σ HᵢPHᵢᵀ + ε Σ DⱼPDⱼᵀ + αP    P   [Yᵀ 0] ⎤
//! ⎢ P                                                     −εI    0    ⎥ ⪯ 0
//! ⎣ [Yᵀ 0]ᵀ                                                0    −εI   ⎦
//! ```
//!
//! Analysis drops `B`, `D`, `Y` and the last row/column. A second block
//! enforces `δI − P ⪯ 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use qbstab_sdp::{SdpProblem, SymSparse};

use crate::error::{QbError, Result};
use crate::linalg::{spd_inv_sqrt, spd_sqrt};
use crate::system::{symmetry_defect, QbSystem, SYMMETRY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analysis,
    Synthesis,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Analysis => "analysis",
            Mode::Synthesis => "synthesis",
        })
    }
}

/// Position of `P` (upper triangle, column-major, √2-scaled off the diagonal)
/// followed by `Y` (row-major) in the flat decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionLayout {
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
}

impl DecisionLayout {
    pub fn new(n: usize, m: usize, mode: Mode) -> Result<Self> {
        if n == 0 {
            return Err(QbError::InvalidArgument("n must be positive".into()));
        }
        if mode == Mode::Synthesis && m == 0 {
            return Err(QbError::InvalidArgument("synthesis requires m >= 1".into()));
        }
        let m = if mode == Mode::Analysis { 0 } else { m };
        Ok(Self { n, m, mode })
    }

    pub fn p_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn d(&self) -> usize {
        self.p_len() + self.m * self.n
    }

    /// Index of `P[i][j]`; symmetric in its arguments.
    pub fn p_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        j * (j + 1) / 2 + i
    }

    pub fn y_index(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.m && c < self.n);
        self.p_len() + r * self.n + c
    }

    /// Iterates `(i, j, index)` with `i <= j`.
    pub fn p_entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n).flat_map(move |j| (0..=j).map(move |i| (i, j, self.p_index(i, j))))
    }

    pub fn pack(&self, p: &DMatrix<f64>, y: Option<&DMatrix<f64>>) -> Result<Vec<f64>> {
        if p.shape() != (self.n, self.n) {
            return Err(QbError::Shape(format!("P must be {0}x{0}", self.n)));
        }
        let mut x = svec(p).as_slice().to_vec();
        match (self.mode, y) {
            (Mode::Analysis, None) => {}
            (Mode::Synthesis, Some(y)) if y.shape() == (self.m, self.n) => {
                x.extend(y.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()));
            }
            _ => return Err(QbError::Shape(format!("Y must be {}x{} in {} mode", self.m, self.n, self.mode))),
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
        if x.len() != self.d() {
            return Err(QbError::Shape(format!("decision vector must have length {}", self.d())));
        }
        let p = smat(&x[..self.p_len()], self.n);
        let y = (self.mode == Mode::Synthesis)
            .then(|| DMatrix::from_row_slice(self.m, self.n, &x[self.p_len()..]));
        Ok((p, y))
    }
}

/// Half-vectorization with √2 off-diagonal weights, so `svec(A)·svec(B) = ⟨A, B⟩`.
pub fn svec(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    DVector::from_vec(out)
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            let val = if i == j { v[k] } else { v[k] * std::f64::consts::FRAC_1_SQRT_2 };
            p[(i, j)] = val;
            p[(j, i)] = val;
            k += 1;
        }
    }
    p
}

/// Decay margin used when a strict inequality is requested: `1e-6·‖A‖_F`.
pub fn default_alpha(sys: &QbSystem) -> f64 {
    1e-6 * sys.a().norm()
}

/// Lower bound in `P ⪰ δI`: `1e-8·max(1, 1/‖A‖_F)`.
pub fn default_delta(sys: &QbSystem) -> f64 {
    let na = sys.a().norm();
    if na > 0.0 {
        1e-8 * (1.0 / na).max(1.0)
    } else {
        1e-8
    }
}

#[derive(Clone, Debug)]
pub struct LmiProblem {
    pub layout: DecisionLayout,
    pub sdp: SdpProblem,
    pub epsilon: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl LmiProblem {
    /// Main block evaluated at `(P, Y)`.
    pub fn main_block(&self, p: &DMatrix<f64>, y: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
        let x = self.layout.pack(p, y)?;
        Ok(self.sdp.blocks[0].evaluate(&x))
    }
}

pub fn layout(n: usize, m: usize, mode: Mode) -> Result<DecisionLayout> {
    DecisionLayout::new(n, m, mode)
}

pub fn assemble(sys: &QbSystem, epsilon: f64, alpha: f64, mode: Mode) -> Result<LmiProblem> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(QbError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(QbError::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
    }
    let n = sys.n();
    if symmetry_defect(sys.h(), n) > SYMMETRY_TOL * sys.h().amax().max(1.0) {
        return Err(QbError::InvalidArgument(
            "H must be symmetric; apply symmetrize_quadratic first".into(),
        ));
    }
    let lay = DecisionLayout::new(n, sys.m(), mode)?;
    let delta = default_delta(sys);
    let synth = mode == Mode::Synthesis;
    let dim = if synth { 3 * n } else { 2 * n };

    let mut c = vec![0.0; lay.d()];
    for i in 0..n {
        c[lay.p_index(i, i)] = 1.0;
    }
    let mut sdp = SdpProblem::new(c);

    // Nonzero pattern of the columns of every Hᵢ and Dⱼ, used to skip
    // empty outer products.
    let a = sys.a();
    let h = sys.h();
    let h_nz: Vec<bool> = (0..n * n).map(|col| h.column(col).iter().any(|v| *v != 0.0)).collect();
    let d_list: &[DMatrix<f64>] = if synth { sys.d() } else { &[] };

    let main = sdp.add_block(dim);
    for r in n..dim {
        main.constant.push(r, r, -epsilon);
    }
    let mut tl = DMatrix::<f64>::zeros(n, n);
    for (i, j, k) in lay.p_entries() {
        let s = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        tl.fill(0.0);
        // A E with E = s (eᵢeⱼᵀ + eⱼeᵢᵀ); diagonal E = eᵢeᵢᵀ.
        {
            let mut cj = tl.column_mut(j);
            cj.axpy(s, &a.column(i), 1.0);
        }
        if i != j {
            let mut ci = tl.column_mut(i);
            ci.axpy(s, &a.column(j), 1.0);
        }
        tl = &tl + tl.transpose();
        for l in 0..n {
            let (ci, cj) = (l * n + i, l * n + j);
            if !(h_nz[ci] && h_nz[cj]) {
                continue;
            }
            add_sym_outer(&mut tl, epsilon * s, &h.column(ci).into_owned(), &h.column(cj).into_owned(), i == j);
        }
        for dm in d_list {
            add_sym_outer(&mut tl, epsilon * s, &dm.column(i).into_owned(), &dm.column(j).into_owned(), i == j);
        }
        tl[(i, j)] += alpha * s;
        if i != j {
            tl[(j, i)] += alpha * s;
        }
        let f = &mut main.coefficients[k];
        for col in 0..n {
            for row in 0..=col {
                f.push(row, col, tl[(row, col)]);
            }
        }
        // Off-diagonal P slot.
        f.push(i, n + j, s);
        if i != j {
            f.push(j, n + i, s);
        }
        f.compress();
    }
    if synth {
        let b = sys.b();
        for r in 0..lay.m {
            for cc in 0..n {
                let k = lay.y_index(r, cc);
                let f = &mut main.coefficients[k];
                // B eᵣ e_cᵀ + its transpose: column cc gets B[:, r].
                for p in 0..n {
                    let v = b[(p, r)];
                    f.push(p, cc, if p == cc { 2.0 * v } else { v });
                }
                // Yᵀ occupies the first m columns of the second off-diagonal slot.
                f.push(cc, 2 * n + r, 1.0);
                f.compress();
            }
        }
    }

    let lower = sdp.add_block(n);
    lower.constant = SymSparse::scaled_identity(n, delta);
    for (i, j, k) in lay.p_entries() {
        let s = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        lower.coefficients[k].push(i, j, -s);
    }
    sdp.validate()?;
    Ok(LmiProblem {
        layout: lay,
        sdp,
        epsilon,
        alpha,
        delta,
    })
}

/// `M += w (u vᵀ + v uᵀ)`, or `w u uᵀ` when `diag`.
fn add_sym_outer(m: &mut DMatrix<f64>, w: f64, u: &DVector<f64>, v: &DVector<f64>, diag: bool) {
    if diag {
        m.ger(w, u, u, 1.0);
    } else {
        m.ger(w, u, v, 1.0);
        m.ger(w, v, u, 1.0);
    }
}

/// `G`, `M`, `N` of the norm-bounded uncertainty form
/// `G + MΔN + NᵀΔᵀMᵀ ⪯ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PetersenParts {
    pub g: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

impl PetersenParts {
    /// `G + εMMᵀ + NᵀN/ε + αP`.
    pub fn bound(&self, epsilon: f64, alpha: f64, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g + &self.m * self.m.transpose() * epsilon + self.n.transpose() * &self.n / epsilon + p * alpha
    }
}

/// Analysis (`k = None`): `G = AP + PAᵀ`, `M = [HᵢP^½]ᵢ`, `N = P`.
/// Synthesis: `G = (A+BK)P + P(A+BK)ᵀ`, `M = [DᵢP^½]ᵢ ⊕ [HᵢP^½]ᵢ` with
/// `Dᵢ = 0` for `i > m`, `N = [K̃P; P]`, `K̃ = [K; 0]`.
pub fn petersen_parts(sys: &QbSystem, p: &DMatrix<f64>, k: Option<&DMatrix<f64>>) -> Result<PetersenParts> {
    let n = sys.n();
    if p.shape() != (n, n) {
        return Err(QbError::Shape(format!("P must be {n}x{n}")));
    }
    let root = spd_sqrt(p)?;
    let h = sys.h();
    match k {
        None => {
            let g = sys.a() * p + p * sys.a().transpose();
            let mut mm = DMatrix::zeros(n, n * n);
            for i in 0..n {
                mm.columns_mut(i * n, n).copy_from(&(h.columns(i * n, n) * &root));
            }
            Ok(PetersenParts { g, m: mm, n: p.clone() })
        }
        Some(k) => {
            let mdim = sys.m();
            if mdim == 0 {
                return Err(QbError::InvalidArgument("a gain needs m >= 1".into()));
            }
            if k.shape() != (mdim, n) {
                return Err(QbError::Shape(format!("K must be {mdim}x{n}")));
            }
            let acl = sys.a() + sys.b() * k;
            let g = &acl * p + p * acl.transpose();
            let mut mm = DMatrix::zeros(n, 2 * n * n);
            for (j, dj) in sys.d().iter().enumerate() {
                mm.columns_mut(j * n, n).copy_from(&(dj * &root));
            }
            for i in 0..n {
                mm.columns_mut(n * n + i * n, n).copy_from(&(h.columns(i * n, n) * &root));
            }
            let mut nn = DMatrix::zeros(2 * n, n);
            nn.view_mut((0, 0), (mdim, n)).copy_from(&(k * p));
            nn.view_mut((n, 0), (n, n)).copy_from(p);
            Ok(PetersenParts { g, m: mm, n: nn })
        }
    }
}

/// The uncertainty `Δ(x)`: the stack of `P^{-½} x eᵢᵀ` (analysis), or two
/// copies on the block diagonal (synthesis). `ΔᵀΔ = (xᵀP⁻¹x) I`.
pub fn delta_matrix(n: usize, p: &DMatrix<f64>, x: &DVector<f64>, mode: Mode) -> Result<DMatrix<f64>> {
    if p.shape() != (n, n) || x.len() != n {
        return Err(QbError::Shape(format!("P must be {n}x{n} and x of length {n}")));
    }
    let w = spd_inv_sqrt(p)? * x;
    let mut stack = DMatrix::zeros(n * n, n);
    for i in 0..n {
        stack.view_mut((i * n, i), (n, 1)).copy_from(&w);
    }
    Ok(match mode {
        Mode::Analysis => stack,
        Mode::Synthesis => {
            let mut d = DMatrix::zeros(2 * n * n, 2 * n);
            d.view_mut((0, 0), (n * n, n)).copy_from(&stack);
            d.view_mut((n * n, n), (n * n, n)).copy_from(&stack);
            d
        }
    })
}

/// Spectral norm of [`delta_matrix`].
pub fn delta_norm(sys: &QbSystem, p: &DMatrix<f64>, x: &DVector<f64>, mode: Mode) -> Result<f64> {
    let d = delta_matrix(sys.n(), p, x, mode)?;
    Ok(d.singular_values().max())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, h: f64) -> QbSystem {
        QbSystem::quadratic(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, h)).unwrap()
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(layout(2, 0, Mode::Analysis).unwrap().d(), 3);
        assert_eq!(layout(3, 2, Mode::Synthesis).unwrap().d(), 12);
        assert_eq!(layout(9, 0, Mode::Analysis).unwrap().d(), 45);
        assert!(layout(3, 0, Mode::Synthesis).is_err());
    }

    #[test]
    fn index_maps_are_a_bijection() {
        let lay = layout(4, 2, Mode::Synthesis).unwrap();
        let mut seen = vec![false; lay.d()];
        for (_, _, k) in lay.p_entries() {
            assert!(!seen[k]);
            seen[k] = true;
        }
        for r in 0..2 {
            for c in 0..4 {
                let k = lay.y_index(r, c);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn scalar_main_block() {
        let lmi = assemble(&scalar(-1.0, 1.0), 1.0, 0.0, Mode::Analysis).unwrap();
        let blk = lmi.main_block(&DMatrix::from_element(1, 1, 1.0), None).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!((blk - want).amax() < 1e-15);
        assert_eq!(lmi.sdp.blocks.len(), 2);
    }

    #[test]
    fn scalar_petersen_parts() {
        let parts = petersen_parts(&scalar(-1.0, 1.0), &DMatrix::from_element(1, 1, 1.0), None).unwrap();
        assert_eq!((parts.g[(0, 0)], parts.m[(0, 0)], parts.n[(0, 0)]), (-2.0, 1.0, 1.0));
    }

    #[test]
    fn delta_norm_basics() {
        let sys = QbSystem::quadratic(DMatrix::identity(2, 2) * -1.0, DMatrix::zeros(2, 4)).unwrap();
        let p = DMatrix::identity(2, 2);
        assert_eq!(delta_norm(&sys, &p, &DVector::zeros(2), Mode::Analysis).unwrap(), 0.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert!((delta_norm(&sys, &p, &e1, Mode::Synthesis).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_scalars() {
        let sys = scalar(-1.0, 1.0);
        assert!(assemble(&sys, 0.0, 0.0, Mode::Analysis).is_err());
        assert!(assemble(&sys, 1.0, -1.0, Mode::Analysis).is_err());
    }
}
