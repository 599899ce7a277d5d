//! Ruiz-style equilibration of block LMI data.
//!
//! Decision variables get individual scale factors `dᵢ`, blocks get positive
//! scalars `e_b` (a congruence by a scalar keeps the PSD ordering), and the
//! constant terms and objective are normalized separately:
//!
//! ```text
//! F̂ᵢ⁽ᵇ⁾ = e_b dᵢ Fᵢ⁽ᵇ⁾,  F̂₀⁽ᵇ⁾ = e_b ρ F₀⁽ᵇ⁾,  ĉᵢ = γ dᵢ cᵢ
//! xᵢ = dᵢ x̂ᵢ / ρ,       Z⁽ᵇ⁾ = e_b Ẑ⁽ᵇ⁾ / γ
//! ```

use nalgebra::DMatrix;

use crate::problem::SdpProblem;

#[derive(Clone, Debug)]
pub(crate) struct Equilibration {
    pub var: Vec<f64>,
    pub block: Vec<f64>,
    pub rhs: f64,
    pub obj: f64,
}

fn clamp_scale(v: f64) -> f64 {
    v.clamp(1e-8, 1e8)
}

impl Equilibration {
    pub fn identity(problem: &SdpProblem) -> Self {
        Self {
            var: vec![1.0; problem.num_vars()],
            block: vec![1.0; problem.blocks.len()],
            rhs: 1.0,
            obj: 1.0,
        }
    }

    pub fn compute(problem: &SdpProblem, sweeps: usize) -> Self {
        let nv = problem.num_vars();
        let nb = problem.blocks.len();
        // Raw ∞-norms of every (variable, block) coefficient.
        let mut raw: Vec<(usize, usize, f64)> = Vec::new();
        for (b, block) in problem.blocks.iter().enumerate() {
            for (i, f) in block.coefficients.iter().enumerate() {
                if !f.is_empty() {
                    raw.push((i, b, f.max_abs()));
                }
            }
        }
        let mut eq = Self::identity(problem);
        for _ in 0..sweeps {
            let mut var_norm = vec![0.0f64; nv];
            let mut block_norm = vec![0.0f64; nb];
            for &(i, b, v) in &raw {
                let scaled = v * eq.var[i] * eq.block[b];
                var_norm[i] = var_norm[i].max(scaled);
                block_norm[b] = block_norm[b].max(scaled);
            }
            for (d, n) in eq.var.iter_mut().zip(&var_norm) {
                if *n > 0.0 {
                    *d = clamp_scale(*d / n.sqrt());
                }
            }
            for (e, n) in eq.block.iter_mut().zip(&block_norm) {
                if *n > 0.0 {
                    *e = clamp_scale(*e / n.sqrt());
                }
            }
        }
        let rhs_norm = problem
            .blocks
            .iter()
            .zip(&eq.block)
            .map(|(b, e)| b.constant.max_abs() * e)
            .fold(0.0, f64::max);
        if rhs_norm > 0.0 {
            eq.rhs = clamp_scale(1.0 / rhs_norm);
        }
        let obj_norm = problem
            .c
            .iter()
            .zip(&eq.var)
            .map(|(c, d)| (c * d).abs())
            .fold(0.0, f64::max);
        if obj_norm > 0.0 {
            eq.obj = clamp_scale(1.0 / obj_norm);
        }
        eq
    }

    pub fn apply(&self, problem: &SdpProblem) -> SdpProblem {
        let mut out = problem.clone();
        for (c, d) in out.c.iter_mut().zip(&self.var) {
            *c *= self.obj * d;
        }
        for (block, e) in out.blocks.iter_mut().zip(&self.block) {
            block.constant.scale(e * self.rhs);
            for (f, d) in block.coefficients.iter_mut().zip(&self.var) {
                f.scale(e * d);
            }
        }
        out
    }

    pub fn unscale_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.var)
            .map(|(x, d)| x * d / self.rhs)
            .collect()
    }

    pub fn unscale_z(&self, z: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        z.iter()
            .zip(&self.block)
            .map(|(zb, e)| zb * (e / self.obj))
            .collect()
    }

    /// Maps a dual ray back without the objective factor (rays are
    /// normalized afterwards anyway).
    pub fn unscale_ray(&self, z: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        z.iter().zip(&self.block).map(|(zb, e)| zb * *e).collect()
    }
}
