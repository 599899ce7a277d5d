//! Ellipsoids `{x : xᵀP⁻¹x ≤ 1}`, their volumes and Monte Carlo union volumes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{QbError, Result};
use crate::linalg::{spd_cholesky, spd_eigen, spd_sqrt};

#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    p: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        spd_eigen(&p)?;
        Ok(Self { p })
    }

    /// For `P` already known to be positive definite.
    pub(crate) fn new_unchecked(p: DMatrix<f64>) -> Self {
        Self { p }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// `xᵀP⁻¹x`.
    pub fn gauge(&self, x: &DVector<f64>) -> Result<f64> {
        let chol = spd_cholesky(&self.p)?;
        Ok(x.dot(&chol.solve(x)))
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        Ok(self.gauge(x)? <= 1.0)
    }

    pub fn volume(&self) -> f64 {
        ellipsoid_volume(self)
    }

    /// Semi-axis lengths `√λᵢ` (descending) and unit directions as columns.
    pub fn principal_axes(&self) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let eig = spd_eigen(&self.p)?;
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lengths = order.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
        let dirs = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok((lengths, dirs))
    }

    /// `count` points on the boundary of a planar ellipse, `P^½ (cos θ, sin θ)`.
    pub fn boundary_polyline(&self, count: usize) -> Result<Vec<[f64; 2]>> {
        if self.dim() != 2 {
            return Err(QbError::InvalidArgument("boundary polyline needs n = 2".into()));
        }
        let root = spd_sqrt(&self.p)?;
        Ok((0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                let v = &root * DVector::from_vec(vec![t.cos(), t.sin()]);
                [v[0], v[1]]
            })
            .collect())
    }

    /// Half-widths `√P_ii` of the enclosing axis-aligned box.
    pub fn half_widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.p[(i, i)].sqrt()).collect()
    }
}

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// `V_n √det P`.
pub fn ellipsoid_volume(e: &Ellipsoid) -> f64 {
    unit_ball_volume(e.dim()) * e.p.determinant().max(0.0).sqrt()
}

#[derive(Clone, Debug)]
pub struct UnionRegion {
    members: Vec<Ellipsoid>,
}

impl UnionRegion {
    pub fn new(members: Vec<Ellipsoid>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(QbError::InvalidArgument("union needs at least one ellipsoid".into()));
        };
        let n = first.dim();
        if members.iter().any(|e| e.dim() != n) {
            return Err(QbError::Shape("union members differ in dimension".into()));
        }
        Ok(Self { members })
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn members(&self) -> &[Ellipsoid] {
        &self.members
    }
}

/// Samples per independent RNG stream.
const CHUNK: usize = 1 << 14;

/// Hit-or-miss estimate over the members' joint bounding box. Returns
/// `(estimate, standard error)`. Each chunk of samples draws from its own
/// stream seeded from `(seed, chunk)`, so the result is independent of
/// the thread count.
pub fn union_volume(region: &UnionRegion, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 10_000 {
        return Err(QbError::InvalidArgument(format!("need at least 1e4 samples, got {samples}")));
    }
    let n = region.dim();
    let mut half = vec![0.0f64; n];
    for e in region.members() {
        for (h, w) in half.iter_mut().zip(e.half_widths()) {
            *h = h.max(w);
        }
    }
    let inverses = region
        .members()
        .iter()
        .map(|e| spd_cholesky(e.shape()).map(|c| c.inverse()))
        .collect::<Result<Vec<_>>>()?;
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(samples - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut x = DVector::zeros(n);
            let mut hits = 0usize;
            for _ in 0..len {
                for (xi, h) in x.iter_mut().zip(&half) {
                    *xi = rng.random_range(-*h..=*h);
                }
                if inverses.iter().any(|q| quadratic_form(q, &x) <= 1.0) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let box_volume: f64 = half.iter().map(|h| 2.0 * h).product();
    let frac = hits as f64 / samples as f64;
    let se = box_volume * (frac * (1.0 - frac) / samples as f64).sqrt();
    Ok((box_volume * frac, se))
}

/// `xᵀQx` without allocating.
fn quadratic_form(q: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    q.column_iter().zip(x.iter()).map(|(col, xj)| col.dot(x) * xj).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn ellipse_areas() {
        let e = Ellipsoid::new(DMatrix::identity(2, 2)).unwrap();
        assert!((e.volume() - PI).abs() < 1e-15);
        let e = Ellipsoid::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert!((e.volume() - 6.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn too_few_samples_rejected() {
        let r = UnionRegion::new(vec![Ellipsoid::new(DMatrix::identity(2, 2)).unwrap()]).unwrap();
        assert!(union_volume(&r, 9_999, 0).is_err());
    }

    #[test]
    fn axes_and_boundary() {
        let e = Ellipsoid::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        let (len, dirs) = e.principal_axes().unwrap();
        assert!((len[0] - 2.0).abs() < 1e-14 && (len[1] - 1.0).abs() < 1e-14);
        assert!((dirs[(1, 0)].abs() - 1.0).abs() < 1e-14);
        for p in e.boundary_polyline(32).unwrap() {
            let x = DVector::from_vec(p.to_vec());
            assert!((e.gauge(&x).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
