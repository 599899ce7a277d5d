#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qbstab::{symmetrize_quadratic, QbSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Well-conditioned SPD matrix: `GGᵀ + I/2`.
pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = matrix(rng, n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Random QB system with symmetric quadratic part; `m` may be zero.
pub fn system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QbSystem {
    let a = matrix(rng, n, n);
    let h = symmetrize_quadratic(&matrix(rng, n, n * n), n).unwrap();
    let b = matrix(rng, n, m);
    let d = (0..m).map(|_| matrix(rng, n, n)).collect();
    QbSystem::new(a, h, b, d).unwrap()
}

pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
