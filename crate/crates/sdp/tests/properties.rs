use nalgebra::DMatrix;
use proptest::prelude::*;
use qbstab_sdp::{SdpProblem, SymSparse};

fn sym(dim: usize, vals: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |i, j| vals[(i * dim + j) % vals.len()]);
    &m + m.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_round_trip(dim in 1usize..6, vals in prop::collection::vec(-5.0f64..5.0, 36)) {
        let m = sym(dim, &vals);
        let s = SymSparse::from_dense(&m).unwrap();
        prop_assert_eq!(s.to_dense(), m.clone());
        prop_assert!((s.frobenius_norm() - m.norm()).abs() <= 1e-12 * m.norm().max(1.0));
    }

    /// `Σ_b ⟨F⁽ᵇ⁾(x), Z⁽ᵇ⁾⟩ = ⟨F₀, Z⟩ + xᵀ A*(Z)`.
    #[test]
    fn adjoint_is_consistent(
        dims in prop::collection::vec(1usize..5, 1..4),
        vals in prop::collection::vec(-2.0f64..2.0, 64),
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let mut p = SdpProblem::new(vec![0.0; x.len()]);
        let mut zs = Vec::new();
        for (b, &dim) in dims.iter().enumerate() {
            let shift = |k: usize| -> Vec<f64> { vals.iter().cycle().skip(k).take(vals.len()).copied().collect() };
            let block = p.add_block(dim);
            block.constant = SymSparse::from_dense(&sym(dim, &shift(b))).unwrap();
            for i in 0..x.len() {
                block.coefficients[i] = SymSparse::from_dense(&sym(dim, &shift(7 * b + 3 * i + 1))).unwrap();
            }
            zs.push(sym(dim, &shift(11 * b + 5)));
        }
        let lhs: f64 = p.evaluate(&x).iter().zip(&zs).map(|(f, z)| f.dot(z)).sum();
        let adj = p.adjoint(&zs);
        let rhs = p.constant_inner(&zs) + x.iter().zip(&adj).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}
