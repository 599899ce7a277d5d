use nalgebra::DMatrix;
use qbstab_sdp::{
    check_block_feasibility, check_certificate, kkt_residuals, solve, SdpProblem, SdpStatus,
    SolverConfig, SymSparse,
};

/// maximize x  s.t.  [x − 1] ⪯ 0
fn one_by_one() -> SdpProblem {
    let mut p = SdpProblem::new(vec![1.0]);
    let b = p.add_block(1);
    b.constant = SymSparse::scaled_identity(1, -1.0);
    b.coefficients[0].push(0, 0, 1.0);
    p
}

/// Scalar ROA problem: maximize p s.t. [[(2a + εh² + α)p, p], [p, −ε]] ⪯ 0
/// together with δ − p ≤ 0.
fn scalar_roa(a: f64, h: f64, eps: f64, alpha: f64) -> SdpProblem {
    let mut p = SdpProblem::new(vec![1.0]);
    let main = p.add_block(2);
    main.constant.push(1, 1, -eps);
    main.coefficients[0].push(0, 0, 2.0 * a + eps * h * h + alpha);
    main.coefficients[0].push(0, 1, 1.0);
    let lower = p.add_block(1);
    lower.constant = SymSparse::scaled_identity(1, 1e-8);
    lower.coefficients[0].push(0, 0, -1.0);
    p
}

#[test]
fn trivial_one_by_one() {
    let p = one_by_one();
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-7, "x = {}", sol.x[0]);
    let r = kkt_residuals(&p, &sol);
    assert!(r.primal <= 1e-10 && r.dual <= 1e-10 && r.gap <= 1e-8, "{r:?}");
}

#[test]
fn scalar_closed_form_optimum() {
    // p* = −ε(2a + εh² + α) = 0.99
    let p = scalar_roa(-1.0, 1.0, 1.0, 0.01);
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.x[0] - 0.99).abs() < 1e-6, "p = {}", sol.x[0]);
    let r = kkt_residuals(&p, &sol);
    assert!(r.gap <= 1e-8);
    // Reported residuals agree with the independent recomputation.
    let tol = SolverConfig::default().feas_tol;
    assert!((r.primal - sol.primal_residual).abs() <= 10.0 * tol);
    assert!((r.dual - sol.dual_residual).abs() <= 10.0 * tol);
}

#[test]
fn perturbed_solution_is_flagged() {
    let p = scalar_roa(-1.0, 1.0, 1.0, 0.01);
    let mut sol = solve(&p, &SolverConfig::default()).unwrap();
    sol.x[0] += 1e-3;
    let r = kkt_residuals(&p, &sol);
    assert!(r.primal > SolverConfig::default().feas_tol);
}

#[test]
fn block_feasibility_report() {
    let p = scalar_roa(-1.0, 1.0, 1.0, 0.01);
    assert!(check_block_feasibility(&p, &[0.99], 1e-12).max_eigenvalues[0] <= 1e-12);
    assert!(check_block_feasibility(&p, &[2.0], 0.0).max_eigenvalues[0] > 0.0);

    let mut q = SdpProblem::new(vec![0.0]);
    let b = q.add_block(2);
    b.constant = SymSparse::scaled_identity(2, -1.0);
    b.coefficients[0].push(0, 1, 1.0);
    let rep = check_block_feasibility(&q, &[0.0], 0.0);
    assert!((rep.max_eigenvalues[0] + 1.0).abs() < 1e-14);
}

#[test]
fn lyapunov_feasibility() {
    // Find P = [p0 p1/√2; p1/√2 p2] with AP + PAᵀ ⪯ −δI, P ⪰ δI, A = −I.
    let delta = 1e-3;
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
    let basis = |k: usize| -> DMatrix<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match k {
            0 => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            1 => DMatrix::from_row_slice(2, 2, &[0.0, s, s, 0.0]),
            _ => DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        }
    };
    let mut p = SdpProblem::new(vec![0.0; 3]);
    {
        let main = p.add_block(2);
        main.constant = SymSparse::scaled_identity(2, delta);
        for k in 0..3 {
            let e = basis(k);
            main.coefficients[k] = SymSparse::from_dense(&(&a * &e + &e * a.transpose())).unwrap();
        }
    }
    {
        let lower = p.add_block(2);
        lower.constant = SymSparse::scaled_identity(2, delta);
        for k in 0..3 {
            lower.coefficients[k] = SymSparse::from_dense(&(-basis(k))).unwrap();
        }
    }
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(check_block_feasibility(&p, &sol.x, 1e-7).feasible());
}

#[test]
fn infeasible_lmi_has_verifiable_certificate() {
    // Unstable scalar system: (2a + εh²)p + p²/ε ≤ 0 has no p ≥ δ > 0.
    let p = scalar_roa(1.0, 1.0, 1.0, 0.0);
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
    let cert = sol.certificate.expect("certificate attached");
    let chk = check_certificate(&p, &cert);
    assert!(chk.is_valid(), "{chk:?}");
}

#[test]
fn solve_is_deterministic() {
    let p = scalar_roa(-1.0, 1.0, 0.7, 0.05);
    let a = solve(&p, &SolverConfig::default()).unwrap();
    let b = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.iters, b.iters);
}

#[test]
fn block_scaling_leaves_optimum_unchanged() {
    let p = scalar_roa(-1.0, 1.0, 1.0, 0.01);
    let a = solve(&p, &SolverConfig::default()).unwrap();
    let b = solve(&p.with_blocks_scaled(1e3), &SolverConfig::default()).unwrap();
    assert_eq!(b.status, SdpStatus::Optimal);
    assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs());
}

#[test]
fn weak_duality_at_optimum() {
    let p = scalar_roa(-2.0, 0.5, 0.3, 0.0);
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(sol.objective <= sol.dual_objective + SolverConfig::default().gap_tol);
}

#[test]
fn unbounded_objective_detected() {
    // maximize x s.t. −x ≤ 0
    let mut p = SdpProblem::new(vec![1.0]);
    let b = p.add_block(1);
    b.coefficients[0].push(0, 0, -1.0);
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Unbounded);
}

#[test]
fn iteration_log_csv_has_header() {
    let sol = solve(&one_by_one(), &SolverConfig::default()).unwrap();
    let mut buf = Vec::new();
    sol.write_log_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iter,mu,primal_res,dual_res,step\n"));
    assert_eq!(text.lines().count(), sol.log.len() + 1);
}

#[test]
fn invalid_config_rejected() {
    let cfg = SolverConfig {
        step_fraction: 1.0,
        ..SolverConfig::default()
    };
    assert!(solve(&one_by_one(), &cfg).is_err());
}
