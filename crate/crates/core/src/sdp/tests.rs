use super::*;
use approx::assert_relative_eq;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn zero_mat(n: usize) -> DMatrix<Complex64> {
    DMatrix::zeros(n, n)
}

fn eye(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}

fn random_hermitian(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Random Hermitian conditioned on lambda_max >= 0.1, so the trace-capped
/// maximization attains the top eigenvalue (with an all-negative spectrum the
/// optimum would be X = 0 instead).
pub(crate) fn random_hermitian_posmax(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
    let c = random_hermitian(rng, n);
    let lmax = c
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if lmax < 0.1 {
        c + DMatrix::identity(n, n) * Complex64::new(0.1 - lmax, 0.0)
    } else {
        c
    }
}

/// maximize <C, X> s.t. tr(X) <= 1, X >= 0
fn lambda_max_problem(c: DMatrix<Complex64>) -> SdpProblem {
    let n = c.nrows();
    SdpProblem {
        block_dims: vec![n],
        scalar_count: 0,
        objective_blocks: vec![c],
        objective_scalars: vec![],
        constraints: vec![SdpConstraint {
            block_coeffs: vec![eye(n)],
            scalar_coeffs: vec![],
            rhs: 1.0,
            sense: ConstraintSense::Le,
        }],
    }
}

#[test]
fn trivial_trace_maximization() {
    let sol = solve(&lambda_max_problem(eye(1)), &SdpTolerances::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-7);
    assert_relative_eq!(sol.blocks[0][(0, 0)].re, 1.0, epsilon = 1e-6);
    // trace constraint active, multiplier = lambda_max = 1
    assert_relative_eq!(sol.duals[0], 1.0, epsilon = 1e-6);
}

#[test]
fn lambda_max_oracle_50_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let start = std::time::Instant::now();
    for trial in 0..50 {
        let n = 2 + (trial % 5);
        let c = random_hermitian_posmax(&mut rng, n);
        let want = c
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let sol = solve(&lambda_max_problem(c), &SdpTolerances::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal, "trial {trial}");
        assert!(
            (sol.objective - want).abs() <= 1e-7,
            "trial {trial}: got {} want {want}",
            sol.objective
        );
        assert!(
            sol.duality_gap.abs() <= 1e-8 * (1.0 + want.abs()),
            "trial {trial}: gap {}",
            sol.duality_gap
        );
    }
    assert!(
        start.elapsed().as_secs_f64() < 10.0,
        "oracle suite too slow"
    );
}

#[test]
fn infeasible_scalar_program_detected() {
    // maximize u s.t. u <= -1 (u >= 0 from the cone)
    let problem = SdpProblem {
        block_dims: vec![],
        scalar_count: 1,
        objective_blocks: vec![],
        objective_scalars: vec![1.0],
        constraints: vec![SdpConstraint {
            block_coeffs: vec![],
            scalar_coeffs: vec![1.0],
            rhs: -1.0,
            sense: ConstraintSense::Le,
        }],
    };
    let sol = solve(&problem, &SdpTolerances::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
    assert!(matches!(
        sol.certificate,
        Some(SdpCertificate::PrimalInfeasible { .. })
    ));
}

#[test]
fn unbounded_program_detected() {
    // maximize u with no binding constraint on u
    let problem = SdpProblem {
        block_dims: vec![],
        scalar_count: 2,
        objective_blocks: vec![],
        objective_scalars: vec![1.0, 0.0],
        constraints: vec![SdpConstraint {
            block_coeffs: vec![],
            scalar_coeffs: vec![0.0, 1.0],
            rhs: 1.0,
            sense: ConstraintSense::Le,
        }],
    };
    let sol = solve(&problem, &SdpTolerances::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Unbounded);
    match sol.certificate {
        Some(SdpCertificate::Unbounded { scalars, .. }) => {
            assert!(scalars[0] > 0.0);
        }
        other => panic!("expected unbounded certificate, got {other:?}"),
    }
}

#[test]
fn equality_and_scalar_mix() {
    // maximize <C, X> + u  s.t. tr(X) + u = 1, u <= 0.4
    let mut c = zero_mat(2);
    c[(0, 0)] = Complex64::new(2.0, 0.0);
    c[(1, 1)] = Complex64::new(1.0, 0.0);
    let problem = SdpProblem {
        block_dims: vec![2],
        scalar_count: 1,
        objective_blocks: vec![c],
        objective_scalars: vec![1.0],
        constraints: vec![
            SdpConstraint {
                block_coeffs: vec![eye(2)],
                scalar_coeffs: vec![1.0],
                rhs: 1.0,
                sense: ConstraintSense::Eq,
            },
            SdpConstraint {
                block_coeffs: vec![zero_mat(2)],
                scalar_coeffs: vec![1.0],
                rhs: 0.4,
                sense: ConstraintSense::Le,
            },
        ],
    };
    let sol = solve(&problem, &SdpTolerances::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    // all mass on the X eigenvalue worth 2: objective = 2; u stays 0
    assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-6);
    assert!(sol.scalars[0] < 1e-6);
}

#[test]
fn complex_objective_exercises_imaginary_parts() {
    let mut c = zero_mat(2);
    c[(0, 1)] = Complex64::new(0.0, 1.0);
    c[(1, 0)] = Complex64::new(0.0, -1.0);
    let want = 1.0; // lambda_max of the Pauli-Y-like matrix
    let sol = solve(&lambda_max_problem(c), &SdpTolerances::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert_relative_eq!(sol.objective, want, epsilon = 1e-7);
    // optimizer is genuinely complex
    assert!(sol.blocks[0][(0, 1)].im.abs() > 0.1);
}

#[test]
fn certificate_report_flags_constructed_violation() {
    let c = eye(2);
    let problem = lambda_max_problem(c);
    let mut sol = solve(&problem, &SdpTolerances::default()).unwrap();
    let clean = check_certificate(&problem, &sol);
    assert!(clean.max_constraint_violation <= 1e-7);
    assert!(clean.duality_gap.abs() <= 1e-6);
    // perturb the primal: violates the trace constraint by 2e-3
    sol.blocks[0][(0, 0)] += Complex64::new(1e-3, 0.0);
    sol.blocks[0][(1, 1)] += Complex64::new(1e-3, 0.0);
    let dirty = check_certificate(&problem, &sol);
    assert!(dirty.max_constraint_violation > 1e-3);
}

#[test]
fn hand_built_solution_has_zero_residuals() {
    // maximize x11 s.t. x11 <= 1 with optimal pair (X = 1, y = 1)
    let problem = lambda_max_problem(eye(1));
    let sol = SdpSolution {
        status: SdpStatus::Optimal,
        blocks: vec![eye(1)],
        scalars: vec![],
        duals: vec![1.0],
        objective: 1.0,
        dual_objective: 1.0,
        duality_gap: 0.0,
        max_primal_residual: 0.0,
        max_dual_residual: 0.0,
        iterations: 0,
        certificate: None,
        schur_cond: 1.0,
        diagnostics: String::new(),
    };
    let report = check_certificate(&problem, &sol);
    assert_eq!(report.max_constraint_violation, 0.0);
    assert_eq!(report.duality_gap, 0.0);
    assert_eq!(report.max_complementarity, 0.0);
    assert_eq!(report.max_sign_violation, 0.0);
}

#[test]
fn deterministic_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_hermitian(&mut rng, 4);
    let problem = lambda_max_problem(c);
    let a = solve(&problem, &SdpTolerances::default()).unwrap();
    let b = solve(&problem, &SdpTolerances::default()).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.iterations, b.iterations);
    for (x, y) in a.blocks[0].iter().zip(b.blocks[0].iter()) {
        assert_eq!(x.re.to_bits(), y.re.to_bits());
        assert_eq!(x.im.to_bits(), y.im.to_bits());
    }
}

#[test]
fn objective_scaling_scales_value_not_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = random_hermitian(&mut rng, 3);
    let base = solve(&lambda_max_problem(c.clone()), &SdpTolerances::default()).unwrap();
    let scaled = solve(
        &lambda_max_problem(c * Complex64::new(7.0, 0.0)),
        &SdpTolerances::default(),
    )
    .unwrap();
    assert_relative_eq!(scaled.objective, 7.0 * base.objective, max_relative = 1e-6);
    let diff = (&scaled.blocks[0] - &base.blocks[0]).norm();
    assert!(diff < 1e-5, "argmax moved by {diff}");
}

#[test]
fn weak_duality_on_optimal_returns() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let c = random_hermitian(&mut rng, 3);
        let sol = solve(&lambda_max_problem(c), &SdpTolerances::default()).unwrap();
        assert!(sol.objective <= sol.dual_objective + 1e-9 * (1.0 + sol.objective.abs()));
    }
}

#[test]
fn rejects_non_hermitian_coefficients() {
    let mut c = zero_mat(2);
    c[(0, 1)] = Complex64::new(1.0, 0.0); // no conjugate partner
    let problem = lambda_max_problem(c);
    assert!(matches!(
        solve(&problem, &SdpTolerances::default()),
        Err(SdpError::NotHermitian(_))
    ));
}

#[test]
fn dump_has_expected_records() {
    let problem = lambda_max_problem(eye(2));
    let dump = dump_problem(&problem);
    assert!(dump.contains("blocks 2"));
    assert!(dump.contains("con 0 LE"));
    assert!(dump.lines().any(|l| l.starts_with("obj 0 0 0")));
    assert!(dump.lines().any(|l| l.starts_with("coef 0 0 1 1")));
}
