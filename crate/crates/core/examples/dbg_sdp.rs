// quick probe of the failing oracle instances
use isac_core::sdp::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

fn lambda_max_problem(c: DMatrix<Complex64>) -> SdpProblem {
    let n = c.nrows();
    SdpProblem {
        block_dims: vec![n],
        scalar_count: 0,
        objective_blocks: vec![c],
        objective_scalars: vec![],
        constraints: vec![SdpConstraint {
            block_coeffs: vec![DMatrix::identity(n, n)],
            scalar_coeffs: vec![],
            rhs: 1.0,
            sense: ConstraintSense::Le,
        }],
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..50 {
        let n = 2 + (trial % 5);
        let c = random_hermitian(&mut rng, n);
        let want = c.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sol = solve(&lambda_max_problem(c), &SdpTolerances::default()).unwrap();
        let err = (sol.objective - want).abs();
        if sol.status != SdpStatus::Optimal || err > 1e-7 {
            println!("trial {trial}: n={n} status {:?} obj {:.12e} want {:.12e} err {err:.3e} iter {} gap {:.3e} pres {:.3e} dres {:.3e} diag '{}'",
                sol.status, sol.objective, want, sol.iterations, sol.duality_gap, sol.max_primal_residual, sol.max_dual_residual, sol.diagnostics);
        }
    }
    // Pauli-Y instance
    let mut c = DMatrix::<Complex64>::zeros(2, 2);
    c[(0, 1)] = Complex64::new(0.0, 1.0);
    c[(1, 0)] = Complex64::new(0.0, -1.0);
    let sol = solve(&lambda_max_problem(c), &SdpTolerances::default()).unwrap();
    println!("pauli: status {:?} obj {:.12e} iters {} diag '{}'", sol.status, sol.objective, sol.iterations, sol.diagnostics);
}
