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

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut c = DMatrix::zeros(1,1);
    for trial in 0..=31 {
        let n = 2 + (trial % 5);
        c = random_hermitian(&mut rng, n);
    }
    let n = c.nrows();
    let want = c.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let problem = SdpProblem {
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
    };
    let sol = solve(&problem, &SdpTolerances::default()).unwrap();
    println!("status {:?} obj {:.12e} want {want:.12e} iters {}", sol.status, sol.objective, sol.iterations);
}
