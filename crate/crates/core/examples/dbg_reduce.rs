use isac_core::array::*;
use isac_core::beam::*;
use isac_core::pcrb::q_bar;
use isac_core::scenario::ScenarioConfig;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

fn main() {
    let array = ArrayConfig::new(8, 10, 0.5).unwrap();
    let d = PI / 180.0;
    let prior = LocationPrior::new(
        200.0,
        vec![-55.0 * d, -35.0 * d, 65.0 * d, 45.0 * d],
        vec![0.2, 0.3, 0.1, 0.4],
        1e-2,
    )
    .unwrap();
    let h = los_user_channel(-10.0 * d, 30.0, &array).unwrap();
    let channels = ChannelParams::new(0.1, 0.0071, 1e-9, 1e-9, 1e-9, 0.1, h.clone()).unwrap();
    let sc = ScenarioConfig::new(array, prior, channels, 2.68e-5).unwrap();
    let qbar = q_bar(&sc.prior, &sc.array);
    let r = solve_inner_with(1e-4, &sc, &qbar, &inner_tolerances()).unwrap();
    // replicate reconstruct: projection of W and raw v_bar
    let n = 8;
    let h_outer: DMatrix<Complex64> = &h * h.adjoint();
    let tr_h = |m: &DMatrix<Complex64>| (h_outer.adjoint() * m).trace().re;
    println!("raw V: tr(HV) + t s2 - 1 = {:+.6e}", tr_h(&r.v_mat) + r.t * 1e-9 - 1.0);
    let evs = r.v_mat.clone().symmetric_eigen().eigenvalues;
    let mut e: Vec<f64> = evs.iter().cloned().collect();
    e.sort_by(|a,b| b.total_cmp(a));
    println!("V eigenvalues (rel to max): {:?}", e.iter().map(|v| format!("{:.2e}", v/e[0])).collect::<Vec<_>>());
    println!("h-weight per eigvec:");
    let eig = r.v_mat.clone().symmetric_eigen();
    for i in 0..n {
        let u = nalgebra::DVector::from_column_slice(eig.eigenvectors.column(i).as_slice());
        let w = h.dotc(&u).norm_sqr();
        println!("  lam {:+.3e} (rel {:+.2e})  |h^H u|^2 = {:.3e}  contributes {:+.3e}", eig.eigenvalues[i], eig.eigenvalues[i]/e[0], w, eig.eigenvalues[i]*w);
    }
}
