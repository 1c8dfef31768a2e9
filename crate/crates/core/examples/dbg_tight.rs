use isac_core::array::*;
use isac_core::beam::*;
use isac_core::scenario::ScenarioConfig;
use isac_core::sdp::SdpTolerances;
use isac_core::pcrb::q_bar;
use isac_core::eval::kkt_report;
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
    let channels = ChannelParams::new(0.1, 0.0071, 1e-9, 1e-9, 1e-9, 0.1, h).unwrap();
    let sc = ScenarioConfig::new(array, prior, channels, 2.68e-5).unwrap();
    let qbar = q_bar(&sc.prior, &sc.array);
    let tol = isac_core::beam::inner_tolerances();
    for gamma in [2.86e-2, 1.43, 1.72e2, 6.34e2, 9.79e2, 3.61e3] {
        match solve_inner_with(gamma, &sc, &qbar, &tol) {
            Ok(r) => {
                println!(
                    "gamma {gamma:9.1e}: status {:?} f {:12.5e} gap {:9.2e} iters {}",
                    r.status, r.f_gamma, r.duality_gap, r.solver_iterations,
                );
                if r.status != isac_core::sdp::SdpStatus::Optimal {
                    let asm = assemble_inner(gamma, &sc, &qbar).unwrap();
                    let sol = isac_core::sdp::solve(&asm.problem, &tol).unwrap();
                    println!("   measures: pres {:9.2e} dres {:9.2e} gap {:9.2e} diag {}", sol.max_primal_residual, sol.max_dual_residual, sol.duality_gap, sol.diagnostics);
                }
                if r.status == isac_core::sdp::SdpStatus::Optimal {
                    let k = kkt_report(&r, &sc);
                    println!("   kkt: lmax_s {:9.2e} lmax_b {:9.2e} xi {:9.2e} comp_sw {:9.2e} comp_bv {:9.2e}", k.lambda_max_s, k.lambda_max_b, k.xi, k.comp_sw, k.comp_bv);
                    match reconstruct_rank_one(&r, &sc) {
                        Ok(rec) => println!("   recon ok: null_dim {} rank_ratio {:9.2e} min_eig_v {:9.2e}", rec.report.null_dim, rec.report.w_rank_ratio, rec.report.min_eig_v),
                        Err(e) => println!("   recon FAILED: {e}"),
                    }
                }
            }
            Err(e) => println!("gamma {gamma:9.1e}: error {e}"),
        }
    }
}
