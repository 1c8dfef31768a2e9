use isac_core::array::*;
use isac_core::beam::*;
use isac_core::scenario::ScenarioConfig;
use isac_core::sdp::SdpTolerances;
use isac_core::pcrb::q_bar;
use std::f64::consts::PI;

fn scenario(pl: f64, g: f64) -> ScenarioConfig {
    let array = ArrayConfig::new(8, 10, 0.5).unwrap();
    let d = PI / 180.0;
    let prior = LocationPrior::new(
        200.0,
        vec![-55.0 * d, -35.0 * d, 65.0 * d, 45.0 * d],
        vec![0.2, 0.3, 0.1, 0.4],
        1e-2,
    )
    .unwrap();
    let h = los_user_channel(-10.0 * d, pl, &array).unwrap();
    let channels = ChannelParams::new(0.1, 0.0071, 1e-9, 1e-9, 1e-9, 0.1, h).unwrap();
    ScenarioConfig::new(array, prior, channels, g).unwrap()
}

fn main() {
    let sc = scenario(30.0, 2.68e-5);
    let qbar = q_bar(&sc.prior, &sc.array);
    for gamma in [1e-2, 1.0, 100.0, 1e4, 1e6] {
        match solve_inner_with(gamma, &sc, &qbar, &SdpTolerances::default()) {
            Ok(r) => {
                println!(
                    "gamma {gamma:9.1e}: status {:?} f {:12.5e} t {:10.3e} gap {:9.2e} iters {} lambda {:10.3e} rho {:10.3e} psi {:10.3e} lemma1 {}",
                    r.status, r.f_gamma, r.t, r.duality_gap, r.solver_iterations,
                    r.duals.lambda, r.duals.rho, r.duals.psi, r.lemma1_ok
                );
                match reconstruct_rank_one(&r, &sc) {
                    Ok(rec) => println!("   recon ok: null_dim {} rank_ratio {:9.2e} drift {:9.2e}", rec.report.null_dim, rec.report.w_rank_ratio, rec.report.objective_drift),
                    Err(e) => println!("   recon FAILED: {e}"),
                }
            }
            Err(e) => println!("gamma {gamma:9.1e}: error {e}"),
        }
    }
}
