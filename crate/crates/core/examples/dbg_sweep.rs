use isac_core::array::*;
use isac_core::beam::*;
use isac_core::eval::kkt_report;
use isac_core::pcrb::q_bar;
use isac_core::scenario::ScenarioConfig;
use isac_core::sdp::SdpStatus;
use rayon::prelude::*;
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
    let grid = gamma_grid(&sc, &GammaSearchConfig::default());
    let t0 = std::time::Instant::now();
    let rows: Vec<String> = grid
        .par_iter()
        .map(|&gamma| {
            match solve_inner_with(gamma, &sc, &qbar, &inner_tolerances()) {
                Ok(r) if r.status == SdpStatus::Optimal => {
                    let kkt = kkt_report(&r, &sc);
                    let recon = reconstruct_rank_one(&r, &sc);
                    let (recon_msg, v_rank, v5) = match &recon {
                        Ok(rec) => {
                            let ev = (rec.v_bar.clone() / num_complex::Complex64::new(rec.t_bar, 0.0))
                                .symmetric_eigen()
                                .eigenvalues;
                            let mut evs: Vec<f64> = ev.iter().cloned().collect();
                            evs.sort_by(|a, b| b.total_cmp(a));
                            let vmax = evs[0].max(1e-300);
                            let rank = evs.iter().filter(|&&l| l > 1e-9 * vmax).count();
                            (format!("ok wr {:8.1e}", rec.report.w_rank_ratio), rank, evs[4] / vmax)
                        }
                        Err(_) => ("FAIL".to_string(), 99, f64::NAN),
                    };
                    format!(
                        "g {gamma:9.2e} f {:11.4e} lam {:9.2e} rho {:9.2e} lmaxS {:9.2e} lmaxB {:9.2e} xi {:9.2e} recon {recon_msg} vrank {v_rank} v5rel {v5:9.2e} l1 {}",
                        r.f_gamma, r.duals.lambda, r.duals.rho, kkt.lambda_max_s, kkt.lambda_max_b, kkt.xi, r.lemma1_ok
                    )
                }
                Ok(r) => format!("g {gamma:9.2e} status {:?}", r.status),
                Err(e) => format!("g {gamma:9.2e} error {e}"),
            }
        })
        .collect();
    for row in rows {
        println!("{row}");
    }
    eprintln!("sweep took {:.1}s", t0.elapsed().as_secs_f64());
}
