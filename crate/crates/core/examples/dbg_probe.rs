use isac_core::array::*;
use isac_core::beam::*;
use isac_core::pcrb::*;
use isac_core::scenario::ScenarioConfig;
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
    let sc = ScenarioConfig::new(array.clone(), prior.clone(), channels, 2.68e-5).unwrap();
    let p = feasibility_probe(&sc);
    println!("feasible {} max_lhs {} required {}", p.feasible, p.max_lhs, p.required_rhs);
    let q = q_bar(&prior, &array);
    let ev = q.matrix.clone().symmetric_eigen().eigenvalues;
    println!("qbar eigenvalues: {:?}", ev.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    println!("rho0 {}", q.rho0);
    let weights: Vec<f64> = prior.angles_rad().iter().zip(prior.probs()).map(|(&t,&p)| q.rho0*p*((2.0*t).cos()+1.0)).collect();
    println!("weights {:?}", weights);
}
