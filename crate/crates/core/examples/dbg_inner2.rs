use isac_core::array::*;
use isac_core::beam::*;
use isac_core::scenario::ScenarioConfig;
use isac_core::sdp::SdpTolerances;
use isac_core::pcrb::q_bar;
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
    let r = solve_inner_with(100.0, &sc, &qbar, &SdpTolerances::default()).unwrap();
    println!("status {:?}", r.status);
}
