use super::*;
use crate::array::{los_user_channel, ArrayConfig, ChannelParams, LocationPrior};
use approx::assert_relative_eq;
use std::f64::consts::PI;

pub(crate) fn reference_scenario(user_path_loss_db: f64, gamma_sense: f64) -> ScenarioConfig {
    let array = ArrayConfig::new(8, 10, 0.5).unwrap();
    let d = PI / 180.0;
    let prior = LocationPrior::new(
        200.0,
        vec![-55.0 * d, -35.0 * d, 65.0 * d, 45.0 * d],
        vec![0.2, 0.3, 0.1, 0.4],
        1e-2,
    )
    .unwrap();
    let h = los_user_channel(-10.0 * d, user_path_loss_db, &array).unwrap();
    let channels = ChannelParams::new(0.1, 0.0071, 1e-9, 1e-9, 1e-9, 0.1, h).unwrap();
    ScenarioConfig::new(array, prior, channels, gamma_sense).unwrap()
}

fn quick_tol() -> SdpTolerances {
    SdpTolerances::default()
}

#[test]
fn assemble_reference_structure() {
    let sc = reference_scenario(30.0, 2.68e-5);
    let qbar = q_bar(&sc.prior, &sc.array);
    let asm = assemble_inner(1.0, &sc, &qbar).unwrap();
    assert!(!asm.sensing_vacuous);
    let p = &asm.problem;
    assert_eq!(p.block_dims, vec![8, 8]);
    assert_eq!(p.scalar_count, 1);
    assert_eq!(p.constraints.len(), 4 + 3);
    let senses: Vec<_> = p.constraints.iter().map(|c| c.sense).collect();
    assert_eq!(
        senses,
        vec![
            ConstraintSense::Le,
            ConstraintSense::Le,
            ConstraintSense::Le,
            ConstraintSense::Le,
            ConstraintSense::Eq,
            ConstraintSense::Le,
            ConstraintSense::Ge,
        ]
    );
    // sensing right-hand side per unit t, from the hand calculation
    let sensing = &p.constraints[6];
    assert_relative_eq!(-sensing.scalar_coeffs[0], 27.09, epsilon = 0.01);
    assert!(assemble_inner(-1.0, &sc, &qbar).is_err());
}

#[test]
fn assemble_vacuous_sensing_threshold() {
    // Gamma = sigma_theta^2 makes the sensing RHS exactly zero
    let sc = reference_scenario(30.0, 1e-4);
    let qbar = q_bar(&sc.prior, &sc.array);
    let asm = assemble_inner(1.0, &sc, &qbar).unwrap();
    assert!(asm.sensing_vacuous);
    assert_relative_eq!(asm.problem.constraints[6].scalar_coeffs[0], 0.0,);
}

#[test]
fn inner_solve_reaches_mrt_limit_when_unconstrained() {
    // vacuous sensing + enormous gamma: the eavesdropper caps are slack and
    // the optimum is maximum ratio transmission
    let sc = reference_scenario(60.0, 1e-3);
    let r = solve_inner(1e9, &sc).unwrap();
    assert_eq!(r.status, SdpStatus::Optimal);
    let h = sc.channels.user_channel();
    let want = sc.channels.power_budget_w() * h.norm_squared() / sc.channels.noise_user_w();
    assert_relative_eq!(r.f_gamma, want, max_relative = 1e-5);
}

#[test]
fn inner_solve_f_nondecreasing_in_gamma() {
    let sc = reference_scenario(30.0, 2.68e-5);
    let qbar = q_bar(&sc.prior, &sc.array);
    let mut last = -1.0;
    for i in 0..20 {
        let gamma = 10f64.powf(-2.0 + 8.0 * i as f64 / 19.0);
        let r = solve_inner_with(gamma, &sc, &qbar, &quick_tol()).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal, "gamma = {gamma}");
        assert!(
            r.f_gamma >= last * (1.0 - 1e-6) - 1e-9,
            "f dropped at gamma = {gamma}: {last} -> {}",
            r.f_gamma
        );
        last = r.f_gamma;
    }
}

#[test]
fn inner_solve_detects_unreachable_sensing_threshold() {
    let sc = reference_scenario(30.0, 1e-9);
    assert!(!feasibility_probe(&sc).feasible);
    let r = solve_inner(1.0, &sc).unwrap();
    assert_eq!(r.status, SdpStatus::Infeasible);
}

#[test]
fn reconstruction_certificates_hold_on_reference_solve() {
    let sc = reference_scenario(30.0, 2.68e-5);
    let r = solve_inner(100.0, &sc).unwrap();
    assert_eq!(r.status, SdpStatus::Optimal);
    assert!(r.lemma1_ok);
    let rec = reconstruct_rank_one(&r, &sc).unwrap();
    assert!(rec.report.w_rank_ratio <= 1e-7);
    assert!(rec.report.objective_drift <= 1e-7);
    assert!(rec.report.trace_drift <= 1e-10);
    // totals preserved exactly up to roundoff
    let before = r.w_mat.trace().re + r.v_mat.trace().re;
    let after = rec.w_bar.trace().re + rec.v_bar.trace().re;
    assert_relative_eq!(before, after, max_relative = 1e-10);
}

#[test]
fn reconstruction_is_identity_on_rank_one_optimum() {
    let sc = reference_scenario(30.0, 2.68e-5);
    let r = solve_inner(100.0, &sc).unwrap();
    let ev = r.w_mat.clone().symmetric_eigen().eigenvalues;
    let mut evs: Vec<f64> = ev.iter().cloned().collect();
    evs.sort_by(|a, b| b.total_cmp(a));
    if evs[1].abs() <= 1e-8 * evs[0] {
        let rec = reconstruct_rank_one(&r, &sc).unwrap();
        let drift = (&rec.w_bar - &r.w_mat).norm() / r.w_mat.norm();
        assert!(drift <= 1e-6, "projection moved a rank-one optimum: {drift}");
    }
}

#[test]
fn extracted_beams_factor_covariances() {
    let sc = reference_scenario(30.0, 2.68e-5);
    let r = solve_inner(100.0, &sc).unwrap();
    let rec = reconstruct_rank_one(&r, &sc).unwrap();
    let (w, vs) = extract_beams(&rec.w_bar, &rec.v_bar, rec.t_bar, 4);
    let w_resid = (&w * w.adjoint() - &rec.w_bar / Complex64::new(rec.t_bar, 0.0)).norm()
        / (rec.w_bar.norm() / rec.t_bar);
    assert!(w_resid <= 1e-8, "w w^H mismatch: {w_resid}");
    let mut v_sum = DMatrix::<Complex64>::zeros(8, 8);
    for v in &vs {
        v_sum += v * v.adjoint();
    }
    let v_resid =
        (&v_sum - &rec.v_bar / Complex64::new(rec.t_bar, 0.0)).norm() / (1e-300 + rec.v_bar.norm() / rec.t_bar);
    assert!(v_resid <= 1e-6, "sum v v^H mismatch: {v_resid}");
    assert!(vs.len() <= 4);
}

#[test]
fn search_returns_certified_solution() {
    let sc = reference_scenario(30.0, 2.68e-5);
    let cfg = GammaSearchConfig {
        grid_points: 24,
        golden_iterations: 10,
        ..Default::default()
    };
    let sol = search_gamma(&sc, &cfg).unwrap();
    assert!(sol.secrecy_rate > 0.0);
    assert!(sol.power_used <= sc.channels.power_budget_w() + 1e-9);
    assert!(sol.pcrb_value <= sc.sensing_threshold + 1e-12);
    assert!(sol.an_beams.len() <= 4);
    let certs = sol.certificates.as_ref().unwrap();
    assert!(certs.reconstruction.w_rank_ratio <= 1e-7);
    // argmax property over a recomputed coarse grid
    let qbar = q_bar(&sc.prior, &sc.array);
    for &gamma in gamma_grid(&sc, &cfg).iter().step_by(4) {
        let r = solve_inner_with(gamma, &sc, &qbar, &cfg.tolerances).unwrap();
        if r.status == SdpStatus::Optimal {
            let rate = ((1.0 + r.f_gamma) / (1.0 + gamma)).log2();
            assert!(
                sol.secrecy_rate >= rate - 1e-9,
                "grid point {gamma} beats the returned optimum"
            );
        }
    }
}

#[test]
fn search_without_eavesdropper_approaches_point_to_point_rate() {
    // kill the eavesdropper channel gain; keep sensing vacuous
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
    let channels = ChannelParams::new(1e-30, 0.0071, 1e-9, 1e-9, 1e-9, 0.1, h).unwrap();
    let sc = ScenarioConfig::new(array, prior, channels, 1e-3).unwrap();
    let cfg = GammaSearchConfig {
        gamma_max: Some(1.0),
        grid_points: 16,
        golden_iterations: 8,
        ..Default::default()
    };
    let sol = search_gamma(&sc, &cfg).unwrap();
    let cap = (1.0
        + sc.channels.power_budget_w() * sc.channels.user_channel().norm_squared()
            / sc.channels.noise_user_w())
    .log2();
    assert!(sol.secrecy_rate <= cap + 1e-9);
    assert!(
        sol.secrecy_rate >= cap * (1.0 - 1e-3),
        "rate {} vs cap {cap}",
        sol.secrecy_rate
    );
}

#[test]
fn feasibility_probe_examples() {
    // vacuous threshold: feasible regardless of power
    let sc = reference_scenario(30.0, 1e-3);
    assert!(feasibility_probe(&sc).feasible);
    // reference threshold: feasible with a wide margin
    let sc = reference_scenario(30.0, 2.68e-5);
    let p = feasibility_probe(&sc);
    assert!(p.feasible);
    assert_relative_eq!(p.required_rhs, 27.09, epsilon = 0.01);
    assert!(p.max_lhs > 5.0 * p.required_rhs);
    // threshold too tight for the power budget
    let sc = reference_scenario(30.0, 1e-9);
    assert!(!feasibility_probe(&sc).feasible);
}

#[test]
fn mrt_benchmark_uses_full_power_and_flags_feasibility() {
    let sc = reference_scenario(60.0, 2.68e-5);
    let sol = benchmark_mrt(&sc);
    assert_relative_eq!(
        sol.power_used,
        sc.channels.power_budget_w(),
        max_relative = 1e-12
    );
    assert!(sol.an_beams.is_empty());
    // stringent threshold: MRT ignores sensing and lands infeasible
    let sc = reference_scenario(60.0, 5e-6);
    let sol = benchmark_mrt(&sc);
    assert!(sol.flags.infeasible);
}

#[test]
fn no_an_benchmark_has_zero_an_power() {
    let sc = reference_scenario(60.0, 2.68e-5);
    let cfg = GammaSearchConfig {
        grid_points: 24,
        golden_iterations: 0,
        ..Default::default()
    };
    let sol = benchmark_no_an(&sc, &cfg).unwrap();
    assert!(sol.an_beams.is_empty());
    assert!(sol.power_used <= sc.channels.power_budget_w() * (1.0 + 1e-6));
}
