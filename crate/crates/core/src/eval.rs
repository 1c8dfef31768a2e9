//! Metrics and certificates: SINRs, secrecy rates, beampatterns, KKT/duality
//! reports, and a Monte-Carlo MAP-estimation oracle checking that realized
//! sensing MSE respects the PCRB.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{
    gmm_logpdf, steering_rx, steering_tx, ArrayConfig, ChannelParams,
};
use crate::beam::InnerSolveResult;
use crate::error::PcrbError;
use crate::pcrb::{pcrb_exact, q_bar};
use crate::scenario::ScenarioConfig;

/// Per-location secrecy rates and their worst case.
#[derive(Debug, Clone)]
pub struct SecrecyReport {
    pub sinr_user: f64,
    pub sinr_eve: Vec<f64>,
    /// R_k = [log2(1 + SINR) - log2(1 + SINR_E(theta_k))]^+ in bits/s/Hz.
    pub rates: Vec<f64>,
    pub worst_case_rate: f64,
}

/// SINR at the user: |h^H w|^2 / (sum_k |h^H v_k|^2 + sigma^2).
pub fn sinr_user(
    w: &DVector<Complex64>,
    vs: &[DVector<Complex64>],
    h: &DVector<Complex64>,
    sigma2: f64,
) -> f64 {
    let sig = h.dotc(w).norm_sqr();
    let interference: f64 = vs.iter().map(|v| h.dotc(v).norm_sqr()).sum();
    sig / (interference + sigma2)
}

/// SINR at a candidate eavesdropper angle, with the effective noise
/// sigma_E^2 r^2 / beta_0.
pub fn sinr_eve(
    w: &DVector<Complex64>,
    vs: &[DVector<Complex64>],
    theta_k: f64,
    channels: &ChannelParams,
    cfg: &ArrayConfig,
) -> f64 {
    let a = steering_tx(theta_k, cfg);
    let sig = a.dotc(w).norm_sqr();
    let interference: f64 = vs.iter().map(|v| a.dotc(v).norm_sqr()).sum();
    sig / (interference + channels.eve_noise_eff())
}

/// Secrecy rates for every candidate eavesdropper location.
pub fn secrecy_report(
    w: &DVector<Complex64>,
    vs: &[DVector<Complex64>],
    sc: &ScenarioConfig,
) -> SecrecyReport {
    let su = sinr_user(w, vs, sc.channels.user_channel(), sc.channels.noise_user_w());
    let user_rate = (1.0 + su).log2();
    let sinr_eve_all: Vec<f64> = sc
        .prior
        .angles_rad()
        .iter()
        .map(|&t| sinr_eve(w, vs, t, &sc.channels, &sc.array))
        .collect();
    let rates: Vec<f64> = sinr_eve_all
        .iter()
        .map(|&se| (user_rate - (1.0 + se).log2()).max(0.0))
        .collect();
    let worst = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    SecrecyReport {
        sinr_user: su,
        sinr_eve: sinr_eve_all,
        rates,
        worst_case_rate: worst,
    }
}

/// One sample of the transmit beampattern.
#[derive(Debug, Clone, Copy)]
pub struct BeampatternPoint {
    pub theta: f64,
    /// |a^H(theta) w|^2 in watts.
    pub info_power: f64,
    /// sum_k |a^H(theta) v_k|^2 in watts.
    pub an_power: f64,
}

/// Information and AN beam powers over a grid of angles.
pub fn beampattern(
    w: &DVector<Complex64>,
    vs: &[DVector<Complex64>],
    theta_grid: &[f64],
    cfg: &ArrayConfig,
) -> Vec<BeampatternPoint> {
    theta_grid
        .iter()
        .map(|&theta| {
            let a = steering_tx(theta, cfg);
            BeampatternPoint {
                theta,
                info_power: a.dotc(w).norm_sqr(),
                an_power: vs.iter().map(|v| a.dotc(v).norm_sqr()).sum(),
            }
        })
        .collect()
}

/// Dual-side health of an inner solve: the Lagrangian matrices rebuilt from
/// the returned multipliers, their largest eigenvalues (nonpositive at a true
/// optimum), the scalar dual slack, and complementarity products.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub gamma: f64,
    /// lambda_max of S = H - sum beta_k A_k + psi Qbar - rho I.
    pub lambda_max_s: f64,
    /// lambda_max of B = -lambda H + gamma sum beta_k A_k + psi Qbar - rho I.
    pub lambda_max_b: f64,
    /// xi = -lambda sigma^2 + gamma c_E sum beta_k + rho P - psi S_Gamma.
    pub xi: f64,
    /// ||S W||_F / (||S||_F ||W||_F).
    pub comp_sw: f64,
    /// ||B V||_F / (||B||_F ||V||_F).
    pub comp_bv: f64,
    pub lambda: f64,
    pub rho: f64,
    pub psi: f64,
    pub min_beta: f64,
}

/// Rebuild the Lagrangian matrices of an inner solve from scratch and report
/// their spectra and complementarity; never trusts solver-internal state.
pub fn kkt_report(result: &InnerSolveResult, sc: &ScenarioConfig) -> KktReport {
    let n = sc.array.n_tx();
    let qbar = q_bar(&sc.prior, &sc.array);
    let h = sc.channels.user_channel();
    let h_outer = h * h.adjoint();
    let eye = DMatrix::<Complex64>::identity(n, n);
    let d = &result.duals;

    let mut s = h_outer.clone();
    let mut b = h_outer.clone() * Complex64::new(-d.lambda, 0.0);
    for (&theta, &beta_k) in sc.prior.angles_rad().iter().zip(&d.beta_k) {
        let a = steering_tx(theta, &sc.array);
        let ak = &a * a.adjoint();
        s += &ak * Complex64::new(-beta_k, 0.0);
        b += &ak * Complex64::new(result.gamma * beta_k, 0.0);
    }
    s += &qbar.matrix * Complex64::new(d.psi, 0.0);
    s -= &eye * Complex64::new(d.rho, 0.0);
    b += &qbar.matrix * Complex64::new(d.psi, 0.0);
    b -= &eye * Complex64::new(d.rho, 0.0);

    let xi = -d.lambda * sc.channels.noise_user_w()
        + result.gamma * sc.channels.eve_noise_eff() * d.beta_k.iter().sum::<f64>()
        + d.rho * sc.channels.power_budget_w()
        - d.psi * sc.sensing_rhs();

    let lam_max = |m: &DMatrix<Complex64>| -> f64 {
        m.clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let comp = |m: &DMatrix<Complex64>, x: &DMatrix<Complex64>| -> f64 {
        let denom = m.norm() * x.norm();
        if denom > 0.0 {
            (m * x).norm() / denom
        } else {
            0.0
        }
    };
    KktReport {
        gamma: result.gamma,
        lambda_max_s: lam_max(&s),
        lambda_max_b: lam_max(&b),
        xi,
        comp_sw: comp(&s, &result.w_mat),
        comp_bv: comp(&b, &result.v_mat),
        lambda: d.lambda,
        rho: d.rho,
        psi: d.psi,
        min_beta: d.beta_k.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

/// Result of the Monte-Carlo estimation experiment.
#[derive(Debug, Clone, Copy)]
pub struct McMseReport {
    pub empirical_mse: f64,
    /// Exact PCRB at the effective covariance n_snapshots * R_x.
    pub pcrb_exact: f64,
    pub n_trials: usize,
    pub n_snapshots: usize,
}

/// One standard complex Gaussian sample (CN(0,1)) via Box-Muller.
fn cn01(rng: &mut impl rand::Rng) -> Complex64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-u1.ln()).sqrt(); // variance 1/2 per component
    let phi = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * phi.cos(), r * phi.sin())
}

/// One real standard normal sample via Box-Muller.
fn randn(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Monte-Carlo MAP estimation of the target angle against the PCRB.
///
/// Each trial draws theta from the mixture prior, simulates `n_snapshots`
/// echo snapshots with fresh signals and noise, and runs a MAP estimator on a
/// dense grid (profile likelihood over the reflection coefficient, plus the
/// log prior). The PCRB scales linearly in the snapshot count, so the
/// comparison uses pcrb_exact at n_snapshots * R_x.
pub fn mc_mse_oracle(
    w: &DVector<Complex64>,
    vs: &[DVector<Complex64>],
    sc: &ScenarioConfig,
    beta: Complex64,
    n_trials: usize,
    n_snapshots: usize,
    seed: u64,
) -> Result<McMseReport, PcrbError> {
    use rand::SeedableRng;
    if n_trials == 0 || n_snapshots == 0 {
        return Err(PcrbError::InvalidInput(
            "need at least one trial and one snapshot".into(),
        ));
    }
    let n_tx = sc.array.n_tx();
    let n_rx = sc.array.n_rx();
    if w.len() != n_tx || vs.iter().any(|v| v.len() != n_tx) {
        return Err(PcrbError::InvalidInput("beam length mismatch".into()));
    }

    let mut rx_cov = w * w.adjoint();
    for v in vs {
        rx_cov += v * v.adjoint();
    }
    let rx_eff = &rx_cov * Complex64::new(n_snapshots as f64, 0.0);
    let bound = pcrb_exact(&rx_eff, beta, &sc.prior, &sc.array, &sc.channels)?;

    // MAP grid over the prior support
    let sigma = sc.prior.sigma_theta();
    let segments = crate::quad::prior_support_segments(&sc.prior, 6.0 * sigma);
    let total_len: f64 = segments.iter().map(|(a, b)| b - a).sum();
    let n_grid = 4096usize;
    let mut grid = Vec::with_capacity(n_grid);
    for &(a, b) in &segments {
        let pts = ((b - a) / total_len * n_grid as f64).round().max(2.0) as usize;
        for i in 0..pts {
            grid.push(a + (b - a) * (i as f64 + 0.5) / pts as f64);
        }
    }
    let cell = total_len / grid.len() as f64;
    assert!(
        cell * cell / 12.0 < 0.25 * bound,
        "MAP grid quantization ({:.3e}) not well below the PCRB ({bound:.3e})",
        cell * cell / 12.0
    );
    // per-grid-angle steering cached once
    let grid_steer: Vec<(DVector<Complex64>, DVector<Complex64>, f64)> = grid
        .iter()
        .map(|&t| {
            (
                steering_tx(t, &sc.array),
                steering_rx(t, &sc.array),
                gmm_logpdf(t, &sc.prior),
            )
        })
        .collect();

    let sigma_r2 = sc.channels.noise_radar_w();
    let noise_amp = sigma_r2.sqrt();
    let angles = sc.prior.angles_rad();
    let probs = sc.prior.probs();

    let sq_errs: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            use rand::Rng as _;
            // draw theta from the mixture
            let mut u: f64 = rng.random();
            let mut comp = angles.len() - 1;
            for (k, &p) in probs.iter().enumerate() {
                if u < p {
                    comp = k;
                    break;
                }
                u -= p;
            }
            let theta_true = angles[comp] + sigma * randn(&mut rng);
            let a_true = steering_tx(theta_true, &sc.array);
            let b_true = steering_rx(theta_true, &sc.array);

            // accumulate C_xx, C_yx and sum ||y||^2 over snapshots;
            // y = beta b (a^H x) + noise
            let mut c_xx = DMatrix::<Complex64>::zeros(n_tx, n_tx);
            let mut c_yx = DMatrix::<Complex64>::zeros(n_rx, n_tx);
            let mut s_yy = 0.0f64;
            for _ in 0..n_snapshots {
                let mut x = w * cn01(&mut rng);
                for v in vs {
                    x += v * cn01(&mut rng);
                }
                let ax = a_true.dotc(&x); // a^H x
                let mut y = &b_true * (beta * ax);
                for e in y.iter_mut() {
                    *e += cn01(&mut rng) * noise_amp;
                }
                c_xx += &x * x.adjoint();
                c_yx += &y * x.adjoint();
                s_yy += y.norm_squared();
            }

            // profile-likelihood MAP over the grid
            let mut best_obj = f64::NEG_INFINITY;
            let mut best_theta = grid[0];
            for (gi, (a_g, b_g, logprior)) in grid_steer.iter().enumerate() {
                let denom = (a_g.dotc(&(&c_xx * a_g))).re * n_rx as f64;
                let num = b_g.dotc(&(&c_yx * a_g)); // b^H C_yx a
                let fit = if denom > 0.0 {
                    num.norm_sqr() / denom
                } else {
                    0.0
                };
                let obj = logprior - (s_yy - fit) / sigma_r2;
                if obj > best_obj {
                    best_obj = obj;
                    best_theta = grid[gi];
                }
            }
            let e = best_theta - theta_true;
            e * e
        })
        .collect();

    let empirical_mse = sq_errs.iter().sum::<f64>() / n_trials as f64;
    Ok(McMseReport {
        empirical_mse,
        pcrb_exact: bound,
        n_trials,
        n_snapshots,
    })
}
