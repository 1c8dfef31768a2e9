//! Posterior Cramer-Rao bound machinery: Fisher information under the
//! Gaussian-mixture location prior, the exact angle PCRB, its quadrature
//! upper bound, and the small-sigma closed-form approximation used by the
//! beamforming optimization.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::array::{
    steering_rx, steering_rx_deriv, steering_tx, steering_tx_deriv, ArrayConfig, ChannelParams,
    LocationPrior,
};
use crate::error::PcrbError;
use crate::quad::{
    adaptive_simpson, component_expect_matrix, prior_expect, prior_expect_complex,
    prior_support_segments,
};

/// Scalar integrals feeding the PCRB expressions, together with the
/// prior-information terms.
///
/// `g1`..`g4` are prior expectations of array-response traces against the
/// transmit covariance; `eps` is the mixture cross-term correction and
/// `jp_theta` = 1/sigma_theta^2 - eps the prior Fisher information.
#[derive(Debug, Clone)]
pub struct FimComponents {
    pub g1: f64,
    pub g2: f64,
    pub g3: Complex64,
    pub g4: f64,
    pub eps: f64,
    pub jp_theta: f64,
}

/// Prior-only Fisher information for the target angle.
#[derive(Debug, Clone, Copy)]
pub struct PriorFim {
    pub jp_theta: f64,
    pub eps: f64,
}

/// Closed-form sensing matrix of the approximate PCRB upper bound, with its
/// receive-array gain constant rho_0.
#[derive(Debug, Clone)]
pub struct QbarMatrix {
    pub matrix: DMatrix<Complex64>,
    pub rho0: f64,
}

/// rho_0 = sum_{n=1}^{N_r} pi^2 Delta^2 (n-1)^2.
pub fn rho0(cfg: &ArrayConfig) -> f64 {
    let d2 = cfg.spacing_ratio() * cfg.spacing_ratio();
    PI * PI
        * d2
        * (0..cfg.n_rx())
            .map(|n| (n as f64) * (n as f64))
            .sum::<f64>()
}

/// Gain implied by the receive steering definition:
/// ||db(theta)/dtheta||^2 = receive_deriv_gain * cos^2(theta).
pub fn receive_deriv_gain(cfg: &ArrayConfig) -> f64 {
    let d2 = cfg.spacing_ratio() * cfg.spacing_ratio();
    PI * PI
        * d2
        * (1..=cfg.n_rx())
            .map(|n| {
                let c = 2.0 * n as f64 - 1.0 - cfg.n_rx() as f64;
                c * c
            })
            .sum::<f64>()
}

fn check_hermitian_psd(rx: &DMatrix<Complex64>, tol: f64) -> Result<(), PcrbError> {
    if rx.nrows() != rx.ncols() {
        return Err(PcrbError::InvalidInput("covariance must be square".into()));
    }
    let mut asym: f64 = 0.0;
    for i in 0..rx.nrows() {
        for j in 0..rx.ncols() {
            asym = asym.max((rx[(i, j)] - rx[(j, i)].conj()).norm());
        }
    }
    if asym > 1e-10 {
        return Err(PcrbError::InvalidInput(format!(
            "covariance not Hermitian: asymmetry {asym:.3e}"
        )));
    }
    let herm = (rx + rx.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::min);
    if min_ev < -tol * max_ev.max(1.0) {
        return Err(PcrbError::InvalidInput(format!(
            "covariance not PSD: min eigenvalue {min_ev:.3e}"
        )));
    }
    Ok(())
}

/// x^H R y for a Hermitian R.
fn qform(r: &DMatrix<Complex64>, x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    let ry = r * y;
    x.dotc(&ry)
}

struct TraceTerms {
    m_m: f64,
    dm_dm: f64,
    dm_m: Complex64,
    db_a_ra: f64,
}

/// Per-angle trace shortcuts for the rank-one response M = b a^H:
///   tr(M^H M R)      = ||b||^2 a^H R a
///   tr(dM^H dM R)    = ||db||^2 a^H R a + 2 Re{(db^H b)(da^H R a)} + ||b||^2 da^H R da
///   tr(dM^H M R)     = (db^H b)(a^H R a) + ||b||^2 a^H R da
fn trace_terms(theta: f64, rx: &DMatrix<Complex64>, cfg: &ArrayConfig) -> TraceTerms {
    let a = steering_tx(theta, cfg);
    let da = steering_tx_deriv(theta, cfg);
    let b = steering_rx(theta, cfg);
    let db = steering_rx_deriv(theta, cfg);
    let b_norm2 = b.norm_squared();
    let db_norm2 = db.norm_squared();
    let db_b = db.dotc(&b); // db^H b (identically zero for the symmetric ULA)
    let a_ra = qform(rx, &a, &a);
    let a_rda = qform(rx, &a, &da);
    let da_rda = qform(rx, &da, &da);
    let da_ra = qform(rx, &da, &a);
    TraceTerms {
        m_m: b_norm2 * a_ra.re,
        dm_dm: db_norm2 * a_ra.re
            + 2.0 * (db_b * da_ra).re
            + b_norm2 * da_rda.re,
        dm_m: db_b * a_ra + a_rda * b_norm2,
        db_a_ra: db_norm2 * a_ra.re,
    }
}

/// Mixture cross-term correction epsilon >= 0 of the prior Fisher
/// information, via adaptive Simpson over the prior support. Exactly zero for
/// a single component.
fn epsilon(prior: &LocationPrior) -> Result<f64, PcrbError> {
    let k = prior.len();
    if k == 1 {
        return Ok(0.0);
    }
    let sig = prior.sigma_theta();
    let sig2 = sig * sig;
    let log_norm = -(sig * (2.0 * PI).sqrt()).ln();
    let angles = prior.angles_rad().to_vec();
    let probs = prior.probs().to_vec();
    let integrand = move |theta: f64| -> f64 {
        let mut lq = Vec::with_capacity(k);
        let mut m = f64::NEG_INFINITY;
        for i in 0..k {
            let t = (theta - angles[i]) / sig;
            let v = if probs[i] > 0.0 {
                probs[i].ln() + log_norm - 0.5 * t * t
            } else {
                f64::NEG_INFINITY
            };
            m = m.max(v);
            lq.push(v);
        }
        if m == f64::NEG_INFINITY {
            return 0.0;
        }
        let lse = m + lq.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        let mut total = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                let d = angles[j] - angles[i];
                let e = lq[i] + lq[j] - lse;
                if e > -700.0 {
                    total += e.exp() * d * d;
                }
            }
        }
        total / (sig2 * sig2)
    };
    let tol = 1e-12 / sig2;
    let mut eps = 0.0;
    for (a, b) in prior_support_segments(prior, 8.0 * sig) {
        eps += adaptive_simpson(&integrand, a, b, tol)?;
    }
    Ok(eps.max(0.0))
}

/// Prior Fisher information [J_P]_{theta,theta} = 1/sigma_theta^2 - eps.
pub fn fim_prior(prior: &LocationPrior) -> Result<PriorFim, PcrbError> {
    let eps = epsilon(prior)?;
    let sig2 = prior.sigma_theta() * prior.sigma_theta();
    Ok(PriorFim {
        jp_theta: 1.0 / sig2 - eps,
        eps,
    })
}

/// All scalar integrals needed by the PCRB expressions for a given transmit
/// covariance.
pub fn fim_components(
    rx: &DMatrix<Complex64>,
    prior: &LocationPrior,
    cfg: &ArrayConfig,
) -> Result<FimComponents, PcrbError> {
    if rx.nrows() != cfg.n_tx() {
        return Err(PcrbError::InvalidInput(format!(
            "covariance dimension {} != N_t {}",
            rx.nrows(),
            cfg.n_tx()
        )));
    }
    check_hermitian_psd(rx, 1e-10)?;
    let g1 = prior_expect(prior, |t| trace_terms(t, rx, cfg).m_m);
    let g2 = prior_expect(prior, |t| trace_terms(t, rx, cfg).dm_dm);
    let g3 = prior_expect_complex(prior, |t| trace_terms(t, rx, cfg).dm_m);
    let g4 = prior_expect(prior, |t| trace_terms(t, rx, cfg).db_a_ra);
    let pf = fim_prior(prior)?;
    Ok(FimComponents {
        g1: g1.max(0.0),
        g2: g2.max(0.0),
        g3,
        g4: g4.max(0.0),
        eps: pf.eps,
        jp_theta: pf.jp_theta,
    })
}

/// Data part of the Fisher information for omega = [theta, beta_R, beta_I],
/// as a real symmetric 3x3 matrix.
pub fn fim_data(
    rx: &DMatrix<Complex64>,
    beta: Complex64,
    prior: &LocationPrior,
    cfg: &ArrayConfig,
    channels: &ChannelParams,
) -> Result<Matrix3<f64>, PcrbError> {
    let c = fim_components(rx, prior, cfg)?;
    let s = 2.0 / channels.noise_radar_w();
    let b2 = beta.norm_sqr();
    let cross = beta.conj() * c.g3;
    Ok(Matrix3::new(
        s * b2 * c.g2,
        s * cross.re,
        -s * cross.im,
        s * cross.re,
        s * c.g1,
        0.0,
        -s * cross.im,
        0.0,
        s * c.g1,
    ))
}

/// Exact angle PCRB with a degeneracy flag.
#[derive(Debug, Clone, Copy)]
pub struct PcrbExact {
    pub value: f64,
    /// True when the data added no usable information and the prior-only
    /// value 1/jp_theta was returned.
    pub prior_only: bool,
}

/// Exact PCRB of the angle estimate via the Schur complement of the block
/// Fisher information.
pub fn pcrb_exact_detailed(
    rx: &DMatrix<Complex64>,
    beta: Complex64,
    prior: &LocationPrior,
    cfg: &ArrayConfig,
    channels: &ChannelParams,
) -> Result<PcrbExact, PcrbError> {
    let c = fim_components(rx, prior, cfg)?;
    let s = 2.0 / channels.noise_radar_w();
    let b2 = beta.norm_sqr();
    if c.g1 <= 0.0 || b2 == 0.0 {
        return Ok(PcrbExact {
            value: 1.0 / c.jp_theta,
            prior_only: true,
        });
    }
    // J_{theta,beta} J_{beta,beta}^{-1} J_{theta,beta}^T = s |beta|^2 |g3|^2 / g1
    let denom = s * b2 * c.g2 + c.jp_theta - s * b2 * c.g3.norm_sqr() / c.g1;
    if denom < 1e-14 * c.jp_theta {
        return Ok(PcrbExact {
            value: 1.0 / c.jp_theta,
            prior_only: true,
        });
    }
    Ok(PcrbExact {
        value: 1.0 / denom,
        prior_only: false,
    })
}

/// Exact angle PCRB in rad^2.
pub fn pcrb_exact(
    rx: &DMatrix<Complex64>,
    beta: Complex64,
    prior: &LocationPrior,
    cfg: &ArrayConfig,
    channels: &ChannelParams,
) -> Result<f64, PcrbError> {
    Ok(pcrb_exact_detailed(rx, beta, prior, cfg, channels)?.value)
}

/// Quadrature upper bound 1 / ((2|beta|^2/sigma_R^2) g4 + jp_theta) on the
/// angle PCRB.
pub fn pcrb_upper(
    rx: &DMatrix<Complex64>,
    beta: Complex64,
    prior: &LocationPrior,
    cfg: &ArrayConfig,
    channels: &ChannelParams,
) -> Result<f64, PcrbError> {
    let c = fim_components(rx, prior, cfg)?;
    let s = 2.0 / channels.noise_radar_w();
    Ok(1.0 / (s * beta.norm_sqr() * c.g4 + c.jp_theta))
}

fn weighted_outer_sum(prior: &LocationPrior, cfg: &ArrayConfig, gain: f64) -> DMatrix<Complex64> {
    let n = cfg.n_tx();
    let mut q = DMatrix::<Complex64>::zeros(n, n);
    for (&tk, &pk) in prior.angles_rad().iter().zip(prior.probs()) {
        let w = gain * pk * ((2.0 * tk).cos() + 1.0);
        let a = steering_tx(tk, cfg);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] += a[i] * a[j].conj() * w;
            }
        }
    }
    // kill roundoff asymmetry
    let qh = q.adjoint();
    (q + qh) * Complex64::new(0.5, 0.0)
}

/// Closed-form sensing matrix Q-bar = rho_0 sum_k p_k (cos 2theta_k + 1)
/// a(theta_k) a^H(theta_k). Hermitian PSD with rank at most K.
pub fn q_bar(prior: &LocationPrior, cfg: &ArrayConfig) -> QbarMatrix {
    let r0 = rho0(cfg);
    QbarMatrix {
        matrix: weighted_outer_sum(prior, cfg, r0),
        rho0: r0,
    }
}

/// Variant of [`q_bar`] whose gain is derived from the analytic receive
/// steering derivative (receive_deriv_gain / 2 instead of rho_0). This is the
/// small-sigma limit of the g4 quadrature and is the right matrix to compare
/// against [`pcrb_upper`]; see `validate_qbar_component` for the systematic
/// ratio between the two conventions.
pub fn q_bar_from_derivative(prior: &LocationPrior, cfg: &ArrayConfig) -> DMatrix<Complex64> {
    weighted_outer_sum(prior, cfg, receive_deriv_gain(cfg) / 2.0)
}

/// Closed-form approximate PCRB upper bound for a beam set, evaluated at the
/// worst-case reflection amplitude.
///
/// Depends on the beams only through w^H Q w + sum_k v_k^H Q v_k = tr(Q R_x).
pub fn pcrb_closed_form(
    w: &DVector<Complex64>,
    vs: &[DVector<Complex64>],
    beta_abs_min: f64,
    qbar: &DMatrix<Complex64>,
    prior: &LocationPrior,
    channels: &ChannelParams,
) -> f64 {
    let mut sense = qform(qbar, w, w).re;
    for v in vs {
        sense += qform(qbar, v, v).re;
    }
    let s = 2.0 * beta_abs_min * beta_abs_min / channels.noise_radar_w();
    let sig2 = prior.sigma_theta() * prior.sigma_theta();
    1.0 / (s * sense + 1.0 / sig2)
}

/// Comparison of one mixture component's sensing matrix computed by
/// quadrature against its small-sigma closed form.
#[derive(Debug, Clone)]
pub struct QbarComponentCheck {
    pub s_quadrature: DMatrix<Complex64>,
    pub s_closed_form: DMatrix<Complex64>,
    /// Max elementwise relative error between the two.
    pub max_rel_err: f64,
    /// Systematic ratio 2 rho_0 / receive_deriv_gain between the printed
    /// receive-derivative prefactor and the one implied by the steering
    /// definition; both matrices above use the former so the error isolates
    /// the small-sigma approximation.
    pub deriv_gain_ratio: f64,
}

/// Quadrature-vs-closed-form check of component k of the sensing matrix.
pub fn validate_qbar_component(
    k: usize,
    prior: &LocationPrior,
    cfg: &ArrayConfig,
) -> Result<QbarComponentCheck, PcrbError> {
    if k >= prior.len() {
        return Err(PcrbError::InvalidInput(format!(
            "component {k} out of range (K = {})",
            prior.len()
        )));
    }
    let n = cfg.n_tx();
    let r0 = rho0(cfg);
    let theta_k = prior.angles_rad()[k];
    let p_k = prior.probs()[k];
    let integrand = |theta: f64| -> DMatrix<Complex64> {
        let a = steering_tx(theta, cfg);
        let c2 = theta.cos() * theta.cos();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = a[i] * a[j].conj() * c2;
            }
        }
        m
    };
    let s_quad = component_expect_matrix(theta_k, prior.sigma_theta(), n, integrand)
        * Complex64::new(2.0 * r0 * p_k, 0.0);
    let w = r0 * p_k * ((2.0 * theta_k).cos() + 1.0);
    let a = steering_tx(theta_k, cfg);
    let mut s_closed = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s_closed[(i, j)] = a[i] * a[j].conj() * w;
        }
    }
    // entries of the closed form share the magnitude |w|; fall back to the
    // component scale when the weight vanishes (theta_k = +-pi/2)
    let scale = w.abs().max(2.0 * r0 * p_k * 1e-12);
    let mut max_rel = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let denom = s_closed[(i, j)].norm().max(scale * 1e-3);
            max_rel = max_rel.max((s_quad[(i, j)] - s_closed[(i, j)]).norm() / denom);
        }
    }
    Ok(QbarComponentCheck {
        s_quadrature: s_quad,
        s_closed_form: s_closed,
        max_rel_err: max_rel,
        deriv_gain_ratio: 2.0 * r0 / receive_deriv_gain(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn cfg() -> ArrayConfig {
        ArrayConfig::new(8, 10, 0.5).unwrap()
    }

    fn ref_prior(sigma: f64) -> LocationPrior {
        let d = PI / 180.0;
        LocationPrior::new(
            200.0,
            vec![-55.0 * d, -35.0 * d, 65.0 * d, 45.0 * d],
            vec![0.2, 0.3, 0.1, 0.4],
            sigma,
        )
        .unwrap()
    }

    fn ref_channels() -> ChannelParams {
        let h = crate::array::los_user_channel(-10.0 * PI / 180.0, 30.0, &cfg()).unwrap();
        ChannelParams::new(0.1, 0.0071, 1e-9, 1e-9, 1e-9, 0.1, h).unwrap()
    }

    fn isotropic_rx() -> DMatrix<Complex64> {
        DMatrix::from_diagonal_element(8, 8, Complex64::new(0.1 / 8.0, 0.0))
    }

    #[test]
    fn rho0_reference_value() {
        // N_r = 10, Delta = 0.5: pi^2 * 0.25 * 285
        assert_relative_eq!(rho0(&cfg()), PI * PI * 0.25 * 285.0, epsilon = 1e-12);
        assert_relative_eq!(rho0(&cfg()), 703.21, epsilon = 0.01);
    }

    #[test]
    fn receive_deriv_gain_matches_steering() {
        let c = cfg();
        let gain = receive_deriv_gain(&c);
        for theta in [0.0, 0.3, -0.9, 1.2] {
            let db = steering_rx_deriv(theta, &c);
            assert_relative_eq!(
                db.norm_squared(),
                gain * theta.cos() * theta.cos(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn epsilon_single_component_is_exactly_zero() {
        let prior = LocationPrior::new(100.0, vec![0.2], vec![1.0], 1e-2).unwrap();
        let pf = fim_prior(&prior).unwrap();
        assert_eq!(pf.eps, 0.0);
        assert_relative_eq!(pf.jp_theta, 1e4, epsilon = 1e-9);
    }

    #[test]
    fn epsilon_reference_prior_negligible() {
        let pf = fim_prior(&ref_prior(1e-2)).unwrap();
        assert!(pf.eps >= 0.0);
        assert!(pf.eps / 1e4 < 1e-8, "eps = {}", pf.eps);
    }

    #[test]
    fn epsilon_matches_quadrature_of_score_identity() {
        // Independent oracle: jp = integral (pbar')^2 / pbar via composite
        // Simpson, on a prior with close components so eps is significant.
        let prior = LocationPrior::new(100.0, vec![-0.03, 0.03], vec![0.5, 0.5], 2e-2).unwrap();
        let pf = fim_prior(&prior).unwrap();
        assert!(pf.eps > 1.0, "cross term should be significant");
        let pdf = |t: f64| crate::array::gmm_pdf(t, &prior);
        let dpdf = |t: f64| (pdf(t + 1e-6) - pdf(t - 1e-6)) / 2e-6;
        let f = |t: f64| {
            let p = pdf(t);
            if p < 1e-280 {
                0.0
            } else {
                let d = dpdf(t);
                d * d / p
            }
        };
        let (a, b) = (-0.03 - 0.24, 0.03 + 0.24);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 0 { 2.0 } else { 4.0 } * f(a + i as f64 * h);
        }
        let jp_oracle = s * h / 3.0;
        assert_relative_eq!(pf.jp_theta, jp_oracle, max_relative = 1e-5);
    }

    #[test]
    fn fim_data_zero_covariance_is_zero() {
        let rx = DMatrix::<Complex64>::zeros(8, 8);
        let j = fim_data(
            &rx,
            Complex64::new(7.1e-4, 0.0),
            &ref_prior(1e-2),
            &cfg(),
            &ref_channels(),
        )
        .unwrap();
        assert!(j.norm() < 1e-30);
    }

    #[test]
    fn fim_data_linear_in_covariance() {
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let beta = Complex64::new(5e-4, 3e-4);
        let a1 = steering_tx(0.1, &cfg());
        let a2 = steering_tx(-0.7, &cfg());
        let r1 = &a1 * a1.adjoint() * Complex64::new(0.01, 0.0);
        let r2 = &a2 * a2.adjoint() * Complex64::new(0.03, 0.0);
        let j1 = fim_data(&r1, beta, &prior, &cfg(), &ch).unwrap();
        let j2 = fim_data(&r2, beta, &prior, &cfg(), &ch).unwrap();
        let j12 = fim_data(&(&r1 + &r2), beta, &prior, &cfg(), &ch).unwrap();
        assert!((j12 - (j1 + j2)).norm() / j12.norm() < 1e-10);
        let j3 = fim_data(&(&r1 * Complex64::new(3.0, 0.0)), beta, &prior, &cfg(), &ch).unwrap();
        assert!((j3 - j1 * 3.0).norm() / j3.norm() < 1e-10);
    }

    #[test]
    fn fim_data_rejects_non_psd() {
        let mut rx = isotropic_rx();
        rx[(0, 0)] = Complex64::new(-0.1, 0.0);
        assert!(fim_data(
            &rx,
            Complex64::new(1e-3, 0.0),
            &ref_prior(1e-2),
            &cfg(),
            &ref_channels()
        )
        .is_err());
    }

    #[test]
    fn pcrb_zero_covariance_reduces_to_prior() {
        let rx = DMatrix::<Complex64>::zeros(8, 8);
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let beta = Complex64::new(7.1e-4, 0.0);
        let e = pcrb_exact_detailed(&rx, beta, &prior, &cfg(), &ch).unwrap();
        assert!(e.prior_only);
        let u = pcrb_upper(&rx, beta, &prior, &cfg(), &ch).unwrap();
        let jp = fim_prior(&prior).unwrap().jp_theta;
        assert_relative_eq!(e.value, 1.0 / jp, epsilon = 1e-15);
        assert_relative_eq!(u, 1.0 / jp, epsilon = 1e-15);
        assert_relative_eq!(e.value, 1e-4, max_relative = 1e-6);
    }

    #[test]
    fn pcrb_exact_below_upper_on_random_covariances() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let beta = Complex64::new(7.1e-4, 0.0);
        for _ in 0..100 {
            let rx = random_psd(&mut rng, 8, 0.1);
            let e = pcrb_exact(&rx, beta, &prior, &cfg(), &ch).unwrap();
            let u = pcrb_upper(&rx, beta, &prior, &cfg(), &ch).unwrap();
            assert!(e <= u + 1e-12, "exact {e} > upper {u}");
        }
    }

    #[test]
    fn pcrb_upper_decreases_with_reflection_amplitude() {
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let rx = isotropic_rx();
        let u1 = pcrb_upper(&rx, Complex64::new(7.1e-4, 0.0), &prior, &cfg(), &ch).unwrap();
        let u2 = pcrb_upper(&rx, Complex64::new(1.42e-3, 0.0), &prior, &cfg(), &ch).unwrap();
        assert!(u2 < u1);
    }

    #[test]
    fn pcrb_exact_phase_invariant_in_beta() {
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let rx = isotropic_rx();
        let base = pcrb_exact(&rx, Complex64::new(7.1e-4, 0.0), &prior, &cfg(), &ch).unwrap();
        for i in 1..8 {
            let phi = i as f64 * PI / 4.0;
            let beta = Complex64::from_polar(7.1e-4, phi);
            let v = pcrb_exact(&rx, beta, &prior, &cfg(), &ch).unwrap();
            assert_abs_diff_eq!(v, base, epsilon = 1e-10 * base.max(1.0));
        }
    }

    #[test]
    fn pcrb_monotone_under_aligned_psd_increments() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let beta = Complex64::new(7.1e-4, 0.0);
        let mut rx = isotropic_rx() * Complex64::new(0.2, 0.0);
        let mut prev = pcrb_exact(&rx, beta, &prior, &cfg(), &ch).unwrap();
        for _ in 0..50 {
            let k = rng.random_range(0..prior.len());
            let a = steering_tx(prior.angles_rad()[k], &cfg());
            let c: f64 = rng.random_range(1e-4..1e-2);
            rx += &a * a.adjoint() * Complex64::new(c, 0.0);
            let cur = pcrb_exact(&rx, beta, &prior, &cfg(), &ch).unwrap();
            assert!(cur <= prev + 1e-12, "PCRB increased: {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn q_bar_single_broadside_component() {
        let prior = LocationPrior::new(100.0, vec![0.0], vec![1.0], 1e-2).unwrap();
        let q = q_bar(&prior, &cfg());
        assert_relative_eq!(q.rho0, 703.21, epsilon = 0.01);
        for i in 0..8 {
            for j in 0..8 {
                assert_relative_eq!(q.matrix[(i, j)].re, 2.0 * q.rho0, epsilon = 1e-9);
                assert_abs_diff_eq!(q.matrix[(i, j)].im, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn q_bar_endfire_component_contributes_nothing() {
        // cos(2 * pi/2) + 1 = 0
        let prior = LocationPrior::new(
            100.0,
            vec![PI / 2.0 - 1e-15, 0.3],
            vec![0.5, 0.5],
            1e-2,
        )
        .unwrap();
        let q = q_bar(&prior, &cfg());
        let only = LocationPrior::new(100.0, vec![0.3], vec![1.0], 1e-2).unwrap();
        let q_only = q_bar(&only, &cfg());
        let diff = (&q.matrix - &q_only.matrix * Complex64::new(0.5, 0.0)).norm();
        assert!(diff < 1e-9 * q.matrix.norm());
    }

    #[test]
    fn q_bar_rank_at_most_k() {
        let q = q_bar(&ref_prior(1e-2), &cfg());
        let eig = q.matrix.clone().symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let count = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > 1e-9 * max_ev)
            .count();
        assert!(count <= 4);
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-9 * max_ev));
    }

    #[test]
    fn closed_form_no_beams_is_prior_variance() {
        let prior = ref_prior(1e-2);
        let q = q_bar(&prior, &cfg());
        let w = DVector::<Complex64>::zeros(8);
        let v = pcrb_closed_form(&w, &[], 7.1e-4, &q.matrix, &prior, &ref_channels());
        assert_relative_eq!(v, 1e-4, epsilon = 1e-18);
    }

    #[test]
    fn closed_form_depends_only_on_covariance_trace() {
        let prior = ref_prior(1e-2);
        let ch = ref_channels();
        let q = q_bar(&prior, &cfg());
        let w = steering_tx(0.2, &cfg()) * Complex64::new(0.1, 0.05);
        let v1 = steering_tx(-0.4, &cfg()) * Complex64::new(0.07, 0.0);
        let a = pcrb_closed_form(&w, &[v1.clone()], 7.1e-4, &q.matrix, &prior, &ch);
        // swap roles: same R_x = w w^H + v v^H
        let b = pcrb_closed_form(&v1, &[w], 7.1e-4, &q.matrix, &prior, &ch);
        assert_relative_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_tracks_quadrature_upper_bound() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = ref_channels();
        for (sigma, tol) in [(1e-3, 1e-3), (1e-2, 2e-2)] {
            let prior = ref_prior(sigma);
            let q = q_bar_from_derivative(&prior, &cfg());
            for _ in 0..20 {
                let (w, vs) = random_beams(&mut rng, 8, 4, 0.1);
                let mut rx = &w * w.adjoint();
                for v in &vs {
                    rx += v * v.adjoint();
                }
                let upper =
                    pcrb_upper(&rx, Complex64::new(7.1e-4, 0.0), &prior, &cfg(), &ch).unwrap();
                let closed = pcrb_closed_form(&w, &vs, 7.1e-4, &q, &prior, &ch);
                assert!(
                    (closed - upper).abs() / upper <= tol,
                    "sigma={sigma}: closed {closed} vs upper {upper}"
                );
            }
        }
    }

    #[test]
    fn qbar_component_check_reference_angles() {
        let prior = ref_prior(1e-3);
        for k in 0..4 {
            let chk = validate_qbar_component(k, &prior, &cfg()).unwrap();
            assert!(chk.max_rel_err <= 1e-3, "k={k}: {}", chk.max_rel_err);
            assert_relative_eq!(chk.deriv_gain_ratio, 570.0 / 330.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn qbar_component_error_shrinks_with_sigma() {
        let mut last = f64::INFINITY;
        for sigma in [1e-2, 1e-3, 1e-4] {
            let prior = ref_prior(sigma);
            let worst = (0..4)
                .map(|k| {
                    validate_qbar_component(k, &prior, &cfg())
                        .unwrap()
                        .max_rel_err
                })
                .fold(0.0f64, f64::max);
            assert!(worst < last, "error did not shrink at sigma={sigma}");
            last = worst;
        }
    }

    #[test]
    fn qbar_component_endfire_closed_form_vanishes() {
        let prior = LocationPrior::new(
            100.0,
            vec![PI / 2.0 - 1e-15, 0.3],
            vec![0.5, 0.5],
            1e-3,
        )
        .unwrap();
        let chk = validate_qbar_component(0, &prior, &cfg()).unwrap();
        assert!(chk.s_closed_form.norm() < 1e-9);
    }

    pub(crate) fn random_psd(
        rng: &mut impl rand::Rng,
        n: usize,
        trace: f64,
    ) -> DMatrix<Complex64> {
        let mut g = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = Complex64::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
            }
        }
        let p = &g * g.adjoint();
        let t: f64 = p.diagonal().iter().map(|c| c.re).sum();
        p * Complex64::new(trace / t, 0.0)
    }

    pub(crate) fn random_beams(
        rng: &mut impl rand::Rng,
        n: usize,
        k: usize,
        total_power: f64,
    ) -> (DVector<Complex64>, Vec<DVector<Complex64>>) {
        let mut randv = |scale: f64| {
            DVector::from_iterator(
                n,
                (0..n).map(|_| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        * scale
                }),
            )
        };
        let w = randv(1.0);
        let vs: Vec<_> = (0..k).map(|_| randv(0.5)).collect();
        let used: f64 = w.norm_squared() + vs.iter().map(|v| v.norm_squared()).sum::<f64>();
        let s = (total_power / used).sqrt();
        (
            w * Complex64::new(s, 0.0),
            vs.into_iter().map(|v| v * Complex64::new(s, 0.0)).collect(),
        )
    }
}
