//! Uniform-linear-array geometry, steering vectors, channels and the
//! Gaussian-mixture location prior.
//!
//! Everything here is a pure function of its inputs; the types are immutable
//! after construction and safe to share across threads.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::ModelError;

/// Transmit/receive ULA geometry: element counts and spacing over wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    n_tx: usize,
    n_rx: usize,
    spacing_ratio: f64,
}

impl ArrayConfig {
    pub fn new(n_tx: usize, n_rx: usize, spacing_ratio: f64) -> Result<Self, ModelError> {
        if n_tx == 0 || n_rx == 0 {
            return Err(ModelError::InvalidConfig(
                "antenna counts must be at least 1".into(),
            ));
        }
        if !(spacing_ratio > 0.0) || !spacing_ratio.is_finite() {
            return Err(ModelError::InvalidConfig(
                "spacing_ratio must be positive and finite".into(),
            ));
        }
        Ok(Self {
            n_tx,
            n_rx,
            spacing_ratio,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }
}

/// Discrete candidate target locations smoothed into a Gaussian mixture.
///
/// `K` candidate angles at a common (known) range, with probabilities summing
/// to one and a common smoothing width `sigma_theta` in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationPrior {
    range_m: f64,
    angles_rad: Vec<f64>,
    probs: Vec<f64>,
    sigma_theta: f64,
}

impl LocationPrior {
    pub fn new(
        range_m: f64,
        angles_rad: Vec<f64>,
        probs: Vec<f64>,
        sigma_theta: f64,
    ) -> Result<Self, ModelError> {
        if angles_rad.is_empty() {
            return Err(ModelError::InvalidPrior("need at least one angle".into()));
        }
        if angles_rad.len() != probs.len() {
            return Err(ModelError::InvalidPrior(format!(
                "angle/probability length mismatch: {} vs {}",
                angles_rad.len(),
                probs.len()
            )));
        }
        if !(range_m > 0.0) {
            return Err(ModelError::InvalidPrior("range must be positive".into()));
        }
        if !(sigma_theta > 0.0) || !sigma_theta.is_finite() {
            return Err(ModelError::InvalidPrior(
                "sigma_theta must be positive and finite".into(),
            ));
        }
        for &a in &angles_rad {
            if !(-PI..PI).contains(&a) {
                return Err(ModelError::InvalidPrior(format!(
                    "angle {a} outside [-pi, pi)"
                )));
            }
        }
        for i in 0..angles_rad.len() {
            for j in (i + 1)..angles_rad.len() {
                if angles_rad[i] == angles_rad[j] {
                    return Err(ModelError::InvalidPrior(format!(
                        "duplicate candidate angle {}",
                        angles_rad[i]
                    )));
                }
            }
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidPrior(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidPrior(format!(
                "probabilities sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(Self {
            range_m,
            angles_rad,
            probs,
            sigma_theta,
        })
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    pub fn angles_rad(&self) -> &[f64] {
        &self.angles_rad
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sigma_theta(&self) -> f64 {
        self.sigma_theta
    }

    /// Number of candidate locations `K`.
    pub fn len(&self) -> usize {
        self.angles_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same candidate set with a different smoothing width.
    pub fn with_sigma_theta(&self, sigma_theta: f64) -> Result<Self, ModelError> {
        Self::new(
            self.range_m,
            self.angles_rad.clone(),
            self.probs.clone(),
            sigma_theta,
        )
    }
}

/// Channel gains, noise powers and the transmit power budget, all in linear
/// units (watts, dimensionless gains).
///
/// The BS-target channel enters only through the one-way power gain
/// `beta0_over_r2` = beta_0 / r^2, so that single ratio is stored instead of
/// beta_0 and r separately. The worst-case two-way reflection amplitude is
/// `beta_min_abs()` = beta0_over_r2 * alpha_min_abs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    beta0_over_r2: f64,
    alpha_min_abs: f64,
    noise_user_w: f64,
    noise_eve_w: f64,
    noise_radar_w: f64,
    power_budget_w: f64,
    user_channel: DVector<Complex64>,
}

impl ChannelParams {
    pub fn new(
        beta0_over_r2: f64,
        alpha_min_abs: f64,
        noise_user_w: f64,
        noise_eve_w: f64,
        noise_radar_w: f64,
        power_budget_w: f64,
        user_channel: DVector<Complex64>,
    ) -> Result<Self, ModelError> {
        for (name, v) in [
            ("beta0_over_r2", beta0_over_r2),
            ("alpha_min_abs", alpha_min_abs),
            ("noise_user_w", noise_user_w),
            ("noise_eve_w", noise_eve_w),
            ("noise_radar_w", noise_radar_w),
            ("power_budget_w", power_budget_w),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if user_channel.norm() == 0.0 {
            return Err(ModelError::InvalidConfig(
                "user channel must have nonzero norm".into(),
            ));
        }
        Ok(Self {
            beta0_over_r2,
            alpha_min_abs,
            noise_user_w,
            noise_eve_w,
            noise_radar_w,
            power_budget_w,
            user_channel,
        })
    }

    pub fn beta0_over_r2(&self) -> f64 {
        self.beta0_over_r2
    }

    pub fn alpha_min_abs(&self) -> f64 {
        self.alpha_min_abs
    }

    pub fn noise_user_w(&self) -> f64 {
        self.noise_user_w
    }

    pub fn noise_eve_w(&self) -> f64 {
        self.noise_eve_w
    }

    pub fn noise_radar_w(&self) -> f64 {
        self.noise_radar_w
    }

    pub fn power_budget_w(&self) -> f64 {
        self.power_budget_w
    }

    pub fn user_channel(&self) -> &DVector<Complex64> {
        &self.user_channel
    }

    /// Worst-case reflection amplitude |beta_min| = (beta_0/r^2) |alpha_min|.
    pub fn beta_min_abs(&self) -> f64 {
        self.beta0_over_r2 * self.alpha_min_abs
    }

    /// Effective eavesdropper noise term sigma_E^2 r^2 / beta_0.
    pub fn eve_noise_eff(&self) -> f64 {
        self.noise_eve_w / self.beta0_over_r2
    }
}

fn steering(theta: f64, n: usize, delta: f64) -> DVector<Complex64> {
    let s = theta.sin();
    DVector::from_iterator(
        n,
        (1..=n).map(|k| {
            let phase = PI * delta * (2.0 * k as f64 - 1.0 - n as f64) * s;
            Complex64::new(phase.cos(), phase.sin())
        }),
    )
}

fn steering_deriv(theta: f64, n: usize, delta: f64) -> DVector<Complex64> {
    let c = theta.cos();
    let a = steering(theta, n, delta);
    DVector::from_iterator(
        n,
        (1..=n).map(|k| {
            let coeff = PI * delta * (2.0 * k as f64 - 1.0 - n as f64) * c;
            Complex64::new(0.0, coeff) * a[k - 1]
        }),
    )
}

/// Transmit steering vector a(theta); element n is
/// exp(j pi Delta (2n - 1 - N_t) sin(theta)).
pub fn steering_tx(theta: f64, cfg: &ArrayConfig) -> DVector<Complex64> {
    steering(theta, cfg.n_tx, cfg.spacing_ratio)
}

/// Receive steering vector b(theta); element n is
/// exp(j pi Delta (2n - 1 - N_r) sin(theta)).
pub fn steering_rx(theta: f64, cfg: &ArrayConfig) -> DVector<Complex64> {
    steering(theta, cfg.n_rx, cfg.spacing_ratio)
}

/// Elementwise analytic derivative of [`steering_tx`] with respect to theta.
pub fn steering_tx_deriv(theta: f64, cfg: &ArrayConfig) -> DVector<Complex64> {
    steering_deriv(theta, cfg.n_tx, cfg.spacing_ratio)
}

/// Elementwise analytic derivative of [`steering_rx`] with respect to theta.
pub fn steering_rx_deriv(theta: f64, cfg: &ArrayConfig) -> DVector<Complex64> {
    steering_deriv(theta, cfg.n_rx, cfg.spacing_ratio)
}

/// Two-way array response M(theta) = b(theta) a^H(theta), rank one by
/// construction.
pub fn response_matrix(theta: f64, cfg: &ArrayConfig) -> DMatrix<Complex64> {
    let a = steering_tx(theta, cfg);
    let b = steering_rx(theta, cfg);
    &b * a.adjoint()
}

/// Analytic derivative dM/dtheta = db a^H + b da^H.
pub fn response_matrix_deriv(theta: f64, cfg: &ArrayConfig) -> DMatrix<Complex64> {
    let a = steering_tx(theta, cfg);
    let b = steering_rx(theta, cfg);
    let da = steering_tx_deriv(theta, cfg);
    let db = steering_rx_deriv(theta, cfg);
    &db * a.adjoint() + &b * da.adjoint()
}

/// Gaussian-mixture prior density over the target angle, in 1/rad.
pub fn gmm_pdf(theta: f64, prior: &LocationPrior) -> f64 {
    let sig = prior.sigma_theta;
    let norm = 1.0 / (sig * (2.0 * PI).sqrt());
    prior
        .angles_rad
        .iter()
        .zip(&prior.probs)
        .map(|(&tk, &pk)| {
            let t = (theta - tk) / sig;
            pk * norm * (-0.5 * t * t).exp()
        })
        .sum()
}

/// Log of [`gmm_pdf`], evaluated stably far into the tails.
pub fn gmm_logpdf(theta: f64, prior: &LocationPrior) -> f64 {
    let sig = prior.sigma_theta;
    let log_norm = -(sig * (2.0 * PI).sqrt()).ln();
    let mut max_term = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(prior.len());
    for (&tk, &pk) in prior.angles_rad.iter().zip(&prior.probs) {
        if pk == 0.0 {
            continue;
        }
        let t = (theta - tk) / sig;
        let lt = pk.ln() + log_norm - 0.5 * t * t;
        max_term = max_term.max(lt);
        terms.push(lt);
    }
    if terms.is_empty() || max_term == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max_term + terms.iter().map(|&lt| (lt - max_term).exp()).sum::<f64>().ln()
}

/// LoS eavesdropping channel h_E^H(theta) = sqrt(beta_0/r^2) a^H(theta).
pub fn eavesdropper_channel(
    theta: f64,
    channels: &ChannelParams,
    cfg: &ArrayConfig,
) -> RowDVector<Complex64> {
    let gain = channels.beta0_over_r2.sqrt();
    let a = steering_tx(theta, cfg);
    RowDVector::from_iterator(cfg.n_tx, a.iter().map(|v| v.conj() * gain))
}

/// LoS BS-user channel h = sqrt(10^(-L/10)) a(user_angle) for a path loss of
/// L dB.
pub fn los_user_channel(
    user_angle: f64,
    path_loss_db: f64,
    cfg: &ArrayConfig,
) -> Result<DVector<Complex64>, ModelError> {
    if path_loss_db < 0.0 {
        return Err(ModelError::InvalidConfig(format!(
            "path loss must be nonnegative dB, got {path_loss_db}"
        )));
    }
    let amp = 10f64.powf(-path_loss_db / 10.0).sqrt();
    Ok(steering_tx(user_angle, cfg) * Complex64::new(amp, 0.0))
}
