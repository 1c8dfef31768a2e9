//! The full scenario description consumed by the design and evaluation
//! pipelines: array geometry, location prior, channel/noise parameters and
//! the sensing accuracy threshold.

use crate::array::{ArrayConfig, ChannelParams, LocationPrior};
use crate::error::ModelError;

/// Single source of truth for one problem instance. All quantities are in
/// linear units (watts, radians); unit conversions belong to the CLI
/// boundary.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub prior: LocationPrior,
    pub channels: ChannelParams,
    /// Sensing accuracy threshold Gamma: the closed-form PCRB upper bound of
    /// the designed beams must not exceed this value (rad^2).
    pub sensing_threshold: f64,
}

impl ScenarioConfig {
    pub fn new(
        array: ArrayConfig,
        prior: LocationPrior,
        channels: ChannelParams,
        sensing_threshold: f64,
    ) -> Result<Self, ModelError> {
        if channels.user_channel().len() != array.n_tx() {
            return Err(ModelError::InvalidConfig(format!(
                "user channel length {} != N_t {}",
                channels.user_channel().len(),
                array.n_tx()
            )));
        }
        if !(sensing_threshold > 0.0) || !sensing_threshold.is_finite() {
            return Err(ModelError::InvalidConfig(
                "sensing threshold must be positive and finite".into(),
            ));
        }
        Ok(Self {
            array,
            prior,
            channels,
            sensing_threshold,
        })
    }

    /// True when 1/Gamma <= 1/sigma_theta^2, i.e. the prior alone already
    /// meets the sensing threshold and the constraint puts no demand on the
    /// beams.
    pub fn sensing_vacuous(&self) -> bool {
        let sig2 = self.prior.sigma_theta() * self.prior.sigma_theta();
        1.0 / self.sensing_threshold <= 1.0 / sig2
    }

    /// Right-hand side of the sensing constraint per unit of the scaling
    /// variable: (sigma_R^2 / 2 |beta_min|^2) (1/Gamma - 1/sigma_theta^2).
    pub fn sensing_rhs(&self) -> f64 {
        let sig2 = self.prior.sigma_theta() * self.prior.sigma_theta();
        let b = self.channels.beta_min_abs();
        self.channels.noise_radar_w() / (2.0 * b * b)
            * (1.0 / self.sensing_threshold - 1.0 / sig2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use num_complex::Complex64;

    #[test]
    fn sensing_rhs_reference_numbers() {
        let array = ArrayConfig::new(8, 10, 0.5).unwrap();
        let d = std::f64::consts::PI / 180.0;
        let prior = LocationPrior::new(
            200.0,
            vec![-55.0 * d, -35.0 * d, 65.0 * d, 45.0 * d],
            vec![0.2, 0.3, 0.1, 0.4],
            1e-2,
        )
        .unwrap();
        let channels = ChannelParams::new(
            0.1,
            0.0071,
            1e-9,
            1e-9,
            1e-9,
            0.1,
            DVector::from_element(8, Complex64::new(1.0, 0.0)),
        )
        .unwrap();
        let sc = ScenarioConfig::new(array, prior, channels, 2.68e-5).unwrap();
        // hand calculation: 1e-9 * (37313.43 - 10000) / (2 * (7.1e-4)^2)
        assert_relative_eq!(sc.sensing_rhs(), 27.09, epsilon = 0.01);
        assert!(!sc.sensing_vacuous());
        let vac = ScenarioConfig {
            sensing_threshold: 1e-4,
            ..sc
        };
        assert!(vac.sensing_vacuous());
        assert_relative_eq!(vac.sensing_rhs(), 0.0, epsilon = 1e-9);
    }
}
