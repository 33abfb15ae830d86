//! Lambertian line-of-sight optical channel.
//!
//! The receiver photodiode faces straight up and every LED faces straight
//! down, so the radiation angle at the LED equals the incidence angle at the
//! receiver and `cos φ = cos ψ = h / d`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::{LedPosition, UserPosition};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("{name} must be {expected}, got {value}")]
    OutOfRange {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
}

/// Optical front-end constants. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Physical detector area `A_r` (m²).
    pub detector_area: f64,
    /// LED semi-angle at half power `Φ_1/2`.
    pub half_power_semiangle_deg: f64,
    /// Optical filter gain `T_s`, taken as angle independent.
    pub optical_filter_gain: f64,
    /// Concentrator refractive index `n_r`.
    pub refractive_index: f64,
    /// Receiver field of view `ψ_c`.
    pub fov_deg: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            detector_area: 1e-4,
            half_power_semiangle_deg: 30.0,
            optical_filter_gain: 1.0,
            refractive_index: 1.5,
            fov_deg: 80.0,
        }
    }
}

/// Cosine of an angle in degrees, exact at multiples of 60° and 90°.
pub fn cos_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        1.0
    } else if r == 60.0 || r == 300.0 {
        0.5
    } else if r == 90.0 || r == 270.0 {
        0.0
    } else if r == 120.0 || r == 240.0 {
        -0.5
    } else if r == 180.0 {
        -1.0
    } else {
        r.to_radians().cos()
    }
}

/// Lambertian order `m = −ln 2 / ln cos Φ_1/2`, semi-angle in degrees.
pub fn lambertian_order(half_power_semiangle_deg: f64) -> Result<f64, ChannelError> {
    if !(half_power_semiangle_deg > 0.0 && half_power_semiangle_deg < 90.0) {
        return Err(ChannelError::OutOfRange {
            name: "half_power_semiangle_deg",
            expected: "in (0, 90) degrees",
            value: half_power_semiangle_deg,
        });
    }
    Ok(-std::f64::consts::LN_2 / cos_deg(half_power_semiangle_deg).ln())
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let check = |ok: bool, name, expected, value| {
            if ok {
                Ok(())
            } else {
                Err(ChannelError::OutOfRange { name, expected, value })
            }
        };
        check(
            self.detector_area.is_finite() && self.detector_area > 0.0,
            "detector_area",
            "> 0",
            self.detector_area,
        )?;
        lambertian_order(self.half_power_semiangle_deg)?;
        check(
            self.optical_filter_gain.is_finite() && self.optical_filter_gain > 0.0,
            "optical_filter_gain",
            "> 0",
            self.optical_filter_gain,
        )?;
        check(
            self.refractive_index.is_finite() && self.refractive_index >= 1.0,
            "refractive_index",
            ">= 1",
            self.refractive_index,
        )?;
        check(
            self.fov_deg > 0.0 && self.fov_deg <= 90.0,
            "fov_deg",
            "in (0, 90] degrees",
            self.fov_deg,
        )
    }

    pub fn lambertian_order(&self) -> f64 {
        lambertian_order(self.half_power_semiangle_deg).expect("validated half-power semi-angle")
    }

    /// Concentrator gain `n_r² / sin² ψ_c` inside the field of view, zero
    /// outside. `incidence` is in radians.
    pub fn concentrator_gain(&self, incidence: f64) -> f64 {
        let fov = self.fov_deg.to_radians();
        if (0.0..=fov).contains(&incidence) {
            self.refractive_index.powi(2) / fov.sin().powi(2)
        } else {
            0.0
        }
    }

    /// LOS DC gain between `led` and a floor receiver at `u`.
    pub fn channel_gain(&self, led: &LedPosition, u: &UserPosition) -> f64 {
        let horizontal = led.horizontal_distance(u);
        let height = led.z;
        let d2 = horizontal * horizontal + height * height;
        let d = d2.sqrt();
        let cos = height / d;
        let incidence = horizontal.atan2(height);
        let g = self.concentrator_gain(incidence);
        if g == 0.0 {
            return 0.0;
        }
        let m = self.lambertian_order();
        self.detector_area * (m + 1.0) / (2.0 * PI * d2)
            * cos.powf(m)
            * g
            * self.optical_filter_gain
            * cos
    }

    pub fn gain_vector(&self, leds: &[LedPosition], u: &UserPosition) -> ChannelGainVector {
        ChannelGainVector(leds.iter().map(|led| self.channel_gain(led, u)).collect())
    }
}

/// Per-LED channel gains α, one entry per LED.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGainVector(pub Vec<f64>);

impl ChannelGainVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
