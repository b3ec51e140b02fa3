//! RSS-derived ranging and bearing estimates with LOS/NLOS regimes.
//!
//! Ranging error is Gaussian with a standard deviation that grows as
//! `d^(gamma/2)`; NLOS links use a larger shadowing ratio. Bearing error is
//! Gaussian per angle in LOS, while an NLOS bearing is a uniform outlier that
//! carries no information about the source.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{relative_geometry, segment_intersects_box, ObstacleBox, SphericalDirection, Vec3};
use crate::kinematics::UavState;
use crate::scalar::{wrap_angle, Scalar};

/// Which estimates a UAV can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorRole {
    pub ranging: bool,
    pub bearing: bool,
}

impl SensorRole {
    pub const RANGING: Self = Self { ranging: true, bearing: false };
    pub const BEARING: Self = Self { ranging: false, bearing: true };
    pub const JOINT: Self = Self { ranging: true, bearing: true };

    pub fn is_valid(&self) -> bool {
        self.ranging || self.bearing
    }
}

/// Propagation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams<T> {
    /// Path-loss exponent gamma.
    pub path_loss_exponent: T,
    /// Shadowing std over path-loss exponent (dB ratio) in LOS.
    pub sigma_ratio_los: T,
    /// Same ratio for NLOS links.
    pub sigma_ratio_nlos: T,
    /// Bearing noise std per angle, radians.
    pub sigma_bearing: T,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("path_loss_exponent", self.path_loss_exponent),
            ("sigma_ratio_los", self.sigma_ratio_los),
            ("sigma_ratio_nlos", self.sigma_ratio_nlos),
            ("sigma_bearing", self.sigma_bearing),
        ];
        for (name, value) in positive {
            if !(value > T::zero() && value.is_finite()) {
                return Err(NavError::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Ranging std at the 1 m reference distance: `(ln 10 / 10) * ratio`.
    pub fn reference_range_std(&self, los: bool) -> T {
        let ratio = if los { self.sigma_ratio_los } else { self.sigma_ratio_nlos };
        T::LN_10() / T::lit(10.0) * ratio
    }
}

impl Default for ChannelParams<f64> {
    fn default() -> Self {
        Self { path_loss_exponent: 2.0, sigma_ratio_los: 1.7, sigma_ratio_nlos: 3.2, sigma_bearing: 10f64.to_radians() }
    }
}

/// One (possibly delayed) estimate produced by a UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<T> {
    pub uav_id: usize,
    /// Step at which the estimate was produced.
    pub timestamp: usize,
    pub range_est: Option<T>,
    pub bearing_est: Option<SphericalDirection<T>>,
    /// True when the UAV-source link is unobstructed.
    pub los: bool,
    /// Where the UAV was when it measured.
    pub uav_position: Vec3<T>,
}

impl<T: Scalar> Measurement<T> {
    pub fn role(&self) -> SensorRole {
        SensorRole { ranging: self.range_est.is_some(), bearing: self.bearing_est.is_some() }
    }
}

/// Ranging std `sigma_r0 * d^(gamma/2)` for the given regime.
pub fn ranging_std<T: Scalar>(distance: T, params: &ChannelParams<T>, los: bool) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(NavError::NonPositiveDistance(distance.to_f64_lossy()));
    }
    let half_gamma = params.path_loss_exponent / T::lit(2.0);
    Ok(params.reference_range_std(los) * distance.powf(half_gamma))
}

/// True when the straight path between UAV and source clears every obstacle.
pub fn los_state<T: Scalar>(uav: Vec3<T>, source: Vec3<T>, obstacles: &[ObstacleBox<T>]) -> bool {
    !obstacles.iter().any(|bx| segment_intersects_box(uav, source, bx))
}

fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Noisy range `d + n`, `n ~ N(0, ranging_std^2)`.
pub fn draw_range_measurement<T: Scalar, R: Rng + ?Sized>(
    distance: T,
    params: &ChannelParams<T>,
    los: bool,
    rng: &mut R,
) -> Result<T> {
    let std = ranging_std(distance, params, los)?;
    Ok(distance + std * standard_normal::<T, R>(rng))
}

/// Noisy bearing: Gaussian per angle in LOS, uniform outlier in NLOS.
pub fn draw_bearing_measurement<T: Scalar, R: Rng + ?Sized>(
    truth: SphericalDirection<T>,
    los: bool,
    params: &ChannelParams<T>,
    rng: &mut R,
) -> SphericalDirection<T> {
    let half_pi = T::FRAC_PI_2();
    if los {
        let d_az: T = standard_normal(rng);
        let d_el: T = standard_normal(rng);
        SphericalDirection::new(
            wrap_angle(truth.azimuth + params.sigma_bearing * d_az),
            (truth.elevation + params.sigma_bearing * d_el).max(-half_pi).min(half_pi),
        )
    } else {
        let u_az = T::lit(rng.random::<f64>());
        let u_el = T::lit(rng.random::<f64>());
        SphericalDirection::new(T::PI() - T::TAU() * u_az, -half_pi + T::PI() * u_el)
    }
}

/// Produces the estimate of one UAV at step `step` according to its role.
pub fn sense<T: Scalar, R: Rng + ?Sized>(
    uav: &UavState<T>,
    source: Vec3<T>,
    obstacles: &[ObstacleBox<T>],
    params: &ChannelParams<T>,
    rng: &mut R,
    step: usize,
) -> Result<Measurement<T>> {
    let geo = relative_geometry(uav.position, source)?;
    let los = los_state(uav.position, source, obstacles);
    let range_est = if uav.role.ranging { Some(draw_range_measurement(geo.distance, params, los, rng)?) } else { None };
    let bearing_est =
        if uav.role.bearing { Some(draw_bearing_measurement(geo.direction, los, params, rng)) } else { None };
    Ok(Measurement { uav_id: uav.id, timestamp: step, range_est, bearing_est, los, uav_position: uav.position })
}
