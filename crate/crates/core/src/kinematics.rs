//! UAV state, the position transition and motion-limit enforcement.

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::Vec3;
use crate::scalar::{wrap_angle, Scalar};
use crate::sensing::SensorRole;

/// Pose of one agent at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState<T> {
    /// 1-based identifier, matching roster numbering.
    pub id: usize,
    pub position: Vec3<T>,
    /// Heading in the XY-plane, radians in `(-pi, pi]`.
    pub heading: T,
    /// Tilt above the XY-plane, radians in `[-pi/2, pi/2]`.
    pub tilt: T,
    pub role: SensorRole,
}

impl<T: Scalar> UavState<T> {
    pub fn new(id: usize, position: Vec3<T>, role: SensorRole) -> Self {
        Self { id, position, heading: T::zero(), tilt: T::zero(), role }
    }
}

/// Displacement applied over one step, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput<T> {
    pub u: Vec3<T>,
}

impl<T: Scalar> ControlInput<T> {
    pub fn new(u: Vec3<T>) -> Self {
        Self { u }
    }

    pub fn speed(&self, dt: T) -> T {
        self.u.norm() / dt
    }
}

/// Speed, turn-rate and altitude limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits<T> {
    /// Minimum speed, m per unit time.
    pub v_min: T,
    pub v_max: T,
    /// Maximum heading change per step, radians.
    pub phi_max: T,
    /// Maximum tilt change per step, radians.
    pub theta_max: T,
    pub z_min: T,
    pub z_max: T,
    /// Step duration.
    pub dt: T,
}

impl<T: Scalar> KinematicLimits<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(NavError::InvalidParameter(msg.to_string()));
        if !(self.v_min >= T::zero() && self.v_min <= self.v_max) {
            return fail("kinematic limits need 0 <= v_min <= v_max");
        }
        if !(self.z_min <= self.z_max) {
            return fail("kinematic limits need z_min <= z_max");
        }
        if !(self.phi_max >= T::zero() && self.theta_max >= T::zero()) {
            return fail("turn-rate limits must be non-negative");
        }
        if !(self.dt > T::zero()) {
            return fail("time step must be positive");
        }
        Ok(())
    }
}

impl Default for KinematicLimits<f64> {
    fn default() -> Self {
        Self {
            v_min: 0.5,
            v_max: 1.0,
            phi_max: 50f64.to_radians(),
            theta_max: 50f64.to_radians(),
            z_min: 2.0,
            z_max: 25.0,
            dt: 1.0,
        }
    }
}

/// `u = v dt [cos(psi) cos(theta), sin(psi) cos(theta), sin(theta)]`.
pub fn control_from_polar<T: Scalar>(speed: T, heading: T, tilt: T, dt: T) -> ControlInput<T> {
    let (sin_psi, cos_psi) = heading.sin_cos();
    let (sin_th, cos_th) = tilt.sin_cos();
    let step = speed * dt;
    ControlInput::new(Vec3::new(step * cos_psi * cos_th, step * sin_psi * cos_th, step * sin_th))
}

/// Heading and tilt of a displacement, `None` for the zero vector.
///
/// A purely vertical displacement reports heading 0; callers that track a
/// previous heading should keep it instead (see [`apply_transition`]).
pub fn heading_of<T: Scalar>(u: &ControlInput<T>) -> Option<(T, T)> {
    let n = u.u.norm();
    if !(n > T::zero()) {
        return None;
    }
    let psi = if u.u.x == T::zero() && u.u.y == T::zero() { T::zero() } else { wrap_angle(u.u.y.atan2(u.u.x)) };
    let theta = (u.u.z / n).max(-T::one()).min(T::one()).asin();
    Some((psi, theta))
}

/// Moves the UAV by `u` and records the new heading and tilt.
pub fn apply_transition<T: Scalar>(state: &UavState<T>, u: &ControlInput<T>) -> UavState<T> {
    let mut next = *state;
    next.position = state.position + u.u;
    if let Some((psi, theta)) = heading_of(u) {
        if u.u.x != T::zero() || u.u.y != T::zero() {
            next.heading = psi;
        }
        next.tilt = theta;
    }
    next
}

/// Result of [`clamp_control`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedControl<T> {
    pub control: ControlInput<T>,
    /// Set when no move satisfies every limit; altitude and speed are kept,
    /// the tilt rate may be exceeded.
    pub infeasible: bool,
}

/// Projects a raw displacement onto the admissible set.
///
/// Order: heading and tilt deltas are clipped toward the raw direction, the
/// norm is scaled into `[v_min dt, v_max dt]`, then the vertical component is
/// clipped to keep the altitude inside `[z_min, z_max]` with the horizontal
/// part rescaled to hold the speed. A zero raw input moves at `v_min` along
/// the previous heading and tilt.
pub fn clamp_control<T: Scalar>(
    u_raw: &ControlInput<T>,
    prev: &UavState<T>,
    limits: &KinematicLimits<T>,
) -> ClampedControl<T> {
    let dt = limits.dt;
    let half_pi = T::FRAC_PI_2();
    let raw_norm = u_raw.u.norm();
    let moving = raw_norm > T::epsilon() && raw_norm.is_finite();

    let (psi_raw, theta_raw, speed_raw) = match heading_of(u_raw).filter(|_| moving) {
        Some((psi, theta)) => {
            let psi = if u_raw.u.x == T::zero() && u_raw.u.y == T::zero() { prev.heading } else { psi };
            (psi, theta, raw_norm / dt)
        }
        None => (prev.heading, prev.tilt, T::zero()),
    };

    let dpsi = wrap_angle(psi_raw - prev.heading).max(-limits.phi_max).min(limits.phi_max);
    let psi = wrap_angle(prev.heading + dpsi);
    let theta =
        theta_raw.max(prev.tilt - limits.theta_max).min(prev.tilt + limits.theta_max).max(-half_pi).min(half_pi);
    let speed = speed_raw.max(limits.v_min).min(limits.v_max);
    let u = control_from_polar(speed, psi, theta, dt).u;

    let lo = limits.z_min - prev.position.z;
    let hi = limits.z_max - prev.position.z;
    if u.z >= lo && u.z <= hi {
        return ClampedControl { control: ControlInput::new(u), infeasible: false };
    }

    let step_min = limits.v_min * dt;
    let step_max = limits.v_max * dt;
    let mut infeasible = false;
    let mut uz = u.z.max(lo).min(hi);
    if uz.abs() > step_max {
        // Only reachable when the UAV starts outside the altitude box.
        uz = uz.signum() * step_max;
        infeasible = true;
    }
    let target = u.norm().max(uz.abs()).max(step_min).min(step_max);
    let horizontal = (target * target - uz * uz).max(T::zero()).sqrt();
    let (sin_psi, cos_psi) = psi.sin_cos();
    let clipped = Vec3::new(horizontal * cos_psi, horizontal * sin_psi, uz);

    let tilt_of = |v: Vec3<T>| {
        let n = v.norm();
        if n > T::zero() {
            (v.z / n).max(-T::one()).min(T::one()).asin()
        } else {
            prev.tilt
        }
    };
    let slack = T::lit(1e-12);
    if (tilt_of(clipped) - prev.tilt).abs() <= limits.theta_max + slack {
        return ClampedControl { control: ControlInput::new(clipped), infeasible };
    }

    // The clipped move levels off faster than the tilt rate allows. Fly at the
    // window edge nearest the horizontal, slowing down to stay inside the box.
    let edge = prev.tilt - prev.tilt.signum() * limits.theta_max;
    let sin_edge = edge.sin();
    let room = if sin_edge > T::zero() { hi } else { -lo };
    let max_step = if sin_edge.abs() > T::zero() { room / sin_edge.abs() } else { T::infinity() };
    if max_step >= step_min {
        let step = target.min(max_step).max(step_min);
        let u = control_from_polar(T::one(), psi, edge, step).u;
        return ClampedControl { control: ControlInput::new(u), infeasible };
    }
    ClampedControl { control: ControlInput::new(clipped), infeasible: true }
}
