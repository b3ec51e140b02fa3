//! Vector math, UAV-to-source geometry and axis-aligned obstacles.
//!
//! Angles follow the usual spherical convention: azimuth is measured in the
//! XY-plane from the +x axis, elevation from the XY-plane toward +z. All
//! relative quantities are taken from the UAV toward the source.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::scalar::Scalar;

/// Point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self * n.recip())
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    /// Lossy conversion between scalar types.
    pub fn cast<U: Scalar>(self) -> Vec3<U> {
        Vec3::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()), U::lit(self.z.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Scalar> AddAssign for Vec3<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Scalar> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Scalar> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Direction of arrival: azimuth in `(-pi, pi]`, elevation in `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SphericalDirection<T> {
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Scalar> SphericalDirection<T> {
    pub fn new(azimuth: T, elevation: T) -> Self {
        Self { azimuth, elevation }
    }

    pub fn is_valid(&self) -> bool {
        let half_pi = T::FRAC_PI_2();
        self.azimuth > -T::PI() && self.azimuth <= T::PI() && self.elevation >= -half_pi && self.elevation <= half_pi
    }
}

/// Distance and direction from a UAV toward the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeGeometry<T> {
    pub distance: T,
    pub direction: SphericalDirection<T>,
}

/// Computes distance, azimuth and elevation from `uav` toward `source`.
///
/// The azimuth is defined as zero when the source is straight above or below.
pub fn relative_geometry<T: Scalar>(uav: Vec3<T>, source: Vec3<T>) -> Result<RelativeGeometry<T>> {
    let delta = source - uav;
    let distance = delta.norm();
    if !(distance > T::zero()) {
        return Err(NavError::DegenerateGeometry("UAV coincides with the source"));
    }
    let azimuth = if delta.x == T::zero() && delta.y == T::zero() {
        T::zero()
    } else {
        // atan2 returns -pi for (-0, -x); fold it onto +pi.
        let a = delta.y.atan2(delta.x);
        if a <= -T::PI() {
            T::PI()
        } else {
            a
        }
    };
    let sin_el = (delta.z / distance).max(-T::one()).min(T::one());
    Ok(RelativeGeometry { distance, direction: SphericalDirection::new(azimuth, sin_el.asin()) })
}

/// Unit vector `[cos az cos el, sin az cos el, sin el]`.
pub fn direction_vector<T: Scalar>(dir: SphericalDirection<T>) -> Vec3<T> {
    let (sin_az, cos_az) = dir.azimuth.sin_cos();
    let (sin_el, cos_el) = dir.elevation.sin_cos();
    Vec3::new(cos_az * cos_el, sin_az * cos_el, sin_el)
}

/// Axis-aligned box with inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> ObstacleBox<T> {
    /// Builds a box, rejecting corners that are not ordered componentwise.
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(NavError::InvalidParameter("obstacle corner not finite".into()));
        }
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(NavError::InvalidParameter(format!("obstacle min corner {min:?} exceeds max corner {max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Point of the box closest to `p` (p itself when inside).
    pub fn closest_point(&self, p: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            p.x.max(self.min.x).min(self.max.x),
            p.y.max(self.min.y).min(self.max.y),
            p.z.max(self.min.z).min(self.max.z),
        )
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self { min: self.min + offset, max: self.max + offset }
    }
}

/// Slab test for the closed segment `[a, b]` against a closed box.
pub fn segment_intersects_box<T: Scalar>(a: Vec3<T>, b: Vec3<T>, bx: &ObstacleBox<T>) -> bool {
    let dir = b - a;
    let mut t_enter = T::zero();
    let mut t_exit = T::one();
    for ((origin, delta), (lo, hi)) in
        a.to_array().into_iter().zip(dir.to_array()).zip(bx.min.to_array().into_iter().zip(bx.max.to_array()))
    {
        if delta == T::zero() {
            if origin < lo || origin > hi {
                return false;
            }
            continue;
        }
        let inv = delta.recip();
        let mut t0 = (lo - origin) * inv;
        let mut t1 = (hi - origin) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return false;
        }
    }
    true
}

/// Euclidean distance from `p` to the box, zero inside.
pub fn distance_point_to_box<T: Scalar>(p: Vec3<T>, bx: &ObstacleBox<T>) -> T {
    p.distance(bx.closest_point(p))
}
