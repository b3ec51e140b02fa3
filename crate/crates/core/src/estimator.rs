//! Source-position estimates fed to the information cost.
//!
//! Two modes: an oracle that returns the true position with optional
//! Gaussian jitter, and a Gauss-Newton maximum-likelihood fit of the stored
//! range/bearing estimates.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fisher::Fim;
use crate::geometry::{direction_vector, Vec3};
use crate::linalg::Mat3;
use crate::network::NetworkView;
use crate::scalar::{wrap_angle, Scalar};
use crate::sensing::{ranging_std, ChannelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEstimate<T> {
    pub position: Vec3<T>,
    pub valid: bool,
}

impl<T: Scalar> SourceEstimate<T> {
    pub fn valid(position: Vec3<T>) -> Self {
        Self { position, valid: true }
    }

    pub fn invalid(position: Vec3<T>) -> Self {
        Self { position, valid: false }
    }

    /// The position, if usable.
    pub fn usable(&self) -> Option<Vec3<T>> {
        (self.valid && self.position.is_finite()).then_some(self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Oracle,
    Ml,
}

/// True position plus isotropic Gaussian jitter of std `jitter_std`.
pub fn oracle_estimate<T: Scalar, R: Rng + ?Sized>(
    true_source: Vec3<T>,
    jitter_std: T,
    rng: &mut R,
) -> SourceEstimate<T> {
    if jitter_std == T::zero() {
        return SourceEstimate::valid(true_source);
    }
    let mut draw = || T::lit(rng.sample::<f64, _>(StandardNormal)) * jitter_std;
    let offset = Vec3::new(draw(), draw(), draw());
    SourceEstimate::valid(true_source + offset)
}

pub const ML_MAX_ITERATIONS: usize = 50;
pub const ML_TOLERANCE_M: f64 = 1e-4;

/// Starting point for [`ml_estimate`]: the point implied by a LOS joint
/// estimate when one exists, otherwise the centroid of the stored positions.
pub fn default_init<T: Scalar>(view: &NetworkView<T>) -> Vec3<T> {
    let joint = view.iter().find_map(|(_, m)| match (m.range_est, m.bearing_est) {
        (Some(r), Some(b)) if m.los && r > T::zero() => Some(m.uav_position + direction_vector(b) * r),
        _ => None,
    });
    if let Some(p) = joint {
        return p;
    }
    let (sum, n) = view.iter().fold((Vec3::zero(), 0usize), |(s, n), (_, m)| (s + m.uav_position, n + 1));
    if n == 0 {
        sum
    } else {
        sum * T::lit(1.0 / n as f64)
    }
}

/// One weighted residual row: `(residual / sigma, gradient / sigma)`.
type Row<T> = (T, Vec3<T>);

fn residual_rows<T: Scalar>(view: &NetworkView<T>, params: &ChannelParams<T>, p: Vec3<T>) -> Option<Vec<Row<T>>> {
    let mut rows = Vec::new();
    let sigma_b = params.sigma_bearing;
    for (_, m) in view.iter() {
        let delta = p - m.uav_position;
        let d = delta.norm();
        if !(d > T::zero()) {
            return None;
        }
        if let Some(range) = m.range_est {
            let sigma = ranging_std(d, params, m.los).ok()?;
            rows.push(((range - d) / sigma, delta * (d * sigma).recip()));
        }
        if let (Some(b), true) = (m.bearing_est, m.los) {
            let rho_sq = delta.x * delta.x + delta.y * delta.y;
            let rho = rho_sq.sqrt();
            if !(rho > T::zero()) {
                return None;
            }
            let az = delta.y.atan2(delta.x);
            let el = (delta.z / d).max(-T::one()).min(T::one()).asin();
            let d_az = Vec3::new(-delta.y, delta.x, T::zero()) * rho_sq.recip();
            let d_el = Vec3::new(-delta.x * delta.z, -delta.y * delta.z, rho_sq) * (d * d * rho).recip();
            rows.push((wrap_angle(b.azimuth - az) / sigma_b, d_az * sigma_b.recip()));
            rows.push(((b.elevation - el) / sigma_b, d_el * sigma_b.recip()));
        }
    }
    Some(rows)
}

fn sum_squares<T: Scalar>(rows: &[Row<T>]) -> T {
    rows.iter().fold(T::zero(), |acc, (r, _)| acc + *r * *r)
}

/// Gauss-Newton fit of the stored estimates. NLOS bearings are ignored.
///
/// Returns an invalid estimate when the geometry does not pin down a point
/// or the iteration fails to converge.
pub fn ml_estimate<T: Scalar>(view: &NetworkView<T>, params: &ChannelParams<T>, init: Vec3<T>) -> SourceEstimate<T> {
    let tol = T::lit(ML_TOLERANCE_M);
    let mut p = init;
    let Some(mut rows) = residual_rows(view, params, p) else {
        return SourceEstimate::invalid(p);
    };
    for _ in 0..ML_MAX_ITERATIONS {
        let mut normal = Mat3::zeros();
        let mut rhs = Vec3::zero();
        for (r, g) in &rows {
            normal += Mat3::outer(*g, *g);
            rhs += *g * *r;
        }
        let normal = Fim(normal);
        if normal.is_singular() {
            return SourceEstimate::invalid(p);
        }
        let Some(step) = solve3(normal.matrix(), rhs) else {
            return SourceEstimate::invalid(p);
        };
        // Halve the step until the residual stops growing.
        let current = sum_squares(&rows);
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = p + step * scale;
            if let Some(new_rows) = residual_rows(view, params, candidate) {
                if sum_squares(&new_rows) <= current {
                    accepted = Some((candidate, new_rows));
                    break;
                }
            }
            scale *= T::lit(0.5);
        }
        let Some((next, new_rows)) = accepted else {
            // No descent possible: already at a stationary point.
            return SourceEstimate::valid(p);
        };
        let moved = next.distance(p);
        p = next;
        rows = new_rows;
        if !p.is_finite() {
            return SourceEstimate::invalid(p);
        }
        if moved < tol {
            return SourceEstimate::valid(p);
        }
    }
    SourceEstimate::invalid(p)
}

fn solve3<T: Scalar>(a: &Mat3<T>, b: Vec3<T>) -> Option<Vec3<T>> {
    let rows: Vec<Vec<T>> = a.m.iter().map(|r| r.to_vec()).collect();
    crate::linalg::spd_solve(&rows, &b.to_array()).map(|x| Vec3::new(x[0], x[1], x[2]))
}
