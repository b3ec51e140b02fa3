//! Fisher information about the source position and the A-/D-optimality costs.
//!
//! Each ranging estimate contributes `A_r a a^T`, where `a` is the unit vector
//! from the UAV toward the source. Each LOS bearing estimate contributes
//! `A_b (G_az + G_el)`, the information of the azimuth and elevation angles
//! mapped to Cartesian coordinates. NLOS bearings contribute nothing.

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{direction_vector, relative_geometry, SphericalDirection, Vec3};
use crate::linalg::Mat3;
use crate::network::NetworkView;
use crate::scalar::Scalar;
use crate::sensing::{ChannelParams, Measurement};

/// Optimal-design criterion driving the navigation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Minimize `trace(J^-1)`.
    #[serde(rename = "a-opt")]
    AOptimal,
    /// Minimize `-ln det J`.
    #[serde(rename = "d-opt")]
    DOptimal,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::AOptimal => "a-opt",
            Criterion::DOptimal => "d-opt",
        }
    }
}

/// Symmetric 3x3 information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fim<T>(pub Mat3<T>);

impl<T: Scalar> Fim<T> {
    pub fn zeros() -> Self {
        Self(Mat3::zeros())
    }

    pub fn matrix(&self) -> &Mat3<T> {
        &self.0
    }

    pub fn xx(&self) -> T {
        self.0.m[0][0]
    }
    pub fn yy(&self) -> T {
        self.0.m[1][1]
    }
    pub fn zz(&self) -> T {
        self.0.m[2][2]
    }
    pub fn xy(&self) -> T {
        self.0.m[0][1]
    }
    pub fn xz(&self) -> T {
        self.0.m[0][2]
    }
    pub fn yz(&self) -> T {
        self.0.m[1][2]
    }

    pub fn trace(&self) -> T {
        self.0.trace()
    }

    /// Determinant by first-row cofactor expansion.
    pub fn determinant(&self) -> T {
        cofactors(self).determinant(self)
    }

    /// Scale-aware singularity test: `det <= 1e-12 (trace / 3)^3`.
    pub fn is_singular(&self) -> bool {
        let tr = self.trace();
        if !(tr > T::zero()) || !tr.is_finite() {
            return true;
        }
        let scale = tr / T::lit(3.0);
        self.determinant() <= T::lit(SINGULAR_RELATIVE_DET) * scale * scale * scale
    }
}

impl<T: Scalar> std::ops::Add for Fim<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Fim(self.0 + rhs.0)
    }
}

impl<T: Scalar> std::ops::AddAssign for Fim<T> {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

/// Relative determinant floor below which a FIM is treated as singular.
pub const SINGULAR_RELATIVE_DET: f64 = 1e-12;

/// Cofactors used by the closed-form costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cofactors<T> {
    pub xx: T,
    pub yy: T,
    pub zz: T,
    pub yx: T,
    pub zx: T,
}

impl<T: Scalar> Cofactors<T> {
    /// `J_xx C_xx + J_xy C_yx + J_xz C_zx`.
    pub fn determinant(&self, j: &Fim<T>) -> T {
        j.xx() * self.xx + j.xy() * self.yx + j.xz() * self.zx
    }
}

pub fn cofactors<T: Scalar>(j: &Fim<T>) -> Cofactors<T> {
    Cofactors {
        xx: j.yy() * j.zz() - j.yz() * j.yz(),
        yy: j.xx() * j.zz() - j.xz() * j.xz(),
        zz: j.xx() * j.yy() - j.xy() * j.xy(),
        yx: j.yz() * j.xz() - j.xy() * j.zz(),
        zx: j.xy() * j.yz() - j.yy() * j.xz(),
    }
}

/// `G_r = a a^T` for the direction `dir`.
pub fn geometric_matrix_range<T: Scalar>(dir: SphericalDirection<T>) -> Mat3<T> {
    let a = direction_vector(dir);
    Mat3::outer(a, a)
}

/// `G_r(az + pi/2, 0) / (d cos el)^2`.
pub fn geometric_matrix_azimuth<T: Scalar>(dir: SphericalDirection<T>, distance: T) -> Result<Mat3<T>> {
    if !(distance > T::zero()) {
        return Err(NavError::NonPositiveDistance(distance.to_f64_lossy()));
    }
    let horizontal = distance * dir.elevation.cos();
    if !(horizontal.abs() > T::epsilon() * distance) {
        return Err(NavError::SingularAzimuth);
    }
    let g = geometric_matrix_range(SphericalDirection::new(dir.azimuth + T::FRAC_PI_2(), T::zero()));
    Ok(g.scaled((horizontal * horizontal).recip()))
}

/// `G_r(az, el + pi/2) / d^2`: the outer product of the unit elevation
/// gradient direction.
pub fn geometric_matrix_elevation<T: Scalar>(dir: SphericalDirection<T>, distance: T) -> Result<Mat3<T>> {
    if !(distance > T::zero()) {
        return Err(NavError::NonPositiveDistance(distance.to_f64_lossy()));
    }
    let g = geometric_matrix_range(SphericalDirection::new(dir.azimuth, dir.elevation + T::FRAC_PI_2()));
    Ok(g.scaled((distance * distance).recip()))
}

/// `A_r = (1 / sigma_r^2) (1 + 2 gamma^2 sigma_r0^2 d^gamma / (4 d^2))`.
///
/// The second term is the information carried by the distance dependence of
/// the ranging variance itself.
pub fn range_coefficient<T: Scalar>(distance: T, params: &ChannelParams<T>, los: bool) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(NavError::NonPositiveDistance(distance.to_f64_lossy()));
    }
    let gamma = params.path_loss_exponent;
    let s0 = params.reference_range_std(los);
    let var0 = s0 * s0;
    let d_gamma = distance.powf(gamma);
    let variance = var0 * d_gamma;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    Ok(variance.recip() * (T::one() + two * gamma * gamma * var0 * d_gamma / (four * distance * distance)))
}

/// `A_b = 1 / sigma_b0^2`.
pub fn bearing_coefficient<T: Scalar>(params: &ChannelParams<T>) -> T {
    (params.sigma_bearing * params.sigma_bearing).recip()
}

/// Information contributed by one stored estimate taken at `position`.
pub fn entry_information<T: Scalar>(
    m: &Measurement<T>,
    position: Vec3<T>,
    source: Vec3<T>,
    params: &ChannelParams<T>,
) -> Result<Fim<T>> {
    let geo = relative_geometry(position, source)?;
    let mut j = Mat3::zeros();
    if m.range_est.is_some() {
        let a_r = range_coefficient(geo.distance, params, m.los)?;
        j += geometric_matrix_range(geo.direction).scaled(a_r);
    }
    if m.bearing_est.is_some() && m.los {
        let angles = geometric_matrix_azimuth(geo.direction, geo.distance)?
            + geometric_matrix_elevation(geo.direction, geo.distance)?;
        j += angles.scaled(bearing_coefficient(params));
    }
    Ok(Fim(j))
}

/// FIM of a view plus the number of entries skipped for degenerate geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimAssembly<T> {
    pub fim: Fim<T>,
    pub skipped: usize,
}

/// Sums the information of every stored entry, using the position each peer
/// had when it measured, evaluated at `source_estimate`.
pub fn assemble_fim<T: Scalar>(
    view: &NetworkView<T>,
    source_estimate: Vec3<T>,
    params: &ChannelParams<T>,
) -> FimAssembly<T> {
    let mut fim = Fim::zeros();
    let mut skipped = 0;
    for (_, m) in view.iter() {
        match entry_information(m, m.uav_position, source_estimate, params) {
            Ok(j) => fim += j,
            Err(_) => skipped += 1,
        }
    }
    FimAssembly { fim, skipped }
}

/// A- or D-optimality cost via the cofactor forms.
pub fn cost<T: Scalar>(j: &Fim<T>, criterion: Criterion) -> Result<T> {
    if j.is_singular() {
        return Err(NavError::SingularFim { det: j.determinant().to_f64_lossy() });
    }
    let c = cofactors(j);
    let det = c.determinant(j);
    Ok(match criterion {
        Criterion::DOptimal => -det.ln(),
        Criterion::AOptimal => (c.xx + c.yy + c.zz) / det,
    })
}

/// Position error bound `sqrt(trace(J^-1))`, infinite for a singular FIM.
pub fn peb<T: Scalar>(j: &Fim<T>) -> T {
    cost(j, Criterion::AOptimal).map(T::sqrt).unwrap_or_else(|_| T::infinity())
}
