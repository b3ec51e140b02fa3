//! Per-UAV projected-gradient control.
//!
//! Each UAV differentiates the information cost of its own view with respect
//! to its own position (peers held at their stored, possibly stale,
//! positions). Violated safety distances are stacked into `g` with unit
//! gradients `N`; the step is
//!
//! ```text
//! u = -xi P grad - N (N^T N)^-1 g,     P = I - N (N^T N)^-1 N^T
//! ```
//!
//! and is finally clamped to the kinematic limits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::fisher::{assemble_fim, cost, entry_information, Criterion, Fim};
use crate::geometry::{distance_point_to_box, ObstacleBox, Vec3};
use crate::kinematics::{clamp_control, control_from_polar, ControlInput, KinematicLimits, UavState};
use crate::linalg::{gram, spd_solve, Mat3};
use crate::network::NetworkView;
use crate::scalar::{wrap_angle, Scalar};
use crate::sensing::ChannelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig<T> {
    /// Spatial step applied to the projected gradient, m per unit gradient.
    pub xi: T,
    /// Central finite-difference probe, meters.
    pub fd_step: T,
    pub d_star_uav: T,
    pub d_star_source: T,
    pub d_star_obstacle: T,
}

impl<T: Scalar> ControlConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("xi", self.xi),
            ("fd_step", self.fd_step),
            ("d_star_uav", self.d_star_uav),
            ("d_star_source", self.d_star_source),
            ("d_star_obstacle", self.d_star_obstacle),
        ];
        for (name, value) in checks {
            if !(value > T::zero()) {
                return Err(NavError::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

impl Default for ControlConfig<f64> {
    fn default() -> Self {
        Self { xi: 1.0, fd_step: 1e-3, d_star_uav: 1.0, d_star_source: 50.0, d_star_obstacle: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Another UAV, by 0-based index.
    Uav(usize),
    Source,
    /// Obstacle, by index in the obstacle list.
    Obstacle(usize),
}

/// One violated safety distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveConstraint<T> {
    pub kind: ConstraintKind,
    /// `d - d*`, negative.
    pub value: T,
    /// Gradient of `d` with respect to the owner position (unit vector).
    pub normal: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet<T> {
    pub active: Vec<ActiveConstraint<T>>,
    /// Set when a coincident point forced a perturbed gradient direction.
    pub perturbed: bool,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn values(&self) -> Vec<T> {
        self.active.iter().map(|c| c.value).collect()
    }

    pub fn normals(&self) -> Vec<Vec3<T>> {
        self.active.iter().map(|c| c.normal).collect()
    }
}

/// Central finite-difference gradient of the view cost with respect to the
/// owner position.
pub fn cost_gradient<T: Scalar>(
    owner: &UavState<T>,
    view: &NetworkView<T>,
    source_estimate: Vec3<T>,
    criterion: Criterion,
    params: &ChannelParams<T>,
    fd_step: T,
) -> Result<Vec3<T>> {
    let Some(own) = view.entry(view.owner).copied() else {
        return Ok(Vec3::zero());
    };
    let mut others = Fim::zeros();
    for (j, m) in view.iter() {
        if j != view.owner {
            if let Ok(info) = entry_information(m, m.uav_position, source_estimate, params) {
                others += info;
            }
        }
    }
    let eval = |p: Vec3<T>| -> Result<T> {
        let own_info = entry_information(&own, p, source_estimate, params)?;
        cost(&(others + own_info), criterion)
    };
    let two_h = fd_step + fd_step;
    let axis = |e: Vec3<T>| -> Result<T> {
        let plus = eval(owner.position + e * fd_step)?;
        let minus = eval(owner.position - e * fd_step)?;
        Ok((plus - minus) / two_h)
    };
    Ok(Vec3::new(
        axis(Vec3::new(T::one(), T::zero(), T::zero()))?,
        axis(Vec3::new(T::zero(), T::one(), T::zero()))?,
        axis(Vec3::new(T::zero(), T::zero(), T::one()))?,
    ))
}

fn coincidence_offset<T: Scalar>() -> Vec3<T> {
    Vec3::new(T::lit(1e-6), T::zero(), T::zero())
}

/// Unit vector from `from` to `to`, nudging `to` when the points coincide.
fn away_from<T: Scalar>(to: Vec3<T>, from: Vec3<T>, perturbed: &mut bool) -> Vec3<T> {
    match (to - from).normalized() {
        Some(n) => n,
        None => {
            *perturbed = true;
            (to + coincidence_offset() - from).normalized().unwrap_or(Vec3::new(T::one(), T::zero(), T::zero()))
        }
    }
}

/// Outward normal of the box face nearest to an interior point.
fn exit_normal<T: Scalar>(p: Vec3<T>, bx: &ObstacleBox<T>) -> Vec3<T> {
    let faces = [
        (p.x - bx.min.x, Vec3::new(-T::one(), T::zero(), T::zero())),
        (bx.max.x - p.x, Vec3::new(T::one(), T::zero(), T::zero())),
        (p.y - bx.min.y, Vec3::new(T::zero(), -T::one(), T::zero())),
        (bx.max.y - p.y, Vec3::new(T::zero(), T::one(), T::zero())),
        (p.z - bx.min.z, Vec3::new(T::zero(), T::zero(), -T::one())),
        (bx.max.z - p.z, Vec3::new(T::zero(), T::zero(), T::one())),
    ];
    faces
        .into_iter()
        .fold(None::<(T, Vec3<T>)>, |best, (d, n)| match best {
            Some((bd, _)) if bd <= d => best,
            _ => Some((d, n)),
        })
        .map(|(_, n)| n)
        .unwrap_or(Vec3::new(T::zero(), T::zero(), T::one()))
}

/// Collects every violated safety distance (strict `<`) around `owner`.
///
/// `peers` holds `(index, position)` of the other UAVs as known by the owner.
pub fn active_constraints<T: Scalar>(
    owner: Vec3<T>,
    peers: &[(usize, Vec3<T>)],
    source_estimate: Vec3<T>,
    obstacles: &[ObstacleBox<T>],
    config: &ControlConfig<T>,
) -> ConstraintSet<T> {
    let mut set = ConstraintSet::default();
    for &(idx, peer) in peers {
        let d = owner.distance(peer);
        if d < config.d_star_uav {
            let normal = away_from(owner, peer, &mut set.perturbed);
            set.active.push(ActiveConstraint { kind: ConstraintKind::Uav(idx), value: d - config.d_star_uav, normal });
        }
    }
    let d = owner.distance(source_estimate);
    if d < config.d_star_source {
        let normal = away_from(owner, source_estimate, &mut set.perturbed);
        set.active.push(ActiveConstraint { kind: ConstraintKind::Source, value: d - config.d_star_source, normal });
    }
    let closest = obstacles.iter().enumerate().map(|(i, bx)| (i, distance_point_to_box(owner, bx))).fold(
        None::<(usize, T)>,
        |best, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        },
    );
    if let Some((i, d)) = closest {
        if d < config.d_star_obstacle {
            let bx = &obstacles[i];
            let normal = if d > T::zero() {
                away_from(owner, bx.closest_point(owner), &mut set.perturbed)
            } else {
                set.perturbed = true;
                exit_normal(owner, bx)
            };
            set.active.push(ActiveConstraint {
                kind: ConstraintKind::Obstacle(i),
                value: d - config.d_star_obstacle,
                normal,
            });
        }
    }
    set
}

/// Linearly independent subset of constraint normals, most violated first.
///
/// Returns indices into `set.active`.
pub fn independent_constraints<T: Scalar>(set: &ConstraintSet<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.active[a].value.partial_cmp(&set.active[b].value).unwrap_or(std::cmp::Ordering::Equal));
    let mut basis: Vec<Vec3<T>> = Vec::new();
    let mut kept = Vec::new();
    for idx in order {
        if basis.len() == 3 {
            break;
        }
        if let Some(q) = orthogonal_residual(&basis, set.active[idx].normal) {
            basis.push(q);
            kept.push(idx);
        }
    }
    kept
}

/// Unit part of `n` orthogonal to an orthonormal `basis`, if not negligible.
fn orthogonal_residual<T: Scalar>(basis: &[Vec3<T>], n: Vec3<T>) -> Option<Vec3<T>> {
    let scale = n.norm();
    // two passes of Gram-Schmidt keep the basis orthonormal to rounding
    let mut r = n;
    for _ in 0..2 {
        r = basis.iter().fold(r, |r, q| r - *q * r.dot(*q));
    }
    if r.norm() > T::lit(INDEPENDENCE_TOL) * scale {
        r.normalized()
    } else {
        None
    }
}

/// Relative residual below which a constraint normal counts as dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-6;

fn orthonormal_basis<T: Scalar>(normals: &[Vec3<T>]) -> Vec<Vec3<T>> {
    let mut basis = Vec::new();
    for n in normals {
        if let Some(q) = orthogonal_residual(&basis, *n) {
            basis.push(q);
        }
    }
    basis
}

/// `P = I - N (N^T N)^-1 N^T`, evaluated as `I - Q Q^T` with `Q` an
/// orthonormal basis of the columns of `N`.
pub fn projection_matrix<T: Scalar>(normals: &[Vec3<T>]) -> Mat3<T> {
    orthonormal_basis(normals).into_iter().fold(Mat3::identity(), |p, q| p - Mat3::outer(q, q))
}

/// Output of [`projected_gradient_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedStep<T> {
    pub u: Vec3<T>,
    /// Constraints discarded as linearly dependent.
    pub dropped: usize,
}

/// `u = -xi P grad - N (N^T N)^-1 g`.
pub fn projected_gradient_step<T: Scalar>(grad: Vec3<T>, constraints: &ConstraintSet<T>, xi: T) -> ProjectedStep<T> {
    if constraints.is_empty() {
        return ProjectedStep { u: -(grad * xi), dropped: 0 };
    }
    let kept = independent_constraints(constraints);
    let normals: Vec<Vec3<T>> = kept.iter().map(|&i| constraints.active[i].normal).collect();
    let values: Vec<T> = kept.iter().map(|&i| constraints.active[i].value).collect();
    let g = gram(&normals);
    let combine = |w: &[T]| normals.iter().zip(w).fold(Vec3::zero(), |acc, (n, wi)| acc + *n * *wi);
    let projected = projection_matrix(&normals).mul_vec(grad);
    let restoration = match spd_solve(&g, &values) {
        Some(w) => combine(&w),
        None => Vec3::zero(),
    };
    ProjectedStep { u: -(projected * xi) - restoration, dropped: constraints.len() - kept.len() }
}

/// Random move around the last direction, used when the FIM is singular.
pub fn random_fallback<T: Scalar, R: Rng + ?Sized>(
    prev_heading: T,
    prev_tilt: T,
    limits: &KinematicLimits<T>,
    rng: &mut R,
) -> ControlInput<T> {
    let mut uniform = |lo: T, hi: T| lo + (hi - lo) * T::lit(rng.random::<f64>());
    let speed = uniform(limits.v_min, limits.v_max);
    let heading = wrap_angle(prev_heading + uniform(-limits.phi_max, limits.phi_max));
    let half_pi = T::FRAC_PI_2();
    let tilt = (prev_tilt + uniform(-limits.theta_max, limits.theta_max)).max(-half_pi).min(half_pi);
    control_from_polar(speed, heading, tilt, limits.dt)
}

/// Everything a UAV needs besides its view to pick a move.
#[derive(Debug, Clone, Copy)]
pub struct ControlContext<'a, T> {
    pub params: &'a ChannelParams<T>,
    pub limits: &'a KinematicLimits<T>,
    pub config: &'a ControlConfig<T>,
    pub criterion: Criterion,
    pub obstacles: &'a [ObstacleBox<T>],
}

/// Chosen control and what happened while computing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision<T> {
    pub control: ControlInput<T>,
    /// Cost of the owner's view at the source estimate, if non-singular.
    pub cost: Option<T>,
    pub fallback: bool,
    pub active_constraints: usize,
    pub dropped_constraints: usize,
    pub infeasible: bool,
}

/// Full control law for one UAV and one step.
///
/// With no source estimate or a singular FIM the UAV takes a random step
/// around its last direction; otherwise it follows the projected gradient.
/// The result always satisfies the kinematic limits.
pub fn compute_control<T: Scalar, R: Rng + ?Sized>(
    owner: &UavState<T>,
    view: &NetworkView<T>,
    source_estimate: Option<Vec3<T>>,
    ctx: &ControlContext<'_, T>,
    rng: &mut R,
) -> ControlDecision<T> {
    let planned = source_estimate.and_then(|src| {
        let fim = assemble_fim(&view.with_owner_position(owner.position), src, ctx.params).fim;
        let value = cost(&fim, ctx.criterion).ok()?;
        let grad = cost_gradient(owner, view, src, ctx.criterion, ctx.params, ctx.config.fd_step).ok()?;
        let peers: Vec<(usize, Vec3<T>)> =
            view.iter().filter(|(j, _)| *j != view.owner).map(|(j, m)| (j, m.uav_position)).collect();
        let constraints = active_constraints(owner.position, &peers, src, ctx.obstacles, ctx.config);
        let step = projected_gradient_step(grad, &constraints, ctx.config.xi);
        Some((value, step, constraints.len()))
    });

    match planned {
        Some((value, step, active)) => {
            let clamped = clamp_control(&ControlInput::new(step.u), owner, ctx.limits);
            ControlDecision {
                control: clamped.control,
                cost: Some(value),
                fallback: false,
                active_constraints: active,
                dropped_constraints: step.dropped,
                infeasible: clamped.infeasible,
            }
        }
        None => {
            let raw = random_fallback(owner.heading, owner.tilt, ctx.limits, rng);
            let clamped = clamp_control(&raw, owner, ctx.limits);
            ControlDecision {
                control: clamped.control,
                cost: None,
                fallback: true,
                active_constraints: 0,
                dropped_constraints: 0,
                infeasible: clamped.infeasible,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SphericalDirection;
    use crate::kinematics::heading_of;
    use crate::sensing::{Measurement, SensorRole};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn entry(idx: usize, p: Vec3<f64>, role: SensorRole, los: bool) -> Measurement<f64> {
        Measurement {
            uav_id: idx + 1,
            timestamp: 0,
            range_est: role.ranging.then_some(0.0),
            bearing_est: role.bearing.then_some(SphericalDirection::new(0.0, 0.0)),
            los,
            uav_position: p,
        }
    }

    fn view_of(owner: usize, entries: Vec<Measurement<f64>>) -> NetworkView<f64> {
        let mut view = NetworkView::empty(owner, entries.len());
        for (j, m) in entries.into_iter().enumerate() {
            view.set_entry(j, m);
        }
        view
    }

    fn scalar_cost(view: &NetworkView<f64>, p: Vec3<f64>, src: Vec3<f64>, criterion: Criterion) -> f64 {
        let params = ChannelParams::default();
        let fim = assemble_fim(&view.with_owner_position(p), src, &params).fim;
        cost(&fim, criterion).unwrap()
    }

    #[test]
    fn symmetric_geometry_has_zero_cross_gradient() {
        // Owner on the x = 0 plane, peers mirrored across it, source on the plane.
        let params = ChannelParams::default();
        let owner_pos = v(0.0, 40.0, 10.0);
        let view = view_of(
            0,
            vec![
                entry(0, owner_pos, SensorRole::RANGING, true),
                entry(1, v(-30.0, 20.0, 8.0), SensorRole::JOINT, true),
                entry(2, v(30.0, 20.0, 8.0), SensorRole::JOINT, true),
            ],
        );
        let owner = UavState::new(1, owner_pos, SensorRole::RANGING);
        for criterion in [Criterion::AOptimal, Criterion::DOptimal] {
            let g = cost_gradient(&owner, &view, v(0.0, 0.0, 5.0), criterion, &params, 1e-3).unwrap();
            assert!(g.x.abs() < 1e-6, "{criterion:?}: {g:?}");
            assert!(g.y.abs() > 1e-6);
        }
    }

    #[test]
    fn single_ranger_gradient_points_along_the_source_line() {
        // Two fixed joint peers keep the FIM regular; the owner only ranges.
        let params = ChannelParams::default();
        let src = v(0.0, 0.0, 5.0);
        let owner_pos = v(0.0, 60.0, 5.0);
        let view = view_of(
            0,
            vec![
                entry(0, owner_pos, SensorRole::RANGING, true),
                entry(1, v(60.0, 0.0, 5.0), SensorRole::JOINT, true),
                entry(2, v(-60.0, 0.0, 5.0), SensorRole::JOINT, true),
            ],
        );
        let owner = UavState::new(1, owner_pos, SensorRole::RANGING);
        let g = cost_gradient(&owner, &view, src, Criterion::AOptimal, &params, 1e-3).unwrap();
        // Along the line only: no x/z component.
        assert!(g.x.abs() < 1e-9 && g.z.abs() < 1e-9, "{g:?}");
        // Dense sampling of the 1-D cost along y: it increases with y.
        let samples: Vec<f64> = (0..=20)
            .map(|i| scalar_cost(&view, v(0.0, 55.0 + 0.5 * i as f64, 5.0), src, Criterion::AOptimal))
            .collect();
        assert!(samples.windows(2).all(|w| w[1] > w[0]));
        let slope = (samples[11] - samples[9]) / 1.0;
        assert!(g.y > 0.0);
        assert_relative_eq!(g.y, slope, max_relative = 1e-3);
    }

    #[test]
    fn halving_the_probe_changes_little() {
        let params = ChannelParams::default();
        let owner_pos = v(12.0, 70.0, 9.0);
        let view = view_of(
            0,
            vec![
                entry(0, owner_pos, SensorRole::JOINT, true),
                entry(1, v(-40.0, 30.0, 12.0), SensorRole::RANGING, true),
                entry(2, v(50.0, -20.0, 6.0), SensorRole::BEARING, true),
            ],
        );
        let owner = UavState::new(1, owner_pos, SensorRole::JOINT);
        let src = v(0.0, 0.0, 3.0);
        let g1 = cost_gradient(&owner, &view, src, Criterion::DOptimal, &params, 1e-3).unwrap();
        let g2 = cost_gradient(&owner, &view, src, Criterion::DOptimal, &params, 5e-4).unwrap();
        assert!((g1 - g2).norm() <= 1e-4 * g1.norm());
    }

    #[test]
    fn constraint_examples() {
        let config = ControlConfig::default();
        let far_src = v(500.0, 0.0, 0.0);
        let set = active_constraints(v(0.0, 0.0, 10.0), &[(1, v(10.0, 0.0, 10.0))], far_src, &[], &config);
        assert!(set.is_empty());

        let set = active_constraints(v(0.5, 0.0, 0.0), &[(1, Vec3::zero())], far_src, &[], &config);
        assert_eq!(set.len(), 1);
        assert_relative_eq!(set.active[0].value, -0.5);
        assert_eq!(set.active[0].normal, v(1.0, 0.0, 0.0));
        assert_eq!(set.active[0].kind, ConstraintKind::Uav(1));

        let set = active_constraints(v(40.0, 0.0, 0.0), &[], Vec3::zero(), &[], &config);
        assert_eq!(set.active[0].kind, ConstraintKind::Source);
        assert_relative_eq!(set.active[0].value, -10.0);
    }

    #[test]
    fn obstacle_constraint_uses_nearest_box_point() {
        let config = ControlConfig::default();
        let boxes = [
            ObstacleBox::new(v(10.0, -5.0, 0.0), v(20.0, 5.0, 10.0)).unwrap(),
            ObstacleBox::new(v(-20.0, -5.0, 0.0), v(-17.0, 5.0, 10.0)).unwrap(),
        ];
        let set = active_constraints(v(7.0, 0.0, 5.0), &[], v(500.0, 0.0, 0.0), &boxes, &config);
        assert_eq!(set.len(), 1);
        assert_eq!(set.active[0].kind, ConstraintKind::Obstacle(0));
        assert_relative_eq!(set.active[0].value, -2.0);
        assert_eq!(set.active[0].normal, v(-1.0, 0.0, 0.0));

        let inside = active_constraints(v(11.0, 0.0, 5.0), &[], v(500.0, 0.0, 0.0), &boxes, &config);
        assert!(inside.perturbed);
        assert_eq!(inside.active[0].normal, v(-1.0, 0.0, 0.0));
    }

    #[test]
    fn coincident_peer_is_perturbed() {
        let config = ControlConfig::default();
        let set = active_constraints(v(1.0, 1.0, 1.0), &[(2, v(1.0, 1.0, 1.0))], v(500.0, 0.0, 0.0), &[], &config);
        assert!(set.perturbed);
        assert_relative_eq!(set.active[0].normal.norm(), 1.0);
    }

    #[test]
    fn unconstrained_step_is_scaled_descent() {
        let step = projected_gradient_step(v(0.2, -0.4, 1.0), &ConstraintSet::default(), 2.0);
        assert_eq!(step.u, v(-0.4, 0.8, -2.0));
        assert_eq!(step.dropped, 0);
    }

    #[test]
    fn pure_restoration_pushes_apart() {
        let config = ControlConfig::default();
        let set = active_constraints(v(0.5, 0.0, 0.0), &[(1, Vec3::zero())], v(500.0, 0.0, 0.0), &[], &config);
        let step = projected_gradient_step(Vec3::zero(), &set, 1.0);
        assert_relative_eq!(step.u.x, 0.5);
        assert_relative_eq!(step.u.y, 0.0);
    }

    #[test]
    fn gradient_along_normal_is_projected_out() {
        let config = ControlConfig::default();
        let set = active_constraints(v(0.5, 0.0, 0.0), &[(1, Vec3::zero())], v(500.0, 0.0, 0.0), &[], &config);
        let step = projected_gradient_step(v(3.0, 2.0, 0.0), &set, 1.0);
        assert_relative_eq!(step.u.x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(step.u.y, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn dependent_constraints_are_dropped() {
        let set = ConstraintSet {
            active: vec![
                ActiveConstraint { kind: ConstraintKind::Uav(1), value: -0.2, normal: v(1.0, 0.0, 0.0) },
                ActiveConstraint { kind: ConstraintKind::Uav(2), value: -0.1, normal: v(1.0, 0.0, 0.0) },
                ActiveConstraint { kind: ConstraintKind::Source, value: -3.0, normal: v(0.0, 1.0, 0.0) },
            ],
            perturbed: false,
        };
        assert_eq!(independent_constraints(&set), vec![2, 0]);
        let step = projected_gradient_step(Vec3::zero(), &set, 1.0);
        assert_eq!(step.dropped, 1);
        assert_relative_eq!(step.u.x, 0.2, epsilon = 1e-12);
        assert_relative_eq!(step.u.y, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn fallback_examples() {
        let limits = KinematicLimits { phi_max: 0.0, theta_max: 0.0, ..KinematicLimits::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_fallback(0.8, -0.2, &limits, &mut rng);
        let (psi, theta) = heading_of(&u).unwrap();
        assert_relative_eq!(psi, 0.8, epsilon = 1e-12);
        assert_relative_eq!(theta, -0.2, epsilon = 1e-12);

        let limits = KinematicLimits::default();
        let mut a = ChaCha8Rng::seed_from_u64(17);
        let mut b = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let ua = random_fallback(0.1, 0.0, &limits, &mut a);
            assert_eq!(ua, random_fallback(0.1, 0.0, &limits, &mut b));
            let s = ua.speed(1.0);
            assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&s));
            let (psi, theta) = heading_of(&ua).unwrap();
            assert!(wrap_angle(psi - 0.1).abs() <= limits.phi_max + 1e-12);
            assert!(theta.abs() <= limits.theta_max + 1e-12);
        }
    }

    fn context<'a>(
        params: &'a ChannelParams<f64>,
        limits: &'a KinematicLimits<f64>,
        config: &'a ControlConfig<f64>,
        obstacles: &'a [ObstacleBox<f64>],
    ) -> ControlContext<'a, f64> {
        ControlContext { params, limits, config, criterion: Criterion::AOptimal, obstacles }
    }

    #[test]
    fn singular_view_takes_fallback() {
        let (params, limits, config) = (ChannelParams::default(), KinematicLimits::default(), ControlConfig::default());
        let ctx = context(&params, &limits, &config, &[]);
        let view = view_of(
            0,
            vec![
                entry(0, v(0.0, 150.0, 8.0), SensorRole::BEARING, false),
                entry(1, v(20.0, 150.0, 8.0), SensorRole::BEARING, false),
            ],
        );
        let owner = UavState::new(1, v(0.0, 150.0, 8.0), SensorRole::BEARING);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = compute_control(&owner, &view, Some(Vec3::zero()), &ctx, &mut rng);
        assert!(d.fallback);
        assert!(d.cost.is_none());
        let d = compute_control(&owner, &view, None, &ctx, &mut rng);
        assert!(d.fallback);
    }

    #[test]
    fn informative_view_follows_the_gradient() {
        let (params, limits, config) = (ChannelParams::default(), KinematicLimits::default(), ControlConfig::default());
        let ctx = context(&params, &limits, &config, &[]);
        let owner_pos = v(0.0, 150.0, 8.0);
        let view = view_of(
            0,
            vec![
                entry(0, owner_pos, SensorRole::JOINT, true),
                entry(1, v(20.0, 150.0, 8.0), SensorRole::JOINT, true),
                entry(2, v(-20.0, 150.0, 12.0), SensorRole::JOINT, true),
            ],
        );
        let mut owner = UavState::new(1, owner_pos, SensorRole::JOINT);
        owner.heading = -std::f64::consts::FRAC_PI_2;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = compute_control(&owner, &view, Some(Vec3::zero()), &ctx, &mut rng);
        assert!(!d.fallback);
        assert!(d.cost.unwrap() > 0.0);
        // Heading toward the source reduces every bearing's 1/d^2 penalty.
        assert!(d.control.u.y < 0.0);
        let s = d.control.speed(1.0);
        assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&s));

        let mut again = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(d, compute_control(&owner, &view, Some(Vec3::zero()), &ctx, &mut again));
    }

    fn unit_vec() -> impl Strategy<Value = Vec3<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-4)
            .prop_map(|(x, y, z)| v(x, y, z).normalized().unwrap())
    }

    proptest! {
        #[test]
        fn small_descent_step_lowers_the_cost(
            ox in -60.0..60.0f64, oy in 60.0..140.0f64, oz in 2.0..25.0f64,
        ) {
            let params = ChannelParams::default();
            let src = v(0.0, 0.0, 4.0);
            let owner_pos = v(ox, oy, oz);
            let view = view_of(
                0,
                vec![
                    entry(0, owner_pos, SensorRole::JOINT, true),
                    entry(1, v(-70.0, 60.0, 10.0), SensorRole::RANGING, true),
                    entry(2, v(80.0, 40.0, 15.0), SensorRole::BEARING, true),
                    entry(3, v(10.0, -90.0, 6.0), SensorRole::JOINT, true),
                ],
            );
            let owner = UavState::new(1, owner_pos, SensorRole::JOINT);
            for criterion in [Criterion::AOptimal, Criterion::DOptimal] {
                let g = cost_gradient(&owner, &view, src, criterion, &params, 1e-3).unwrap();
                prop_assume!(g.norm() > 1e-9);
                let eps = 1e-3 / g.norm();
                let before = scalar_cost(&view, owner_pos, src, criterion);
                let after = scalar_cost(&view, owner_pos - g * eps, src, criterion);
                prop_assert!(after < before);
            }
        }

        #[test]
        fn restoration_increases_a_single_violated_distance(
            dir in unit_vec(), depth in 0.01..0.3f64,
        ) {
            let config = ControlConfig::default();
            let peer = v(3.0, -2.0, 9.0);
            let owner = peer + dir * (config.d_star_uav - depth);
            let set = active_constraints(owner, &[(1, peer)], v(900.0, 0.0, 0.0), &[], &config);
            prop_assert_eq!(set.len(), 1);
            let step = projected_gradient_step(Vec3::zero(), &set, config.xi);
            prop_assert!((owner + step.u).distance(peer) > owner.distance(peer));
        }

        #[test]
        fn projector_is_idempotent_and_annihilates_normals(
            normals in prop::collection::vec(unit_vec(), 1..4),
        ) {
            let set = ConstraintSet {
                active: normals
                    .iter()
                    .enumerate()
                    .map(|(i, n)| ActiveConstraint { kind: ConstraintKind::Uav(i), value: -0.1, normal: *n })
                    .collect(),
                perturbed: false,
            };
            let kept: Vec<Vec3<f64>> = independent_constraints(&set).iter().map(|&i| normals[i]).collect();
            let p = projection_matrix(&kept);
            prop_assert!((p * p - p).max_abs() <= 1e-10);
            for n in &kept {
                prop_assert!(p.mul_vec(*n).max_abs() <= 1e-10);
            }
        }
    }
}
