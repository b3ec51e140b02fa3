//! Scenario files.
//!
//! Scenarios are TOML. Angles are written in degrees and converted to radians
//! on load; every other quantity is SI (meters, steps).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlConfig;
use crate::error::{NavError, Result};
use crate::estimator::EstimatorMode;
use crate::fisher::Criterion;
use crate::geometry::{ObstacleBox, Vec3};
use crate::kinematics::KinematicLimits;
use crate::network::NetworkConfig;
use crate::sensing::{ChannelParams, SensorRole};

/// 1-based UAV ids per sensing role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Rosters {
    #[serde(default)]
    pub ranging: Vec<usize>,
    #[serde(default)]
    pub bearing: Vec<usize>,
    #[serde(default)]
    pub joint: Vec<usize>,
}

impl Rosters {
    pub fn all_ranging(n: usize) -> Self {
        Self { ranging: (1..=n).collect(), ..Self::default() }
    }

    pub fn all_bearing(n: usize) -> Self {
        Self { bearing: (1..=n).collect(), ..Self::default() }
    }

    pub fn all_joint(n: usize) -> Self {
        Self { joint: (1..=n).collect(), ..Self::default() }
    }

    /// Role of each UAV by 0-based index.
    pub fn roles(&self, n: usize) -> Result<Vec<SensorRole>> {
        let mut roles = vec![None; n];
        let groups = [
            (&self.ranging, SensorRole::RANGING),
            (&self.bearing, SensorRole::BEARING),
            (&self.joint, SensorRole::JOINT),
        ];
        for (ids, role) in groups {
            for &id in ids {
                if id == 0 || id > n {
                    return Err(invalid(format!("roster id {id} outside 1..={n}")));
                }
                if roles[id - 1].replace(role).is_some() {
                    return Err(invalid(format!("UAV {id} appears in more than one roster")));
                }
            }
        }
        roles
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| invalid(format!("UAV {} has no roster", i + 1))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxSpec {
    pub fn to_box(self) -> Result<ObstacleBox<f64>> {
        ObstacleBox::new(Vec3::from_array(self.min), Vec3::from_array(self.max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub path_loss_exponent: f64,
    pub sigma_ratio_los: f64,
    pub sigma_ratio_nlos: f64,
    pub sigma_bearing_deg: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        let p = ChannelParams::default();
        Self {
            path_loss_exponent: p.path_loss_exponent,
            sigma_ratio_los: p.sigma_ratio_los,
            sigma_ratio_nlos: p.sigma_ratio_nlos,
            sigma_bearing_deg: p.sigma_bearing.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSpec {
    pub v_min: f64,
    pub v_max: f64,
    pub max_turn_deg: f64,
    pub max_tilt_change_deg: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub dt: f64,
}

impl Default for LimitsSpec {
    fn default() -> Self {
        let l = KinematicLimits::default();
        Self {
            v_min: l.v_min,
            v_max: l.v_max,
            max_turn_deg: l.phi_max.to_degrees(),
            max_tilt_change_deg: l.theta_max.to_degrees(),
            z_min: l.z_min,
            z_max: l.z_max,
            dt: l.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub mode: EstimatorMode,
    #[serde(default)]
    pub jitter_std: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self { mode: EstimatorMode::Oracle, jitter_std: 0.0 }
    }
}

/// Initial formation: UAVs evenly spaced on a vertical ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseSpec {
    pub center: [f64; 3],
    pub radius_x: f64,
    pub radius_z: f64,
}

impl Default for EllipseSpec {
    fn default() -> Self {
        Self { center: [0.0, 150.0, 8.0], radius_x: 20.0, radius_z: 5.0 }
    }
}

/// Piecewise-linear source motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcePathSpec {
    pub waypoints: Vec<[f64; 3]>,
    /// Meters per step.
    pub speed: f64,
    /// Box the source may not leave.
    #[serde(default)]
    pub perimeter: Option<BoxSpec>,
}

/// Scenario exactly as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub num_uavs: usize,
    pub criterion: Criterion,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub source: [f64; 3],
    pub rosters: Rosters,
    #[serde(default)]
    pub obstacles: Vec<BoxSpec>,
    #[serde(default)]
    pub initial_ellipse: EllipseSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub limits: LimitsSpec,
    #[serde(default)]
    pub network: NetworkConfig<f64>,
    #[serde(default)]
    pub control: ControlConfig<f64>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub source_path: Option<SourcePathSpec>,
}

/// Validated scenario in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_uavs: usize,
    pub criterion: Criterion,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub source: Vec3<f64>,
    pub rosters: Rosters,
    pub roles: Vec<SensorRole>,
    pub obstacles: Vec<ObstacleBox<f64>>,
    pub ellipse: EllipseSpec,
    pub channel: ChannelParams<f64>,
    pub limits: KinematicLimits<f64>,
    pub network: NetworkConfig<f64>,
    pub control: ControlConfig<f64>,
    pub estimator: EstimatorMode,
    pub jitter_std: f64,
    pub source_path: Option<SourcePath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourcePath {
    pub waypoints: Vec<Vec3<f64>>,
    pub speed: f64,
    pub perimeter: Option<ObstacleBox<f64>>,
}

fn invalid(msg: String) -> NavError {
    NavError::InvalidParameter(msg)
}

impl ScenarioFile {
    pub fn into_config(self) -> Result<ScenarioConfig> {
        if self.num_uavs == 0 {
            return Err(invalid("num_uavs must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1".into()));
        }
        let roles = self.rosters.roles(self.num_uavs)?;
        let source = Vec3::from_array(self.source);
        if !source.is_finite() {
            return Err(invalid("source position not finite".into()));
        }
        let obstacles = self.obstacles.iter().map(|b| b.to_box()).collect::<Result<Vec<_>>>()?;

        let channel = ChannelParams {
            path_loss_exponent: self.channel.path_loss_exponent,
            sigma_ratio_los: self.channel.sigma_ratio_los,
            sigma_ratio_nlos: self.channel.sigma_ratio_nlos,
            sigma_bearing: self.channel.sigma_bearing_deg.to_radians(),
        };
        channel.validate()?;
        let limits = KinematicLimits {
            v_min: self.limits.v_min,
            v_max: self.limits.v_max,
            phi_max: self.limits.max_turn_deg.to_radians(),
            theta_max: self.limits.max_tilt_change_deg.to_radians(),
            z_min: self.limits.z_min,
            z_max: self.limits.z_max,
            dt: self.limits.dt,
        };
        limits.validate()?;
        self.network.validate()?;
        self.control.validate()?;
        if !(self.estimator.jitter_std >= 0.0 && self.estimator.jitter_std.is_finite()) {
            return Err(invalid("jitter_std must be non-negative".into()));
        }
        let e = &self.initial_ellipse;
        if !(e.radius_x >= 0.0 && e.radius_z >= 0.0 && Vec3::from_array(e.center).is_finite()) {
            return Err(invalid("initial ellipse must have non-negative radii".into()));
        }

        let source_path = match self.source_path {
            None => None,
            Some(spec) => {
                if spec.waypoints.is_empty() {
                    return Err(invalid("source_path needs at least one waypoint".into()));
                }
                if !(spec.speed >= 0.0 && spec.speed.is_finite()) {
                    return Err(invalid("source_path speed must be non-negative".into()));
                }
                Some(SourcePath {
                    waypoints: spec.waypoints.iter().map(|w| Vec3::from_array(*w)).collect(),
                    speed: spec.speed,
                    perimeter: spec.perimeter.map(BoxSpec::to_box).transpose()?,
                })
            }
        };

        Ok(ScenarioConfig {
            num_uavs: self.num_uavs,
            criterion: self.criterion,
            steps: self.steps,
            trials: self.trials,
            seed: self.seed,
            source,
            rosters: self.rosters,
            roles,
            obstacles,
            ellipse: self.initial_ellipse,
            channel,
            limits,
            network: self.network,
            control: self.control,
            estimator: self.estimator.mode,
            jitter_std: self.estimator.jitter_std,
            source_path,
        })
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| invalid(format!("scenario parse error: {e}")))?;
        file.into_config()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Replaces the rosters, re-deriving roles.
    pub fn with_rosters(mut self, rosters: Rosters) -> Result<Self> {
        self.roles = rosters.roles(self.num_uavs)?;
        self.rosters = rosters;
        Ok(self)
    }

    /// Fleet size by role: (ranging only, bearing only, joint).
    pub fn role_counts(&self) -> (usize, usize, usize) {
        let count = |r: SensorRole| self.roles.iter().filter(|x| **x == r).count();
        (count(SensorRole::RANGING), count(SensorRole::BEARING), count(SensorRole::JOINT))
    }
}

/// Urban block around the source: four buildings at the corners of a
/// crossroads, streets along both axes.
pub const DEFAULT_SCENARIO: &str = include_str!("../../scenarios/urban.toml");

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_SCENARIO).expect("bundled scenario is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_loads() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.num_uavs, 10);
        assert_eq!(cfg.role_counts(), (4, 3, 3));
        assert!((cfg.limits.phi_max - 50f64.to_radians()).abs() < 1e-15);
        assert!((cfg.channel.sigma_bearing - 10f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn rosters_must_partition_the_fleet() {
        let overlap = Rosters { ranging: vec![1, 2], bearing: vec![2], joint: vec![] };
        assert!(overlap.roles(2).is_err());
        let missing = Rosters { ranging: vec![1], ..Rosters::default() };
        assert!(missing.roles(2).is_err());
        let outside = Rosters { ranging: vec![1, 3], ..Rosters::default() };
        assert!(outside.roles(2).is_err());
        assert!(Rosters::all_joint(3).roles(3).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_SCENARIO.replace("num_uavs", "num_drones");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn zero_steps_rejected() {
        let mut file: ScenarioFile = toml::from_str(DEFAULT_SCENARIO).unwrap();
        file.steps = 0;
        assert!(file.into_config().is_err());
    }
}
