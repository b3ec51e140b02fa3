//! Cooperative multi-UAV navigation for localizing an RF source from
//! received-signal-strength ranging and bearing measurements.
//!
//! Each UAV keeps a view of the latest measurements relayed over a multi-hop
//! network, builds the Fisher information of the source position from that
//! view, and steps along the projected gradient of an optimality criterion
//! subject to separation constraints and kinematic limits.
//!
//! Everything numeric is generic over [`Scalar`]; the `*F64` aliases below
//! fix the common double-precision case.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod geometry;
pub mod harness;
pub mod kinematics;
pub mod linalg;
pub mod network;
pub mod scalar;
pub mod sensing;

pub use control::{compute_control, ControlConfig, ControlContext, ControlDecision};
pub use error::{NavError, Result};
pub use estimator::{ml_estimate, oracle_estimate, EstimatorMode, SourceEstimate};
pub use fisher::{assemble_fim, cost, peb, Criterion, Fim};
pub use geometry::{ObstacleBox, SphericalDirection, Vec3};
pub use kinematics::{KinematicLimits, UavState};
pub use network::{disseminate, NetworkConfig, NetworkView};
pub use scalar::Scalar;
pub use sensing::{sense, ChannelParams, Measurement, SensorRole};

pub type Vec3F64 = Vec3<f64>;
pub type FimF64 = Fim<f64>;
pub type ObstacleBoxF64 = ObstacleBox<f64>;
pub type UavStateF64 = UavState<f64>;
pub type MeasurementF64 = Measurement<f64>;
pub type NetworkViewF64 = NetworkView<f64>;
pub type ChannelParamsF64 = ChannelParams<f64>;
pub type KinematicLimitsF64 = KinematicLimits<f64>;
pub type ControlConfigF64 = ControlConfig<f64>;
pub type NetworkConfigF64 = NetworkConfig<f64>;
