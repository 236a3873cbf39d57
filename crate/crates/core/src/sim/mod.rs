//! Deterministic 2D navigation simulator: Ackermann point-mass dynamics, the
//! taped-region arena, a ray-cast lidar and the navigation reward.

pub mod dynamics;
pub mod env;
pub mod geometry;
pub mod lidar;
pub mod map;
pub mod reward;

pub use dynamics::{Command, FrictionMode, HeadingModel, ParamField, PhysicalParams, RobotState, VehicleModel};
pub use env::{EnvConfig, EnvStep, Environment, LimoEnv, ObservationView, StepInfo, Task, OBSERVATION_DIM};
pub use geometry::{ray_segment_intersection, segments_intersect, Segment, Vec2};
pub use lidar::lidar_scan;
pub use map::{MapSpec, Zone};
pub use reward::{compute_task_reward, RewardCase, RewardConfig, TaskReward};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
