use serde::{Deserialize, Serialize};

use super::geometry::{segments_intersect, Segment, Vec2};
use super::map::MapSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub cross_penalty: f64,
    pub success_reward: f64,
    pub out_of_map_penalty: f64,
    /// Success radius around the goal, meters.
    pub success_radius: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { cross_penalty: -30.0, success_reward: 500.0, out_of_map_penalty: -100.0, success_radius: 0.2 }
    }
}

/// Which reward case fired; exactly one per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardCase {
    ZoneCrossing,
    Success,
    OutOfMap,
    Progress,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskReward {
    pub value: f64,
    pub terminal: bool,
    pub case: RewardCase,
}

/// True when the straight movement from `from` to `to` touches any zone segment.
pub fn crosses_zone(map: &MapSpec, from: Vec2, to: Vec2) -> bool {
    let path = Segment::new(from, to);
    map.zone_segments().any(|s| segments_intersect(&path, s))
}

/// Task reward and termination flag, checked in order: zone crossing,
/// success, leaving the map, then distance progress `d0 - d(new, goal)`.
pub fn compute_task_reward(
    prev: Vec2,
    new: Vec2,
    goal: Vec2,
    initial_distance: f64,
    map: &MapSpec,
    cfg: &RewardConfig,
) -> TaskReward {
    let dist = new.distance(goal);
    if crosses_zone(map, prev, new) {
        TaskReward { value: cfg.cross_penalty, terminal: false, case: RewardCase::ZoneCrossing }
    } else if dist <= cfg.success_radius {
        TaskReward { value: cfg.success_reward, terminal: true, case: RewardCase::Success }
    } else if !map.contains(new) {
        TaskReward { value: cfg.out_of_map_penalty, terminal: true, case: RewardCase::OutOfMap }
    } else {
        TaskReward { value: initial_distance - dist, terminal: false, case: RewardCase::Progress }
    }
}
