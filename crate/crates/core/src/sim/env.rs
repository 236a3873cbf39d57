use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{Command, ParamField, RobotState, VehicleModel};
use super::geometry::Vec2;
use super::lidar::{flatten, lidar_scan};
use super::map::MapSpec;
use super::reward::{compute_task_reward, RewardCase, RewardConfig};
use super::SimError;

/// Number of entries in an observation vector.
pub const OBSERVATION_DIM: usize = 49;
pub const LIDAR_RAYS: usize = 20;

/// Per-step outcome reported by any [`Environment`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub task_reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Step/reset interface the trainers drive.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    /// Inclusive bounds on the command duration, seconds.
    fn duration_bounds(&self) -> (f64, f64);
    fn reset(&mut self, rng: &mut crate::SimRng) -> Vec<f64>;
    fn step(&mut self, command: &Command) -> Result<EnvStep, SimError>;
}

/// Start pose and goal of one navigation episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub start: Vec2,
    pub goal: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub map: MapSpec,
    pub goals: Vec<Vec2>,
    pub start: Vec2,
    /// Half-width of the uniform noise added to each start coordinate.
    pub start_noise: f64,
    pub initial_heading: f64,
    pub reward: RewardConfig,
    pub min_duration: f64,
    pub max_duration: f64,
    pub lidar_rays: usize,
    pub vehicle: VehicleModel,
    pub field: ParamField,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            map: MapSpec::reference(),
            goals: vec![
                Vec2::new(1.2, 1.2),
                Vec2::new(1.2, -1.2),
                Vec2::new(-1.2, 1.2),
                Vec2::new(-1.2, -1.2),
                Vec2::new(1.2, 0.0),
                Vec2::new(0.0, 1.2),
                Vec2::new(-1.2, 0.0),
                Vec2::new(0.0, -1.2),
            ],
            start: Vec2::new(-0.2, -0.5),
            start_noise: 0.05,
            initial_heading: 0.0,
            reward: RewardConfig::default(),
            min_duration: 0.02,
            max_duration: 0.5,
            lidar_rays: LIDAR_RAYS,
            vehicle: VehicleModel::default(),
            field: ParamField::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.map.validate()?;
        if self.goals.is_empty() {
            return Err(SimError::Config("at least one goal is required".into()));
        }
        if let Some(g) = self.goals.iter().find(|g| !self.map.contains(**g)) {
            return Err(SimError::Config(format!("goal ({}, {}) lies outside the map", g.x, g.y)));
        }
        if !(self.reward.success_radius > 0.0) {
            return Err(SimError::Config("success radius must be positive".into()));
        }
        if !(self.min_duration > 0.0 && self.min_duration < self.max_duration) {
            return Err(SimError::Config("need 0 < min_duration < max_duration".into()));
        }
        if self.lidar_rays * 2 + 9 != OBSERVATION_DIM {
            return Err(SimError::Config(format!(
                "observation layout is fixed at {LIDAR_RAYS} lidar rays, got {}",
                self.lidar_rays
            )));
        }
        if !self.map.contains(self.start) {
            return Err(SimError::Config("start lies outside the map".into()));
        }
        Ok(())
    }

    /// Goal uniform over the goal list; start jittered uniformly per axis.
    pub fn sample_task<R: Rng + ?Sized>(&self, rng: &mut R) -> Task {
        let goal = self.goals[rng.random_range(0..self.goals.len())];
        let jitter = |rng: &mut R| {
            if self.start_noise > 0.0 {
                rng.random_range(-self.start_noise..=self.start_noise)
            } else {
                0.0
            }
        };
        let dx = jitter(rng);
        let dy = jitter(rng);
        Task { start: Vec2::new(self.start.x + dx, self.start.y + dy), goal }
    }
}

/// Step-level detail beyond the [`EnvStep`] summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub task_reward: f64,
    pub duration: f64,
    pub case: RewardCase,
}

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub theta: f64,
    pub duration: f64,
    pub linear_cmd: f64,
    pub angular_cmd: f64,
    #[serde(rename = "R_t")]
    pub task_reward: f64,
    #[serde(rename = "T")]
    pub terminal: u8,
}

/// Named view of an observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationView {
    pub position: Vec2,
    pub goal: Vec2,
    pub velocity: f64,
    pub steering: f64,
    pub duration: f64,
    pub previous_linear: f64,
    pub angular: f64,
    pub lidar: Vec<Vec2>,
}

impl ObservationView {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(OBSERVATION_DIM);
        v.extend([self.position.x, self.position.y, self.goal.x, self.goal.y]);
        v.extend([self.velocity, self.steering, self.duration, self.previous_linear, self.angular]);
        v.extend(flatten(&self.lidar));
        v
    }

    pub fn parse(obs: &[f64]) -> Result<Self, SimError> {
        if obs.len() != OBSERVATION_DIM {
            return Err(SimError::Config(format!("observation has {} entries, expected {OBSERVATION_DIM}", obs.len())));
        }
        Ok(Self {
            position: Vec2::new(obs[0], obs[1]),
            goal: Vec2::new(obs[2], obs[3]),
            velocity: obs[4],
            steering: obs[5],
            duration: obs[6],
            previous_linear: obs[7],
            angular: obs[8],
            lidar: obs[9..].chunks(2).map(|c| Vec2::new(c[0], c[1])).collect(),
        })
    }
}

/// The navigation environment.
#[derive(Debug, Clone)]
pub struct LimoEnv {
    cfg: EnvConfig,
    state: RobotState,
    goal: Vec2,
    initial_distance: f64,
    done: bool,
    steps: usize,
    elapsed: f64,
    last_info: Option<StepInfo>,
    trajectory: Option<Vec<TrajectoryRow>>,
}

impl LimoEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let task = Task { start: cfg.start, goal: cfg.goals[0] };
        let mut env = Self {
            cfg,
            state: RobotState::default(),
            goal: task.goal,
            initial_distance: 0.0,
            done: true,
            steps: 0,
            elapsed: 0.0,
            last_info: None,
            trajectory: None,
        };
        env.reset_to(task);
        env.done = true;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    pub fn initial_distance(&self) -> f64 {
        self.initial_distance
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn last_info(&self) -> Option<StepInfo> {
        self.last_info
    }

    /// Starts recording a trajectory log from the next reset.
    pub fn record_trajectory(&mut self, enabled: bool) {
        self.trajectory = enabled.then(Vec::new);
    }

    pub fn trajectory(&self) -> Option<&[TrajectoryRow]> {
        self.trajectory.as_deref()
    }

    /// Begins an episode at the task's start with the configured heading and
    /// a neutral previous command.
    pub fn reset_to(&mut self, task: Task) -> Vec<f64> {
        self.state = RobotState {
            x: task.start.x,
            y: task.start.y,
            v: 0.0,
            theta: self.cfg.initial_heading,
            last_command: Command { duration: self.cfg.min_duration, linear: 0.0, angular: 0.0 },
        };
        self.goal = task.goal;
        self.initial_distance = task.start.distance(task.goal);
        self.done = false;
        self.steps = 0;
        self.elapsed = 0.0;
        self.last_info = None;
        let first = self.trajectory_row(0.0, 0);
        if let Some(log) = &mut self.trajectory {
            log.clear();
            log.push(first);
        }
        self.observe()
    }

    /// Places the robot at an arbitrary state, keeping the current goal.
    pub fn set_state(&mut self, state: RobotState) {
        self.state = state;
        self.done = false;
    }

    fn trajectory_row(&self, task_reward: f64, terminal: u8) -> TrajectoryRow {
        let c = self.state.last_command;
        TrajectoryRow {
            t: self.elapsed,
            x: self.state.x,
            y: self.state.y,
            v: self.state.v,
            theta: self.state.theta,
            duration: c.duration,
            linear_cmd: c.linear,
            angular_cmd: c.angular,
            task_reward,
            terminal,
        }
    }

    /// Builds the 49-entry observation from the current state.
    pub fn observe(&self) -> Vec<f64> {
        let h = self.cfg.map.half_extent;
        let pos = Vec2::new(self.state.x.clamp(-h, h), self.state.y.clamp(-h, h));
        let lidar = lidar_scan(pos, self.state.theta, &self.cfg.map, self.cfg.lidar_rays)
            .expect("clamped position lies inside the map");
        let c = self.state.last_command;
        let view = ObservationView {
            position: pos,
            goal: self.goal,
            velocity: self.state.v.clamp(-1.0, 1.0),
            steering: c.angular.clamp(-1.0, 1.0),
            duration: c.duration.clamp(self.cfg.min_duration, self.cfg.max_duration),
            previous_linear: c.linear.clamp(-1.0, 1.0),
            angular: c.angular.clamp(-1.0, 1.0),
            lidar,
        };
        let obs = view.to_vec();
        debug_assert_eq!(obs.len(), OBSERVATION_DIM);
        assert!(self.within_declared_space(&obs), "observation outside its declared space: {obs:?}");
        obs
    }

    fn within_declared_space(&self, obs: &[f64]) -> bool {
        let h = self.cfg.map.half_extent;
        obs.iter().enumerate().all(|(i, &v)| match i {
            0..=3 | 9.. => (-h..=h).contains(&v),
            6 => (self.cfg.min_duration..=self.cfg.max_duration).contains(&v),
            _ => (-1.0..=1.0).contains(&v),
        })
    }

    pub fn step_command(&mut self, command: &Command) -> Result<(EnvStep, StepInfo), SimError> {
        if self.done {
            return Err(SimError::Usage("step called on a finished episode; reset first".into()));
        }
        let (lo, hi) = (self.cfg.min_duration, self.cfg.max_duration);
        let tol = 1e-12;
        if !(command.duration >= lo - tol && command.duration <= hi + tol) {
            return Err(SimError::Domain(format!(
                "duration {} outside [{lo}, {hi}]",
                command.duration
            )));
        }
        let cmd = Command {
            duration: command.duration.clamp(lo, hi),
            linear: command.linear.clamp(-1.0, 1.0),
            angular: command.angular.clamp(-1.0, 1.0),
        };
        let params = self.cfg.field.params_at(&self.state, &cmd);
        let next = self.cfg.vehicle.step(&self.state, &cmd, &params)?;
        let reward = compute_task_reward(
            self.state.position(),
            next.position(),
            self.goal,
            self.initial_distance,
            &self.cfg.map,
            &self.cfg.reward,
        );
        self.state = next;
        self.steps += 1;
        self.elapsed += cmd.duration;
        self.done = reward.terminal;
        let info = StepInfo { task_reward: reward.value, duration: cmd.duration, case: reward.case };
        self.last_info = Some(info);
        let row = self.trajectory.is_some().then(|| self.trajectory_row(reward.value, reward.terminal as u8));
        if let (Some(t), Some(row)) = (self.trajectory.as_mut(), row) {
            t.push(row);
        }
        let step = EnvStep {
            observation: self.observe(),
            task_reward: reward.value,
            done: reward.terminal,
            success: reward.case == RewardCase::Success,
        };
        Ok((step, info))
    }
}

impl Environment for LimoEnv {
    fn observation_dim(&self) -> usize {
        OBSERVATION_DIM
    }

    fn duration_bounds(&self) -> (f64, f64) {
        (self.cfg.min_duration, self.cfg.max_duration)
    }

    fn reset(&mut self, rng: &mut crate::SimRng) -> Vec<f64> {
        let task = self.cfg.sample_task(rng);
        self.reset_to(task)
    }

    fn step(&mut self, command: &Command) -> Result<EnvStep, SimError> {
        self.step_command(command).map(|(s, _)| s)
    }
}

pub fn write_trajectory_csv<W: std::io::Write>(rows: &[TrajectoryRow], w: W) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| SimError::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env() -> LimoEnv {
        LimoEnv::new(EnvConfig::default()).unwrap()
    }

    #[test]
    fn noiseless_reset_starts_exactly() {
        let cfg = EnvConfig { start_noise: 0.0, ..EnvConfig::default() };
        let mut rng = crate::SimRng::seed_from_u64(0);
        let task = cfg.sample_task(&mut rng);
        assert_eq!(task.start, Vec2::new(-0.2, -0.5));
        assert!(cfg.goals.contains(&task.goal));
    }

    #[test]
    fn reset_observation_has_neutral_command() {
        let mut e = env();
        let mut rng = crate::SimRng::seed_from_u64(1);
        let obs = e.reset(&mut rng);
        assert_eq!(obs.len(), OBSERVATION_DIM);
        let view = ObservationView::parse(&obs).unwrap();
        assert_eq!(view.duration, 0.02);
        assert_eq!((view.velocity, view.steering, view.previous_linear, view.angular), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(view.goal, e.goal());
        assert_eq!(view.lidar.len(), 20);
    }

    #[test]
    fn observation_layout_round_trips() {
        let mut e = env();
        let mut rng = crate::SimRng::seed_from_u64(2);
        e.reset(&mut rng);
        let (step, _) = e.step_command(&Command { duration: 0.3, linear: 0.4, angular: -0.2 }).unwrap();
        let view = ObservationView::parse(&step.observation).unwrap();
        assert_eq!(view.to_vec(), step.observation);
        assert_eq!(view.duration, 0.3);
        assert_eq!(view.previous_linear, 0.4);
        assert_eq!(view.angular, -0.2);
    }

    #[test]
    fn stepping_after_termination_is_a_usage_error() {
        let mut e = env();
        e.reset_to(Task { start: Vec2::new(1.3, 0.2), goal: Vec2::new(-1.2, 0.0) });
        let drive = Command { duration: 0.5, linear: 1.0, angular: 0.0 };
        let mut last = e.step_command(&drive).unwrap().0;
        while !last.done {
            last = e.step_command(&drive).unwrap().0;
        }
        assert_eq!(last.task_reward, -100.0);
        assert!(matches!(e.step_command(&drive), Err(SimError::Usage(_))));
    }

    #[test]
    fn duration_outside_bounds_is_rejected() {
        let mut e = env();
        e.reset_to(Task { start: Vec2::new(-0.2, -0.5), goal: Vec2::new(1.2, 0.0) });
        let r = e.step_command(&Command { duration: 0.7, linear: 0.0, angular: 0.0 });
        assert!(matches!(r, Err(SimError::Domain(_))));
    }

    #[test]
    fn idle_robot_never_terminates() {
        let mut e = env();
        e.reset_to(Task { start: Vec2::new(-0.2, -0.5), goal: Vec2::new(1.2, 1.2) });
        for _ in 0..200 {
            let s = e.step_command(&Command { duration: 0.1, linear: 0.0, angular: 0.0 }).unwrap().0;
            assert!(!s.done);
            assert_eq!(s.task_reward, 0.0);
        }
        assert_eq!(e.steps(), 200);
        assert!((e.elapsed() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn trajectory_log_has_one_row_per_step_plus_start() {
        let mut e = env();
        e.record_trajectory(true);
        e.reset_to(Task { start: Vec2::new(0.2, -0.5), goal: Vec2::new(0.2, 1.2) });
        for _ in 0..3 {
            e.step_command(&Command { duration: 0.2, linear: 0.5, angular: 0.0 }).unwrap();
        }
        let rows = e.trajectory().unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_trajectory_csv(rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,X,Y,V,theta,duration,linear_cmd,angular_cmd,R_t,T"));
    }
}
