use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, Transition};
use super::sac::{ActionSpace, AgentConfig, CriticBatch, SacAgent};
use super::shaping::{seac_baseline_reward, AlphaConfig, AlphaState, SeacWeights};
use super::AgentError;
use crate::sim::{Command, EnvStep, Environment, SimError};
use crate::SimRng;

/// Reward the learner is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardScheme {
    /// Multiplicative duration shaping with the adaptive gain.
    Moseac { alpha: AlphaConfig },
    /// Fixed additive weights.
    Seac { weights: SeacWeights },
    /// Raw task reward.
    Task,
}

/// Source of the reward used when replaying a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayReward {
    /// Re-shape the raw reward with the current gains.
    Recompute,
    /// Use the value stored at collection time.
    Stored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientSteps {
    /// `ceil(ratio * env steps since the previous update)`.
    PerEnvStep { ratio: f64 },
    Fixed { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_episodes: usize,
    pub max_steps_per_episode: usize,
    pub warmup_episodes: usize,
    pub update_interval: usize,
    /// Stops training once this many environment steps have been taken.
    pub max_env_steps: Option<u64>,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub gradient_steps: GradientSteps,
    pub replay_reward: ReplayReward,
    pub reward: RewardScheme,
    /// Removes the duration dimension and holds every command for `dt`.
    pub fixed_dt: Option<f64>,
    pub agent: AgentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_episodes: 2000,
            max_steps_per_episode: 200,
            warmup_episodes: 20,
            update_interval: 1,
            max_env_steps: None,
            batch_size: 128,
            replay_capacity: 200_000,
            gradient_steps: GradientSteps::PerEnvStep { ratio: 1.0 },
            replay_reward: ReplayReward::Recompute,
            reward: RewardScheme::Moseac { alpha: AlphaConfig::default() },
            fixed_dt: None,
            agent: AgentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        self.agent.validate()?;
        if self.update_interval == 0 {
            return Err(AgentError::Config("update interval must be at least 1".into()));
        }
        if self.batch_size == 0 || self.max_steps_per_episode == 0 {
            return Err(AgentError::Config("batch size and episode length must be positive".into()));
        }
        if let GradientSteps::PerEnvStep { ratio } = self.gradient_steps {
            if !(ratio >= 0.0 && ratio.is_finite()) {
                return Err(AgentError::Config("gradient step ratio must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

/// One row of the metrics log. Optional fields are blank when not applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub steps: usize,
    pub sum_duration_s: f64,
    pub episode_return_shaped: f64,
    pub episode_return_task: f64,
    pub alpha_m: Option<f64>,
    pub alpha_eps: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub success_flag: u8,
}

pub struct TrainOutcome {
    pub agent: SacAgent,
    pub metrics: Vec<EpisodeMetrics>,
    pub alpha: Option<AlphaState>,
    pub env_steps: u64,
    pub gradient_steps: u64,
}

/// Same learner with the duration removed from the action space.
pub fn sac_fixed_baseline(obs_dim: usize, dt: f64, config: AgentConfig, seed: u64) -> Result<SacAgent, AgentError> {
    SacAgent::new(obs_dim, ActionSpace::Fixed { dt }, config, seed)
}

fn training_reward(
    scheme: &RewardScheme,
    alpha: Option<&AlphaState>,
    task_reward: f64,
    duration: f64,
    min_duration: f64,
) -> Result<f64, AgentError> {
    match (scheme, alpha) {
        (RewardScheme::Moseac { .. }, Some(a)) => a.shape(task_reward, duration, min_duration),
        (RewardScheme::Seac { weights }, _) => Ok(seac_baseline_reward(task_reward, duration, weights)),
        _ => Ok(task_reward),
    }
}

/// Runs the episodic loop: roll out, store, and after the warmup episodes
/// update every `update_interval` episodes, then revisit the shaping gains.
pub fn train<E: Environment + ?Sized>(env: &mut E, cfg: &TrainConfig) -> Result<TrainOutcome, AgentError> {
    cfg.validate()?;
    let (env_min, env_max) = env.duration_bounds();
    let space = match cfg.fixed_dt {
        Some(dt) => {
            if !(dt >= env_min && dt <= env_max) {
                return Err(AgentError::Config(format!("fixed step {dt} outside environment bounds [{env_min}, {env_max}]")));
            }
            ActionSpace::Fixed { dt }
        }
        None => ActionSpace::Variable { min_duration: env_min, max_duration: env_max },
    };
    let mut agent = SacAgent::new(env.observation_dim(), space, cfg.agent.clone(), cfg.seed)?;
    let mut alpha = match cfg.reward {
        RewardScheme::Moseac { alpha } => Some(AlphaState::new(&alpha)?),
        _ => None,
    };
    let mut replay = ReplayBuffer::new(cfg.replay_capacity, (env_min, env_max))?;
    let mut env_rng = SimRng::seed_from_u64(cfg.seed);
    env_rng.set_stream(2);
    let mut replay_rng = SimRng::seed_from_u64(cfg.seed);
    replay_rng.set_stream(3);

    let mut metrics = Vec::new();
    let mut env_steps = 0u64;
    let mut grad_steps_total = 0u64;
    let mut since_update = 0usize;
    let step_budget = cfg.max_env_steps.unwrap_or(u64::MAX);

    for episode in 0..cfg.max_episodes {
        if env_steps >= step_budget {
            break;
        }
        let mut obs = env.reset(&mut env_rng);
        let (mut steps, mut sum_d, mut ret_shaped, mut ret_task, mut success) = (0usize, 0.0, 0.0, 0.0, false);
        while steps < cfg.max_steps_per_episode && env_steps < step_budget {
            let act = if episode < cfg.warmup_episodes {
                agent.random_action()
            } else {
                agent.select_action(&obs, true)?
            };
            let cmd = Command { duration: act.duration, linear: act.controls[0], angular: act.controls[1] };
            let EnvStep { observation, task_reward, done, success: hit } = env.step(&cmd)?;
            let shaped = training_reward(&cfg.reward, alpha.as_ref(), task_reward, act.duration, env_min)?;
            if let Some(a) = &alpha {
                debug_assert!(shaped.abs() <= a.alpha_m() * task_reward.abs() + 0.2 + 1e-9);
            }
            replay.push(Transition {
                state: std::mem::take(&mut obs),
                action: act.controls,
                duration: act.duration,
                task_reward,
                shaped_reward: shaped,
                next_state: observation.clone(),
                done,
            })?;
            obs = observation;
            steps += 1;
            env_steps += 1;
            since_update += 1;
            sum_d += act.duration;
            ret_shaped += shaped;
            ret_task += task_reward;
            if done {
                success = hit;
                break;
            }
        }
        if let Some(a) = alpha.as_mut() {
            a.record_episode_average(ret_shaped / steps.max(1) as f64);
        }

        let t_i = episode + 1;
        let (mut critic_loss, mut actor_loss) = (None, None);
        if t_i >= cfg.warmup_episodes && t_i % cfg.update_interval == 0 {
            if replay.len() >= cfg.batch_size {
                let n_grad = match cfg.gradient_steps {
                    GradientSteps::PerEnvStep { ratio } => (since_update as f64 * ratio).ceil() as usize,
                    GradientSteps::Fixed { count } => count,
                };
                let (mut c_sum, mut a_sum) = (0.0, 0.0);
                for _ in 0..n_grad {
                    let sampled = replay.sample(cfg.batch_size, &mut replay_rng)?;
                    let batch = CriticBatch::from_transitions(&agent, &sampled, |t| match cfg.replay_reward {
                        ReplayReward::Stored => Ok(t.shaped_reward),
                        ReplayReward::Recompute => {
                            training_reward(&cfg.reward, alpha.as_ref(), t.task_reward, t.duration, env_min)
                        }
                    })?;
                    c_sum += agent.critic_update(&batch)?;
                    a_sum += agent.actor_update(&batch.states)?;
                    agent.soft_update_targets()?;
                }
                grad_steps_total += n_grad as u64;
                if n_grad > 0 {
                    critic_loss = Some(c_sum / n_grad as f64);
                    actor_loss = Some(a_sum / n_grad as f64);
                }
                since_update = 0;
                let losses_ok = critic_loss.is_none_or(f64::is_finite) && actor_loss.is_none_or(f64::is_finite);
                if !losses_ok || !agent.all_finite() {
                    return Err(AgentError::Diverged {
                        episode,
                        snapshot: format!(
                            "critic_loss={critic_loss:?} actor_loss={actor_loss:?} temperature={} alpha_m={:?} env_steps={env_steps} replay={}",
                            agent.temperature(),
                            alpha.as_ref().map(AlphaState::alpha_m),
                            replay.len()
                        ),
                    });
                }
            }
            if let Some(a) = alpha.as_mut() {
                a.maybe_adjust();
            }
        }

        metrics.push(EpisodeMetrics {
            episode,
            steps,
            sum_duration_s: sum_d,
            episode_return_shaped: ret_shaped,
            episode_return_task: ret_task,
            alpha_m: alpha.as_ref().map(AlphaState::alpha_m),
            alpha_eps: alpha.as_ref().map(AlphaState::alpha_eps),
            critic_loss,
            actor_loss,
            success_flag: u8::from(success),
        });
    }
    Ok(TrainOutcome { agent, metrics, alpha, env_steps, gradient_steps: grad_steps_total })
}

pub fn write_metrics_csv<W: std::io::Write>(rows: &[EpisodeMetrics], w: W) -> Result<(), AgentError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Stub environment whose task reward falls by `decrement` every episode.
/// Episodes last `episode_len` steps; observations are constant.
#[derive(Debug, Clone)]
pub struct DecliningRewardEnv {
    pub episode_len: usize,
    pub start: f64,
    pub decrement: f64,
    pub duration_bounds: (f64, f64),
    episode: usize,
    step: usize,
}

impl DecliningRewardEnv {
    pub fn new(episode_len: usize, start: f64, decrement: f64) -> Self {
        Self { episode_len, start, decrement, duration_bounds: (0.02, 0.5), episode: 0, step: 0 }
    }
}

impl Environment for DecliningRewardEnv {
    fn observation_dim(&self) -> usize {
        3
    }

    fn duration_bounds(&self) -> (f64, f64) {
        self.duration_bounds
    }

    fn reset(&mut self, _rng: &mut SimRng) -> Vec<f64> {
        self.episode += 1;
        self.step = 0;
        vec![0.0; 3]
    }

    fn step(&mut self, _command: &Command) -> Result<EnvStep, SimError> {
        if self.episode == 0 {
            return Err(SimError::Usage("step before reset".into()));
        }
        self.step += 1;
        Ok(EnvStep {
            observation: vec![0.0; 3],
            task_reward: self.start - self.decrement * (self.episode - 1) as f64,
            done: self.step >= self.episode_len,
            success: false,
        })
    }
}
