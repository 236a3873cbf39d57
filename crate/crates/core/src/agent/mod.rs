//! Duration-extended soft actor-critic with adaptive multiplicative reward
//! shaping, plus additive-reward and fixed-rate baselines.

mod replay;
mod sac;
pub mod shaping;
mod train;

pub use replay::{ReplayBuffer, Transition};
pub use sac::{ActionSpace, AgentAction, AgentConfig, CriticBatch, SacAgent, Temperature};
pub use shaping::{
    alpha_epsilon_of, duration_reward, reward_slope, seac_baseline_reward, shape_reward, AlphaConfig, AlphaState,
    SeacWeights,
};
pub use train::{
    sac_fixed_baseline, train, write_metrics_csv, DecliningRewardEnv, EpisodeMetrics, GradientSteps, ReplayReward, RewardScheme,
    TrainConfig, TrainOutcome,
};

use thiserror::Error;

use crate::nn::NnError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("training diverged at episode {episode}: {snapshot}")]
    Diverged { episode: usize, snapshot: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
