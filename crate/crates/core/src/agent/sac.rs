use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::replay::Transition;
use super::AgentError;
use crate::nn::{soft_update, Activation, Adam, AdamConfig, Checkpoint, Gradients, Layer, Network, ScalarAdam, SquashedGaussian};
use crate::SimRng;

/// What the policy emits besides the two control values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpace {
    /// Duration is a third, learned action dimension.
    Variable { min_duration: f64, max_duration: f64 },
    /// Every command is held for `dt` seconds.
    Fixed { dt: f64 },
}

impl ActionSpace {
    pub fn dims(&self) -> usize {
        match self {
            ActionSpace::Variable { .. } => 3,
            ActionSpace::Fixed { .. } => 2,
        }
    }

    pub fn duration_bounds(&self) -> (f64, f64) {
        match *self {
            ActionSpace::Variable { min_duration, max_duration } => (min_duration, max_duration),
            ActionSpace::Fixed { dt } => (dt, dt),
        }
    }

    fn head(&self) -> Result<SquashedGaussian, AgentError> {
        let mut bounds = vec![(-1.0, 1.0), (-1.0, 1.0)];
        match *self {
            ActionSpace::Variable { min_duration, max_duration } => {
                if !(min_duration > 0.0 && min_duration < max_duration) {
                    return Err(AgentError::Config("need 0 < min_duration < max_duration".into()));
                }
                bounds.push((min_duration, max_duration));
            }
            ActionSpace::Fixed { dt } => {
                if !(dt > 0.0) {
                    return Err(AgentError::Config("fixed step must be positive".into()));
                }
            }
        }
        Ok(SquashedGaussian::with_bounds(bounds)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Temperature {
    /// Tuned toward a target entropy, starting from `initial`.
    Auto { initial: f64 },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub temperature_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub temperature: Temperature,
    /// Defaults to minus the action dimension count.
    pub target_entropy: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            temperature_lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            temperature: Temperature::Auto { initial: 1.0 },
            target_entropy: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AgentError::Config("gamma must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(AgentError::Config("tau must lie in [0, 1]".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(AgentError::Config("hidden widths must be positive".into()));
        }
        match self.temperature {
            Temperature::Auto { initial } if !(initial > 0.0) => {
                Err(AgentError::Config("initial temperature must be positive".into()))
            }
            Temperature::Fixed { value } if !(value >= 0.0) => {
                Err(AgentError::Config("temperature must be non-negative".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentAction {
    /// Linear and angular command, each in `[-1, 1]`.
    pub controls: [f64; 2],
    pub duration: f64,
    /// Point in `[-1, 1]^k` the critics consume.
    pub normalized: Vec<f64>,
}

/// Dense view of sampled transitions.
#[derive(Debug, Clone)]
pub struct CriticBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl CriticBatch {
    /// `reward` supplies the training reward of each transition.
    pub fn from_transitions(
        agent: &SacAgent,
        batch: &[&Transition],
        mut reward: impl FnMut(&Transition) -> Result<f64, AgentError>,
    ) -> Result<Self, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Precondition("empty batch".into()));
        }
        let n = batch.len();
        let d = agent.obs_dim;
        let k = agent.action_dims();
        let mut states = Array2::zeros((n, d));
        let mut next_states = Array2::zeros((n, d));
        let mut actions = Array2::zeros((n, k));
        let mut rewards = Array1::zeros(n);
        let mut dones = Array1::zeros(n);
        for (i, t) in batch.iter().enumerate() {
            if t.state.len() != d || t.next_state.len() != d {
                return Err(AgentError::Config(format!("transition state length differs from {d}")));
            }
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
            next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state[..]));
            actions[[i, 0]] = t.action[0];
            actions[[i, 1]] = t.action[1];
            if k == 3 {
                actions[[i, 2]] = agent.head.normalize(2, t.duration);
            }
            rewards[i] = reward(t)?;
            dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(Self { states, actions, rewards, next_states, dones })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Actor, twin critics with target copies, their optimizers and the entropy
/// temperature.
#[derive(Debug, Clone)]
pub struct SacAgent {
    config: AgentConfig,
    space: ActionSpace,
    obs_dim: usize,
    head: SquashedGaussian,
    actor: Network,
    critics: [Network; 2],
    targets: [Network; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    log_temperature: f64,
    temperature_opt: ScalarAdam,
    target_entropy: f64,
    rng: SimRng,
}

impl SacAgent {
    pub fn new(obs_dim: usize, space: ActionSpace, config: AgentConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        if obs_dim == 0 {
            return Err(AgentError::Config("observation dimension must be positive".into()));
        }
        let head = space.head()?;
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(1);
        let k = head.dims();
        let sizes = |input: usize, output: usize| {
            let mut v = vec![input];
            v.extend(&config.hidden);
            v.push(output);
            v
        };
        let actor = Network::mlp(&sizes(obs_dim, head.raw_dims()), Activation::Relu, Activation::Linear, &mut rng)?;
        let q1 = Network::mlp(&sizes(obs_dim + k, 1), Activation::Relu, Activation::Linear, &mut rng)?;
        let q2 = Network::mlp(&sizes(obs_dim + k, 1), Activation::Relu, Activation::Linear, &mut rng)?;
        let actor_opt = Adam::new(&actor, AdamConfig::with_learning_rate(config.actor_lr));
        let critic_opts = [
            Adam::new(&q1, AdamConfig::with_learning_rate(config.critic_lr)),
            Adam::new(&q2, AdamConfig::with_learning_rate(config.critic_lr)),
        ];
        let log_temperature = match config.temperature {
            Temperature::Auto { initial } => initial.ln(),
            Temperature::Fixed { value } => value.ln(),
        };
        let target_entropy = config.target_entropy.unwrap_or(-(k as f64));
        Ok(Self {
            temperature_opt: ScalarAdam::new(AdamConfig::with_learning_rate(config.temperature_lr)),
            config,
            space,
            obs_dim,
            head,
            targets: [q1.clone(), q2.clone()],
            critics: [q1, q2],
            actor,
            actor_opt,
            critic_opts,
            log_temperature,
            target_entropy,
            rng,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn action_dims(&self) -> usize {
        self.head.dims()
    }

    pub fn observation_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn head(&self) -> &SquashedGaussian {
        &self.head
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Network {
        &mut self.actor
    }

    pub fn critics(&self) -> &[Network; 2] {
        &self.critics
    }

    /// Replaces both critics and their targets.
    pub fn set_critics(&mut self, q: [Network; 2]) -> Result<(), AgentError> {
        for net in &q {
            if net.input_dim() != self.obs_dim + self.action_dims() || net.output_dim() != 1 {
                return Err(AgentError::Config("critic must map state+action to one value".into()));
            }
        }
        self.critic_opts = [
            Adam::new(&q[0], AdamConfig::with_learning_rate(self.config.critic_lr)),
            Adam::new(&q[1], AdamConfig::with_learning_rate(self.config.critic_lr)),
        ];
        self.targets = q.clone();
        self.critics = q;
        Ok(())
    }

    pub fn targets(&self) -> &[Network; 2] {
        &self.targets
    }

    pub fn temperature(&self) -> f64 {
        match self.config.temperature {
            Temperature::Fixed { value } => value,
            Temperature::Auto { .. } => self.log_temperature.exp(),
        }
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    /// Maps a point of `[-1, 1]^k` to controls and duration.
    pub fn action_from_normalized(&self, y: &[f64]) -> AgentAction {
        let duration = match self.space {
            ActionSpace::Variable { .. } => self.head.denormalize(2, y[2]),
            ActionSpace::Fixed { dt } => dt,
        };
        AgentAction {
            controls: [self.head.denormalize(0, y[0]), self.head.denormalize(1, y[1])],
            duration,
            normalized: y.to_vec(),
        }
    }

    pub fn select_action(&mut self, state: &[f64], stochastic: bool) -> Result<AgentAction, AgentError> {
        if state.len() != self.obs_dim {
            return Err(AgentError::Config(format!(
                "state has {} entries, policy expects {}",
                state.len(),
                self.obs_dim
            )));
        }
        let raw = self.actor.forward(state)?;
        let y = if stochastic {
            self.head.sample(&raw, &mut self.rng)?.normalized
        } else {
            self.head.mode(&raw)?.0
        };
        Ok(self.action_from_normalized(&y))
    }

    /// Uniform over the normalized action box.
    pub fn random_action(&mut self) -> AgentAction {
        let y: Vec<f64> = (0..self.action_dims()).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
        self.action_from_normalized(&y)
    }

    fn critic_input(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        concatenate![Axis(1), *states, *actions]
    }

    fn standard_normal(&mut self, rows: usize) -> Array2<f64> {
        let k = self.action_dims();
        Array2::from_shape_simple_fn((rows, k), || StandardNormal.sample(&mut self.rng))
    }

    /// Soft-Bellman targets `r + gamma (1 - done) (min Q'(s', a') - T log pi(a'|s'))`
    /// with `a'` drawn from the current policy through `next_noise`.
    pub fn critic_targets(&self, batch: &CriticBatch, next_noise: &Array2<f64>) -> Result<Array1<f64>, AgentError> {
        let n = batch.len();
        let raw = self.actor.forward_batch(&batch.next_states)?;
        let mut next_actions = Array2::zeros((n, self.action_dims()));
        let mut next_logp = Array1::zeros(n);
        for i in 0..n {
            let sample = self.head.sample_with_noise(&raw.row(i).to_vec(), &next_noise.row(i).to_vec())?;
            next_actions.row_mut(i).assign(&Array1::from(sample.normalized));
            next_logp[i] = sample.log_prob;
        }
        let input = Self::critic_input(&batch.next_states, &next_actions);
        let t1 = self.targets[0].forward_batch(&input)?;
        let t2 = self.targets[1].forward_batch(&input)?;
        let temp = self.temperature();
        Ok(Array1::from_shape_fn(n, |i| {
            let soft_v = t1[[i, 0]].min(t2[[i, 0]]) - temp * next_logp[i];
            batch.rewards[i] + self.config.gamma * (1.0 - batch.dones[i]) * soft_v
        }))
    }

    /// Mean squared residual averaged over both critics, with each critic's
    /// parameter gradient.
    pub fn critic_loss_and_grads(
        &self,
        batch: &CriticBatch,
        next_noise: &Array2<f64>,
    ) -> Result<(f64, [Gradients; 2]), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Precondition("empty batch".into()));
        }
        let n = batch.len() as f64;
        let y = self.critic_targets(batch, next_noise)?;
        let input = Self::critic_input(&batch.states, &batch.actions);
        let mut loss = 0.0;
        let mut grads = Vec::with_capacity(2);
        for q in &self.critics {
            let cache = q.forward_cached(&input)?;
            let residual = &cache.output().column(0) - &y;
            loss += residual.mapv(|r| r * r).sum() / n;
            let grad_out = residual.mapv(|r| r / n).insert_axis(Axis(1));
            grads.push(q.backward(&cache, &grad_out)?.0);
        }
        let g2 = grads.pop().expect("two critics");
        let g1 = grads.pop().expect("two critics");
        Ok((0.5 * loss, [g1, g2]))
    }

    pub fn critic_update(&mut self, batch: &CriticBatch) -> Result<f64, AgentError> {
        let noise = self.standard_normal(batch.len());
        let (loss, grads) = self.critic_loss_and_grads(batch, &noise)?;
        for ((q, opt), g) in self.critics.iter_mut().zip(self.critic_opts.iter_mut()).zip(grads.iter()) {
            opt.step(q, g)?;
        }
        Ok(loss)
    }

    /// Actor loss `mean(T log pi - min Q)` at reparameterised actions, its
    /// gradient with respect to the actor parameters, and the mean log-density.
    pub fn actor_loss_and_grads(&self, states: &Array2<f64>, noise: &Array2<f64>) -> Result<(f64, Gradients, f64), AgentError> {
        let n = states.nrows();
        if n == 0 {
            return Err(AgentError::Precondition("empty batch".into()));
        }
        let k = self.action_dims();
        let nf = n as f64;
        let temp = self.temperature();
        let cache = self.actor.forward_cached(states)?;
        let raw = cache.output();
        let mut samples = Vec::with_capacity(n);
        let mut actions = Array2::zeros((n, k));
        for i in 0..n {
            let s = self.head.sample_with_noise(&raw.row(i).to_vec(), &noise.row(i).to_vec())?;
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&s.normalized[..]));
            samples.push(s);
        }
        let input = Self::critic_input(states, &actions);
        let c1 = self.critics[0].forward_cached(&input)?;
        let c2 = self.critics[1].forward_cached(&input)?;
        let mut g1 = Array2::zeros((n, 1));
        let mut g2 = Array2::zeros((n, 1));
        let mut loss = 0.0;
        let mut mean_logp = 0.0;
        for i in 0..n {
            let (q1, q2) = (c1.output()[[i, 0]], c2.output()[[i, 0]]);
            if q1 <= q2 {
                g1[[i, 0]] = -1.0 / nf;
            } else {
                g2[[i, 0]] = -1.0 / nf;
            }
            loss += temp * samples[i].log_prob - q1.min(q2);
            mean_logp += samples[i].log_prob;
        }
        let (_, d1) = self.critics[0].backward(&c1, &g1)?;
        let (_, d2) = self.critics[1].backward(&c2, &g2)?;
        let d_action = (&d1 + &d2).slice(s![.., self.obs_dim..]).to_owned();
        let mut grad_raw = Array2::zeros((n, 2 * k));
        for (i, smp) in samples.iter().enumerate() {
            for j in 0..k {
                let g = d_action[[i, j]];
                grad_raw[[i, j]] = temp / nf * smp.dlogp_dmean[j] + g * smp.dnorm_dmean[j];
                grad_raw[[i, k + j]] = temp / nf * smp.dlogp_dlogstd[j] + g * smp.dnorm_dlogstd[j];
            }
        }
        let (grads, _) = self.actor.backward(&cache, &grad_raw)?;
        Ok((loss / nf, grads, mean_logp / nf))
    }

    /// One actor step followed, in auto mode, by one temperature step.
    pub fn actor_update(&mut self, states: &Array2<f64>) -> Result<f64, AgentError> {
        let noise = self.standard_normal(states.nrows());
        let (loss, grads, mean_logp) = self.actor_loss_and_grads(states, &noise)?;
        self.actor_opt.step(&mut self.actor, &grads)?;
        if let Temperature::Auto { .. } = self.config.temperature {
            let grad = -(mean_logp + self.target_entropy);
            self.temperature_opt.step(&mut self.log_temperature, grad);
        }
        Ok(loss)
    }

    pub fn soft_update_targets(&mut self) -> Result<(), AgentError> {
        for (t, q) in self.targets.iter_mut().zip(self.critics.iter()) {
            soft_update(t, q, self.config.tau)?;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite()
            && self.critics.iter().chain(self.targets.iter()).all(Network::all_finite)
            && (matches!(self.config.temperature, Temperature::Fixed { .. }) || self.log_temperature.is_finite())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.push("actor", &self.actor, Some(&self.actor_opt));
        ck.push("critic1", &self.critics[0], Some(&self.critic_opts[0]));
        ck.push("critic2", &self.critics[1], Some(&self.critic_opts[1]));
        ck.push("target1", &self.targets[0], None);
        ck.push("target2", &self.targets[1], None);
        let mut temp = Layer::zeros(1, 1, Activation::Linear);
        temp.bias[0] = self.log_temperature;
        let temp = Network::from_layers(vec![temp]).expect("single layer");
        ck.push("log_temperature", &temp, None);
        ck
    }

    /// Restores networks, optimizer state and temperature saved by
    /// [`SacAgent::to_checkpoint`] into an agent of the same architecture.
    pub fn restore(&mut self, ck: &Checkpoint) -> Result<(), AgentError> {
        let fetch = |name: &str, like: &Network| -> Result<(Network, Option<Adam>), AgentError> {
            let e = ck
                .get(name)
                .ok_or_else(|| AgentError::Config(format!("checkpoint lacks '{name}'")))?;
            if !e.network.same_architecture(like) {
                return Err(AgentError::Config(format!("checkpoint entry '{name}' has a different architecture")));
            }
            Ok((e.network.clone(), e.optimizer.clone()))
        };
        let (actor, actor_opt) = fetch("actor", &self.actor)?;
        let (q1, o1) = fetch("critic1", &self.critics[0])?;
        let (q2, o2) = fetch("critic2", &self.critics[1])?;
        let (t1, _) = fetch("target1", &self.targets[0])?;
        let (t2, _) = fetch("target2", &self.targets[1])?;
        let temp = ck.network("log_temperature")?;
        self.log_temperature = temp.layers()[0].bias[0];
        if let Some(o) = actor_opt {
            self.actor_opt = o;
        }
        if let (Some(a), Some(b)) = (o1, o2) {
            self.critic_opts = [a, b];
        }
        self.actor = actor;
        self.critics = [q1, q2];
        self.targets = [t1, t2];
        Ok(())
    }
}
