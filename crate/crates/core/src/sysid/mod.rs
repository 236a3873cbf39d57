//! Identification of friction and power from one-step motion data.
//!
//! A regressor maps `(X, Y, V, theta, dt, V_target, steer)` to `(mu_k, P)`;
//! the loss pushes those parameters through the vehicle update and compares
//! the predicted next position with the recorded one. Only `P/M - mu_k g`
//! affects the motion, so accuracy is judged on positions, not parameters.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{softplus, Activation, Adam, AdamConfig, Gradients, Network, NnError};
use crate::sim::{Command, EnvConfig, FrictionMode, ParamField, PhysicalParams, RobotState, SimError, VehicleModel};
use crate::SimRng;

pub const INPUT_DIM: usize = 7;

#[derive(Debug, Error)]
pub enum SysIdError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("fit diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One recorded command and where it took the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynSample {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
    pub dt: f64,
    pub v_target: f64,
    pub steer: f64,
    pub x_next: f64,
    pub y_next: f64,
}

impl DynSample {
    pub fn input(&self) -> [f64; INPUT_DIM] {
        [self.x, self.y, self.v, self.theta, self.dt, self.v_target, self.steer]
    }

    pub fn state(&self) -> RobotState {
        RobotState { x: self.x, y: self.y, v: self.v, theta: self.theta, ..RobotState::default() }
    }

    pub fn command(&self) -> Command {
        Command { duration: self.dt, linear: self.v_target, angular: self.steer }
    }
}

/// Regressor plus the vehicle model the loss runs through.
#[derive(Debug, Clone, PartialEq)]
pub struct DynModel {
    pub net: Network,
    pub vehicle: VehicleModel,
}

impl DynModel {
    /// `7 -> hidden... -> 2` ReLU network. The friction output starts with
    /// bias -3 so that `softplus` yields roughly 0.05.
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], vehicle: VehicleModel, rng: &mut R) -> Result<Self, SysIdError> {
        let mut sizes = vec![INPUT_DIM];
        sizes.extend(hidden);
        sizes.push(2);
        let mut net = Network::mlp(&sizes, Activation::Relu, Activation::Linear, rng)?;
        net.layers_mut().last_mut().expect("non-empty").bias[0] = -3.0;
        Self::from_network(net, vehicle)
    }

    pub fn from_network(net: Network, vehicle: VehicleModel) -> Result<Self, SysIdError> {
        if net.input_dim() != INPUT_DIM || net.output_dim() != 2 {
            return Err(SysIdError::Config(format!(
                "regressor must map {INPUT_DIM} inputs to 2 outputs, got {} -> {}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if vehicle.friction != FrictionMode::Raw {
            return Err(SysIdError::Config("identification uses the raw friction law".into()));
        }
        Ok(Self { net, vehicle })
    }

    pub fn predict_params(&self, input: &[f64]) -> Result<PhysicalParams, SysIdError> {
        if input.len() != INPUT_DIM {
            return Err(SysIdError::Config(format!("expected {INPUT_DIM} inputs, got {}", input.len())));
        }
        let out = self.net.forward(input)?;
        Ok(PhysicalParams::new(softplus(out[0]), out[1]))
    }

    pub fn predict_position(&self, s: &DynSample) -> Result<[f64; 2], SysIdError> {
        let p = self.predict_params(&s.input())?;
        let next = self.vehicle.step(&s.state(), &s.command(), &p)?;
        Ok([next.x, next.y])
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn inputs(batch: &[DynSample]) -> Array2<f64> {
    Array2::from_shape_fn((batch.len(), INPUT_DIM), |(i, j)| batch[i].input()[j])
}

/// Mean over the batch of the squared distance between predicted and
/// recorded next positions.
pub fn rollout_loss(model: &DynModel, batch: &[DynSample]) -> Result<f64, SysIdError> {
    if batch.is_empty() {
        return Err(SysIdError::Precondition("empty batch".into()));
    }
    let out = model.net.forward_batch(&inputs(batch))?;
    let mut total = 0.0;
    for (i, s) in batch.iter().enumerate() {
        let p = PhysicalParams::new(softplus(out[[i, 0]]), out[[i, 1]]);
        let next = model.vehicle.step(&s.state(), &s.command(), &p)?;
        total += (next.x - s.x_next).powi(2) + (next.y - s.y_next).powi(2);
    }
    Ok(total / batch.len() as f64)
}

/// [`rollout_loss`] and its gradient with respect to the network parameters.
pub fn rollout_loss_and_grads(model: &DynModel, batch: &[DynSample]) -> Result<(f64, Gradients), SysIdError> {
    if batch.is_empty() {
        return Err(SysIdError::Precondition("empty batch".into()));
    }
    let n = batch.len() as f64;
    let cache = model.net.forward_cached(&inputs(batch))?;
    let out = cache.output();
    let mut grad_out = Array2::zeros((batch.len(), 2));
    let mut total = 0.0;
    for (i, s) in batch.iter().enumerate() {
        let p = PhysicalParams::new(softplus(out[[i, 0]]), out[[i, 1]]);
        let (next, jac) = model.vehicle.step_with_jacobian(&s.state(), &s.command(), &p)?;
        let (ex, ey) = (next.x - s.x_next, next.y - s.y_next);
        total += ex * ex + ey * ey;
        let dmu = 2.0 * (ex * jac[0][0] + ey * jac[1][0]) / n;
        let dp = 2.0 * (ex * jac[0][1] + ey * jac[1][1]) / n;
        grad_out[[i, 0]] = dmu * sigmoid(out[[i, 0]]);
        grad_out[[i, 1]] = dp;
    }
    let (grads, _) = model.net.backward(&cache, &grad_out)?;
    Ok((total / n, grads))
}

/// Root mean squared next-position error in metres.
pub fn position_rmse(model: &DynModel, data: &[DynSample]) -> Result<f64, SysIdError> {
    Ok(rollout_loss(model, data)?.sqrt())
}

/// RMSE of predicting with the field-averaged friction and power gain.
pub fn field_mean_rmse(field: &ParamField, vehicle: &VehicleModel, data: &[DynSample]) -> Result<f64, SysIdError> {
    if data.is_empty() {
        return Err(SysIdError::Precondition("empty dataset".into()));
    }
    let mut total = 0.0;
    for s in data {
        let state = s.state();
        let cmd = s.command();
        let next = vehicle.step(&state, &cmd, &field.mean_params(&state, &cmd))?;
        total += (next.x - s.x_next).powi(2) + (next.y - s.y_next).powi(2);
    }
    Ok((total / data.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { epochs: 60, batch_size: 256, learning_rate: 1e-3, lr_decay: 0.96, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: DynModel,
    pub best_validation_loss: f64,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

fn run_epoch(
    model: &mut DynModel,
    opt: &mut Adam,
    train: &[DynSample],
    order: &mut [usize],
    batch_size: usize,
    rng: &mut SimRng,
    trainable: &dyn Fn(usize) -> bool,
) -> Result<f64, SysIdError> {
    order.shuffle(rng);
    let mut total = 0.0;
    let mut buf = Vec::with_capacity(batch_size);
    for chunk in order.chunks(batch_size) {
        buf.clear();
        buf.extend(chunk.iter().map(|&i| train[i]));
        let (loss, grads) = rollout_loss_and_grads(model, &buf)?;
        opt.step_masked(&mut model.net, &grads, trainable)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / train.len() as f64)
}

fn check_inputs(train: &[DynSample], validation: &[DynSample], batch_size: usize) -> Result<(), SysIdError> {
    if train.is_empty() || validation.is_empty() {
        return Err(SysIdError::Precondition("training and validation sets must be non-empty".into()));
    }
    if batch_size == 0 {
        return Err(SysIdError::Config("batch size must be positive".into()));
    }
    Ok(())
}

/// Minibatch Adam on the rollout loss; returns the epoch snapshot with the
/// lowest validation loss (the initial model counts as epoch 0).
pub fn fit(model: DynModel, train: &[DynSample], validation: &[DynSample], cfg: &FitConfig) -> Result<FitReport, SysIdError> {
    check_inputs(train, validation, cfg.batch_size)?;
    let mut model = model;
    let mut opt = Adam::new(&model.net, AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut rng = SimRng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = rollout_loss(&model, validation)?;
    let mut best_model = model.clone();
    let (mut train_hist, mut val_hist) = (Vec::new(), Vec::new());
    for epoch in 1..=cfg.epochs {
        let tl = run_epoch(&mut model, &mut opt, train, &mut order, cfg.batch_size, &mut rng, &|_| true)?;
        let vl = rollout_loss(&model, validation)?;
        if !tl.is_finite() || !vl.is_finite() {
            return Err(SysIdError::Diverged { epoch, detail: format!("train loss {tl}, validation loss {vl}") });
        }
        train_hist.push(tl);
        val_hist.push(vl);
        if vl < best {
            best = vl;
            best_model = model.clone();
        }
        opt.config.learning_rate *= cfg.lr_decay;
    }
    Ok(FitReport { model: best_model, best_validation_loss: best, train_loss: train_hist, validation_loss: val_hist })
}

/// Stops once `patience` consecutive observations fail to beat the best so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, baseline: f64) -> Self {
        Self { patience: patience.max(1), best: baseline, stale: 0 }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records a loss; returns `true` when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneSchedule {
    pub patience: usize,
    pub max_epochs_per_stage: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FineTuneSchedule {
    fn default() -> Self {
        Self { patience: 3, max_epochs_per_stage: 15, batch_size: 256, learning_rate: 5e-4, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct StageRecord {
    pub unfrozen: usize,
    pub epochs: usize,
    pub validation_loss: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FineTuneReport {
    pub model: DynModel,
    pub best_validation_loss: f64,
    pub stages: Vec<StageRecord>,
}

/// Trains only the last `N` layers for `N = 1..=layers`, each stage ending on
/// early stopping or its epoch limit. Returns the lowest-validation snapshot,
/// which may be the starting model.
pub fn fine_tune(
    model: DynModel,
    train: &[DynSample],
    validation: &[DynSample],
    schedule: &FineTuneSchedule,
) -> Result<FineTuneReport, SysIdError> {
    check_inputs(train, validation, schedule.batch_size)?;
    let mut model = model;
    let layers = model.net.layers().len();
    let mut rng = SimRng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = rollout_loss(&model, validation)?;
    let mut best_model = model.clone();
    let mut stages = Vec::new();
    for unfrozen in 1..=layers {
        let first_trainable = layers - unfrozen;
        let trainable = move |i: usize| i >= first_trainable;
        let mut opt = Adam::new(&model.net, AdamConfig::with_learning_rate(schedule.learning_rate));
        let mut stopper = EarlyStopper::new(schedule.patience, rollout_loss(&model, validation)?);
        let mut record = StageRecord { unfrozen, epochs: 0, validation_loss: Vec::new() };
        for epoch in 0..schedule.max_epochs_per_stage {
            let tl = run_epoch(&mut model, &mut opt, train, &mut order, schedule.batch_size, &mut rng, &trainable)?;
            let vl = rollout_loss(&model, validation)?;
            if !tl.is_finite() || !vl.is_finite() {
                return Err(SysIdError::Diverged { epoch, detail: format!("stage {unfrozen}: validation loss {vl}") });
            }
            record.epochs += 1;
            record.validation_loss.push(vl);
            if vl < best {
                best = vl;
                best_model = model.clone();
            }
            if stopper.observe(vl) {
                break;
            }
        }
        stages.push(record);
    }
    Ok(FineTuneReport { model: best_model, best_validation_loss: best, stages })
}

/// Uniform random commands over the full duration, speed and steering ranges.
pub fn random_driver<R: Rng + ?Sized>(min_duration: f64, max_duration: f64) -> impl FnMut(&RobotState, &mut R) -> Command {
    move |_, rng| Command {
        duration: rng.random_range(min_duration..=max_duration),
        linear: rng.random_range(-1.0..=1.0),
        angular: rng.random_range(-1.0..=1.0),
    }
}

/// Drives the raw-friction vehicle through the configured parameter field
/// and records `n` one-step samples. The robot respawns at a uniform random
/// pose whenever it leaves the map and every `respawn_every` steps.
pub fn collect_synthetic_dataset<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    driver: &mut dyn FnMut(&RobotState, &mut R) -> Command,
    n: usize,
    respawn_every: usize,
    rng: &mut R,
) -> Vec<DynSample> {
    let vehicle = VehicleModel { friction: FrictionMode::Raw, ..cfg.vehicle };
    let h = cfg.map.half_extent;
    let spawn = |rng: &mut R| RobotState {
        x: rng.random_range(-h..=h),
        y: rng.random_range(-h..=h),
        v: rng.random_range(-1.0..=1.0),
        theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ..RobotState::default()
    };
    let mut out = Vec::with_capacity(n);
    let mut state = spawn(rng);
    let mut age = 0;
    while out.len() < n {
        if age >= respawn_every.max(1) || state.x.abs() > h || state.y.abs() > h {
            state = spawn(rng);
            age = 0;
        }
        let raw = driver(&state, rng);
        let cmd = Command {
            duration: raw.duration.clamp(cfg.min_duration, cfg.max_duration),
            linear: raw.linear.clamp(-1.0, 1.0),
            angular: raw.angular.clamp(-1.0, 1.0),
        };
        let p = cfg.field.params_at(&state, &cmd);
        let next = vehicle.step(&state, &cmd, &p).expect("duration is positive");
        out.push(DynSample {
            x: state.x,
            y: state.y,
            v: state.v,
            theta: state.theta,
            dt: cmd.duration,
            v_target: cmd.linear,
            steer: cmd.angular,
            x_next: next.x,
            y_next: next.y,
        });
        state = next;
        age += 1;
    }
    out
}

/// Splits off the last `fraction` of the samples after a seeded shuffle.
pub fn split_dataset(mut data: Vec<DynSample>, fraction: f64, seed: u64) -> (Vec<DynSample>, Vec<DynSample>) {
    let mut rng = SimRng::seed_from_u64(seed);
    data.shuffle(&mut rng);
    let k = ((data.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let held = data.split_off(data.len() - k);
    (data, held)
}

pub fn write_dataset_csv<W: std::io::Write>(data: &[DynSample], w: W) -> Result<(), SysIdError> {
    let mut out = csv::Writer::from_writer(w);
    for s in data {
        out.serialize(s)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: std::io::Read>(r: R) -> Result<Vec<DynSample>, SysIdError> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(SysIdError::from)).collect()
}

/// Per-sample model outputs `(mu_k, P)`, mostly for inspection.
pub fn predict_batch(model: &DynModel, data: &[DynSample]) -> Result<Vec<PhysicalParams>, SysIdError> {
    let out = model.net.forward_batch(&inputs(data))?;
    Ok(out.rows().into_iter().map(|r| PhysicalParams::new(softplus(r[0]), r[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn model(seed: u64) -> DynModel {
        let mut rng = SimRng::seed_from_u64(seed);
        DynModel::new(&[8, 6], VehicleModel::raw(), &mut rng).unwrap()
    }

    fn data(n: usize, field: ParamField, seed: u64) -> Vec<DynSample> {
        let cfg = EnvConfig { field, ..EnvConfig::default() };
        let mut rng = SimRng::seed_from_u64(seed);
        let mut driver = random_driver::<SimRng>(cfg.min_duration, cfg.max_duration);
        collect_synthetic_dataset(&cfg, &mut driver, n, 40, &mut rng)
    }

    #[test]
    fn zero_weight_model_outputs_head_defaults() {
        let mut l1 = Layer::zeros(7, 4, Activation::Relu);
        l1.bias.fill(0.0);
        let l2 = Layer::zeros(4, 2, Activation::Linear);
        let m = DynModel::from_network(Network::from_layers(vec![l1, l2]).unwrap(), VehicleModel::raw()).unwrap();
        let p = m.predict_params(&[0.1, 0.2, 0.3, 0.4, 0.1, 0.5, 0.0]).unwrap();
        assert_eq!(p, PhysicalParams::new(std::f64::consts::LN_2, 0.0));
        assert!(m.predict_params(&[0.0; 6]).is_err());
        let again = m.predict_params(&[0.1, 0.2, 0.3, 0.4, 0.1, 0.5, 0.0]).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn self_generated_targets_give_zero_loss() {
        let m = model(1);
        let mut d = data(50, ParamField::default(), 2);
        for s in d.iter_mut() {
            let [x, y] = m.predict_position(s).unwrap();
            s.x_next = x;
            s.y_next = y;
        }
        assert_eq!(rollout_loss(&m, &d).unwrap(), 0.0);
        assert!(rollout_loss(&m, &[]).is_err());
    }

    #[test]
    fn single_sample_loss_by_hand() {
        // constant-output model: mu = softplus(-3), P = 0.4
        let mut l = Layer::zeros(7, 2, Activation::Linear);
        l.bias[0] = -3.0;
        l.bias[1] = 0.4;
        let m = DynModel::from_network(Network::from_layers(vec![l]).unwrap(), VehicleModel::raw()).unwrap();
        let s = DynSample { x: 0.2, y: -0.1, v: 0.3, theta: 0.5, dt: 0.2, v_target: 0.6, steer: 0.0, x_next: 0.3, y_next: 0.0 };
        let mu = (1.0 + (-3.0f64).exp()).ln();
        let v_new = 0.3 + (0.4 / 4.2 + (0.6 - 0.3) / 0.2 - mu * 9.81) * 0.2;
        let px = 0.2 + v_new * 0.5f64.cos() * 0.2;
        let py = -0.1 + v_new * 0.5f64.sin() * 0.2;
        let expected = (px - 0.3).powi(2) + (py - 0.0).powi(2);
        assert!((rollout_loss(&m, &[s]).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let m = model(3);
        let d = data(20, ParamField::default(), 4);
        let (_, g) = rollout_loss_and_grads(&m, &d).unwrap();
        let analytic = g.flat();
        let mut p = m.net.flat_params();
        let h = 1e-5;
        for i in 0..p.len() {
            let orig = p[i];
            let mut eval = |v: f64| {
                p[i] = v;
                let mut mm = m.clone();
                mm.net.set_flat_params(&p).unwrap();
                rollout_loss(&mm, &d).unwrap()
            };
            let fd = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
            p[i] = orig;
            let tol = 1e-4 * fd.abs().max(analytic[i].abs()) + 1e-9;
            assert!((fd - analytic[i]).abs() <= tol, "param {i}: fd {fd} analytic {}", analytic[i]);
        }
    }

    #[test]
    fn dataset_targets_replay_exactly() {
        let field = ParamField::default();
        let d = data(500, field, 5);
        let veh = VehicleModel::raw();
        for s in &d {
            let p = field.params_at(&s.state(), &s.command());
            let n = veh.step(&s.state(), &s.command(), &p).unwrap();
            assert!((n.x - s.x_next).abs() < 1e-9 && (n.y - s.y_next).abs() < 1e-9);
        }
        assert!(data(0, field, 5).is_empty());
    }

    #[test]
    fn durations_cover_bounds() {
        let d = data(10_000, ParamField::default(), 6);
        let lo = d.iter().map(|s| s.dt).fold(f64::INFINITY, f64::min);
        let hi = d.iter().map(|s| s.dt).fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= 0.02 + 0.05 * 0.48 && hi >= 0.5 - 0.05 * 0.48);
        assert!(d.iter().all(|s| s.x.abs() <= 1.5 && s.y.abs() <= 1.5));
    }

    #[test]
    fn zero_learning_rate_keeps_model() {
        let m = model(7);
        let d = data(300, ParamField::default(), 8);
        let cfg = FitConfig { epochs: 2, learning_rate: 0.0, batch_size: 64, ..FitConfig::default() };
        let r = fit(m.clone(), &d[..200], &d[200..], &cfg).unwrap();
        assert_eq!(r.model, m);
    }

    #[test]
    fn seeded_fit_is_reproducible() {
        let d = data(400, ParamField::default(), 9);
        let cfg = FitConfig { epochs: 3, batch_size: 64, ..FitConfig::default() };
        let a = fit(model(10), &d[..300], &d[300..], &cfg).unwrap();
        let b = fit(model(10), &d[..300], &d[300..], &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.validation_loss, b.validation_loss);
    }

    #[test]
    fn patience_one_stops_after_one_bad_epoch() {
        let mut s = EarlyStopper::new(1, 1.0);
        assert!(s.observe(1.5));
        let mut s = EarlyStopper::new(2, 1.0);
        assert!(!s.observe(0.5));
        assert!(!s.observe(0.7));
        assert!(s.observe(0.6));
        assert_eq!(s.best(), 0.5);
    }

    #[test]
    fn frozen_layers_do_not_move() {
        let m = model(11);
        let d = data(300, ParamField::shifted(), 12);
        let sched = FineTuneSchedule { max_epochs_per_stage: 2, batch_size: 50, ..FineTuneSchedule::default() };
        // only the first stage: last layer trainable
        let mut mm = m.clone();
        let mut opt = Adam::new(&mm.net, AdamConfig::with_learning_rate(1e-2));
        let mut order: Vec<usize> = (0..200).collect();
        let mut rng = SimRng::seed_from_u64(0);
        run_epoch(&mut mm, &mut opt, &d[..200], &mut order, 50, &mut rng, &|i| i >= 2).unwrap();
        assert_eq!(mm.net.layers()[0], m.net.layers()[0]);
        assert_eq!(mm.net.layers()[1], m.net.layers()[1]);
        assert_ne!(mm.net.layers()[2], m.net.layers()[2]);
        let r = fine_tune(m.clone(), &d[..200], &d[200..], &sched).unwrap();
        assert_eq!(r.stages.len(), 3);
        let start = rollout_loss(&m, &d[200..]).unwrap();
        assert!(r.best_validation_loss <= start);
        for st in &r.stages {
            assert!(st.validation_loss.iter().all(|&v| v >= r.best_validation_loss));
        }
    }

    #[test]
    fn dataset_csv_round_trip() {
        let d = data(20, ParamField::default(), 13);
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,v,theta,dt,v_target,steer,x_next,y_next"));
        assert_eq!(read_dataset_csv(buf.as_slice()).unwrap(), d);
    }
}
