//! Experiment plumbing: configs, seeded evaluation suites, artifact files
//! and run manifests.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{
    train, write_metrics_csv, ActionSpace, AgentConfig, AgentError, AlphaConfig, EpisodeMetrics, RewardScheme, SacAgent,
    SeacWeights, Temperature, TrainConfig,
};
use crate::analysis::{median, moving_average, wilcoxon_signed_rank, AnalysisError, Wilcoxon};
use crate::nn::{Checkpoint, NnError};
use crate::sim::{Command, EnvConfig, Environment, LimoEnv, ParamField, SimError, Task, VehicleModel};
use crate::sysid::{
    collect_synthetic_dataset, field_mean_rmse, fine_tune, fit, position_rmse, random_driver, rollout_loss, split_dataset,
    DynModel, FineTuneSchedule, FitConfig, SysIdError,
};
use crate::theory::{run_suite, write_report_csv, SuiteConfig, TheoryCheck, TheoryError};
use crate::SimRng;

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const CHECKPOINT_FILE: &str = "agent.ckpt";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    SysId(#[from] SysIdError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<File, HarnessError> {
    File::create(path).map_err(io_err(path))
}

fn open(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(io_err(path))
}

/// Named presets for the compared learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    Moseac,
    /// Gain schedule without the `alpha_max` ceiling.
    MoseacUncapped,
    Seac,
    /// Fixed control rate, no duration output.
    SacFixed { hz: f64 },
}

impl AgentKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "moseac" => Some(Self::Moseac),
            "moseac-uncapped" => Some(Self::MoseacUncapped),
            "seac" => Some(Self::Seac),
            "sac20" => Some(Self::SacFixed { hz: 20.0 }),
            "sac60" => Some(Self::SacFixed { hz: 60.0 }),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Moseac => "moseac".into(),
            Self::MoseacUncapped => "moseac-uncapped".into(),
            Self::Seac => "seac".into(),
            Self::SacFixed { hz } => format!("sac{hz}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Seeds the task list; independent of the training seed so every agent
    /// kind sees the same tasks.
    pub task_seed: u64,
    pub max_steps: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 100, task_seed: 12345, max_steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(AgentKind::Moseac)
    }
}

/// Agent settings used by every preset.
pub fn desk_agent() -> AgentConfig {
    AgentConfig { temperature: Temperature::Auto { initial: 0.05 }, ..AgentConfig::default() }
}

impl ExperimentConfig {
    pub fn preset(kind: AgentKind) -> Self {
        let mut env = EnvConfig::default();
        let mut train = TrainConfig {
            max_episodes: 1_000_000,
            max_env_steps: Some(300_000),
            max_steps_per_episode: 100,
            agent: desk_agent(),
            ..TrainConfig::default()
        };
        match kind {
            AgentKind::Moseac => train.reward = RewardScheme::Moseac { alpha: AlphaConfig::default() },
            AgentKind::MoseacUncapped => {
                train.reward = RewardScheme::Moseac { alpha: AlphaConfig { capped: false, ..AlphaConfig::default() } }
            }
            AgentKind::Seac => train.reward = RewardScheme::Seac { weights: SeacWeights::default() },
            AgentKind::SacFixed { hz } => {
                let dt = 1.0 / hz;
                env.min_duration = env.min_duration.min(dt);
                train.fixed_dt = Some(dt);
                train.reward = RewardScheme::Task;
            }
        }
        let eval = EvalConfig { max_steps: train.max_steps_per_episode, ..EvalConfig::default() };
        Self { name: kind.label(), env, train, eval }
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut problems = Vec::new();
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            problems.push(format!("name {:?} must be a non-empty file-name-safe string", self.name));
        }
        if let Err(e) = self.env.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.train.validate() {
            problems.push(e.to_string());
        }
        if let Some(dt) = self.train.fixed_dt {
            if !(dt >= self.env.min_duration && dt <= self.env.max_duration) {
                problems.push(format!(
                    "fixed step {dt} outside the environment duration range [{}, {}]",
                    self.env.min_duration, self.env.max_duration
                ));
            }
        }
        if self.eval.max_steps == 0 {
            problems.push("eval.max_steps must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(problems))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Toml(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serialises")
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    pub fn action_space(&self) -> ActionSpace {
        match self.train.fixed_dt {
            Some(dt) => ActionSpace::Fixed { dt },
            None => ActionSpace::Variable { min_duration: self.env.min_duration, max_duration: self.env.max_duration },
        }
    }
}

fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serialises");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, config: &T, seed: u64, files: &[&str]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: hash_json(config),
            seed,
            files: files.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        serde_json::to_writer_pretty(create(&path)?, self)?;
        Ok(())
    }
}

/// `episodes` tasks drawn with replacement from the goal list.
pub fn eval_tasks(env: &EnvConfig, episodes: usize, seed: u64) -> Vec<Task> {
    let mut rng = SimRng::seed_from_u64(seed);
    (0..episodes).map(|_| env.sample_task(&mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEpisode {
    pub task: usize,
    pub start_x: f64,
    pub start_y: f64,
    pub goal_x: f64,
    pub goal_y: f64,
    pub success: u8,
    /// Decisions taken; the energy measure.
    pub steps: usize,
    pub time_s: f64,
    pub task_return: f64,
}

/// Runs the deterministic policy on each task.
pub fn evaluate(agent: &mut SacAgent, env: &mut LimoEnv, tasks: &[Task], max_steps: usize) -> Result<Vec<EvalEpisode>, HarnessError> {
    let mut out = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        let mut obs = env.reset_to(*task);
        let mut row = EvalEpisode {
            task: i,
            start_x: task.start.x,
            start_y: task.start.y,
            goal_x: task.goal.x,
            goal_y: task.goal.y,
            success: 0,
            steps: 0,
            time_s: 0.0,
            task_return: 0.0,
        };
        while row.steps < max_steps {
            let a = agent.select_action(&obs, false)?;
            let step = env.step(&Command { duration: a.duration, linear: a.controls[0], angular: a.controls[1] })?;
            row.steps += 1;
            row.time_s += a.duration;
            row.task_return += step.task_reward;
            obs = step.observation;
            if step.done {
                row.success = step.success as u8;
                break;
            }
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub median_steps: f64,
    pub median_time_s: f64,
}

pub fn summarize(rows: &[EvalEpisode]) -> EvalSummary {
    let steps: Vec<f64> = rows.iter().map(|r| r.steps as f64).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.time_s).collect();
    let n = rows.len().max(1) as f64;
    EvalSummary {
        episodes: rows.len(),
        success_rate: rows.iter().map(|r| r.success as f64).sum::<f64>() / n,
        median_steps: median(&steps).unwrap_or(f64::NAN),
        median_time_s: median(&times).unwrap_or(f64::NAN),
    }
}

pub struct RunResult {
    pub agent: SacAgent,
    pub metrics: Vec<EpisodeMetrics>,
    pub eval: Vec<EvalEpisode>,
    pub summary: EvalSummary,
}

/// Trains, evaluates and, when `out_dir` is given, writes the metrics log,
/// evaluation table, checkpoint, resolved config and manifest there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let mut env = LimoEnv::new(cfg.env.clone())?;
    let outcome = train(&mut env, &cfg.train)?;
    let mut agent = outcome.agent;
    let tasks = eval_tasks(&cfg.env, cfg.eval.episodes, cfg.eval.task_seed);
    let eval = evaluate(&mut agent, &mut env, &tasks, cfg.eval.max_steps)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let metrics_path = dir.join(METRICS_FILE);
        write_metrics_csv(&outcome.metrics, create(&metrics_path)?)?;
        write_csv(&eval, &dir.join(EVAL_FILE))?;
        agent.to_checkpoint().save(&dir.join(CHECKPOINT_FILE))?;
        let cfg_path = dir.join(CONFIG_FILE);
        std::fs::write(&cfg_path, cfg.to_toml_string()).map_err(io_err(&cfg_path))?;
        Manifest::new("train", cfg, cfg.train.seed, &[METRICS_FILE, EVAL_FILE, CHECKPOINT_FILE, CONFIG_FILE]).write(dir)?;
    }
    let summary = summarize(&eval);
    Ok(RunResult { agent, metrics: outcome.metrics, eval, summary })
}

/// Rebuilds the agent described by `cfg` from a checkpoint file.
pub fn load_agent(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<SacAgent, HarnessError> {
    let env = LimoEnv::new(cfg.env.clone())?;
    let mut agent = SacAgent::new(env.observation_dim(), cfg.action_space(), cfg.train.agent.clone(), cfg.train.seed)?;
    agent.restore(&Checkpoint::load(checkpoint)?)?;
    Ok(agent)
}

/// Evaluates a saved agent on the config's task list and writes `eval.csv`
/// plus a manifest into `out_dir`.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: &Path, out_dir: &Path) -> Result<EvalSummary, HarnessError> {
    cfg.validate()?;
    let mut agent = load_agent(cfg, checkpoint)?;
    let mut env = LimoEnv::new(cfg.env.clone())?;
    let tasks = eval_tasks(&cfg.env, cfg.eval.episodes, cfg.eval.task_seed);
    let rows = evaluate(&mut agent, &mut env, &tasks, cfg.eval.max_steps)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_csv(&rows, &out_dir.join(EVAL_FILE))?;
    Manifest::new("eval", cfg, cfg.eval.task_seed, &[EVAL_FILE]).write(out_dir)?;
    Ok(summarize(&rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub label_a: String,
    pub label_b: String,
    pub median_a: f64,
    pub median_b: f64,
    pub n: usize,
    pub w_plus: f64,
    pub z: f64,
    pub p: f64,
}

/// Paired signed-rank tests on step count and task time over shared tasks.
pub fn compare_evals(label_a: &str, a: &[EvalEpisode], label_b: &str, b: &[EvalEpisode]) -> Result<Vec<ComparisonRow>, HarnessError> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x.goal_x, x.goal_y, x.start_x, x.start_y) != (y.goal_x, y.goal_y, y.start_x, y.start_y)) {
        return Err(HarnessError::Config(vec!["evaluation tables do not cover the same tasks".into()]));
    }
    let series: [(&str, fn(&EvalEpisode) -> f64); 2] = [("steps", |r| r.steps as f64), ("time_s", |r| r.time_s)];
    series
        .iter()
        .map(|(name, f)| {
            let xa: Vec<f64> = a.iter().map(f).collect();
            let xb: Vec<f64> = b.iter().map(f).collect();
            let w: Wilcoxon = wilcoxon_signed_rank(&xa, &xb)?;
            Ok(ComparisonRow {
                metric: name.to_string(),
                label_a: label_a.into(),
                label_b: label_b.into(),
                median_a: median(&xa).unwrap_or(f64::NAN),
                median_b: median(&xb).unwrap_or(f64::NAN),
                n: w.n,
                w_plus: w.w_plus,
                z: w.z,
                p: w.p_value(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub episode: usize,
    pub raw: f64,
    pub smoothed: f64,
}

/// Writes `<label>_return.csv` and `<label>_energy.csv` (trailing mean over
/// `window` episodes) and, when given, `<label>_eval_steps.csv`. Returns the
/// file names.
pub fn export_plot_data(
    runs: &[(String, Vec<EpisodeMetrics>, Option<Vec<EvalEpisode>>)],
    window: usize,
    out_dir: &Path,
) -> Result<Vec<String>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = Vec::new();
    for (label, metrics, eval) in runs {
        let series: [(&str, Vec<f64>); 2] = [
            ("return", metrics.iter().map(|m| m.episode_return_shaped).collect()),
            ("energy", metrics.iter().map(|m| m.steps as f64).collect()),
        ];
        for (name, raw) in series {
            let smooth = moving_average(&raw, window);
            let rows: Vec<SeriesPoint> = metrics
                .iter()
                .zip(raw.iter().zip(&smooth))
                .map(|(m, (&r, &s))| SeriesPoint { episode: m.episode, raw: r, smoothed: s })
                .collect();
            let file = format!("{label}_{name}.csv");
            write_csv(&rows, &out_dir.join(&file))?;
            files.push(file);
        }
        if let Some(eval) = eval {
            let file = format!("{label}_eval_steps.csv");
            write_csv(eval, &out_dir.join(&file))?;
            files.push(file);
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SysIdExperiment {
    pub samples: usize,
    pub shifted_samples: usize,
    pub respawn_every: usize,
    pub hidden: Vec<usize>,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub fit: FitConfig,
    pub fine_tune: FineTuneSchedule,
    pub seed: u64,
}

impl Default for SysIdExperiment {
    fn default() -> Self {
        Self {
            samples: 60_000,
            shifted_samples: 20_000,
            respawn_every: 40,
            hidden: vec![64, 64],
            test_fraction: 1.0 / 6.0,
            validation_fraction: 0.1,
            fit: FitConfig::default(),
            fine_tune: FineTuneSchedule::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SysIdSummary {
    pub baseline_rmse: f64,
    pub fitted_rmse: f64,
    pub shifted_frozen_loss: f64,
    pub shifted_tuned_loss: f64,
}

type Splits = (Vec<crate::sysid::DynSample>, Vec<crate::sysid::DynSample>, Vec<crate::sysid::DynSample>);

fn synthetic_splits(exp: &SysIdExperiment, field: ParamField, n: usize, stream: u64) -> Splits {
    let env = EnvConfig { field, ..EnvConfig::default() };
    let mut rng = SimRng::seed_from_u64(exp.seed);
    rng.set_stream(stream);
    let mut driver = random_driver::<SimRng>(env.min_duration, env.max_duration);
    let data = collect_synthetic_dataset(&env, &mut driver, n, exp.respawn_every, &mut rng);
    let (rest, test) = split_dataset(data, exp.test_fraction, exp.seed.wrapping_add(stream));
    let (train, val) = split_dataset(rest, exp.validation_fraction, exp.seed.wrapping_add(stream + 1));
    (train, val, test)
}

/// Fits on the reference field, then fine-tunes on a shifted field.
/// Writes `sysid.csv` and a manifest when `out_dir` is given.
pub fn run_sysid(exp: &SysIdExperiment, out_dir: Option<&Path>) -> Result<SysIdSummary, HarnessError> {
    let field = ParamField::default();
    let (train_set, val, test) = synthetic_splits(exp, field, exp.samples, 1);
    let vehicle = VehicleModel::raw();
    let baseline_rmse = field_mean_rmse(&field, &vehicle, &test)?;
    let mut rng = SimRng::seed_from_u64(exp.seed);
    rng.set_stream(5);
    let model = DynModel::new(&exp.hidden, vehicle, &mut rng)?;
    let fitted = fit(model, &train_set, &val, &FitConfig { seed: exp.seed, ..exp.fit.clone() })?.model;
    let fitted_rmse = position_rmse(&fitted, &test)?;

    let (s_train, s_val, s_test) = synthetic_splits(exp, ParamField::shifted(), exp.shifted_samples, 3);
    let shifted_frozen_loss = rollout_loss(&fitted, &s_test)?;
    let tuned = fine_tune(fitted, &s_train, &s_val, &FineTuneSchedule { seed: exp.seed, ..exp.fine_tune.clone() })?.model;
    let shifted_tuned_loss = rollout_loss(&tuned, &s_test)?;
    let summary = SysIdSummary { baseline_rmse, fitted_rmse, shifted_frozen_loss, shifted_tuned_loss };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_csv(std::slice::from_ref(&summary), &dir.join("sysid.csv"))?;
        Manifest::new("sysid", exp, exp.seed, &["sysid.csv"]).write(dir)?;
    }
    Ok(summary)
}

/// Runs the tabular checks; writes `theory.csv` and a manifest when asked.
pub fn run_theory(cfg: &SuiteConfig, out_dir: Option<&Path>) -> Result<Vec<TheoryCheck>, HarnessError> {
    let checks = run_suite(cfg)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("theory.csv");
        write_report_csv(&checks, create(&path)?)?;
        Manifest::new("theory", cfg, cfg.seed, &["theory.csv"]).write(dir)?;
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in ["moseac", "moseac-uncapped", "seac", "sac20", "sac60"] {
            let cfg = ExperimentConfig::preset(AgentKind::parse(name).unwrap());
            cfg.validate().unwrap();
            assert_eq!(cfg.name, name);
        }
        assert!(AgentKind::parse("ppo").is_none());
        let sac60 = ExperimentConfig::preset(AgentKind::SacFixed { hz: 60.0 });
        assert!((sac60.env.min_duration - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = ExperimentConfig::preset(AgentKind::SacFixed { hz: 60.0 });
        cfg.name.clear();
        cfg.env.min_duration = 0.02;
        cfg.eval.max_steps = 0;
        match cfg.validate() {
            Err(HarnessError::Config(p)) => assert_eq!(p.len(), 3, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ExperimentConfig::preset(AgentKind::Seac);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let other = ExperimentConfig::preset(AgentKind::Moseac);
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn task_list_shared_across_kinds() {
        let a = ExperimentConfig::preset(AgentKind::Moseac);
        let b = ExperimentConfig::preset(AgentKind::SacFixed { hz: 60.0 });
        let ta = eval_tasks(&a.env, a.eval.episodes, a.eval.task_seed);
        let tb = eval_tasks(&b.env, b.eval.episodes, b.eval.task_seed);
        assert_eq!(ta, tb);
        assert_eq!(ta.len(), 100);
    }

    #[test]
    fn tiny_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::preset(AgentKind::Moseac);
        cfg.train.max_episodes = 1;
        cfg.train.warmup_episodes = 1_000;
        cfg.train.max_steps_per_episode = 10;
        cfg.eval = EvalConfig { episodes: 3, task_seed: 1, max_steps: 5 };
        let run = run_experiment(&cfg, Some(dir.path())).unwrap();
        assert_eq!(run.metrics.len(), 1);
        assert!(run.metrics[0].critic_loss.is_none());
        for f in [METRICS_FILE, EVAL_FILE, CHECKPOINT_FILE, CONFIG_FILE, MANIFEST_FILE] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let manifest: Manifest = serde_json::from_reader(File::open(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest.config_hash, cfg.hash());
        let saved = ExperimentConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(saved, cfg);

        let out = dir.path().join("re-eval");
        let summary = run_eval(&cfg, &dir.path().join(CHECKPOINT_FILE), &out).unwrap();
        assert_eq!(summary, run.summary);
        let rows: Vec<EvalEpisode> = read_csv(&out.join(EVAL_FILE)).unwrap();
        assert_eq!(rows, run.eval);
    }

    #[test]
    fn plot_bundle_has_one_file_per_series() {
        let dir = tempfile::tempdir().unwrap();
        let m = |e: usize, s: usize| EpisodeMetrics {
            episode: e,
            steps: s,
            sum_duration_s: 1.0,
            episode_return_shaped: e as f64,
            episode_return_task: 0.0,
            alpha_m: None,
            alpha_eps: None,
            critic_loss: None,
            actor_loss: None,
            success_flag: 0,
        };
        let metrics: Vec<EpisodeMetrics> = (0..5).map(|e| m(e, 10 + e)).collect();
        let files = export_plot_data(&[("a".into(), metrics.clone(), None), ("b".into(), metrics, None)], 2, dir.path()).unwrap();
        assert_eq!(files, vec!["a_return.csv", "a_energy.csv", "b_return.csv", "b_energy.csv"]);
        let rows: Vec<SeriesPoint> = read_csv(&dir.path().join("a_energy.csv")).unwrap();
        assert_eq!(rows[3].smoothed, (12.0 + 13.0) / 2.0);
    }

    #[test]
    fn comparison_requires_shared_tasks() {
        let row = |task: usize, steps: usize, gx: f64| EvalEpisode {
            task,
            start_x: 0.0,
            start_y: 0.0,
            goal_x: gx,
            goal_y: 0.0,
            success: 1,
            steps,
            time_s: steps as f64 * 0.1,
            task_return: 0.0,
        };
        let a: Vec<EvalEpisode> = (0..10).map(|i| row(i, 10 + i, 1.0)).collect();
        let b: Vec<EvalEpisode> = (0..10).map(|i| row(i, 30 + 2 * i, 1.0)).collect();
        let rows = compare_evals("a", &a, "b", &b).unwrap();
        assert_eq!(rows[0].w_plus, 0.0);
        assert!(rows[0].median_a < rows[0].median_b && rows[0].p < 0.01);
        let c: Vec<EvalEpisode> = (0..10).map(|i| row(i, 30, 2.0)).collect();
        assert!(compare_evals("a", &a, "c", &c).is_err());
    }
}
