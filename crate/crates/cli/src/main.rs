use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use moseac::agent::EpisodeMetrics;
use moseac::harness::{
    compare_evals, export_plot_data, read_csv, run_eval, run_experiment, run_sysid, run_theory, write_csv, AgentKind,
    EvalEpisode, ExperimentConfig, Manifest, SysIdExperiment, CHECKPOINT_FILE, CONFIG_FILE, EVAL_FILE, METRICS_FILE,
};
use moseac::theory::SuiteConfig;

#[derive(Parser)]
#[command(name = "moseac", version, about = "Variable time-step RL experiments")]
struct Cli {
    /// Root directory for artifacts.
    #[arg(long, global = true, env = "MOSEAC_OUTPUT_DIR", default_value = "runs")]
    output_dir: PathBuf,
    /// Overrides the seed of whatever the command runs.
    #[arg(long, global = true, env = "MOSEAC_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an agent, then evaluate it on the seeded task list.
    Train {
        /// Experiment TOML; overrides --preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// moseac, moseac-uncapped, seac, sac20 or sac60.
        #[arg(long, default_value = "moseac")]
        preset: String,
        /// Environment-step budget.
        #[arg(long)]
        steps: Option<u64>,
        /// Print the resolved config and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Re-evaluate a finished training run.
    Eval {
        /// Directory written by `train`.
        run: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Paired signed-rank comparison of two evaluation tables.
    Compare {
        /// `label=path/to/eval.csv` (or a run directory)
        a: String,
        b: String,
    },
    /// Fit the dynamics model on synthetic data and fine-tune on a shifted field.
    Sysid {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Numerical checks of the soft Bellman operator on random tabular MDPs.
    Theory {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Smoothed return and energy curves for plotting.
    Plotdata {
        /// `label=run_dir`, repeated.
        #[arg(required = true)]
        runs: Vec<String>,
        #[arg(long, default_value_t = 20)]
        window: usize,
    },
}

fn load_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn labelled(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((l, p)) => (l.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(arg);
            let label = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.to_string());
            (label, p)
        }
    }
}

fn eval_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(EVAL_FILE)
    } else {
        p.to_path_buf()
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Train { config, preset, steps, dump_config } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => {
                    let Some(kind) = AgentKind::parse(&preset) else { bail!("unknown preset {preset:?}") };
                    ExperimentConfig::preset(kind)
                }
            };
            if let Some(seed) = cli.seed {
                cfg.train.seed = seed;
            }
            if steps.is_some() {
                cfg.train.max_env_steps = steps;
            }
            if dump_config {
                print!("{}", cfg.to_toml_string());
                return Ok(());
            }
            let dir = cli.output_dir.join(format!("{}-seed{}", cfg.name, cfg.train.seed));
            let run = run_experiment(&cfg, Some(&dir))?;
            println!(
                "{}: {} episodes, eval success {:.2}, median steps {}, median time {:.2} s -> {}",
                cfg.name,
                run.metrics.len(),
                run.summary.success_rate,
                run.summary.median_steps,
                run.summary.median_time_s,
                dir.display()
            );
        }
        Cmd::Eval { run, episodes } => {
            let mut cfg = ExperimentConfig::load(&run.join(CONFIG_FILE))?;
            if let Some(n) = episodes {
                cfg.eval.episodes = n;
            }
            if let Some(seed) = cli.seed {
                cfg.eval.task_seed = seed;
            }
            let name = run.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| cfg.name.clone());
            let out = cli.output_dir.join(format!("eval-{name}"));
            let s = run_eval(&cfg, &run.join(CHECKPOINT_FILE), &out)?;
            println!("success {:.2}, median steps {}, median time {:.2} s -> {}", s.success_rate, s.median_steps, s.median_time_s, out.display());
        }
        Cmd::Compare { a, b } => {
            let (la, pa) = labelled(&a);
            let (lb, pb) = labelled(&b);
            let ea: Vec<EvalEpisode> = read_csv(&eval_path(&pa))?;
            let eb: Vec<EvalEpisode> = read_csv(&eval_path(&pb))?;
            let rows = compare_evals(&la, &ea, &lb, &eb)?;
            let out = cli.output_dir.join(format!("compare-{la}-vs-{lb}"));
            std::fs::create_dir_all(&out)?;
            write_csv(&rows, &out.join("compare.csv"))?;
            Manifest::new("compare", &(&a, &b), 0, &["compare.csv"]).write(&out)?;
            for r in &rows {
                println!("{}: median {} {} vs {} {}, W+ {}, z {:.3}, p {:.3e}", r.metric, la, r.median_a, lb, r.median_b, r.w_plus, r.z, r.p);
            }
        }
        Cmd::Sysid { config, epochs } => {
            let mut exp: SysIdExperiment = load_toml(config.as_deref())?;
            if let Some(seed) = cli.seed {
                exp.seed = seed;
            }
            if let Some(e) = epochs {
                exp.fit.epochs = e;
            }
            let out = cli.output_dir.join("sysid");
            let s = run_sysid(&exp, Some(&out))?;
            println!(
                "field-mean rmse {:.5} m, fitted rmse {:.5} m; shifted field loss frozen {:.3e}, fine-tuned {:.3e} -> {}",
                s.baseline_rmse,
                s.fitted_rmse,
                s.shifted_frozen_loss,
                s.shifted_tuned_loss,
                out.display()
            );
        }
        Cmd::Theory { config } => {
            let mut cfg: SuiteConfig = load_toml(config.as_deref())?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out = cli.output_dir.join("theory");
            let checks = run_theory(&cfg, Some(&out))?;
            for c in &checks {
                println!("{:<24} {:<5} measured {:.3e} bound {:.3e}  {}", c.name, if c.pass { "ok" } else { "FAIL" }, c.measured, c.bound, c.parameters);
            }
            if checks.iter().any(|c| !c.pass) {
                bail!("some checks failed; see {}", out.join("theory.csv").display());
            }
        }
        Cmd::Plotdata { runs, window } => {
            let mut bundle = Vec::new();
            for arg in &runs {
                let (label, dir) = labelled(arg);
                let metrics: Vec<EpisodeMetrics> = read_csv(&dir.join(METRICS_FILE))?;
                let eval_file = dir.join(EVAL_FILE);
                let eval = if eval_file.exists() { Some(read_csv::<EvalEpisode>(&eval_file)?) } else { None };
                bundle.push((label, metrics, eval));
            }
            let out = cli.output_dir.join("plotdata");
            let files = export_plot_data(&bundle, window, &out)?;
            Manifest::new("plotdata", &(&runs, window), 0, &files.iter().map(String::as_str).collect::<Vec<_>>()).write(&out)?;
            println!("{} files -> {}", files.len(), out.display());
        }
    }
    Ok(())
}
