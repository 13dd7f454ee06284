use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use windfarm::eval::{OracleGrid, SearchMode, EVAL_EPISODE_LEN, FINETUNE_STEPS};
use windfarm_cli::commands::{self, OracleOptions, ScoreOptions};
use windfarm_cli::ExperimentConfig;

#[derive(Parser)]
#[command(name = "windfarm", version, about = "Wind-farm control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Environment id, e.g. Dec_Turb3_Row1_Static.
    #[arg(long, default_value = "Dec_Turb3_Row1_Static")]
    env: String,
    /// ippo or mappo.
    #[arg(long)]
    algo: Option<String>,
    /// Wind scenario: I, II or III.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// Seeds such as `0,1,2` or `0..3`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// key=value file; `ppo.` keys tune training, the rest the environment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn build(&self) -> windfarm_cli::config::Result<ExperimentConfig> {
        ExperimentConfig::build(
            &self.env,
            self.algo.as_deref(),
            self.scenario.as_deref(),
            self.steps,
            self.seeds.as_deref(),
            &self.out,
            self.config.as_deref(),
            &self.overrides,
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Exhaustive,
    CoordinateDescent,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed; writes metrics, config and checkpoint per run.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overwrite existing runs.
        #[arg(long)]
        force: bool,
        /// Runs trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Deterministic episodes of checkpoints (greedy when none) with per-step trajectories.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
    },
    /// Weighted scores of trained runs as score, power and load tables.
    Score {
        #[command(flatten)]
        common: Common,
        /// Run directories; every run under --out when omitted.
        #[arg(long)]
        runs: Vec<PathBuf>,
        /// Evaluation environment ids (table columns); --env when omitted.
        #[arg(long)]
        eval_env: Vec<String>,
        /// Wind series for the evaluation weights.
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, default_value_t = EVAL_EPISODE_LEN)]
        episode_len: usize,
    },
    /// Grid-search yaw optimum of the static model.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Maximize the environment reward instead of power.
        #[arg(long)]
        reward: bool,
        /// Search every evaluation-weight condition.
        #[arg(long)]
        all_conditions: bool,
        #[arg(long, default_value_t = 5.0)]
        step_deg: f64,
        #[arg(long, default_value_t = 30.0)]
        max_deg: f64,
    },
    /// Zero-shot evaluation then fine-tuning of a checkpoint on a dynamic environment.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Serve the dynamic simulator over TCP.
    ServeBridge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:7447")]
        endpoint: String,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

fn run(cli: Cli) -> windfarm_cli::config::Result<()> {
    match cli.command {
        Command::Train { common, force, jobs } => {
            for d in commands::train(&common.build()?, force, jobs)? {
                println!("{}", d.display());
            }
        }
        Command::Evaluate { common, checkpoint } => {
            println!("{}", commands::evaluate(&common.build()?, &checkpoint)?.display());
        }
        Command::Score { common, runs, eval_env, series, episode_len } => {
            let out = commands::score(&common.build()?, &ScoreOptions { runs, eval_envs: eval_env, series, episode_len })?;
            print!("{}", out.score.render_text());
            for m in &out.missing {
                eprintln!("missing checkpoint: {}", m.display());
            }
        }
        Command::Oracle { common, mode, reward, all_conditions, step_deg, max_deg } => {
            let mode = match mode {
                Mode::Auto => SearchMode::Auto,
                Mode::Exhaustive => SearchMode::Exhaustive,
                Mode::CoordinateDescent => SearchMode::CoordinateDescent,
            };
            let opts = OracleOptions { mode, reward_objective: reward, all_conditions, grid: OracleGrid { step_deg, max_deg } };
            println!("{}", commands::oracle(&common.build()?, &opts)?.display());
        }
        Command::Transfer { common, checkpoint } => {
            let steps = common.steps.unwrap_or(FINETUNE_STEPS);
            println!("{}", commands::transfer(&common.build()?, &checkpoint, steps)?.display());
        }
        Command::ServeBridge { common, endpoint, episodes } => {
            let n = commands::serve_bridge(&common.build()?, &endpoint, episodes, &mut |addr| {
                println!("listening on {addr}");
            })?;
            println!("served {n} episodes");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
