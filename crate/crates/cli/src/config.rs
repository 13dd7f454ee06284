use std::fmt;
use std::path::{Path, PathBuf};

use windfarm::env::{config_for_id, EnvConfig, ScenarioKind};
use windfarm::marl::{Algo, TrainConfig};

/// Errors surfaced to the command line.
#[derive(Debug)]
pub enum ExperimentError {
    Usage(String),
    Core(windfarm::Error),
    Io(std::io::Error),
    Csv(csv::Error),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "{m}"),
            Self::Core(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "{e}"),
            Self::Csv(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<windfarm::Error> for ExperimentError {
    fn from(e: windfarm::Error) -> Self {
        Self::Core(e)
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl From<csv::Error> for ExperimentError {
    fn from(e: csv::Error) -> Self {
        Self::Csv(e)
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(ExperimentError::Usage(msg.into()))
}

/// Seeds from `0,1,2`, `0..3` or a mix such as `0..2,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|_| ExperimentError::Usage(format!("bad seed `{s}`")));
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if b <= a {
                    return usage(format!("empty seed range `{part}`"));
                }
                seeds.extend(a..b);
            }
            None => seeds.push(num(part)?),
        }
    }
    if seeds.is_empty() {
        return usage("at least one seed is required");
    }
    Ok(seeds)
}

/// Everything a command needs, after the config file and flags are merged.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env_id: String,
    pub algo: Algo,
    pub scenario: ScenarioKind,
    pub total_steps: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

/// Prefix of training keys in a config file; other keys configure the environment.
pub const TRAIN_PREFIX: &str = "ppo.";

impl ExperimentConfig {
    /// Merges, in increasing priority: id defaults, the config file, `--set` overrides, explicit flags.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        env_id: &str,
        algo: Option<&str>,
        scenario: Option<&str>,
        steps: Option<usize>,
        seeds: Option<&str>,
        out: &Path,
        config_file: Option<&Path>,
        overrides: &[String],
    ) -> Result<Self> {
        let mut env = config_for_id(env_id)?;
        let mut train = TrainConfig::default();
        let mut lines: Vec<(String, String, String)> = Vec::new();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)?;
            for (n, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| ExperimentError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
                lines.push((k.trim().into(), v.trim().into(), format!("{}:{}", path.display(), n + 1)));
            }
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ExperimentError::Usage(format!("--set expects key=value, got `{o}`")))?;
            lines.push((k.trim().into(), v.trim().into(), "--set".into()));
        }
        let mut file_steps = None;
        let mut file_seeds = None;
        let mut file_algo = None;
        for (k, v, origin) in lines {
            let res = if let Some(key) = k.strip_prefix(TRAIN_PREFIX) {
                train.set(key, &v)
            } else {
                match k.as_str() {
                    "steps" => {
                        file_steps = Some(v.parse().map_err(|_| ExperimentError::Usage(format!("{origin}: bad steps `{v}`")))?);
                        Ok(())
                    }
                    "seeds" => {
                        file_seeds = Some(v.clone());
                        Ok(())
                    }
                    "algo" => {
                        file_algo = Some(v.clone());
                        Ok(())
                    }
                    _ => env.set(&k, &v),
                }
            };
            res.map_err(|e| ExperimentError::Usage(format!("{origin}: {e}")))?;
        }
        if let Some(s) = scenario {
            env.set("scenario", s)?;
        }
        env.validate()?;
        train.validate()?;
        let algo: Algo = algo.or(file_algo.as_deref()).unwrap_or("ippo").parse()?;
        Ok(Self {
            env_id: env_id.to_string(),
            algo,
            scenario: env.scenario,
            total_steps: steps.or(file_steps).unwrap_or(200_000),
            seeds: parse_seeds(seeds.or(file_seeds.as_deref()).unwrap_or("0"))?,
            out: out.to_path_buf(),
            env,
            train,
        })
    }

    /// The full merged configuration as `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("# env_id={}\nalgo={}\nsteps={}\n", self.env_id, self.algo, self.total_steps);
        s.push_str(&format!("seeds={}\n", self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")));
        s.push_str(&self.env.to_text());
        for line in self.train.to_text().lines() {
            s.push_str(TRAIN_PREFIX);
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

pub fn scenario_label(s: ScenarioKind) -> &'static str {
    match s {
        ScenarioKind::I => "I",
        ScenarioKind::II => "II",
        ScenarioKind::III => "III",
    }
}
