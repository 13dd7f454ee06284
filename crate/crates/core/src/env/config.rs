use std::path::PathBuf;

use crate::error::{Error, Result};

/// Which simulator drives the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulatorKind {
    Static,
    Dynamic,
}

impl SimulatorKind {
    pub fn id_suffix(self) -> &'static str {
        match self {
            SimulatorKind::Static => "Static",
            SimulatorKind::Dynamic => "Dynamic",
        }
    }
}

/// Wind scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Constant wind for the whole episode.
    I,
    /// Speed and direction drawn once per episode from Weibull and Normal laws.
    II,
    /// Replay of a wind time series from a random starting row.
    III,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" | "i" => Ok(ScenarioKind::I),
            "II" | "2" | "ii" => Ok(ScenarioKind::II),
            "III" | "3" | "iii" => Ok(ScenarioKind::III),
            other => Err(Error::Parse { line: 0, msg: format!("unknown scenario `{other}`") }),
        }
    }
}

impl ScenarioKind {
    /// Default episode length for this scenario.
    pub fn default_episode_len(self) -> usize {
        match self {
            ScenarioKind::II => 2048,
            ScenarioKind::I | ScenarioKind::III => 150,
        }
    }
}

/// Every tunable of an environment.
///
/// Optional fields fall back to layout-dependent defaults when the environment
/// is built: directions to the prevailing direction of the layout and the load
/// scale to the calibrated value stored with the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub layout: String,
    pub simulator: SimulatorKind,
    /// Per-agent interface (`Dec_` prefix) or one centralized agent.
    pub decentralized: bool,
    pub scenario: ScenarioKind,
    /// `None` means the scenario default.
    pub episode_len: Option<usize>,
    pub discount: f64,
    pub alpha: f64,
    pub load_scale: Option<f64>,
    pub duty_cap: f64,
    pub seed: u64,
    pub turbulence_intensity: f64,
    /// Scenario I wind.
    pub wind_speed: f64,
    pub wind_direction: Option<f64>,
    /// Scenario II laws.
    pub weibull_scale: f64,
    pub weibull_shape: f64,
    pub direction_mean: Option<f64>,
    pub direction_std: f64,
    /// Scenario III series; `None` uses the built-in synthetic series.
    pub series: Option<PathBuf>,
    /// Wall time charged per static step for the duty cycle, seconds.
    pub static_step_s: f64,
    /// Simulator address for a dynamic environment behind the bridge.
    pub bridge_endpoint: Option<String>,
    pub bridge_timeout_s: f64,
    pub buffer_window: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            layout: "Turb3_Row1".into(),
            simulator: SimulatorKind::Static,
            decentralized: true,
            scenario: ScenarioKind::I,
            episode_len: None,
            discount: 0.99,
            alpha: 1.0,
            load_scale: None,
            duty_cap: 0.10,
            seed: 0,
            turbulence_intensity: 0.06,
            wind_speed: 8.0,
            wind_direction: None,
            weibull_scale: 8.0,
            weibull_shape: 2.0,
            direction_mean: None,
            direction_std: 5.0,
            series: None,
            static_step_s: 60.0,
            bridge_endpoint: None,
            bridge_timeout_s: 30.0,
            buffer_window: 20,
        }
    }
}

/// Keys accepted by [`EnvConfig::set`], in documentation order.
pub const CONFIG_KEYS: &[&str] = &[
    "layout",
    "simulator",
    "decentralized",
    "scenario",
    "episode_len",
    "discount",
    "alpha",
    "load_scale",
    "duty_cap",
    "seed",
    "ti",
    "wind_speed",
    "wind_direction",
    "weibull_scale",
    "weibull_shape",
    "direction_mean",
    "direction_std",
    "series",
    "static_step_s",
    "bridge.endpoint",
    "bridge.timeout_s",
    "buffer_window",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line: 0, msg: format!("bad value `{value}` for `{key}`") })
}

impl EnvConfig {
    pub fn episode_len(&self) -> usize {
        self.episode_len.unwrap_or_else(|| self.scenario.default_episode_len())
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "layout" => self.layout = v.to_string(),
            "simulator" => {
                self.simulator = match v.to_ascii_lowercase().as_str() {
                    "static" => SimulatorKind::Static,
                    "dynamic" => SimulatorKind::Dynamic,
                    _ => return Err(Error::Parse { line: 0, msg: format!("unknown simulator `{v}`") }),
                }
            }
            "decentralized" => self.decentralized = parse_num(key, v)?,
            "scenario" => self.scenario = v.parse()?,
            "episode_len" => self.episode_len = Some(parse_num(key, v)?),
            "discount" => self.discount = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "load_scale" => self.load_scale = Some(parse_num(key, v)?),
            "duty_cap" => self.duty_cap = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "ti" => self.turbulence_intensity = parse_num(key, v)?,
            "wind_speed" => self.wind_speed = parse_num(key, v)?,
            "wind_direction" => self.wind_direction = Some(parse_num(key, v)?),
            "weibull_scale" => self.weibull_scale = parse_num(key, v)?,
            "weibull_shape" => self.weibull_shape = parse_num(key, v)?,
            "direction_mean" => self.direction_mean = Some(parse_num(key, v)?),
            "direction_std" => self.direction_std = parse_num(key, v)?,
            "series" => self.series = Some(PathBuf::from(v)),
            "static_step_s" => self.static_step_s = parse_num(key, v)?,
            "bridge.endpoint" => self.bridge_endpoint = Some(v.to_string()),
            "bridge.timeout_s" => self.bridge_timeout_s = parse_num(key, v)?,
            "buffer_window" => self.buffer_window = parse_num(key, v)?,
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unknown key `{other}` (known: {})", CONFIG_KEYS.join(", ")),
                })
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: n + 1, msg: format!("expected key=value, got `{line}`") })?;
            self.set(k, v).map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line: n + 1, msg },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Checks the numeric invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::domain(msg));
        if self.episode_len() == 0 {
            return bad("episode length must be at least 1".into());
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount {} outside (0, 1)", self.discount));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("load weight {} must be finite and non-negative", self.alpha));
        }
        if !(self.duty_cap > 0.0 && self.duty_cap <= 1.0) {
            return bad(format!("duty cap {} outside (0, 1]", self.duty_cap));
        }
        if let Some(c) = self.load_scale {
            if !(c >= 0.0 && c.is_finite()) {
                return bad(format!("load scale {c} must be finite and non-negative"));
            }
        }
        if !(self.weibull_scale > 0.0 && self.weibull_shape > 0.0 && self.direction_std >= 0.0) {
            return bad("Weibull scale/shape must be positive and the direction spread non-negative".into());
        }
        if !(self.static_step_s > 0.0) {
            return bad(format!("static step {} s must be positive", self.static_step_s));
        }
        Ok(())
    }

    /// Renders the configuration back to `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("layout", self.layout.clone());
        put("simulator", self.simulator.id_suffix().to_ascii_lowercase());
        put("decentralized", self.decentralized.to_string());
        put("scenario", format!("{:?}", self.scenario));
        put("episode_len", self.episode_len().to_string());
        put("discount", self.discount.to_string());
        put("alpha", self.alpha.to_string());
        if let Some(c) = self.load_scale {
            put("load_scale", c.to_string());
        }
        put("duty_cap", self.duty_cap.to_string());
        put("seed", self.seed.to_string());
        put("ti", self.turbulence_intensity.to_string());
        put("wind_speed", self.wind_speed.to_string());
        if let Some(d) = self.wind_direction {
            put("wind_direction", d.to_string());
        }
        put("weibull_scale", self.weibull_scale.to_string());
        put("weibull_shape", self.weibull_shape.to_string());
        if let Some(d) = self.direction_mean {
            put("direction_mean", d.to_string());
        }
        put("direction_std", self.direction_std.to_string());
        if let Some(p) = &self.series {
            put("series", p.display().to_string());
        }
        put("static_step_s", self.static_step_s.to_string());
        if let Some(e) = &self.bridge_endpoint {
            put("bridge.endpoint", e.clone());
        }
        put("bridge.timeout_s", self.bridge_timeout_s.to_string());
        put("buffer_window", self.buffer_window.to_string());
        out
    }
}
