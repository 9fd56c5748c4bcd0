//! Line-oriented `key = value` run configuration.

use std::str::FromStr;

use thiserror::Error;

use crate::models::ModelParams;
use crate::noise::{NoiseError, TimeGrid};

/// First line of every run manifest.
pub const MANIFEST_HEADER: &str = "# rou-cir-lab run manifest";
/// Prefix of the configuration echo inside a manifest.
pub const MANIFEST_PREFIX: &str = "config.";

pub const KEYS: [&str; 10] = [
    "y0",
    "a",
    "b",
    "sigma",
    "epsilon",
    "hurst",
    "T",
    "n_steps",
    "seed",
    "replications",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}` (expected one of: {})", KEYS.join(", "))]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for key `{key}`")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("not a run manifest (missing `{MANIFEST_HEADER}` header)")]
    NotAManifest,
    #[error("key `replications` must be at least 1")]
    ZeroReplications,
    #[error(transparent)]
    Grid(#[from] NoiseError),
}

/// Model parameters plus the discretization and sampling settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub replications: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            horizon: 5.0,
            n_steps: 5000,
            seed: 1,
            replications: 1,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid, NoiseError> {
        TimeGrid::new(self.horizon, self.n_steps)
    }

    /// Echo in configuration syntax; parsing it back gives `self`.
    pub fn to_text(&self) -> String {
        self.lines("").join("\n") + "\n"
    }

    /// Echo with every key prefixed by `config.`, for manifests.
    pub fn manifest_lines(&self) -> Vec<String> {
        self.lines(MANIFEST_PREFIX)
    }

    fn lines(&self, prefix: &str) -> Vec<String> {
        let p = &self.params;
        // `{:?}` prints the shortest representation that round-trips.
        vec![
            format!("{prefix}y0 = {:?}", p.y0),
            format!("{prefix}a = {:?}", p.a),
            format!("{prefix}b = {:?}", p.b),
            format!("{prefix}sigma = {:?}", p.sigma),
            format!("{prefix}epsilon = {:?}", p.epsilon),
            format!("{prefix}hurst = {:?}", p.hurst),
            format!("{prefix}T = {:?}", self.horizon),
            format!("{prefix}n_steps = {}", self.n_steps),
            format!("{prefix}seed = {}", self.seed),
            format!("{prefix}replications = {}", self.replications),
        ]
    }

    /// Reads the `config.*` lines of a manifest; other lines are ignored.
    pub fn from_manifest(text: &str) -> Result<Self, ConfigError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MANIFEST_HEADER) {
            return Err(ConfigError::NotAManifest);
        }
        let body: String = lines
            .map(|l| l.trim_start().strip_prefix(MANIFEST_PREFIX).unwrap_or_default())
            .collect::<Vec<_>>()
            .join("\n");
        body.parse()
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    /// Blank lines and `#` comments are skipped; missing keys keep their
    /// defaults.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key);
            let p = &mut cfg.params;
            match key {
                "y0" => p.y0 = parse_value(line, key, value)?,
                "a" => p.a = parse_value(line, key, value)?,
                "b" => p.b = parse_value(line, key, value)?,
                "sigma" => p.sigma = parse_value(line, key, value)?,
                "epsilon" => p.epsilon = parse_value(line, key, value)?,
                "hurst" => p.hurst = parse_value(line, key, value)?,
                "T" => cfg.horizon = parse_value(line, key, value)?,
                "n_steps" => cfg.n_steps = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "replications" => cfg.replications = parse_value(line, key, value)?,
                _ => unreachable!("key checked above"),
            }
        }
        if cfg.replications == 0 {
            return Err(ConfigError::ZeroReplications);
        }
        cfg.grid()?;
        Ok(cfg)
    }
}
