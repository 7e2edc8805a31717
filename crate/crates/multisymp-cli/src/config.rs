//! Run configuration: a flat key = value file merged with command-line
//! overrides (flags win), and the `MULTISYMP_SEED` environment fallback.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use multisymp::legendre::SubmanifoldChoice;

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError {
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(err(format!("unknown format '{other}' (csv | json | svg)"))),
        }
    }
}

/// Everything a run needs; defaults suit the n = k = 2 examples.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub example: String,
    pub params: BTreeMap<String, f64>,
    pub field: String,
    pub choice: SubmanifoldChoice,
    pub seed: u64,
    pub nodes: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub level: f64,
    pub higher: f64,
    pub points: usize,
    pub observable: String,
    pub slice_level: f64,
    pub t_span: (f64, f64),
    pub dt: f64,
    pub y0: Vec<f64>,
    pub p0: Vec<f64>,
    pub pi_mode: String,
    pub pi_scale: f64,
    pub level_prime: f64,
    pub output: Option<String>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            example: "trivial".into(),
            params: BTreeMap::new(),
            field: "default".into(),
            choice: SubmanifoldChoice::Full,
            seed: 0,
            nodes: 17,
            box_lo: -1.0,
            box_hi: 1.0,
            level: 0.0,
            higher: 2.0,
            points: 200,
            observable: "x1".into(),
            slice_level: 0.25,
            t_span: (0.0, 2.0 * std::f64::consts::PI),
            dt: 1e-3,
            y0: vec![1.0],
            p0: vec![0.0],
            pi_mode: "generator".into(),
            pi_scale: 0.3,
            level_prime: 1.0,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    /// Seed fallback order: explicit field (file or flag) wins, then the
    /// `MULTISYMP_SEED` environment variable, then 0.
    pub fn from_sources(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        if let Some(seed) = std::env::var("MULTISYMP_SEED")
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
        {
            config.seed = seed;
        }
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
            config.apply_file(&text)?;
        }
        Ok(config)
    }

    fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| err(format!("line {}: {}", lineno + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>().map_err(|_| err(format!("field '{key}': bad number '{v}'")))
        };
        match key {
            "example" => self.example = value.to_string(),
            "field" => self.field = value.to_string(),
            "observable" => self.observable = value.to_string(),
            "pi_mode" => self.pi_mode = value.to_string(),
            "choice" => {
                self.choice = match value {
                    "ddw" => SubmanifoldChoice::Ddw,
                    "full" => SubmanifoldChoice::Full,
                    other => return Err(err(format!("unknown choice '{other}' (ddw | full)"))),
                }
            }
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| err(format!("field 'seed': bad integer '{value}'")))?
            }
            "nodes" => {
                self.nodes = value
                    .parse::<usize>()
                    .map_err(|_| err(format!("field 'nodes': bad integer '{value}'")))?;
                if self.nodes < 3 {
                    return Err(err("field 'nodes': need at least 3 nodes per axis"));
                }
            }
            "points" => {
                self.points = value
                    .parse::<usize>()
                    .map_err(|_| err(format!("field 'points': bad integer '{value}'")))?
            }
            "box_lo" => self.box_lo = parse_f64(value)?,
            "box_hi" => self.box_hi = parse_f64(value)?,
            "level" | "h" => self.level = parse_f64(value)?,
            "higher" | "r" => self.higher = parse_f64(value)?,
            "slice_level" | "s" => self.slice_level = parse_f64(value)?,
            "t0" => self.t_span.0 = parse_f64(value)?,
            "t1" => self.t_span.1 = parse_f64(value)?,
            "dt" => self.dt = parse_f64(value)?,
            "pi_scale" => self.pi_scale = parse_f64(value)?,
            "level_prime" | "hprime" => self.level_prime = parse_f64(value)?,
            "y0" => self.y0 = parse_list(value)?,
            "p0" => self.p0 = parse_list(value)?,
            "output" | "out" => self.output = Some(value.to_string()),
            "format" => self.format = OutputFormat::parse(value)?,
            other if other.len() <= 3 => {
                // short keys are density parameters: b, n, c1..c9
                self.params.insert(other.to_string(), parse_f64(value)?);
            }
            other => return Err(err(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("bad list entry '{v}'")))
        })
        .collect()
}
