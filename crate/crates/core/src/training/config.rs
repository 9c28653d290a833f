use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Training hyperparameters. Stored as flat `key = value` text; unknown
/// keys are rejected, omitted keys keep their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Window length T in seconds (samples at 1 Hz).
    pub window: usize,
    /// Window stride in seconds.
    pub shift: usize,
    pub embedding_width: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    pub max_genuine_per_user: usize,
    /// Clip-by-global-norm threshold; off when `None`.
    pub clip_norm: Option<f64>,
}

impl TrainConfig {
    /// Batch size of the original full-scale experiments.
    pub const REFERENCE_BATCH_SIZE: usize = 82_240;

    pub const KEYS: [&'static str; 13] = [
        "window",
        "shift",
        "embedding_width",
        "margin",
        "learning_rate",
        "beta1",
        "beta2",
        "epsilon",
        "batch_size",
        "epochs",
        "rng_seed",
        "max_genuine_per_user",
        "clip_norm",
    ];

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("shift", self.shift),
            ("embedding_width", self.embedding_width),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_genuine_per_user", self.max_genuine_per_user),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        for (key, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{key} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected key = value, found '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("line {}: {msg}", i + 1)),
                    other => other,
                })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
        }
        match key {
            "window" => self.window = num(key, value)?,
            "shift" => self.shift = num(key, value)?,
            "embedding_width" => self.embedding_width = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "max_genuine_per_user" => self.max_genuine_per_user = num(key, value)?,
            "clip_norm" => {
                self.clip_norm = match value {
                    "none" | "off" => None,
                    v => Some(num(key, v)?),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown config key '{other}'; valid keys: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Full `key = value` rendering; parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "shift = {}", self.shift);
        let _ = writeln!(s, "embedding_width = {}", self.embedding_width);
        let _ = writeln!(s, "margin = {:?}", self.margin);
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "beta1 = {:?}", self.beta1);
        let _ = writeln!(s, "beta2 = {:?}", self.beta2);
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "rng_seed = {}", self.rng_seed);
        let _ = writeln!(s, "max_genuine_per_user = {}", self.max_genuine_per_user);
        match self.clip_norm {
            Some(c) => {
                let _ = writeln!(s, "clip_norm = {c:?}");
            }
            None => s.push_str("clip_norm = none\n"),
        }
        s
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 20,
            shift: 1,
            embedding_width: 16,
            margin: 1.0,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            epochs: 20,
            rng_seed: 0,
            max_genuine_per_user: 100,
            clip_norm: None,
        }
    }
}
