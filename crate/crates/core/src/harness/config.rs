//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::advisors::Planning;
use crate::mdp::TieRule;

/// How the agent learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Advisors(Planning),
    /// Single linear Q-learner over the advisors' one-hot features.
    Linear,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "linear" {
            Ok(Method::Linear)
        } else {
            s.parse().map(Method::Advisors)
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Advisors(p) => p.fmt(f),
            Method::Linear => f.write_str("linear"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `pacboy11`, `pacboy7` or a maze file path.
    pub maze: String,
    pub method: Method,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub eval_tie_rule: TieRule,
    pub noise_sigma: f64,
    pub epochs: usize,
    pub transitions_per_epoch: usize,
    pub eval_games: usize,
    pub seed: u64,
    pub max_steps: u32,
    pub output: Option<PathBuf>,
    /// Directory receiving the trained tables.
    pub checkpoint: Option<PathBuf>,
    /// Record wall-clock seconds in the metrics; off keeps output byte-stable.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            maze: "pacboy11".into(),
            method: Method::Advisors(Planning::Egocentric),
            gamma: 0.4,
            alpha: 0.1,
            epsilon: 0.1,
            eval_tie_rule: TieRule::LowestIndex,
            noise_sigma: 0.0,
            epochs: 50,
            transitions_per_epoch: 20_000,
            eval_games: 80,
            seed: 0,
            max_steps: crate::env::DEFAULT_MAX_STEPS,
            output: None,
            checkpoint: None,
            timing: false,
        }
    }
}

/// Keys in canonical order.
pub const CONFIG_KEYS: [&str; 15] = [
    "maze",
    "method",
    "gamma",
    "alpha",
    "epsilon",
    "eval_tie_rule",
    "noise_sigma",
    "epochs",
    "transitions_per_epoch",
    "eval_games",
    "seed",
    "max_steps",
    "output",
    "checkpoint",
    "timing",
];

/// Keys that do not change the numbers a run produces.
const UNHASHED: [&str; 3] = ["output", "checkpoint", "timing"];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.parse().map_err(|_| HarnessError::Config(format!("bad value `{value}` for `{key}`")))
}

impl ExperimentConfig {
    /// The CI preset: 7x7 maze, 10 epochs of 5,000 transitions, 40 evaluation games.
    pub fn desk_preset() -> Self {
        Self { maze: "pacboy7".into(), epochs: 10, transitions_per_epoch: 5_000, eval_games: 40, ..Self::default() }
    }

    /// Defaults overlaid with `text`, validated.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets every `key = value` line of `text` on top of `self`. `#` starts a
    /// comment. Does not validate.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "maze" => self.maze = value.to_string(),
            "method" => self.method = value.parse().map_err(HarnessError::Config)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "eval_tie_rule" => self.eval_tie_rule = value.parse().map_err(HarnessError::Config)?,
            "noise_sigma" => self.noise_sigma = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "transitions_per_epoch" => self.transitions_per_epoch = parse_value(key, value)?,
            "eval_games" => self.eval_games = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "max_steps" => self.max_steps = parse_value(key, value)?,
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            "checkpoint" => self.checkpoint = (!value.is_empty()).then(|| PathBuf::from(value)),
            "timing" => self.timing = parse_value(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Some(match key {
            "maze" => self.maze.clone(),
            "method" => self.method.to_string(),
            "gamma" => self.gamma.to_string(),
            "alpha" => self.alpha.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "eval_tie_rule" => self.eval_tie_rule.to_string(),
            "noise_sigma" => self.noise_sigma.to_string(),
            "epochs" => self.epochs.to_string(),
            "transitions_per_epoch" => self.transitions_per_epoch.to_string(),
            "eval_games" => self.eval_games.to_string(),
            "seed" => self.seed.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "output" => path(&self.output),
            "checkpoint" => path(&self.checkpoint),
            "timing" => self.timing.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be a finite non-negative number", self.noise_sigma));
        }
        if self.eval_games == 0 {
            return bad("eval_games must be positive".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }

    /// Every key in canonical order, one `key = value` line each.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("known key"))).collect()
    }

    /// SHA-256 (hex) of the canonical lines of the keys that affect results.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for k in CONFIG_KEYS.iter().filter(|k| !UNHASHED.contains(k)) {
            h.update(format!("{k} = {}\n", self.get(k).expect("known key")).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let cfg = ExperimentConfig::parse("# comment\nmethod = empathic\ngamma = 0.9 # trailing\nseed=3\n").unwrap();
        assert_eq!(cfg.method, Method::Advisors(Planning::Empathic));
        assert_eq!(cfg.gamma, 0.9);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("colour = blue").is_err());
        assert!(ExperimentConfig::parse("gamma = 1.0").is_err());
        assert!(ExperimentConfig::parse("alpha = 0").is_err());
        assert!(ExperimentConfig::parse("noise_sigma = -1").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
        assert!(ExperimentConfig::parse("method = greedy").is_err());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { output: Some("x.csv".into()), timing: true, ..a.clone() };
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
