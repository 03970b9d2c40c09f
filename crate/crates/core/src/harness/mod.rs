//! Experiment orchestration for Pac-Boy: configuration, online training,
//! greedy evaluation, metrics files, checkpoints and replays.

mod agent;
mod config;
mod experiment;
mod replay;

use thiserror::Error;

pub use agent::{inject_reward_noise, Controller, LinearAgent, MultiAdvisorAgent, TrainedAgent};
pub use config::{ExperimentConfig, Method, CONFIG_KEYS};
pub use experiment::{
    evaluate, play_episode, run_experiment, stream_rng, train, write_metrics_csv, EvalStats, GameResult, MetricsRecord,
    RunResult, Stream, METRICS_HEADER,
};
pub use replay::{load_checkpoint, replay};

use crate::advisors::AdvisorError;
use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("evaluation needs at least one game")]
    NoGames,
    #[error("linear model weights diverged; lower alpha")]
    Diverged,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
