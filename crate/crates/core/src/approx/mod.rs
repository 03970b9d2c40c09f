//! Function approximation: the value regressor for the fruit grid and the
//! linear Q-learning baseline for Pac-Boy.

mod linear_q;
mod mlp;
mod rollout;

use thiserror::Error;

pub use linear_q::{pacboy_feature_dim, pacboy_features, LinearQModel};
pub use mlp::{
    mlp_train, mlp_value, normalized_mse, write_curve_csv, AdamParams, Mlp, TrainConfig, DEFAULT_BATCH, HIDDEN,
};
pub use rollout::{greedy_episode, greedy_rollout_eval, ROLLOUT_STEP_CAP};

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("loss or parameters became non-finite in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("need at least one episode")]
    NoEpisodes,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
