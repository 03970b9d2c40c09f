//! ASCII trajectory dumps of a checkpointed agent.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::agent::{LinearAgent, MultiAdvisorAgent, TrainedAgent};
use super::config::{ExperimentConfig, Method};
use super::experiment::{play_episode, stream_rng, GameResult, Stream};
use super::HarnessError;
use crate::env::{MazeLayout, PacBoy};

/// Rebuilds the agent and environment saved by a run with a checkpoint directory.
pub fn load_checkpoint(dir: &Path) -> Result<(ExperimentConfig, PacBoy, TrainedAgent), HarnessError> {
    let cfg = ExperimentConfig::load(dir.join("config.txt"))?;
    let layout = Arc::new(MazeLayout::builtin_or_file(&cfg.maze)?);
    let env = PacBoy::with_max_steps(Arc::clone(&layout), cfg.max_steps);
    let agent = match cfg.method {
        Method::Advisors(p) => TrainedAgent::Advisors(MultiAdvisorAgent::load(layout, p, cfg.gamma, dir)?),
        Method::Linear => TrainedAgent::Linear(LinearAgent::load(layout, cfg.gamma, dir)?),
    };
    Ok((cfg, env, agent))
}

/// Plays one greedy game from the checkpoint and writes every frame:
///
/// ```text
/// step 3 action E reward 1 score 2
/// <grid rows>
/// <blank line>
/// ```
///
/// The first frame reads `step 0 score 0`.
pub fn replay<W: Write>(dir: &Path, seed: u64, mut out: W) -> Result<GameResult, HarnessError> {
    let (cfg, env, agent) = load_checkpoint(dir)?;
    let mut rng = stream_rng(seed, Stream::Evaluation);
    let mut score = 0.0;
    let mut io_result = Ok(());
    let result = play_episode(&agent, &env, cfg.eval_tie_rule, &mut rng, |state, step| {
        if io_result.is_err() {
            return;
        }
        let header = match step {
            None => "step 0 score 0".to_string(),
            Some((action, outcome)) => {
                score += outcome.global_reward;
                format!("step {} action {} reward {} score {}", state.step, action.letter(), outcome.global_reward, score)
            }
        };
        io_result = write!(out, "{header}\n{}\n", env.render(state));
    })?;
    io_result?;
    Ok(result)
}
