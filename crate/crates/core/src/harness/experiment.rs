//! Online training with periodic greedy evaluation.

use std::fs;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{Controller, LinearAgent, MultiAdvisorAgent, TrainedAgent};
use super::config::{ExperimentConfig, Method};
use super::HarnessError;
use crate::advisors::Planning;
use crate::aggregator::{greedy_action, select_action};
use crate::env::{Action, MazeLayout, PacBoy, PacBoyState, StepOutcome};
use crate::mdp::TieRule;

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Environment = 0,
    Exploration = 1,
    Noise = 2,
    Evaluation = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameResult {
    pub score: f64,
    pub length: u32,
    pub fruits: usize,
    pub collisions: usize,
    pub initial_fruits: usize,
}

/// Plays one game greedily under `tie_rule`, calling `observe` with the
/// starting state and then after every step.
pub fn play_episode<C: Controller + ?Sized, R: Rng + ?Sized>(
    controller: &C,
    env: &PacBoy,
    tie_rule: TieRule,
    rng: &mut R,
    mut observe: impl FnMut(&PacBoyState, Option<(Action, &StepOutcome)>),
) -> Result<GameResult, HarnessError> {
    let mut state = env.reset(rng);
    let initial_fruits = state.fruit_count();
    observe(&state, None);
    let mut q = [0.0; Action::COUNT];
    let mut result = GameResult { score: 0.0, length: 0, fruits: 0, collisions: 0, initial_fruits };
    while !env.is_done(&state) {
        controller.action_values(&state, &mut q);
        let action = Action::ALL[greedy_action(&q, tie_rule, rng)];
        let out = env.step(&state, action, rng)?;
        result.score += out.global_reward;
        result.length += 1;
        result.fruits += out.eaten.len();
        result.collisions += out.collisions.len();
        observe(&out.next_state, Some((action, &out)));
        state = out.next_state;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub mean_score: f64,
    /// Population standard deviation of the game scores.
    pub std_score: f64,
    pub mean_length: f64,
    pub mean_fruits: f64,
    pub mean_collisions: f64,
    pub games: Vec<GameResult>,
}

/// Greedy play (no exploration, true rewards) on `games` fresh boards drawn
/// from the evaluation stream of `seed`.
pub fn evaluate<C: Controller + ?Sized>(
    controller: &C,
    env: &PacBoy,
    games: usize,
    tie_rule: TieRule,
    seed: u64,
) -> Result<EvalStats, HarnessError> {
    if games == 0 {
        return Err(HarnessError::NoGames);
    }
    let mut rng = stream_rng(seed, Stream::Evaluation);
    let results: Vec<GameResult> = (0..games)
        .map(|_| play_episode(controller, env, tie_rule, &mut rng, |_, _| {}))
        .collect::<Result<_, _>>()?;
    let n = games as f64;
    let mean = |f: &dyn Fn(&GameResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let mean_score = mean(&|g| g.score);
    let var = mean(&|g| (g.score - mean_score).powi(2));
    Ok(EvalStats {
        mean_score,
        std_score: var.sqrt(),
        mean_length: mean(&|g| g.length as f64),
        mean_fruits: mean(&|g| g.fruits as f64),
        mean_collisions: mean(&|g| g.collisions as f64),
        games: results,
    })
}

/// One evaluation row of the metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub mean_score: f64,
    pub std_score: f64,
    pub mean_length: f64,
    pub mean_fruits: f64,
    pub mean_collisions: f64,
    pub seconds: f64,
}

impl MetricsRecord {
    fn from_stats(epoch: usize, s: &EvalStats, seconds: f64) -> Self {
        Self {
            epoch,
            mean_score: s.mean_score,
            std_score: s.std_score,
            mean_length: s.mean_length,
            mean_fruits: s.mean_fruits,
            mean_collisions: s.mean_collisions,
            seconds,
        }
    }
}

pub const METRICS_HEADER: [&str; 7] =
    ["epoch", "mean_score", "std_score", "mean_length", "mean_fruits", "mean_collisions", "seconds"];

/// `# config_hash=<hex>` line, then the header and one row per record.
pub fn write_metrics_csv<W: Write>(config_hash: &str, records: &[MetricsRecord], mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| HarnessError::Csv(e.to_string());
    w.write_record(METRICS_HEADER).map_err(map)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.mean_score.to_string(),
            r.std_score.to_string(),
            r.mean_length.to_string(),
            r.mean_fruits.to_string(),
            r.mean_collisions.to_string(),
            r.seconds.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config_hash: String,
    /// Epoch 0 (before training) followed by one record per epoch.
    pub records: Vec<MetricsRecord>,
    pub agent: TrainedAgent,
}

/// Trains online for `epochs * transitions_per_epoch` steps and evaluates
/// before training and after every epoch. Episodes run across epoch
/// boundaries. Nothing is written to disk.
pub fn train(cfg: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let layout = Arc::new(MazeLayout::builtin_or_file(&cfg.maze)?);
    let env = PacBoy::with_max_steps(Arc::clone(&layout), cfg.max_steps);
    let mut agent = match cfg.method {
        Method::Advisors(p) => TrainedAgent::Advisors(MultiAdvisorAgent::new(Arc::clone(&layout), p, cfg.gamma)),
        Method::Linear => TrainedAgent::Linear(LinearAgent::new(Arc::clone(&layout), cfg.gamma)),
    };
    let mut env_rng = stream_rng(cfg.seed, Stream::Environment);
    let mut explore_rng = stream_rng(cfg.seed, Stream::Exploration);
    let mut noise_rng = stream_rng(cfg.seed, Stream::Noise);
    let clock = Instant::now();
    let seconds = |c: &Instant| if cfg.timing { c.elapsed().as_secs_f64() } else { 0.0 };

    let mut records = Vec::with_capacity(cfg.epochs + 1);
    let stats = evaluate(&agent, &env, cfg.eval_games, cfg.eval_tie_rule, cfg.seed)?;
    records.push(MetricsRecord::from_stats(0, &stats, seconds(&clock)));

    let mut state = env.reset(&mut env_rng);
    let mut q = [0.0; Action::COUNT];
    let mut q_next = [0.0; Action::COUNT];
    for epoch in 1..=cfg.epochs {
        for _ in 0..cfg.transitions_per_epoch {
            if env.is_done(&state) {
                state = env.reset(&mut env_rng);
            }
            agent.action_values(&state, &mut q);
            let a = select_action(&q, cfg.epsilon, TieRule::UniformRandom, &mut explore_rng);
            let out = env.step(&state, Action::ALL[a], &mut env_rng)?;
            match &mut agent {
                TrainedAgent::Advisors(ag) => {
                    let greedy = if ag.planning() == Planning::Empathic {
                        ag.action_values(&out.next_state, &mut q_next);
                        Some(greedy_action(&q_next, TieRule::UniformRandom, &mut explore_rng))
                    } else {
                        None
                    };
                    ag.learn(&state, a, &out, greedy, cfg.alpha, cfg.noise_sigma, &mut noise_rng)?;
                }
                TrainedAgent::Linear(ag) => ag.learn(&state, a, &out, cfg.alpha, cfg.noise_sigma, &mut noise_rng)?,
            }
            state = out.next_state;
        }
        let stats = evaluate(&agent, &env, cfg.eval_games, cfg.eval_tie_rule, cfg.seed)?;
        records.push(MetricsRecord::from_stats(epoch, &stats, seconds(&clock)));
    }
    Ok(RunResult { config_hash: cfg.hash(), records, agent })
}

/// [`train`], then writes the metrics CSV to `cfg.output` and the tables
/// plus `config.txt` to `cfg.checkpoint` when those are set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    let result = train(cfg)?;
    if let Some(path) = &cfg.output {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_metrics_csv(&result.config_hash, &result.records, fs::File::create(path)?)?;
    }
    if let Some(dir) = &cfg.checkpoint {
        match &result.agent {
            TrainedAgent::Advisors(a) => a.save(dir)?,
            TrainedAgent::Linear(a) => a.save(dir)?,
        }
        fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(method: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk_preset();
        cfg.set("method", method).unwrap();
        cfg.epochs = 2;
        cfg.transitions_per_epoch = 300;
        cfg.eval_games = 3;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn records_per_epoch() {
        for m in ["egocentric", "agnostic", "empathic", "linear"] {
            let r = train(&tiny(m)).unwrap();
            assert_eq!(r.records.len(), 3);
            assert_eq!(r.records[0].epoch, 0);
            assert!(r.records.iter().all(|x| x.seconds == 0.0));
        }
    }

    #[test]
    fn deterministic() {
        let a = train(&tiny("empathic")).unwrap();
        let b = train(&tiny("empathic")).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn zero_games_rejected() {
        let env = PacBoy::new(MazeLayout::pacboy_small());
        let agent = MultiAdvisorAgent::new(env.shared_layout(), Planning::Egocentric, 0.4);
        assert!(matches!(evaluate(&agent, &env, 0, TieRule::LowestIndex, 0), Err(HarnessError::NoGames)));
    }

    #[test]
    fn metrics_csv_layout() {
        let r = train(&tiny("egocentric")).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&r.config_hash, &r.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# config_hash="));
        assert_eq!(lines.next().unwrap(), "epoch,mean_score,std_score,mean_length,mean_fruits,mean_collisions,seconds");
        assert_eq!(lines.count(), 3);
    }
}
