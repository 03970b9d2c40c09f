//! Command line front end for the multi-advisor lab. The binary is a thin
//! wrapper so that tests can drive the same commands in-process.

use std::fs::{self, File};
use std::ffi::OsString;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use madrl::approx::{greedy_rollout_eval, mlp_train, mlp_value, normalized_mse, write_curve_csv, AdamParams};
use madrl::attractor::{scan_attractors, write_scan_csv};
use madrl::env::{MazeLayout, PacBoy};
use madrl::harness::{self, ExperimentConfig};
use madrl::targets::{generate_dataset, read_dataset_csv, write_dataset_csv, TargetKind, DATASET_SAMPLES};

#[derive(Parser)]
#[command(name = "madrl", version, about = "Multi-advisor reinforcement learning lab")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train and evaluate on Pac-Boy, writing the metrics CSV.
    Run(RunArgs),
    /// Attractor report for one fruit configuration.
    ScanAttractors(ScanArgs),
    /// Write the supervised value-target dataset.
    GenDataset(GenArgs),
    /// Fit the value network to one target kind.
    TrainValues(TrainArgs),
    /// Dump an ASCII trajectory of a checkpointed agent.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Preset {
    /// 7x7 maze, 10 epochs of 5000 transitions, 40 evaluation games.
    Ci,
}

#[derive(Args)]
pub struct RunArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Start from a preset instead of the full-scale defaults.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    maze: Option<String>,
    /// egocentric, agnostic, empathic or linear.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    transitions: Option<usize>,
    #[arg(long)]
    eval_games: Option<usize>,
    /// lowest_index or uniform_random.
    #[arg(long)]
    eval_tie_rule: Option<String>,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for the trained tables and the resolved config.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Record wall-clock seconds (makes the CSV non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
pub struct ScanArgs {
    /// `pacboy11`, `pacboy7` or a maze file.
    #[arg(long, default_value = "pacboy11")]
    maze: String,
    #[arg(long)]
    gamma: f64,
    /// Fruit cells as `row,col;row,col;...`.
    #[arg(long, conflicts_with = "seed")]
    fruits: Option<String>,
    /// Draw the fruits as a fresh Pac-Boy board from this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = DATASET_SAMPLES)]
    samples: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset CSV from `gen-dataset`; generated from `--seed` when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// tsp, rl, ego_sum or ego_vec.
    #[arg(long)]
    target: TargetKind,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Training curve CSV (`epoch,mse`).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Model checkpoint file.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Greedy rollouts on fresh boards after training.
    #[arg(long, default_value_t = 100)]
    rollouts: usize,
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Directory written by `run --checkpoint`.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => run_experiment(a),
        Command::ScanAttractors(a) => scan(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::TrainValues(a) => train_values(a),
        Command::Replay(a) => replay(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match a.preset {
        Some(Preset::Ci) => ExperimentConfig::desk_preset(),
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    let mut overrides: Vec<(&str, String)> = vec![("seed", a.seed.to_string())];
    let mut opt = |key, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((key, v));
        }
    };
    opt("maze", a.maze.clone());
    opt("method", a.method.clone());
    opt("gamma", a.gamma.map(|v| v.to_string()));
    opt("alpha", a.alpha.map(|v| v.to_string()));
    opt("epsilon", a.epsilon.map(|v| v.to_string()));
    opt("noise_sigma", a.noise.map(|v| v.to_string()));
    opt("epochs", a.epochs.map(|v| v.to_string()));
    opt("transitions_per_epoch", a.transitions.map(|v| v.to_string()));
    opt("eval_games", a.eval_games.map(|v| v.to_string()));
    opt("eval_tie_rule", a.eval_tie_rule.clone());
    opt("max_steps", a.max_steps.map(|v| v.to_string()));
    opt("output", a.out.as_ref().map(|p| p.display().to_string()));
    opt("checkpoint", a.checkpoint.as_ref().map(|p| p.display().to_string()));
    if a.timing {
        overrides.push(("timing", "true".into()));
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("`--set {kv}`: expected KEY=VALUE"))?;
        overrides.push((k.trim(), v.trim().to_string()));
    }
    for (k, v) in overrides {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(a: RunArgs) -> Result<()> {
    let cfg = resolve_config(&a)?;
    let result = harness::run_experiment(&cfg)?;
    if cfg.output.is_none() {
        harness::write_metrics_csv(&result.config_hash, &result.records, io::stdout().lock())?;
    }
    if let (Some(out), Some(last)) = (&cfg.output, result.records.last()) {
        eprintln!(
            "{}: epoch {} mean score {:.3} (std {:.3})",
            out.display(),
            last.epoch,
            last.mean_score,
            last.std_score
        );
    }
    Ok(())
}

fn parse_fruits(layout: &MazeLayout, spec: &str) -> Result<Vec<usize>> {
    let mut cells = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (r, c) = part.split_once(',').with_context(|| format!("fruit `{part}`: expected row,col"))?;
        let (r, c): (usize, usize) = (r.trim().parse()?, c.trim().parse()?);
        let cell = layout.cell_at(r, c).with_context(|| format!("fruit ({r},{c}) is not a corridor cell"))?;
        cells.push(cell);
    }
    cells.sort_unstable();
    cells.dedup();
    Ok(cells)
}

fn scan(a: ScanArgs) -> Result<()> {
    let layout = MazeLayout::builtin_or_file(&a.maze)?;
    let fruits = match (&a.fruits, a.seed) {
        (Some(spec), _) => parse_fruits(&layout, spec)?,
        (None, Some(seed)) => {
            let env = PacBoy::new(layout.clone());
            let board = env.reset_seeded(seed);
            board.fruits.iter().zip(layout.fruit_cells()).filter(|(on, _)| **on).map(|(_, &c)| c).collect()
        }
        (None, None) => layout.fruit_cells().to_vec(),
    };
    let entries = scan_attractors(&layout, &fruits, a.gamma)?;
    let mut out = sink(a.out.as_deref())?;
    write_scan_csv(&entries, &mut out)?;
    out.flush()?;
    let flagged = entries.iter().filter(|e| e.flagged()).count();
    eprintln!("{} fruits, {flagged} attractor states", fruits.len());
    Ok(())
}

fn gen_dataset(a: GenArgs) -> Result<()> {
    if a.samples == 0 {
        bail!("--samples must be positive");
    }
    let data = generate_dataset(a.samples, a.gamma, a.seed)?;
    let mut out = create(&a.out)?;
    write_dataset_csv(&data, &mut out)?;
    out.flush()?;
    Ok(())
}

fn train_values(a: TrainArgs) -> Result<()> {
    let data = match &a.dataset {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_dataset_csv(BufReader::new(file))?
        }
        None => generate_dataset(DATASET_SAMPLES, a.gamma, a.seed)?,
    };
    let adam = AdamParams { lr: a.lr, ..AdamParams::default() };
    let (model, curve) = mlp_train(&data, a.target, a.epochs, adam, a.seed)?;
    if let Some(path) = &a.curve {
        let mut out = create(path)?;
        write_curve_csv(&curve, &mut out)?;
        out.flush()?;
    }
    if let Some(path) = &a.checkpoint {
        let mut out = create(path)?;
        model.write_checkpoint(&mut out)?;
        out.flush()?;
    }
    let nmse = normalized_mse(&model, &data, a.target);
    print!("target {} epochs {} normalized_mse {nmse}", a.target, a.epochs);
    if a.rollouts > 0 {
        let steps = greedy_rollout_eval(a.target, a.rollouts, a.seed, |s| mlp_value(&model, s))?;
        print!(" rollout_steps {steps}");
    }
    println!();
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let mut out = sink(a.out.as_deref())?;
    let game = harness::replay(&a.checkpoint, a.seed, &mut out)?;
    out.flush()?;
    eprintln!("score {} in {} steps", game.score, game.length);
    Ok(())
}
