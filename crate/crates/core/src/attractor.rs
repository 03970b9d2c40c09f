//! Attractor detection for egocentric decompositions.
//!
//! A state is an attractor when the best aggregated action is worth less
//! than `gamma * sum_j w_j max_a Q_j(x_j, a)`, the value of waiting one turn
//! while every advisor keeps its own best option.
//!
//! Both detectors compare against *candidate* actions only: actions that
//! are not already a deterministic zero-reward self-loop at the state (the
//! toy MDP's `a0`, a bump into a wall). Such an action is itself a stay-put
//! move, and including it would make the comparison vacuous. Pass every
//! action index to get the literal inequality over the full action set.

use std::collections::HashMap;
use std::io::Write;

use thiserror::Error;

use crate::advisors::{fruit_local_mdp, AdvisorError, Projection};
use crate::decomposition::FactoredMdp;
use crate::env::MazeLayout;
use crate::mdp::{self, argmax_lowest, MdpError, Outcome, QFunction, TabularMdp};

/// Dead-band for the strict inequalities.
pub const ATTRACTOR_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no candidate actions at state {0}")]
    NoCandidates(usize),
    #[error("action index {0} out of range")]
    Action(usize),
    #[error("need at least 2 actions, got {0}")]
    ActionCount(usize),
    #[error("advisor model discount {model} differs from gamma {gamma}")]
    Discount { model: f64, gamma: f64 },
    #[error("cell {0} is not a corridor cell")]
    Cell(usize),
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A converged egocentric advisor as seen by the analysis.
#[derive(Debug, Clone, Copy)]
pub struct EgoAdvisor<'a> {
    pub weight: f64,
    pub q: &'a QFunction,
    /// Local model, used by [`noop_preference_check`] for its backups.
    pub model: &'a TabularMdp,
    pub projection: &'a Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorReport {
    pub state: usize,
    /// `max_a sum_j w_j Q_j(x_j, a)` over the candidate actions.
    pub lhs: f64,
    /// `gamma * sum_j w_j max_a Q_j(x_j, a)`.
    pub rhs: f64,
    pub is_attractor: bool,
    /// Lowest-index greedy action of each advisor.
    pub argmax: Vec<usize>,
}

fn check_actions(state: usize, advisors: &[EgoAdvisor], actions: &[usize]) -> Result<(), AnalysisError> {
    if actions.is_empty() {
        return Err(AnalysisError::NoCandidates(state));
    }
    let width = advisors.iter().map(|a| a.q.action_count()).min().unwrap_or(usize::MAX);
    match actions.iter().find(|&&a| a >= width) {
        Some(&a) => Err(AnalysisError::Action(a)),
        None => Ok(()),
    }
}

pub fn is_attractor(
    state: usize,
    advisors: &[EgoAdvisor],
    actions: &[usize],
    gamma: f64,
) -> Result<AttractorReport, AnalysisError> {
    check_actions(state, advisors, actions)?;
    let mut sums = vec![0.0; actions.len()];
    let mut best_sum = 0.0;
    let mut argmax = Vec::with_capacity(advisors.len());
    for adv in advisors {
        let x = adv.projection.project_index(state)?;
        let row = adv.q.row(x);
        for (s, &a) in sums.iter_mut().zip(actions) {
            *s += adv.weight * row[a];
        }
        let best = argmax_lowest(row);
        argmax.push(best);
        best_sum += adv.weight * row[best];
    }
    let lhs = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rhs = gamma * best_sum;
    Ok(AttractorReport { state, lhs, rhs, is_attractor: lhs < rhs - ATTRACTOR_TOL, argmax })
}

/// Adds a virtual stay action `a0` at `state` and reports whether it beats
/// every candidate action by more than [`ATTRACTOR_TOL`].
///
/// Each advisor values its actions by one Bellman backup through its own
/// local model, `sum p (r + gamma max Q_j(x'))`; the stay action is a
/// zero-reward self-loop on `x_j`.
pub fn noop_preference_check(
    state: usize,
    advisors: &[EgoAdvisor],
    actions: &[usize],
    gamma: f64,
) -> Result<bool, AnalysisError> {
    check_actions(state, advisors, actions)?;
    let mut stay = 0.0;
    let mut real = vec![0.0; actions.len()];
    for adv in advisors {
        if adv.model.discount() != gamma {
            return Err(AnalysisError::Discount { model: adv.model.discount(), gamma });
        }
        let x = adv.projection.project_index(state)?;
        let v = |y: usize| adv.q.max(y);
        let stay_outcome = [Outcome { next: x, prob: 1.0, reward: 0.0 }];
        stay += adv.weight * expected_backup(&stay_outcome, gamma, v);
        for (s, &a) in real.iter_mut().zip(actions) {
            *s += adv.weight * mdp::backup(adv.model, x, a, v);
        }
    }
    Ok(real.iter().all(|&r| stay > r + ATTRACTOR_TOL))
}

fn expected_backup(outcomes: &[Outcome], gamma: f64, v: impl Fn(usize) -> f64) -> f64 {
    outcomes.iter().map(|o| o.prob * (o.reward + gamma * v(o.next))).sum()
}

/// Actions at `state` that are not a deterministic zero-reward self-loop.
pub fn candidate_actions(mdp: &TabularMdp, state: usize) -> Vec<usize> {
    (0..mdp.action_count()).filter(|&a| !mdp.is_noop(state, a)).collect()
}

/// Every action is worth at least `gamma` times the best one, everywhere
/// (with the [`ATTRACTOR_TOL`] dead-band).
pub fn is_progressive(q: &QFunction, gamma: f64) -> bool {
    (0..q.state_count()).all(|s| {
        let floor = gamma * q.max(s) - ATTRACTOR_TOL;
        q.row(s).iter().all(|&v| v >= floor)
    })
}

/// `(1/(|A|-1), 1/(|A|-2))`, the second infinite for two actions.
pub fn gamma_bounds(action_count: usize) -> Result<(f64, f64), AnalysisError> {
    if action_count < 2 {
        return Err(AnalysisError::ActionCount(action_count));
    }
    let strict = 1.0 / (action_count - 1) as f64;
    let relaxed = if action_count == 2 { f64::INFINITY } else { 1.0 / (action_count - 2) as f64 };
    Ok((strict, relaxed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub report: AttractorReport,
    pub noop_preferred: bool,
}

impl ScanEntry {
    pub fn flagged(&self) -> bool {
        self.report.is_attractor || self.noop_preferred
    }
}

/// Evaluates both detectors at one state.
pub fn scan_state(
    state: usize,
    advisors: &[EgoAdvisor],
    actions: &[usize],
    gamma: f64,
) -> Result<ScanEntry, AnalysisError> {
    let report = is_attractor(state, advisors, actions, gamma)?;
    let noop_preferred = noop_preference_check(state, advisors, actions, gamma)?;
    Ok(ScanEntry { report, noop_preferred })
}

/// Scans every non-terminal global state of a factored MDP that has at
/// least one candidate action, given each factor's egocentric table.
pub fn scan_factored(f: &FactoredMdp, tables: &[QFunction]) -> Result<Vec<ScanEntry>, AnalysisError> {
    let g = f.global();
    let advisors: Vec<EgoAdvisor> = tables
        .iter()
        .enumerate()
        .map(|(j, q)| EgoAdvisor { weight: f.weights()[j], q, model: &f.locals()[j], projection: f.projection(j) })
        .collect();
    let mut out = Vec::new();
    for x in 0..g.state_count() {
        if g.is_terminal(x) {
            continue;
        }
        let actions = candidate_actions(g, x);
        if actions.is_empty() {
            continue;
        }
        out.push(scan_state(x, &advisors, &actions, g.discount())?);
    }
    Ok(out)
}

/// Fruit-only maze scans. Each fruit advisor's local table depends only on
/// its cell, so tables are built once per cell and reused across
/// configurations.
#[derive(Debug)]
pub struct FruitScanner<'a> {
    layout: &'a MazeLayout,
    gamma: f64,
    cache: HashMap<usize, (TabularMdp, QFunction)>,
}

impl<'a> FruitScanner<'a> {
    pub fn new(layout: &'a MazeLayout, gamma: f64) -> Self {
        Self { layout, gamma, cache: HashMap::new() }
    }

    fn ensure(&mut self, cell: usize) -> Result<(), AnalysisError> {
        if cell >= self.layout.cell_count() {
            return Err(AnalysisError::Cell(cell));
        }
        if !self.cache.contains_key(&cell) {
            let model = fruit_local_mdp(self.layout, cell, self.gamma)?;
            let q = mdp::value_iteration(&model, mdp::DEFAULT_TOL)?;
            self.cache.insert(cell, (model, q));
        }
        Ok(())
    }

    /// Converged table of the advisor for a fruit at `cell`.
    pub fn table(&mut self, cell: usize) -> Result<&QFunction, AnalysisError> {
        self.ensure(cell)?;
        Ok(&self.cache[&cell].1)
    }

    /// One entry per corridor cell, in cell order. The advisor of a fruit
    /// lying on the agent's cell is left out.
    pub fn scan(&mut self, fruits: &[usize]) -> Result<Vec<ScanEntry>, AnalysisError> {
        for &c in fruits {
            self.ensure(c)?;
        }
        let identity = Projection::Identity;
        let mut out = Vec::with_capacity(self.layout.cell_count());
        for cell in 0..self.layout.cell_count() {
            let advisors: Vec<EgoAdvisor> = fruits
                .iter()
                .filter(|&&f| f != cell)
                .map(|f| {
                    let (model, q) = &self.cache[f];
                    EgoAdvisor { weight: 1.0, q, model, projection: &identity }
                })
                .collect();
            let actions = self.layout.moving_actions(cell);
            out.push(scan_state(cell, &advisors, &actions, self.gamma)?);
        }
        Ok(out)
    }
}

/// [`FruitScanner::scan`] for a single configuration.
pub fn scan_attractors(layout: &MazeLayout, fruits: &[usize], gamma: f64) -> Result<Vec<ScanEntry>, AnalysisError> {
    FruitScanner::new(layout, gamma).scan(fruits)
}

/// CSV with header `state,lhs,rhs,is_attractor,noop_preferred`.
pub fn write_scan_csv<W: Write>(entries: &[ScanEntry], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record(["state", "lhs", "rhs", "is_attractor", "noop_preferred"]).map_err(map)?;
    for e in entries {
        w.write_record([
            e.report.state.to_string(),
            e.report.lhs.to_string(),
            e.report.rhs.to_string(),
            e.report.is_attractor.to_string(),
            e.noop_preferred.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}
