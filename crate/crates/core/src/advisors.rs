//! Local learners: projections, tabular Q-tables and the three TD rules.
//!
//! Every rule moves `q(x_j, a)` towards `r_j + gamma * B(x'_j)` and only
//! differs in the bootstrap `B`:
//!
//! * egocentric: `max_a' q(x'_j, a')`
//! * agnostic:   `mean_a' q(x'_j, a')`
//! * empathic:   `q(x'_j, a*)` with `a*` the aggregator's greedy action at `x'`
//!
//! `B` is zero on transitions flagged `done`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::env::{Action, MazeLayout, PacBoyState, FRUIT_REWARD, GHOST_PENALTY};
use crate::mdp::{self, argmax_lowest, MdpError, Policy, QFunction, TabularMdp};

#[derive(Debug, Error)]
pub enum AdvisorError {
    #[error("empathic update on a non-terminal transition without the aggregator's action")]
    MissingGreedyAction,
    #[error("learning rate {0} outside (0, 1]")]
    LearningRate(f64),
    #[error("global state {0} has no local projection")]
    Projection(usize),
    #[error("advisor models disagree on shape or discount")]
    ModelMismatch,
    #[error("bad q-table snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity of a reward source and of the advisor that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdvisorId {
    /// Fruit slot of the layout.
    Fruit(usize),
    /// Ghost index.
    Ghost(usize),
    Custom(usize),
}

impl fmt::Display for AdvisorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdvisorId::Fruit(i) => write!(f, "fruit{i}"),
            AdvisorId::Ghost(i) => write!(f, "ghost{i}"),
            AdvisorId::Custom(i) => write!(f, "custom{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Focus {
    Fruit { slot: usize, cell: usize },
    Ghost { index: usize },
    Custom,
}

/// Map from a global state to an advisor's local state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    /// Global index used as is.
    Identity,
    /// Lookup table indexed by global state.
    Table(Vec<usize>),
    /// Pac-Boy: the agent's cell.
    AgentCell,
    /// Pac-Boy: `agent * cells + ghost_cell`.
    AgentAndGhost { ghost: usize },
}

impl Projection {
    pub fn project_index(&self, global: usize) -> Result<usize, AdvisorError> {
        match self {
            Projection::Identity => Ok(global),
            Projection::Table(t) => t.get(global).copied().ok_or(AdvisorError::Projection(global)),
            _ => Err(AdvisorError::Projection(global)),
        }
    }

    /// Local state of a Pac-Boy global state; `cells` is the corridor cell count.
    pub fn project_pacboy(&self, state: &PacBoyState, cells: usize) -> usize {
        match self {
            Projection::AgentCell => state.agent,
            Projection::AgentAndGhost { ghost } => state.agent * cells + state.ghosts[*ghost],
            Projection::Identity | Projection::Table(_) => {
                panic!("index projection applied to a Pac-Boy state")
            }
        }
    }
}

/// Local planning method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Planning {
    Egocentric,
    Agnostic,
    Empathic,
}

impl Planning {
    pub const ALL: [Planning; 3] = [Planning::Egocentric, Planning::Agnostic, Planning::Empathic];

    pub fn td_update(self, q: &mut QTable, t: &LocalTransition, alpha: f64, gamma: f64) -> Result<(), AdvisorError> {
        match self {
            Planning::Egocentric => td_update_egocentric(q, t, alpha, gamma),
            Planning::Agnostic => td_update_agnostic(q, t, alpha, gamma),
            Planning::Empathic => td_update_empathic(q, t, alpha, gamma),
        }
    }
}

impl FromStr for Planning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "egocentric" | "ego" => Ok(Planning::Egocentric),
            "agnostic" | "agn" => Ok(Planning::Agnostic),
            "empathic" | "emp" => Ok(Planning::Empathic),
            other => Err(format!("unknown planning method `{other}`")),
        }
    }
}

impl fmt::Display for Planning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Planning::Egocentric => "egocentric",
            Planning::Agnostic => "agnostic",
            Planning::Empathic => "empathic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvisorSpec {
    pub id: AdvisorId,
    pub focus: Focus,
    pub weight: f64,
    pub projection: Projection,
    pub planning: Planning,
    pub gamma: f64,
    pub active: bool,
}

/// A learner's table plus the advisors that read and write it.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    q: QFunction,
    owners: Vec<AdvisorId>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self { q: QFunction::zeros(states, actions), owners: Vec::new() }
    }

    pub fn from_q(q: QFunction) -> Self {
        Self { q, owners: Vec::new() }
    }

    pub fn q(&self) -> &QFunction {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut QFunction {
        &mut self.q
    }

    pub fn owners(&self) -> &[AdvisorId] {
        &self.owners
    }

    pub fn add_owner(&mut self, id: AdvisorId) {
        self.owners.push(id);
    }

    /// Writes `state,action,value` rows, state-major then action, with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AdvisorError> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| AdvisorError::Snapshot(e.to_string());
        w.write_record(["state", "action", "value"]).map_err(map)?;
        for s in 0..self.q.state_count() {
            for a in 0..self.q.action_count() {
                w.write_record([s.to_string(), a.to_string(), self.q.get(s, a).to_string()]).map_err(map)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a snapshot produced by [`QTable::write_csv`]. Every `(state, action)`
    /// pair of the given shape must appear exactly once.
    pub fn read_csv<R: Read>(input: R, states: usize, actions: usize) -> Result<Self, AdvisorError> {
        let mut q = QFunction::zeros(states, actions);
        let mut seen = vec![false; states * actions];
        let mut rdr = csv::Reader::from_reader(input);
        for rec in rdr.records() {
            let rec = rec.map_err(|e| AdvisorError::Snapshot(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| AdvisorError::Snapshot("short row".into()));
            let s: usize = field(0)?.parse().map_err(|_| AdvisorError::Snapshot("bad state".into()))?;
            let a: usize = field(1)?.parse().map_err(|_| AdvisorError::Snapshot("bad action".into()))?;
            let v: f64 = field(2)?.parse().map_err(|_| AdvisorError::Snapshot("bad value".into()))?;
            if s >= states || a >= actions || !v.is_finite() {
                return Err(AdvisorError::Snapshot(format!("row ({s}, {a}, {v}) out of range")));
            }
            if std::mem::replace(&mut seen[s * actions + a], true) {
                return Err(AdvisorError::Snapshot(format!("duplicate entry ({s}, {a})")));
            }
            q.set(s, a, v);
        }
        if seen.iter().any(|s| !s) {
            return Err(AdvisorError::Snapshot("missing entries".into()));
        }
        Ok(Self::from_q(q))
    }
}

/// One local experience tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
    /// Aggregator's greedy action at the next global state (empathic only).
    pub greedy_action: Option<usize>,
}

fn check_alpha(alpha: f64) -> Result<(), AdvisorError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(AdvisorError::LearningRate(alpha))
    }
}

fn apply(q: &mut QTable, t: &LocalTransition, alpha: f64, gamma: f64, bootstrap: f64) {
    let target = t.reward + if t.done { 0.0 } else { gamma * bootstrap };
    let old = q.q.get(t.state, t.action);
    q.q.set(t.state, t.action, old + alpha * (target - old));
}

pub fn td_update_egocentric(q: &mut QTable, t: &LocalTransition, alpha: f64, gamma: f64) -> Result<(), AdvisorError> {
    check_alpha(alpha)?;
    let boot = if t.done { 0.0 } else { q.q.max(t.next_state) };
    apply(q, t, alpha, gamma, boot);
    Ok(())
}

pub fn td_update_agnostic(q: &mut QTable, t: &LocalTransition, alpha: f64, gamma: f64) -> Result<(), AdvisorError> {
    check_alpha(alpha)?;
    let boot = if t.done { 0.0 } else { q.q.mean(t.next_state) };
    apply(q, t, alpha, gamma, boot);
    Ok(())
}

pub fn td_update_empathic(q: &mut QTable, t: &LocalTransition, alpha: f64, gamma: f64) -> Result<(), AdvisorError> {
    check_alpha(alpha)?;
    let boot = if t.done {
        0.0
    } else {
        let a = t.greedy_action.ok_or(AdvisorError::MissingGreedyAction)?;
        q.q.get(t.next_state, a)
    };
    apply(q, t, alpha, gamma, boot);
    Ok(())
}

/// Advisors plus the table arena they write to. Several advisors may share a table.
#[derive(Debug, Clone)]
pub struct AdvisorPool {
    specs: Vec<AdvisorSpec>,
    table_of: Vec<usize>,
    tables: Vec<QTable>,
}

impl AdvisorPool {
    pub fn new() -> Self {
        Self { specs: Vec::new(), table_of: Vec::new(), tables: Vec::new() }
    }

    /// Adds an advisor with its own zero table; returns the advisor index.
    pub fn add(&mut self, spec: AdvisorSpec, states: usize, actions: usize) -> usize {
        let mut table = QTable::zeros(states, actions);
        table.add_owner(spec.id);
        self.tables.push(table);
        self.push(spec, self.tables.len() - 1)
    }

    /// Adds an advisor that reads and writes the table of advisor `other`.
    pub fn add_shared(&mut self, spec: AdvisorSpec, other: usize) -> usize {
        let table = self.table_of[other];
        self.tables[table].add_owner(spec.id);
        self.push(spec, table)
    }

    fn push(&mut self, spec: AdvisorSpec, table: usize) -> usize {
        self.specs.push(spec);
        self.table_of.push(table);
        self.specs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn spec(&self, advisor: usize) -> &AdvisorSpec {
        &self.specs[advisor]
    }

    pub fn specs(&self) -> &[AdvisorSpec] {
        &self.specs
    }

    pub fn set_active(&mut self, advisor: usize, active: bool) {
        self.specs[advisor].active = active;
    }

    pub fn table(&self, advisor: usize) -> &QTable {
        &self.tables[self.table_of[advisor]]
    }

    pub fn table_index(&self, advisor: usize) -> usize {
        self.table_of[advisor]
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [QTable] {
        &mut self.tables
    }

    pub fn update(&mut self, advisor: usize, t: &LocalTransition, alpha: f64) -> Result<(), AdvisorError> {
        let spec = &self.specs[advisor];
        let (planning, gamma) = (spec.planning, spec.gamma);
        planning.td_update(&mut self.tables[self.table_of[advisor]], t, alpha, gamma)
    }
}

impl Default for AdvisorPool {
    fn default() -> Self {
        Self::new()
    }
}

/// Local MDP of a fruit advisor: state is the agent cell, entering the
/// fruit cell pays `+1` and ends the advisor's task.
pub fn fruit_local_mdp(layout: &MazeLayout, fruit_cell: usize, gamma: f64) -> Result<TabularMdp, MdpError> {
    let n = layout.cell_count();
    let mut b = TabularMdp::builder(n, Action::COUNT, gamma);
    for cell in 0..n {
        if cell == fruit_cell {
            b.terminal(cell);
            continue;
        }
        for a in Action::ALL {
            let next = layout.step(cell, a);
            let r = if next == fruit_cell { FRUIT_REWARD } else { 0.0 };
            b.det(cell, a.index(), next, r);
        }
    }
    b.build()
}

/// Local MDP of a ghost advisor over `(agent, ghost)` pairs, encoded
/// `agent * cells + ghost`. The ghost picks one of the four moves uniformly.
pub fn ghost_local_mdp(layout: &MazeLayout, gamma: f64) -> Result<TabularMdp, MdpError> {
    let n = layout.cell_count();
    let mut b = TabularMdp::builder(n * n, Action::COUNT, gamma);
    for agent in 0..n {
        for ghost in 0..n {
            for a in Action::ALL {
                let next_agent = layout.step(agent, a);
                for g in Action::ALL {
                    let next_ghost = layout.step(ghost, g);
                    let r = if next_ghost == next_agent { GHOST_PENALTY } else { 0.0 };
                    b.outcome(agent * n + ghost, a.index(), next_agent * n + next_ghost, 0.25, r);
                }
            }
        }
    }
    b.build()
}

/// Converged egocentric values of one advisor on its local MDP; all zeros when inactive.
pub fn local_egocentric_q(advisor: &AdvisorSpec, local_mdp: &TabularMdp) -> Result<QFunction, AdvisorError> {
    if !advisor.active {
        return Ok(QFunction::zeros(local_mdp.state_count(), local_mdp.action_count()));
    }
    let mdp = local_mdp.with_discount(advisor.gamma)?;
    Ok(mdp::value_iteration(&mdp, mdp::DEFAULT_TOL)?)
}

/// Converged agnostic values: the uniform policy evaluated on the local MDP.
pub fn local_agnostic_q(local_mdp: &TabularMdp, tol: f64) -> Result<QFunction, AdvisorError> {
    let pi = Policy::uniform(local_mdp.state_count(), local_mdp.action_count());
    Ok(mdp::policy_evaluation(local_mdp, &pi, tol)?)
}

/// Joint fixed point of full-state empathic advisors.
#[derive(Debug, Clone)]
pub struct EmpathicSolution {
    pub advisors: Vec<QFunction>,
    pub aggregate: QFunction,
    pub sweeps: usize,
}

/// Iterates `Q_j(x,a) = E[r_j + gamma * Q_j(x', f(x'))]` for every advisor at
/// once, `f` being the lowest-index greedy action of the weighted sum.
///
/// All models must share states, actions, discount and transitions; only
/// their rewards differ. Stops when the aggregate moves by at most
/// `tol / gamma` in a sweep.
pub fn empathic_fixed_point(models: &[TabularMdp], weights: &[f64], tol: f64) -> Result<EmpathicSolution, AdvisorError> {
    assert_eq!(models.len(), weights.len(), "one weight per advisor");
    let first = models.first().ok_or(AdvisorError::ModelMismatch)?;
    let (n, m, gamma) = (first.state_count(), first.action_count(), first.discount());
    if models.iter().any(|md| md.state_count() != n || md.action_count() != m || md.discount() != gamma) {
        return Err(AdvisorError::ModelMismatch);
    }
    if !(tol > 0.0) {
        return Err(MdpError::Tolerance(tol).into());
    }
    let mut qs: Vec<QFunction> = models.iter().map(|_| QFunction::zeros(n, m)).collect();
    let mut aggregate = QFunction::zeros(n, m);
    let mut greedy = vec![0usize; n];
    for sweep in 1..=mdp::DEFAULT_MAX_SWEEPS {
        for (s, g) in greedy.iter_mut().enumerate() {
            *g = argmax_lowest(aggregate.row(s));
        }
        let next: Vec<QFunction> = models
            .iter()
            .zip(&qs)
            .map(|(model, q)| {
                let mut out = QFunction::zeros(n, m);
                for s in 0..n {
                    for a in 0..m {
                        out.set(s, a, mdp::backup(model, s, a, |x| q.get(x, greedy[x])));
                    }
                }
                out
            })
            .collect();
        let mut new_agg = QFunction::zeros(n, m);
        for (w, q) in weights.iter().zip(&next) {
            new_agg.add_scaled(*w, q);
        }
        let delta = new_agg.sup_distance(&aggregate);
        qs = next;
        aggregate = new_agg;
        if delta * gamma <= tol || delta == 0.0 {
            return Ok(EmpathicSolution { advisors: qs, aggregate, sweeps: sweep });
        }
    }
    Err(MdpError::NoConvergence { sweeps: mdp::DEFAULT_MAX_SWEEPS, residual: f64::NAN }.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{toy_attractor_mdp, A0, X0};

    fn tr(state: usize, action: usize, reward: f64, next: usize, done: bool) -> LocalTransition {
        LocalTransition { state, action, reward, next_state: next, done, greedy_action: None }
    }

    #[test]
    fn egocentric_zero_bootstrap() {
        let mut q = QTable::zeros(2, 4);
        td_update_egocentric(&mut q, &tr(0, 1, 1.0, 1, false), 0.1, 0.9).unwrap();
        assert!((q.q().get(0, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn terminal_has_no_bootstrap() {
        let mut q = QTable::from_q(QFunction::from_values(2, 1, vec![0.0, 100.0]));
        td_update_egocentric(&mut q, &tr(0, 0, -10.0, 1, true), 0.1, 0.9).unwrap();
        assert!((q.q().get(0, 0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn agnostic_mean_bootstrap() {
        let mut q = QTable::from_q(QFunction::from_values(2, 4, vec![0.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0]));
        td_update_agnostic(&mut q, &tr(0, 2, 0.0, 1, false), 1.0, 0.9).unwrap();
        assert!((q.q().get(0, 2) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn agnostic_constant_fixed_point() {
        let (c, g) = (3.0, 0.9);
        let mut q = QTable::from_q(QFunction::from_values(2, 4, vec![c; 8]));
        for alpha in [0.1, 0.5, 1.0] {
            td_update_agnostic(&mut q, &tr(0, 3, (1.0 - g) * c, 1, false), alpha, g).unwrap();
            assert!((q.q().get(0, 3) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn empathic_needs_action() {
        let mut q = QTable::zeros(2, 2);
        let t = tr(0, 0, 1.0, 1, false);
        assert!(matches!(td_update_empathic(&mut q, &t, 0.5, 0.9), Err(AdvisorError::MissingGreedyAction)));
        // fine on terminal transitions
        td_update_empathic(&mut q, &tr(0, 0, 1.0, 1, true), 0.5, 0.9).unwrap();
        let mut q = QTable::from_q(QFunction::from_values(2, 2, vec![0.0, 0.0, 2.0, 5.0]));
        let t = LocalTransition { greedy_action: Some(0), ..tr(0, 0, 0.0, 1, false) };
        td_update_empathic(&mut q, &t, 1.0, 0.5).unwrap();
        assert_eq!(q.q().get(0, 0), 1.0);
    }

    #[test]
    fn bad_alpha() {
        let mut q = QTable::zeros(1, 1);
        assert!(matches!(
            td_update_egocentric(&mut q, &tr(0, 0, 0.0, 0, true), 0.0, 0.9),
            Err(AdvisorError::LearningRate(_))
        ));
        assert!(td_update_agnostic(&mut q, &tr(0, 0, 0.0, 0, true), 1.5, 0.9).is_err());
    }

    #[test]
    fn shared_table_is_shared() {
        let spec = |i| AdvisorSpec {
            id: AdvisorId::Ghost(i),
            focus: Focus::Ghost { index: i },
            weight: 1.0,
            projection: Projection::AgentAndGhost { ghost: i },
            planning: Planning::Egocentric,
            gamma: 0.9,
            active: true,
        };
        let mut pool = AdvisorPool::new();
        let g0 = pool.add(spec(0), 4, 4);
        let g1 = pool.add_shared(spec(1), g0);
        pool.update(g1, &tr(2, 3, -10.0, 1, false), 0.1).unwrap();
        assert_eq!(pool.table(g0).q().get(2, 3), -1.0);
        assert_eq!(pool.table_index(g0), pool.table_index(g1));
        assert_eq!(pool.table(g0).owners(), &[AdvisorId::Ghost(0), AdvisorId::Ghost(1)]);
    }

    #[test]
    fn snapshot_round_trip() {
        let q = QTable::from_q(QFunction::from_values(3, 2, vec![0.1, -2.5, 1e-300, 7.0, 0.3, -0.0]));
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("state,action,value\n0,0,0.1\n0,1,-2.5\n"));
        let back = QTable::read_csv(&buf[..], 3, 2).unwrap();
        assert_eq!(back.q(), q.q());
        assert!(QTable::read_csv(&buf[..], 4, 2).is_err());
    }

    #[test]
    fn toy_advisor_values() {
        let toy = toy_attractor_mdp(2.0, 1.0, 0.5).unwrap();
        let spec = AdvisorSpec {
            id: AdvisorId::Custom(0),
            focus: Focus::Custom,
            weight: 1.0,
            projection: Projection::Identity,
            planning: Planning::Egocentric,
            gamma: 0.5,
            active: true,
        };
        let q1 = local_egocentric_q(&spec, &toy.advisors[0]).unwrap();
        assert!((q1.get(X0, 1) - 2.0).abs() < 1e-12);
        assert!((q1.get(X0, A0) - 1.0).abs() < 1e-12);
        assert_eq!(q1.get(X0, 2), 0.0);
        let inactive = AdvisorSpec { active: false, ..spec };
        let q0 = local_egocentric_q(&inactive, &toy.advisors[0]).unwrap();
        assert!(q0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ghost_mdp_shape() {
        let layout = MazeLayout::pacboy_small();
        let g = ghost_local_mdp(&layout, 0.9).unwrap();
        assert_eq!(g.state_count(), 37 * 37);
        let n = layout.cell_count();
        let s = layout.start_cell();
        // ghost one cell east of the agent, agent moves east: collision unless the ghost leaves
        let east = layout.step(s, Action::East);
        let r = g.expected_reward(s * n + east, Action::East.index());
        let stays = Action::ALL.iter().filter(|&&a| layout.step(east, a) == east).count() as f64;
        assert!((r - GHOST_PENALTY * stays / 4.0).abs() < 1e-12);
    }
}
