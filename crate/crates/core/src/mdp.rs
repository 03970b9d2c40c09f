//! Finite MDPs and exact dynamic-programming oracles.
//!
//! Rewards live on `(state, action, next_state)` triples. Expectations are
//! taken exactly over the transition table, so `R(x, a)` is the marginal
//! `sum_x' P(x'|x,a) r(x,a,x')`. All sweeps are synchronous (Jacobi).

use rand::Rng;
use thiserror::Error;

/// Probability mass tolerance for distributions.
pub const PROB_TOL: f64 = 1e-12;

/// Default sweep cap for the iterative oracles.
pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

/// Default convergence tolerance for the iterative oracles.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("mdp needs at least one state and one action (got {states} states, {actions} actions)")]
    Empty { states: usize, actions: usize },
    #[error("discount {0} outside [0, 1)")]
    Discount(f64),
    #[error("state {state} action {action}: next state {next} out of range")]
    NextOutOfRange { state: usize, action: usize, next: usize },
    #[error("state {state} action {action}: probability {prob} outside [0, 1]")]
    Probability { state: usize, action: usize, prob: f64 },
    #[error("state {state} action {action}: non-finite reward")]
    Reward { state: usize, action: usize },
    #[error("state {state} action {action}: distribution sums to {sum}")]
    Distribution { state: usize, action: usize, sum: f64 },
    #[error("terminal state {0} must self-loop with reward 0")]
    Terminal(usize),
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("policy shape {states}x{actions} does not match the mdp")]
    PolicyShape { states: usize, actions: usize },
    #[error("policy row {0} does not sum to 1")]
    PolicyRow(usize),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

/// One branch of a transition distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// A finite MDP with stochastic transitions and triple-indexed rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    states: usize,
    actions: usize,
    // indexed by state * actions + action
    outcomes: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
    discount: f64,
}

/// Incremental constructor for [`TabularMdp`].
///
/// Terminal states get their self-loop automatically; any outcome added to
/// a terminal state is rejected at [`MdpBuilder::build`].
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    states: usize,
    actions: usize,
    outcomes: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
    discount: f64,
}

impl MdpBuilder {
    pub fn new(states: usize, actions: usize, discount: f64) -> Self {
        Self {
            states,
            actions,
            outcomes: vec![Vec::new(); states * actions],
            terminal: vec![false; states],
            discount,
        }
    }

    pub fn outcome(&mut self, state: usize, action: usize, next: usize, prob: f64, reward: f64) -> &mut Self {
        self.outcomes[state * self.actions + action].push(Outcome { next, prob, reward });
        self
    }

    /// Deterministic transition shorthand.
    pub fn det(&mut self, state: usize, action: usize, next: usize, reward: f64) -> &mut Self {
        self.outcome(state, action, next, 1.0, reward)
    }

    pub fn terminal(&mut self, state: usize) -> &mut Self {
        self.terminal[state] = true;
        self
    }

    pub fn build(mut self) -> Result<TabularMdp, MdpError> {
        for s in 0..self.states {
            if !self.terminal[s] {
                continue;
            }
            for a in 0..self.actions {
                let slot = &mut self.outcomes[s * self.actions + a];
                if !slot.is_empty() {
                    return Err(MdpError::Terminal(s));
                }
                slot.push(Outcome { next: s, prob: 1.0, reward: 0.0 });
            }
        }
        let mdp = TabularMdp {
            states: self.states,
            actions: self.actions,
            outcomes: self.outcomes,
            terminal: self.terminal,
            discount: self.discount,
        };
        mdp.validate()?;
        Ok(mdp)
    }
}

impl TabularMdp {
    pub fn builder(states: usize, actions: usize, discount: f64) -> MdpBuilder {
        MdpBuilder::new(states, actions, discount)
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        &self.outcomes[state * self.actions + action]
    }

    /// Marginal immediate reward `R(x, a)`.
    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        self.outcomes(state, action).iter().map(|o| o.prob * o.reward).sum()
    }

    /// Probability of `next` after `(state, action)`, summing duplicate branches.
    pub fn probability(&self, state: usize, action: usize, next: usize) -> f64 {
        self.outcomes(state, action)
            .iter()
            .filter(|o| o.next == next)
            .map(|o| o.prob)
            .sum()
    }

    /// True when `action` deterministically keeps `state` in place with zero reward.
    pub fn is_noop(&self, state: usize, action: usize) -> bool {
        self.outcomes(state, action)
            .iter()
            .all(|o| o.prob == 0.0 || (o.next == state && o.reward == 0.0))
    }

    /// Same transitions and terminal set, with rewards replaced by `f(state, action, next, old)`.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> Result<Self, MdpError> {
        let mut out = self.clone();
        for s in 0..self.states {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.actions {
                for o in &mut out.outcomes[s * self.actions + a] {
                    o.reward = f(s, a, o.next, o.reward);
                }
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn with_discount(&self, discount: f64) -> Result<Self, MdpError> {
        let mut out = self.clone();
        out.discount = discount;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        if self.states == 0 || self.actions == 0 {
            return Err(MdpError::Empty { states: self.states, actions: self.actions });
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(MdpError::Discount(self.discount));
        }
        for s in 0..self.states {
            for a in 0..self.actions {
                let mut sum = 0.0;
                for o in self.outcomes(s, a) {
                    if o.next >= self.states {
                        return Err(MdpError::NextOutOfRange { state: s, action: a, next: o.next });
                    }
                    if !(0.0..=1.0).contains(&o.prob) {
                        return Err(MdpError::Probability { state: s, action: a, prob: o.prob });
                    }
                    if !o.reward.is_finite() {
                        return Err(MdpError::Reward { state: s, action: a });
                    }
                    sum += o.prob;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(MdpError::Distribution { state: s, action: a, sum });
                }
                if self.terminal[s] && !self.is_noop(s, a) {
                    return Err(MdpError::Terminal(s));
                }
            }
        }
        Ok(())
    }
}

/// Dense state-action value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self { states, actions, values: vec![0.0; states * actions] }
    }

    /// Builds from a row-major `states x actions` vector.
    pub fn from_values(states: usize, actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), states * actions, "q shape mismatch");
        Self { states, actions, values }
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn row_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self, state: usize) -> f64 {
        self.row(state).iter().sum::<f64>() / self.actions as f64
    }

    /// Lowest-index argmax.
    pub fn argmax(&self, state: usize) -> usize {
        argmax_lowest(self.row(state))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_distance(&self, other: &QFunction) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "q shape mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self += weight * other`, elementwise.
    pub fn add_scaled(&mut self, weight: f64, other: &QFunction) {
        assert_eq!(self.values.len(), other.values.len(), "q shape mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += weight * b;
        }
    }
}

/// Stochastic policy, one distribution over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn uniform(states: usize, actions: usize) -> Self {
        Self { states, actions, probs: vec![1.0 / actions as f64; states * actions] }
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(actions: usize, choice: &[usize]) -> Self {
        let mut probs = vec![0.0; choice.len() * actions];
        for (s, &a) in choice.iter().enumerate() {
            probs[s * actions + a] = 1.0;
        }
        Self { states: choice.len(), actions, probs }
    }

    pub fn from_rows(states: usize, actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != states * actions {
            return Err(MdpError::PolicyShape { states, actions });
        }
        let p = Self { states, actions, probs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        for s in 0..self.states {
            let row = self.row(s);
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                return Err(MdpError::PolicyRow(s));
            }
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.actions..(state + 1) * self.actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.actions + action]
    }

    /// Draws an action from the row of `state`.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.row(state);
        for (a, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// How ties among maximal actions are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TieRule {
    LowestIndex,
    UniformRandom,
}

impl std::str::FromStr for TieRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest_index" | "lowest" => Ok(Self::LowestIndex),
            "uniform_random" | "random" => Ok(Self::UniformRandom),
            other => Err(format!("unknown tie rule `{other}`")),
        }
    }
}

impl std::fmt::Display for TieRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LowestIndex => "lowest_index",
            Self::UniformRandom => "uniform_random",
        })
    }
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Greedy policy over `q`.
///
/// `LowestIndex` puts all mass on the first maximiser; `UniformRandom`
/// spreads it evenly over every maximiser, so sampling from the returned
/// policy breaks ties uniformly at random.
pub fn greedy_policy(q: &QFunction, tie_rule: TieRule) -> Policy {
    let (states, actions) = (q.state_count(), q.action_count());
    let mut probs = vec![0.0; states * actions];
    for s in 0..states {
        let row = q.row(s);
        let row_out = &mut probs[s * actions..(s + 1) * actions];
        match tie_rule {
            TieRule::LowestIndex => row_out[argmax_lowest(row)] = 1.0,
            TieRule::UniformRandom => {
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties = row.iter().filter(|&&v| v == best).count();
                for (p, &v) in row_out.iter_mut().zip(row) {
                    if v == best {
                        *p = 1.0 / ties as f64;
                    }
                }
            }
        }
    }
    Policy { states, actions, probs }
}

fn check_tol(tol: f64) -> Result<(), MdpError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(MdpError::Tolerance(tol))
    }
}

/// One-step lookahead `sum_x' P(x'|x,a) (r + gamma * next_value(x'))`.
pub fn backup(mdp: &TabularMdp, state: usize, action: usize, next_value: impl Fn(usize) -> f64) -> f64 {
    let g = mdp.discount();
    mdp.outcomes(state, action)
        .iter()
        .map(|o| o.prob * (o.reward + g * next_value(o.next)))
        .sum()
}

fn iterate(
    mdp: &TabularMdp,
    tol: f64,
    max_sweeps: usize,
    next_value: impl Fn(&QFunction, usize) -> f64,
) -> Result<QFunction, MdpError> {
    check_tol(tol)?;
    mdp.validate()?;
    let (n, m) = (mdp.state_count(), mdp.action_count());
    let mut q = QFunction::zeros(n, m);
    let mut next = QFunction::zeros(n, m);
    let mut v = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..max_sweeps {
        for (s, slot) in v.iter_mut().enumerate() {
            *slot = next_value(&q, s);
        }
        delta = 0.0;
        for s in 0..n {
            for a in 0..m {
                let value = backup(mdp, s, a, |x| v[x]);
                delta = f64::max(delta, (value - q.get(s, a)).abs());
                next.set(s, a, value);
            }
        }
        std::mem::swap(&mut q, &mut next);
        // residual of the new iterate is at most gamma * delta
        if delta * mdp.discount() <= tol || delta == 0.0 {
            return Ok(q);
        }
    }
    Err(MdpError::NoConvergence { sweeps: max_sweeps, residual: delta })
}

/// Optimal action values by value iteration, Bellman residual at most `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<QFunction, MdpError> {
    value_iteration_capped(mdp, tol, DEFAULT_MAX_SWEEPS)
}

pub fn value_iteration_capped(mdp: &TabularMdp, tol: f64, max_sweeps: usize) -> Result<QFunction, MdpError> {
    iterate(mdp, tol, max_sweeps, |q, s| q.max(s))
}

/// Action values of `policy`, Bellman residual at most `tol`.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &Policy, tol: f64) -> Result<QFunction, MdpError> {
    policy_evaluation_capped(mdp, policy, tol, DEFAULT_MAX_SWEEPS)
}

pub fn policy_evaluation_capped(
    mdp: &TabularMdp,
    policy: &Policy,
    tol: f64,
    max_sweeps: usize,
) -> Result<QFunction, MdpError> {
    if policy.state_count() != mdp.state_count() || policy.action_count() != mdp.action_count() {
        return Err(MdpError::PolicyShape { states: policy.state_count(), actions: policy.action_count() });
    }
    policy.validate()?;
    iterate(mdp, tol, max_sweeps, |q, s| {
        q.row(s).iter().zip(policy.row(s)).map(|(v, p)| v * p).sum()
    })
}

/// Sup-norm Bellman optimality residual of `q`.
pub fn optimality_residual(mdp: &TabularMdp, q: &QFunction) -> f64 {
    let v: Vec<f64> = (0..mdp.state_count()).map(|s| q.max(s)).collect();
    let mut worst: f64 = 0.0;
    for s in 0..mdp.state_count() {
        for a in 0..mdp.action_count() {
            worst = worst.max((backup(mdp, s, a, |x| v[x]) - q.get(s, a)).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3(gamma: f64) -> TabularMdp {
        // 0 -> 1 -> 2 -> 3(terminal), reward 1 on entering 3
        let mut b = TabularMdp::builder(4, 1, gamma);
        b.det(0, 0, 1, 0.0).det(1, 0, 2, 0.0).det(2, 0, 3, 1.0).terminal(3);
        b.build().unwrap()
    }

    #[test]
    fn rejects_bad_distribution() {
        let mut b = TabularMdp::builder(2, 1, 0.5);
        b.outcome(0, 0, 1, 0.6, 0.0).outcome(0, 0, 0, 0.3, 0.0).terminal(1);
        assert!(matches!(b.build(), Err(MdpError::Distribution { .. })));
    }

    #[test]
    fn rejects_terminal_with_outcomes() {
        let mut b = TabularMdp::builder(1, 1, 0.5);
        b.det(0, 0, 0, 1.0).terminal(0);
        assert_eq!(b.build(), Err(MdpError::Terminal(0)));
    }

    #[test]
    fn rejects_discount_one() {
        let mut b = TabularMdp::builder(1, 1, 1.0);
        b.terminal(0);
        assert_eq!(b.build(), Err(MdpError::Discount(1.0)));
    }

    #[test]
    fn chain_policy_evaluation() {
        let mdp = chain3(0.5);
        let q = policy_evaluation(&mdp, &Policy::deterministic(1, &[0, 0, 0, 0]), 1e-12).unwrap();
        assert!((q.get(0, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn all_terminal_gives_zero() {
        let mut b = TabularMdp::builder(3, 2, 0.9);
        b.terminal(0).terminal(1).terminal(2);
        let mdp = b.build().unwrap();
        let q = policy_evaluation(&mdp, &Policy::uniform(3, 2), 1e-10).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_mdp_gives_immediate_reward() {
        let mut b = TabularMdp::builder(2, 2, 0.9);
        b.outcome(0, 0, 1, 0.5, 2.0).outcome(0, 0, 1, 0.5, 4.0).det(0, 1, 1, -1.0).terminal(1);
        let mdp = b.build().unwrap();
        let q = policy_evaluation(&mdp, &Policy::uniform(2, 2), 1e-10).unwrap();
        assert_eq!(q.get(0, 0), 3.0);
        assert_eq!(q.get(0, 1), -1.0);
    }

    #[test]
    fn zero_rewards_zero_values() {
        let mut b = TabularMdp::builder(3, 2, 0.9);
        for s in 0..3 {
            b.det(s, 0, (s + 1) % 3, 0.0).det(s, 1, s, 0.0);
        }
        let q = value_iteration(&b.build().unwrap(), 1e-10).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sweep_cap_is_an_error() {
        let mut b = TabularMdp::builder(1, 1, 0.99);
        b.det(0, 0, 0, 1.0);
        let err = value_iteration_capped(&b.build().unwrap(), 1e-10, 5).unwrap_err();
        assert!(matches!(err, MdpError::NoConvergence { sweeps: 5, .. }));
    }

    #[test]
    fn greedy_ties() {
        let q = QFunction::from_values(3, 4, vec![1.0, 2.0, 2.0, 0.0, 5.0, 5.0, 5.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let low = greedy_policy(&q, TieRule::LowestIndex);
        assert_eq!(low.row(0), &[0.0, 1.0, 0.0, 0.0]);
        let uni = greedy_policy(&q, TieRule::UniformRandom);
        assert_eq!(uni.row(1), &[0.25; 4]);
        assert_eq!(uni.row(2), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(low.row(2), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn tie_rule_parses() {
        assert_eq!("lowest_index".parse::<TieRule>().unwrap(), TieRule::LowestIndex);
        assert_eq!("uniform_random".parse::<TieRule>().unwrap(), TieRule::UniformRandom);
        assert!("nope".parse::<TieRule>().is_err());
    }
}
