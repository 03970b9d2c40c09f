//! Decomposed MDPs: a global task split into weighted per-advisor rewards.
//!
//! Two shapes are supported:
//!
//! * [`FactoredMdp`]: the global state is the product of independent local
//!   states, each advisor owning one factor (state-space reduction).
//! * [`RewardDecomposition`]: every advisor sees the full state and only
//!   the reward is split.
//!
//! The random generators here produce the instance families the analysis
//! and acceptance tests quantify over.

use rand::Rng;

use crate::advisors::{local_agnostic_q, local_egocentric_q, AdvisorError, AdvisorId, AdvisorSpec, Focus, Planning, Projection};
use crate::mdp::{MdpError, Outcome, QFunction, TabularMdp};

/// Product of local MDPs driven by a shared action.
#[derive(Debug, Clone)]
pub struct FactoredMdp {
    locals: Vec<TabularMdp>,
    weights: Vec<f64>,
    projections: Vec<Projection>,
    global: TabularMdp,
}

impl FactoredMdp {
    /// Global reward is `sum_j w_j r_j`; a global state is terminal when
    /// every factor is.
    pub fn new(locals: Vec<TabularMdp>, weights: Vec<f64>) -> Result<Self, MdpError> {
        assert_eq!(locals.len(), weights.len(), "one weight per factor");
        assert!(!locals.is_empty(), "at least one factor");
        let actions = locals[0].action_count();
        let gamma = locals[0].discount();
        assert!(
            locals.iter().all(|l| l.action_count() == actions && l.discount() == gamma),
            "factors must share actions and discount"
        );
        let sizes: Vec<usize> = locals.iter().map(TabularMdp::state_count).collect();
        let total: usize = sizes.iter().product();
        let decode = |mut x: usize| -> Vec<usize> {
            let mut out = vec![0; sizes.len()];
            for j in (0..sizes.len()).rev() {
                out[j] = x % sizes[j];
                x /= sizes[j];
            }
            out
        };
        let projections: Vec<Projection> = (0..locals.len())
            .map(|j| Projection::Table((0..total).map(|x| decode(x)[j]).collect()))
            .collect();

        let mut b = TabularMdp::builder(total, actions, gamma);
        for x in 0..total {
            let parts = decode(x);
            if parts.iter().zip(&locals).all(|(&s, l)| l.is_terminal(s)) {
                b.terminal(x);
                continue;
            }
            for a in 0..actions {
                // cartesian product of local outcomes
                let mut joint: Vec<(usize, f64, f64)> = vec![(0, 1.0, 0.0)];
                for (j, local) in locals.iter().enumerate() {
                    let outs: &[Outcome] = local.outcomes(parts[j], a);
                    let mut grown = Vec::with_capacity(joint.len() * outs.len());
                    for &(idx, p, r) in &joint {
                        for o in outs {
                            grown.push((idx * sizes[j] + o.next, p * o.prob, r + weights[j] * o.reward));
                        }
                    }
                    joint = grown;
                }
                for (next, p, r) in joint {
                    b.outcome(x, a, next, p, r);
                }
            }
        }
        let global = b.build()?;
        Ok(Self { locals, weights, projections, global })
    }

    pub fn global(&self) -> &TabularMdp {
        &self.global
    }

    pub fn locals(&self) -> &[TabularMdp] {
        &self.locals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn projection(&self, advisor: usize) -> &Projection {
        &self.projections[advisor]
    }

    pub fn advisor_count(&self) -> usize {
        self.locals.len()
    }

    pub fn specs(&self, planning: Planning) -> Vec<AdvisorSpec> {
        (0..self.locals.len())
            .map(|j| AdvisorSpec {
                id: AdvisorId::Custom(j),
                focus: Focus::Custom,
                weight: self.weights[j],
                projection: self.projections[j].clone(),
                planning,
                gamma: self.global.discount(),
                active: true,
            })
            .collect()
    }

    /// Converged egocentric table of each factor.
    pub fn egocentric_tables(&self) -> Result<Vec<QFunction>, AdvisorError> {
        self.specs(Planning::Egocentric)
            .iter()
            .zip(&self.locals)
            .map(|(spec, local)| local_egocentric_q(spec, local))
            .collect()
    }

    /// Converged agnostic table of each factor.
    pub fn agnostic_tables(&self, tol: f64) -> Result<Vec<QFunction>, AdvisorError> {
        self.locals.iter().map(|l| local_agnostic_q(l, tol)).collect()
    }

    /// `sum_j w_j Q_j(phi_j(x), a)` over all global states.
    pub fn aggregate(&self, tables: &[QFunction]) -> Result<QFunction, AdvisorError> {
        let n = self.global.state_count();
        let m = self.global.action_count();
        let mut out = QFunction::zeros(n, m);
        for x in 0..n {
            for (j, q) in tables.iter().enumerate() {
                let xj = self.projections[j].project_index(x)?;
                for a in 0..m {
                    out.set(x, a, out.get(x, a) + self.weights[j] * q.get(xj, a));
                }
            }
        }
        Ok(out)
    }
}

/// Full-state advisors: shared transitions, rewards split across advisors.
#[derive(Debug, Clone)]
pub struct RewardDecomposition {
    pub global: TabularMdp,
    pub advisors: Vec<TabularMdp>,
    pub weights: Vec<f64>,
}

fn random_distribution<R: Rng + ?Sized>(rng: &mut R, states: usize, branches: usize) -> Vec<(usize, f64)> {
    let raw: Vec<f64> = (0..branches).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut out: Vec<(usize, f64)> = raw.iter().map(|w| (rng.random_range(0..states), w / total)).collect();
    // put rounding slack on the last branch
    let head: f64 = out[..branches - 1].iter().map(|(_, p)| p).sum();
    out[branches - 1].1 = 1.0 - head;
    out
}

/// Random local MDP with 1-3 branches per `(state, action)`, roughly one
/// terminal state in five, rewards in `[-1, 1]` (half of them zero). With
/// `stay_action`, action 0 is a zero-reward self-loop in every live state.
pub fn random_local_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    states: usize,
    actions: usize,
    gamma: f64,
    stay_action: bool,
) -> Result<TabularMdp, MdpError> {
    let mut b = TabularMdp::builder(states, actions, gamma);
    let mut terminal: Vec<bool> = (0..states).map(|_| rng.random_bool(0.2)).collect();
    if terminal.iter().all(|t| *t) {
        terminal[0] = false;
    }
    for s in 0..states {
        if terminal[s] {
            b.terminal(s);
            continue;
        }
        for a in 0..actions {
            if stay_action && a == 0 {
                b.det(s, 0, s, 0.0);
                continue;
            }
            let branches = rng.random_range(1..=3);
            for (next, p) in random_distribution(rng, states, branches) {
                let r = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(-1.0..1.0) };
                b.outcome(s, a, next, p, r);
            }
        }
    }
    b.build()
}

/// Random factored MDP with 2-5 factors and at most `max_states` global states.
pub fn random_factored<R: Rng + ?Sized>(rng: &mut R, max_states: usize) -> Result<FactoredMdp, MdpError> {
    assert!(max_states >= 4);
    let factors = rng.random_range(2..=5usize).min(max_states.ilog2() as usize);
    let sizes = loop {
        let sizes: Vec<usize> = (0..factors).map(|_| rng.random_range(2..=7)).collect();
        if sizes.iter().product::<usize>() <= max_states {
            break sizes;
        }
    };
    let actions = rng.random_range(2..=4);
    let gamma = rng.random_range(0.1..0.95);
    let stay = rng.random_bool(0.4);
    let locals = sizes
        .iter()
        .map(|&n| random_local_mdp(rng, n, actions, gamma, stay))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = (0..factors).map(|_| rng.random_range(0.25..2.0)).collect();
    FactoredMdp::new(locals, weights)
}

/// Random progressive factor: a chain where every action advances one or
/// two states (same odds for all actions) and rewards at each state lie in
/// `[gamma * c, c]`, so no action is worse than a wasted turn.
pub fn random_progressive_chain<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    actions: usize,
    gamma: f64,
) -> Result<TabularMdp, MdpError> {
    let last = length - 1;
    let mut b = TabularMdp::builder(length, actions, gamma);
    b.terminal(last);
    for s in 0..last {
        let c = rng.random_range(0.0..1.0);
        let p_one = rng.random_range(0.0..=1.0);
        for a in 0..actions {
            let r = rng.random_range(gamma * c..=c);
            let one = s + 1;
            let two = (s + 2).min(last);
            if one == two {
                b.det(s, a, one, r);
            } else {
                b.outcome(s, a, one, p_one, r).outcome(s, a, two, 1.0 - p_one, r);
            }
        }
    }
    b.build()
}

/// Random full-state decomposition with `advisors` reward channels.
pub fn random_reward_decomposition<R: Rng + ?Sized>(
    rng: &mut R,
    states: usize,
    actions: usize,
    advisors: usize,
    gamma: f64,
) -> Result<RewardDecomposition, MdpError> {
    let mut b = TabularMdp::builder(states, actions, gamma);
    let terminal: Vec<bool> = (0..states).map(|s| s > 0 && rng.random_bool(0.1)).collect();
    // (state, action, next, prob, per-advisor rewards)
    let mut rows: Vec<(usize, usize, usize, f64, Vec<f64>)> = Vec::new();
    for s in 0..states {
        if terminal[s] {
            b.terminal(s);
            continue;
        }
        for a in 0..actions {
            let branches = rng.random_range(1..=3).min(states);
            for (next, p) in random_distribution(rng, states, branches) {
                let rs: Vec<f64> = (0..advisors)
                    .map(|_| if rng.random_bool(0.6) { 0.0 } else { rng.random_range(-1.0..1.0) })
                    .collect();
                rows.push((s, a, next, p, rs));
            }
        }
    }
    let weights: Vec<f64> = (0..advisors).map(|_| rng.random_range(0.25..2.0)).collect();
    for (s, a, next, p, rs) in &rows {
        let r = rs.iter().zip(&weights).map(|(r, w)| r * w).sum();
        b.outcome(*s, *a, *next, *p, r);
    }
    let global = b.build()?;
    let advisors = (0..advisors)
        .map(|j| {
            let mut it = rows.iter();
            global.map_rewards(|_, _, _, _| it.next().expect("row per outcome").4[j])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RewardDecomposition { global, advisors, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_evaluation, value_iteration, Policy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_is_valid_and_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f = random_factored(&mut rng, 50).unwrap();
            assert!(f.global().state_count() <= 50);
            assert!((2..=5).contains(&f.advisor_count()));
        }
    }

    #[test]
    fn reward_split_sums_to_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = random_reward_decomposition(&mut rng, 30, 3, 4, 0.8).unwrap();
        for s in 0..30 {
            for a in 0..3 {
                let total: f64 = d.advisors.iter().zip(&d.weights).map(|(m, w)| w * m.expected_reward(s, a)).sum();
                assert!((total - d.global.expected_reward(s, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn agnostic_local_equals_global_on_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_factored(&mut rng, 50).unwrap();
            let local = f.agnostic_tables(1e-12).unwrap();
            let agg = f.aggregate(&local).unwrap();
            let g = f.global();
            let global = policy_evaluation(g, &Policy::uniform(g.state_count(), g.action_count()), 1e-12).unwrap();
            assert!(agg.sup_distance(&global) < 1e-8);
        }
    }

    #[test]
    fn progressive_chain_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let chain = random_progressive_chain(&mut rng, 5, 3, 0.9).unwrap();
        let q = value_iteration(&chain, 1e-12).unwrap();
        for s in 0..5 {
            for a in 0..3 {
                assert!(q.get(s, a) >= 0.9 * q.max(s) - 1e-12);
            }
        }
    }
}
