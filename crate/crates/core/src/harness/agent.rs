//! Pac-Boy controllers: the multi-advisor agent and the linear baseline.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::HarnessError;
use crate::advisors::{AdvisorId, AdvisorPool, AdvisorSpec, Focus, LocalTransition, Planning, Projection, QTable};
use crate::aggregator::accumulate;
use crate::approx::{pacboy_feature_dim, pacboy_features, LinearQModel};
use crate::env::{Action, MazeLayout, PacBoyState, StepOutcome};

/// Anything that scores the four moves at a global state.
pub trait Controller {
    fn action_values(&self, state: &PacBoyState, out: &mut [f64]);
}

/// `r + N(0, sigma^2)`; exactly `r` when `sigma` is zero.
pub fn inject_reward_noise<R: Rng + ?Sized>(r: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return r;
    }
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    r + normal.sample(rng)
}

/// One tabular advisor per fruit slot (local state: agent cell) and one per
/// ghost (local state: agent and ghost cells); the ghost advisors share a table.
#[derive(Debug, Clone)]
pub struct MultiAdvisorAgent {
    layout: Arc<MazeLayout>,
    planning: Planning,
    gamma: f64,
    pool: AdvisorPool,
    fruit: Vec<usize>,
    ghost: Vec<usize>,
}

impl MultiAdvisorAgent {
    pub fn new(layout: Arc<MazeLayout>, planning: Planning, gamma: f64) -> Self {
        let n = layout.cell_count();
        let mut pool = AdvisorPool::new();
        let spec = |id, focus, projection| AdvisorSpec { id, focus, weight: 1.0, projection, planning, gamma, active: true };
        let fruit = layout
            .fruit_cells()
            .iter()
            .enumerate()
            .map(|(slot, &cell)| {
                pool.add(spec(AdvisorId::Fruit(slot), Focus::Fruit { slot, cell }, Projection::AgentCell), n, Action::COUNT)
            })
            .collect();
        let mut ghost: Vec<usize> = Vec::new();
        for g in 0..layout.ghost_spawns().len() {
            let s = spec(AdvisorId::Ghost(g), Focus::Ghost { index: g }, Projection::AgentAndGhost { ghost: g });
            let idx = match ghost.first() {
                Some(&first) => pool.add_shared(s, first),
                None => pool.add(s, n * n, Action::COUNT),
            };
            ghost.push(idx);
        }
        Self { layout, planning, gamma, pool, fruit, ghost }
    }

    pub fn planning(&self) -> Planning {
        self.planning
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pool(&self) -> &AdvisorPool {
        &self.pool
    }

    /// Table of the advisor for fruit slot `slot`.
    pub fn fruit_table(&self, slot: usize) -> &QTable {
        self.pool.table(self.fruit[slot])
    }

    /// The table shared by the ghost advisors, if there are ghosts.
    pub fn ghost_table(&self) -> Option<&QTable> {
        self.ghost.first().map(|&g| self.pool.table(g))
    }

    fn local(&self, advisor: usize, state: &PacBoyState) -> usize {
        self.pool.spec(advisor).projection.project_pacboy(state, self.layout.cell_count())
    }

    /// TD updates for every advisor active at `state` (fruit still present;
    /// ghosts always). `greedy_next` is the aggregator's greedy action at the
    /// next state, required for empathic planning.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        state: &PacBoyState,
        action: usize,
        outcome: &StepOutcome,
        greedy_next: Option<usize>,
        alpha: f64,
        noise_sigma: f64,
        noise_rng: &mut R,
    ) -> Result<(), HarnessError> {
        let next = &outcome.next_state;
        for slot in 0..self.fruit.len() {
            if !state.fruits[slot] {
                continue;
            }
            let adv = self.fruit[slot];
            let id = AdvisorId::Fruit(slot);
            let t = LocalTransition {
                state: state.agent,
                action,
                reward: inject_reward_noise(outcome.reward_for(id), noise_sigma, noise_rng),
                next_state: next.agent,
                done: !next.fruits[slot],
                greedy_action: greedy_next,
            };
            self.pool.update(adv, &t, alpha)?;
        }
        for g in 0..self.ghost.len() {
            let adv = self.ghost[g];
            let t = LocalTransition {
                state: self.local(adv, state),
                action,
                reward: inject_reward_noise(outcome.reward_for(AdvisorId::Ghost(g)), noise_sigma, noise_rng),
                next_state: self.local(adv, next),
                done: false,
                greedy_action: greedy_next,
            };
            self.pool.update(adv, &t, alpha)?;
        }
        Ok(())
    }

    /// Writes `fruit<slot>.csv` per fruit slot and `ghost.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        for slot in 0..self.fruit.len() {
            self.fruit_table(slot).write_csv(fs::File::create(dir.join(format!("fruit{slot}.csv")))?)?;
        }
        if let Some(t) = self.ghost_table() {
            t.write_csv(fs::File::create(dir.join("ghost.csv"))?)?;
        }
        Ok(())
    }

    pub fn load(layout: Arc<MazeLayout>, planning: Planning, gamma: f64, dir: &Path) -> Result<Self, HarnessError> {
        let mut agent = Self::new(layout, planning, gamma);
        let n = agent.layout.cell_count();
        let mut files: Vec<(usize, String, usize)> =
            (0..agent.fruit.len()).map(|s| (agent.pool.table_index(agent.fruit[s]), format!("fruit{s}.csv"), n)).collect();
        if let Some(&g) = agent.ghost.first() {
            files.push((agent.pool.table_index(g), "ghost.csv".into(), n * n));
        }
        for (table, name, states) in files {
            let loaded = QTable::read_csv(fs::File::open(dir.join(&name))?, states, Action::COUNT)?;
            *agent.pool.tables_mut()[table].q_mut() = loaded.q().clone();
        }
        Ok(agent)
    }
}

impl Controller for MultiAdvisorAgent {
    fn action_values(&self, state: &PacBoyState, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (slot, &adv) in self.fruit.iter().enumerate() {
            if state.fruits[slot] {
                accumulate(out, 1.0, self.pool.table(adv).q().row(state.agent));
            }
        }
        for &adv in &self.ghost {
            let x = self.local(adv, state);
            accumulate(out, 1.0, self.pool.table(adv).q().row(x));
        }
    }
}

/// Q-learning on the global reward with one linear model over the
/// concatenated one-hot advisor states.
#[derive(Debug, Clone)]
pub struct LinearAgent {
    layout: Arc<MazeLayout>,
    gamma: f64,
    model: LinearQModel,
}

impl LinearAgent {
    pub fn new(layout: Arc<MazeLayout>, gamma: f64) -> Self {
        let dim = pacboy_feature_dim(&layout);
        Self { layout, gamma, model: LinearQModel::new(dim, Action::COUNT) }
    }

    pub fn model(&self) -> &LinearQModel {
        &self.model
    }

    /// One update on the noisy global reward. The transition is terminal
    /// only when the last fruit was eaten.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        state: &PacBoyState,
        action: usize,
        outcome: &StepOutcome,
        alpha: f64,
        noise_sigma: f64,
        noise_rng: &mut R,
    ) -> Result<(), HarnessError> {
        let mut x = Vec::new();
        let mut x_next = Vec::new();
        pacboy_features(&self.layout, state, &mut x);
        pacboy_features(&self.layout, &outcome.next_state, &mut x_next);
        let r = inject_reward_noise(outcome.global_reward, noise_sigma, noise_rng);
        let terminal = outcome.next_state.fruit_count() == 0;
        self.model.update(&x, action, r, (!terminal).then_some(&x_next[..]), alpha, self.gamma);
        if !self.model.weights(action).iter().all(|w| w.is_finite()) {
            return Err(HarnessError::Diverged);
        }
        Ok(())
    }

    /// `action,feature,value` rows for every non-zero weight.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("linear.csv")).map_err(|e| HarnessError::Csv(e.to_string()))?;
        w.write_record(["action", "feature", "value"]).map_err(|e| HarnessError::Csv(e.to_string()))?;
        for a in 0..self.model.action_count() {
            for (i, v) in self.model.weights(a).iter().enumerate().filter(|(_, v)| **v != 0.0) {
                w.write_record([a.to_string(), i.to_string(), v.to_string()]).map_err(|e| HarnessError::Csv(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(layout: Arc<MazeLayout>, gamma: f64, dir: &Path) -> Result<Self, HarnessError> {
        let mut agent = Self::new(layout, gamma);
        let mut weights: Vec<Vec<f64>> = (0..Action::COUNT).map(|a| agent.model.weights(a).to_vec()).collect();
        let mut rdr = csv::Reader::from_path(dir.join("linear.csv")).map_err(|e| HarnessError::Csv(e.to_string()))?;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| HarnessError::Csv(e.to_string()))?;
            let bad = || HarnessError::Csv(format!("bad row {rec:?}"));
            let a: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let i: usize = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let v: f64 = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            *weights.get_mut(a).and_then(|w| w.get_mut(i)).ok_or_else(bad)? = v;
        }
        agent.model = LinearQModel::from_weights(weights);
        Ok(agent)
    }
}

impl Controller for LinearAgent {
    fn action_values(&self, state: &PacBoyState, out: &mut [f64]) {
        let mut x = Vec::new();
        pacboy_features(&self.layout, state, &mut x);
        self.model.q_values(&x, out);
    }
}

/// A trained controller of either kind.
#[derive(Debug, Clone)]
pub enum TrainedAgent {
    Advisors(MultiAdvisorAgent),
    Linear(LinearAgent),
}

impl Controller for TrainedAgent {
    fn action_values(&self, state: &PacBoyState, out: &mut [f64]) {
        match self {
            TrainedAgent::Advisors(a) => a.action_values(state, out),
            TrainedAgent::Linear(a) => a.action_values(state, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(inject_reward_noise(-10.0, 0.0, &mut rng), -10.0);
    }

    #[test]
    fn ghosts_share_one_table() {
        let agent = MultiAdvisorAgent::new(Arc::new(MazeLayout::pacboy()), Planning::Egocentric, 0.4);
        assert_eq!(agent.pool().len(), 77);
        assert_eq!(agent.pool().tables().len(), 76);
        assert_eq!(agent.ghost_table().unwrap().q().state_count(), 76 * 76);
    }
}
