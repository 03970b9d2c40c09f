//! The Pac-Boy fruit-collection game.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maze::{Action, MazeLayout};
use super::EnvError;
use crate::advisors::AdvisorId;

pub const FRUIT_REWARD: f64 = 1.0;
pub const GHOST_PENALTY: f64 = -10.0;
pub const DEFAULT_MAX_STEPS: u32 = 300;
pub const FRUIT_PROBABILITY: f64 = 0.5;

/// Global game state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacBoyState {
    pub agent: usize,
    /// One bit per fruit slot of the layout.
    pub fruits: Vec<bool>,
    pub ghosts: Vec<usize>,
    pub step: u32,
}

impl PacBoyState {
    pub fn fruit_count(&self) -> usize {
        self.fruits.iter().filter(|f| **f).count()
    }

    pub fn has_fruit(&self, slot: usize) -> bool {
        self.fruits[slot]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: PacBoyState,
    pub global_reward: f64,
    /// Non-zero advisor rewards; their sum is `global_reward`.
    pub advisor_rewards: Vec<(AdvisorId, f64)>,
    pub done: bool,
    /// Fruit slots eaten this step.
    pub eaten: Vec<usize>,
    /// Ghost indices that collided with the agent this step.
    pub collisions: Vec<usize>,
}

impl StepOutcome {
    pub fn reward_for(&self, id: AdvisorId) -> f64 {
        self.advisor_rewards.iter().filter(|(a, _)| *a == id).map(|(_, r)| r).sum()
    }
}

/// Game rules bound to a layout.
#[derive(Debug, Clone)]
pub struct PacBoy {
    layout: Arc<MazeLayout>,
    max_steps: u32,
}

impl PacBoy {
    pub fn new(layout: MazeLayout) -> Self {
        Self::with_max_steps(Arc::new(layout), DEFAULT_MAX_STEPS)
    }

    pub fn with_max_steps(layout: Arc<MazeLayout>, max_steps: u32) -> Self {
        Self { layout, max_steps }
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn shared_layout(&self) -> Arc<MazeLayout> {
        Arc::clone(&self.layout)
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    /// Fresh episode: each fruit slot filled with probability 1/2.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> PacBoyState {
        let fruits = (0..self.layout.fruit_cells().len())
            .map(|_| rng.random_bool(FRUIT_PROBABILITY))
            .collect();
        PacBoyState {
            agent: self.layout.start_cell(),
            fruits,
            ghosts: self.layout.ghost_spawns().to_vec(),
            step: 0,
        }
    }

    pub fn reset_seeded(&self, seed: u64) -> PacBoyState {
        self.reset(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn is_done(&self, state: &PacBoyState) -> bool {
        state.step >= self.max_steps || state.fruit_count() == 0
    }

    /// Advances one turn. The agent and ghosts move simultaneously; a
    /// collision is any ghost sharing the agent's cell after the move.
    pub fn step<R: Rng + ?Sized>(&self, state: &PacBoyState, action: Action, rng: &mut R) -> Result<StepOutcome, EnvError> {
        if self.is_done(state) {
            return Err(EnvError::EpisodeOver);
        }
        let layout = &*self.layout;
        let mut next = state.clone();
        next.agent = layout.step(state.agent, action);
        for ghost in next.ghosts.iter_mut() {
            let dir = Action::ALL[rng.random_range(0..Action::COUNT)];
            *ghost = layout.step(*ghost, dir);
        }
        next.step += 1;

        let mut advisor_rewards = Vec::new();
        let mut eaten = Vec::new();
        if let Some(slot) = layout.fruit_slot(next.agent) {
            if next.fruits[slot] {
                next.fruits[slot] = false;
                eaten.push(slot);
                advisor_rewards.push((AdvisorId::Fruit(slot), FRUIT_REWARD));
            }
        }
        let collisions: Vec<usize> = (0..next.ghosts.len()).filter(|&g| next.ghosts[g] == next.agent).collect();
        for &g in &collisions {
            advisor_rewards.push((AdvisorId::Ghost(g), GHOST_PENALTY));
        }
        let global_reward = advisor_rewards.iter().map(|(_, r)| r).sum();
        let done = self.is_done(&next);
        Ok(StepOutcome { next_state: next, global_reward, advisor_rewards, done, eaten, collisions })
    }

    /// ASCII frame: `#` wall, `.` corridor, `o` fruit, `P` agent, `G` ghost, `X` ghost on agent.
    pub fn render(&self, state: &PacBoyState) -> String {
        let layout = &*self.layout;
        let mut out = String::with_capacity((layout.width() + 1) * layout.height());
        for r in 0..layout.height() {
            for c in 0..layout.width() {
                let ch = match layout.cell_at(r, c) {
                    None => '#',
                    Some(cell) => {
                        let ghost = state.ghosts.contains(&cell);
                        if cell == state.agent {
                            if ghost {
                                'X'
                            } else {
                                'P'
                            }
                        } else if ghost {
                            'G'
                        } else if layout.fruit_slot(cell).is_some_and(|s| state.fruits[s]) {
                            'o'
                        } else {
                            '.'
                        }
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}
