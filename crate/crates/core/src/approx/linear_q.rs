//! Linear Q-learning over concatenated one-hot advisor features.

use crate::env::{MazeLayout, PacBoyState};

/// Sparse binary features and one weight vector per action.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQModel {
    dim: usize,
    weights: Vec<Vec<f64>>,
}

impl LinearQModel {
    pub fn new(dim: usize, actions: usize) -> Self {
        Self { dim, weights: vec![vec![0.0; dim]; actions] }
    }

    /// One weight vector per action, all of the same length.
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Self {
        let dim = weights.first().map_or(0, Vec::len);
        assert!(weights.iter().all(|w| w.len() == dim), "ragged weights");
        Self { dim, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, action: usize) -> &[f64] {
        &self.weights[action]
    }

    /// Sum of the active weights for `action`.
    pub fn q(&self, features: &[usize], action: usize) -> f64 {
        let w = &self.weights[action];
        features.iter().map(|&i| w[i]).sum()
    }

    pub fn q_values(&self, features: &[usize], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.q(features, a);
        }
    }

    /// Semi-gradient Q-learning: every active weight of `action` moves by
    /// `alpha * delta`. `next_features = None` marks a terminal transition.
    pub fn update(&mut self, features: &[usize], action: usize, reward: f64, next_features: Option<&[usize]>, alpha: f64, gamma: f64) {
        let boot = match next_features {
            Some(next) => (0..self.weights.len()).map(|a| self.q(next, a)).fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        };
        let target = reward + if next_features.is_some() { gamma * boot } else { 0.0 };
        let delta = target - self.q(features, action);
        let w = &mut self.weights[action];
        for &i in features {
            w[i] += alpha * delta;
        }
    }
}

/// Feature dimension for a layout: one block of `cells` per fruit slot and
/// one block of `cells^2` per ghost.
pub fn pacboy_feature_dim(layout: &MazeLayout) -> usize {
    let n = layout.cell_count();
    layout.fruit_cells().len() * n + layout.ghost_spawns().len() * n * n
}

/// Active indices: one per remaining fruit (`slot * cells + agent`) and one
/// per ghost (`fruit_block + g * cells^2 + agent * cells + ghost`).
pub fn pacboy_features(layout: &MazeLayout, state: &PacBoyState, out: &mut Vec<usize>) {
    out.clear();
    let n = layout.cell_count();
    for (slot, &present) in state.fruits.iter().enumerate() {
        if present {
            out.push(slot * n + state.agent);
        }
    }
    let base = layout.fruit_cells().len() * n;
    for (g, &ghost) in state.ghosts.iter().enumerate() {
        out.push(base + g * n * n + state.agent * n + ghost);
    }
}
