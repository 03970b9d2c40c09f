//! Greedy play on the fruit grid driven by a state-value function.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ApproxError;
use crate::env::{fruit_grid_reset, grid_step, Action, FruitGridState};
use crate::targets::TargetKind;

pub const ROLLOUT_STEP_CAP: usize = 200;

/// Step-level reward the value function is assumed to complement: the tour
/// target counts steps, the others count fruits.
fn lookahead_reward(kind: TargetKind, ate: bool) -> f64 {
    match kind {
        TargetKind::Tsp => -1.0,
        _ => {
            if ate {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Moves to the neighbouring cell maximising `reward + value(next)`
/// (lowest action index on ties) until no fruit is left or the cap is hit.
/// Returns the number of steps taken.
pub fn greedy_episode(start: FruitGridState, kind: TargetKind, value: &mut impl FnMut(&FruitGridState) -> f64) -> usize {
    let mut state = start;
    let mut steps = 0;
    while state.fruit_count() > 0 && steps < ROLLOUT_STEP_CAP {
        let mut best: Option<(f64, FruitGridState)> = None;
        for a in Action::ALL {
            if grid_step(state.agent, a) == state.agent {
                continue;
            }
            let (next, ate) = state.step(a);
            let score = lookahead_reward(kind, ate) + value(&next);
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, next));
            }
        }
        state = best.expect("every grid cell has a neighbour").1;
        steps += 1;
    }
    steps
}

/// Mean steps to clear the board over `episodes` fresh resets drawn from
/// one seeded stream.
pub fn greedy_rollout_eval(
    kind: TargetKind,
    episodes: usize,
    seed: u64,
    mut value: impl FnMut(&FruitGridState) -> f64,
) -> Result<f64, ApproxError> {
    if episodes == 0 {
        return Err(ApproxError::NoEpisodes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = (0..episodes).map(|_| greedy_episode(fruit_grid_reset(&mut rng), kind, &mut value)).sum();
    Ok(total as f64 / episodes as f64)
}
