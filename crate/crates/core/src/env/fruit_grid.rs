//! The 5x5 wall-free fruit grid used by the value-regression experiment.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maze::Action;

pub const GRID_SIDE: usize = 5;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;
pub const START_FRUITS: usize = 5;

/// Agent cell and fruit bitset, cells row-major `0..25`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FruitGridState {
    pub agent: usize,
    pub fruits: u32,
}

impl FruitGridState {
    pub fn new(agent: usize, fruit_cells: &[usize]) -> Self {
        assert!(agent < GRID_CELLS);
        let fruits = fruit_cells.iter().fold(0u32, |acc, &c| {
            assert!(c < GRID_CELLS);
            acc | (1 << c)
        });
        Self { agent, fruits }
    }

    pub fn has_fruit(&self, cell: usize) -> bool {
        self.fruits & (1 << cell) != 0
    }

    pub fn fruit_count(&self) -> usize {
        self.fruits.count_ones() as usize
    }

    pub fn fruit_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..GRID_CELLS).filter(|&c| self.has_fruit(c))
    }

    /// Moves the agent (edges block) and eats any fruit on arrival.
    /// Returns the new state and whether a fruit was eaten.
    pub fn step(&self, action: Action) -> (Self, bool) {
        let cell = grid_step(self.agent, action);
        let ate = self.has_fruit(cell);
        (Self { agent: cell, fruits: self.fruits & !(1 << cell) }, ate)
    }
}

pub fn coords(cell: usize) -> (usize, usize) {
    (cell / GRID_SIDE, cell % GRID_SIDE)
}

pub fn l1(a: usize, b: usize) -> usize {
    let ((ar, ac), (br, bc)) = (coords(a), coords(b));
    ar.abs_diff(br) + ac.abs_diff(bc)
}

pub fn grid_step(cell: usize, action: Action) -> usize {
    let (r, c) = coords(cell);
    let (dr, dc) = action.delta();
    let (nr, nc) = (r as isize + dr, c as isize + dc);
    if nr < 0 || nc < 0 || nr as usize >= GRID_SIDE || nc as usize >= GRID_SIDE {
        cell
    } else {
        nr as usize * GRID_SIDE + nc as usize
    }
}

/// Agent uniform over the grid, five distinct fruits uniform over the other 24 cells.
pub fn fruit_grid_reset<R: Rng + ?Sized>(rng: &mut R) -> FruitGridState {
    let agent = rng.random_range(0..GRID_CELLS);
    let mut fruits = 0u32;
    for i in index::sample(rng, GRID_CELLS - 1, START_FRUITS) {
        let cell = if i >= agent { i + 1 } else { i };
        fruits |= 1 << cell;
    }
    FruitGridState { agent, fruits }
}

pub fn fruit_grid_reset_seeded(seed: u64) -> FruitGridState {
    fruit_grid_reset(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let s = fruit_grid_reset(&mut rng);
            assert_eq!(s.fruit_count(), START_FRUITS);
            assert!(!s.has_fruit(s.agent));
        }
        assert_eq!(fruit_grid_reset_seeded(4), fruit_grid_reset_seeded(4));
    }

    #[test]
    fn moves() {
        assert_eq!(grid_step(0, Action::North), 0);
        assert_eq!(grid_step(0, Action::East), 1);
        assert_eq!(grid_step(0, Action::South), 5);
        assert_eq!(grid_step(24, Action::East), 24);
        let s = FruitGridState::new(0, &[1]);
        let (n, ate) = s.step(Action::East);
        assert!(ate);
        assert_eq!(n.fruit_count(), 0);
        assert_eq!(l1(0, 24), 8);
    }
}
