//! Concrete tasks: Pac-Boy, the 5x5 fruit grid and the attractor scenarios.

mod fruit_grid;
mod maze;
mod pacboy;
mod toy;

use thiserror::Error;

pub use fruit_grid::{
    coords as grid_coords, fruit_grid_reset, fruit_grid_reset_seeded, grid_step, l1 as grid_distance, FruitGridState,
    GRID_CELLS, GRID_SIDE, START_FRUITS,
};
pub use maze::{Action, MazeLayout, MAX_GHOSTS};
pub use pacboy::{
    PacBoy, PacBoyState, StepOutcome, DEFAULT_MAX_STEPS, FRUIT_PROBABILITY, FRUIT_REWARD, GHOST_PENALTY,
};
pub use toy::{three_fruit_scenario, toy_attractor_mdp, ToyAttractor, A0, X0};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid maze: {0}")]
    Maze(String),
    #[error("{0}")]
    Io(String),
    #[error("step called on a finished episode")]
    EpisodeOver,
}
