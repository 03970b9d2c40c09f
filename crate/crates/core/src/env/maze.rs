//! Wall-masked grid mazes.
//!
//! Text format, one row per line:
//!
//! ```text
//! #  wall
//! .  corridor
//! P  corridor, agent start (exactly one)
//! G  corridor, ghost spawn (at most two)
//! ```
//!
//! Blank lines and lines starting with `;` are ignored. Grid edges act as walls.

use std::fmt;
use std::path::Path;

use super::EnvError;

/// Agent and ghost moves, in index order N, W, S, E.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    North = 0,
    West = 1,
    South = 2,
    East = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::West, Action::South, Action::East];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::North => (-1, 0),
            Action::West => (0, -1),
            Action::South => (1, 0),
            Action::East => (0, 1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Action::North => 'N',
            Action::West => 'W',
            Action::South => 'S',
            Action::East => 'E',
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

pub const MAX_GHOSTS: usize = 2;

/// A validated maze. Corridor cells are indexed `0..cell_count()` in
/// row-major order; every other index in this crate refers to that order.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeLayout {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    cells: Vec<(usize, usize)>,
    grid_to_cell: Vec<Option<usize>>,
    neighbors: Vec<[usize; 4]>,
    start: usize,
    fruit_cells: Vec<usize>,
    fruit_slot: Vec<Option<usize>>,
    ghost_spawns: Vec<usize>,
}

impl MazeLayout {
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty() && !l.starts_with(';'))
            .collect();
        if rows.is_empty() {
            return Err(EnvError::Maze("empty maze".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut walls = Vec::with_capacity(width * height);
        let mut start = None;
        let mut spawns = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(EnvError::Maze(format!("row {r} has width {} (expected {width})", row.chars().count())));
            }
            for (c, ch) in row.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'P' => {
                        if start.replace((r, c)).is_some() {
                            return Err(EnvError::Maze("more than one start cell `P`".into()));
                        }
                        walls.push(false);
                    }
                    'G' => {
                        spawns.push((r, c));
                        walls.push(false);
                    }
                    other => return Err(EnvError::Maze(format!("unexpected character `{other}` at row {r}, column {c}"))),
                }
            }
        }
        let start = start.ok_or_else(|| EnvError::Maze("missing start cell `P`".into()))?;
        if spawns.len() > MAX_GHOSTS {
            return Err(EnvError::Maze(format!("{} ghost spawns (at most {MAX_GHOSTS})", spawns.len())));
        }
        Self::from_grid(width, height, walls, start, &spawns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Builds a layout from a row-major wall mask.
    pub fn from_grid(
        width: usize,
        height: usize,
        walls: Vec<bool>,
        start: (usize, usize),
        ghost_spawns: &[(usize, usize)],
    ) -> Result<Self, EnvError> {
        assert_eq!(walls.len(), width * height, "wall mask shape");
        let mut grid_to_cell = vec![None; width * height];
        let mut cells = Vec::new();
        for r in 0..height {
            for c in 0..width {
                if !walls[r * width + c] {
                    grid_to_cell[r * width + c] = Some(cells.len());
                    cells.push((r, c));
                }
            }
        }
        let lookup = |(r, c): (usize, usize)| -> Result<usize, EnvError> {
            if r >= height || c >= width {
                return Err(EnvError::Maze(format!("({r}, {c}) outside the grid")));
            }
            grid_to_cell[r * width + c].ok_or_else(|| EnvError::Maze(format!("({r}, {c}) is a wall")))
        };
        let start = lookup(start)?;
        let ghost_spawns = ghost_spawns.iter().map(|&p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
        let neighbors = cells
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| {
                Action::ALL.map(|a| {
                    let (dr, dc) = a.delta();
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr as usize >= height || nc as usize >= width {
                        return i;
                    }
                    grid_to_cell[nr as usize * width + nc as usize].unwrap_or(i)
                })
            })
            .collect::<Vec<_>>();
        let fruit_cells: Vec<usize> = (0..cells.len()).filter(|&i| i != start).collect();
        let mut fruit_slot = vec![None; cells.len()];
        for (slot, &cell) in fruit_cells.iter().enumerate() {
            fruit_slot[cell] = Some(slot);
        }
        let layout = Self {
            width,
            height,
            walls,
            cells,
            grid_to_cell,
            neighbors,
            start,
            fruit_cells,
            fruit_slot,
            ghost_spawns,
        };
        layout.check_connected()?;
        Ok(layout)
    }

    fn check_connected(&self) -> Result<(), EnvError> {
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(cell) = stack.pop() {
            for &n in &self.neighbors[cell] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(cell) => Err(EnvError::Maze(format!("corridor cell {:?} unreachable from start", self.cells[cell]))),
            None => Ok(()),
        }
    }

    /// The 11x11, 76-cell Pac-Boy maze.
    pub fn pacboy() -> Self {
        Self::parse(include_str!("../../mazes/pacboy11.txt")).expect("builtin maze")
    }

    /// 7x7, 37-cell variant for quick runs, ghosts starting in a walled central area.
    pub fn pacboy_small() -> Self {
        Self::parse(include_str!("../../mazes/pacboy7.txt")).expect("builtin maze")
    }

    /// Wall-free `width x height` grid with the start at `(row, col)` and no ghosts.
    pub fn open(width: usize, height: usize, start: (usize, usize)) -> Result<Self, EnvError> {
        Self::from_grid(width, height, vec![false; width * height], start, &[])
    }

    /// Resolves `pacboy11`, `pacboy7`, or a maze file path.
    pub fn builtin_or_file(name: &str) -> Result<Self, EnvError> {
        match name {
            "pacboy11" | "pacboy" => Ok(Self::pacboy()),
            "pacboy7" => Ok(Self::pacboy_small()),
            path => Self::load(path),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        self.walls[row * self.width + col]
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn wall_count(&self) -> usize {
        self.walls.iter().filter(|w| **w).count()
    }

    pub fn start_cell(&self) -> usize {
        self.start
    }

    pub fn fruit_cells(&self) -> &[usize] {
        &self.fruit_cells
    }

    /// Fruit slot of a corridor cell, `None` for the start cell.
    pub fn fruit_slot(&self, cell: usize) -> Option<usize> {
        self.fruit_slot[cell]
    }

    pub fn ghost_spawns(&self) -> &[usize] {
        &self.ghost_spawns
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        self.cells[cell]
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.height || col >= self.width {
            return None;
        }
        self.grid_to_cell[row * self.width + col]
    }

    /// Cell reached by `action`; blocked moves stay in place.
    pub fn step(&self, cell: usize, action: Action) -> usize {
        self.neighbors[cell][action.index()]
    }

    /// Actions that actually leave `cell`.
    pub fn moving_actions(&self, cell: usize) -> Vec<usize> {
        (0..Action::COUNT).filter(|&a| self.neighbors[cell][a] != cell).collect()
    }

    /// Summary line used by loaders and the CLI.
    pub fn describe(&self) -> String {
        format!(
            "{}x{} maze: {} corridor cells, {} walls, {} fruit cells, {} ghost spawns",
            self.width,
            self.height,
            self.cell_count(),
            self.wall_count(),
            self.fruit_cells.len(),
            self.ghost_spawns.len()
        )
    }
}
