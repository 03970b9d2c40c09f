//! Analytic attractor scenarios.

use super::maze::MazeLayout;
use super::pacboy::PacBoyState;
use crate::mdp::{MdpError, TabularMdp};

/// Start state of the two-goal toy MDP.
pub const X0: usize = 0;
/// Stay-put action of the toy MDP.
pub const A0: usize = 0;

/// Two-goal toy problem: from `x0`, `a0` loops with reward 0, `a1` ends in
/// `x1` with reward `r1`, `a2` ends in `x2` with reward `r2`.
#[derive(Debug, Clone)]
pub struct ToyAttractor {
    pub global: TabularMdp,
    /// Advisor 1 sees only `r1`, advisor 2 only `r2`.
    pub advisors: [TabularMdp; 2],
    pub r1: f64,
    pub r2: f64,
}

fn toy_mdp(r1: f64, r2: f64, gamma: f64) -> Result<TabularMdp, MdpError> {
    let mut b = TabularMdp::builder(3, 3, gamma);
    b.det(X0, A0, X0, 0.0).det(X0, 1, 1, r1).det(X0, 2, 2, r2).terminal(1).terminal(2);
    b.build()
}

pub fn toy_attractor_mdp(r1: f64, r2: f64, gamma: f64) -> Result<ToyAttractor, MdpError> {
    assert!(r1 > 0.0 && r2 > 0.0, "toy rewards must be positive");
    Ok(ToyAttractor {
        global: toy_mdp(r1, r2, gamma)?,
        advisors: [toy_mdp(r1, 0.0, gamma)?, toy_mdp(0.0, r2, gamma)?],
        r1,
        r2,
    })
}

/// Open 5x5 grid with the agent on the bottom row and three fruits two
/// steps away to the north, west and east. South is the grid edge.
pub fn three_fruit_scenario() -> (MazeLayout, PacBoyState) {
    let layout = MazeLayout::open(5, 5, (4, 2)).expect("open grid");
    let mut fruits = vec![false; layout.fruit_cells().len()];
    for (r, c) in [(2, 2), (4, 0), (4, 4)] {
        let cell = layout.cell_at(r, c).expect("in grid");
        fruits[layout.fruit_slot(cell).expect("not the start")] = true;
    }
    let state = PacBoyState { agent: layout.start_cell(), fruits, ghosts: Vec::new(), step: 0 };
    (layout, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Action;
    use crate::mdp::value_iteration;

    #[test]
    fn toy_optimal_values() {
        let toy = toy_attractor_mdp(1.0, 1.0, 0.5).unwrap();
        let q = value_iteration(&toy.global, 1e-12).unwrap();
        assert!((q.get(X0, 1) - 1.0).abs() < 1e-12);
        assert!((q.get(X0, 2) - 1.0).abs() < 1e-12);
        assert!((q.get(X0, A0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_fruit_geometry() {
        let (layout, state) = three_fruit_scenario();
        assert_eq!(state.fruit_count(), 3);
        assert!(state.ghosts.is_empty());
        assert_eq!(layout.step(state.agent, Action::South), state.agent);
        for (slot, &cell) in layout.fruit_cells().iter().enumerate() {
            if state.fruits[slot] {
                let (r, c) = layout.coords(cell);
                let (ar, ac) = layout.coords(state.agent);
                assert_eq!(r.abs_diff(ar) + c.abs_diff(ac), 2);
            }
        }
    }
}
