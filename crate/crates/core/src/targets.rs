//! Ground-truth value targets on the 5x5 fruit grid and the 50-bit input
//! encoding used by the regression experiment.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{fruit_grid_reset, grid_distance, FruitGridState, GRID_CELLS};

/// Fruit count above which the permutation targets refuse to enumerate.
pub const MAX_BRUTE_FORCE_FRUITS: usize = 10;
pub const ENCODING_BITS: usize = 2 * GRID_CELLS;
/// Default dataset size.
pub const DATASET_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("{0} fruits is too many for exhaustive enumeration (max {MAX_BRUTE_FORCE_FRUITS})")]
    TooManyFruits(usize),
    #[error("bad dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which regression target a model is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    Tsp,
    Rl,
    EgoSum,
    EgoVec,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] = [TargetKind::Tsp, TargetKind::Rl, TargetKind::EgoSum, TargetKind::EgoVec];

    /// Network output width.
    pub fn output_dim(self) -> usize {
        match self {
            TargetKind::EgoVec => GRID_CELLS,
            _ => 1,
        }
    }
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsp" => Ok(TargetKind::Tsp),
            "rl" => Ok(TargetKind::Rl),
            "ego_sum" => Ok(TargetKind::EgoSum),
            "ego_vec" => Ok(TargetKind::EgoVec),
            other => Err(format!("unknown target `{other}` (tsp, rl, ego_sum, ego_vec)")),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::Tsp => "tsp",
            TargetKind::Rl => "rl",
            TargetKind::EgoSum => "ego_sum",
            TargetKind::EgoVec => "ego_vec",
        })
    }
}

/// 25 fruit bits then a 25-way one-hot agent cell.
pub fn encode(state: &FruitGridState) -> [f64; ENCODING_BITS] {
    let mut out = [0.0; ENCODING_BITS];
    for c in state.fruit_cells() {
        out[c] = 1.0;
    }
    out[GRID_CELLS + state.agent] = 1.0;
    out
}

/// Inverse of [`encode`]; `None` unless exactly one agent bit is set and
/// every entry is 0 or 1.
pub fn decode(bits: &[f64]) -> Option<FruitGridState> {
    if bits.len() != ENCODING_BITS || bits.iter().any(|&b| b != 0.0 && b != 1.0) {
        return None;
    }
    let agents: Vec<usize> = (0..GRID_CELLS).filter(|&c| bits[GRID_CELLS + c] == 1.0).collect();
    if agents.len() != 1 {
        return None;
    }
    let fruits: Vec<usize> = (0..GRID_CELLS).filter(|&c| bits[c] == 1.0).collect();
    Some(FruitGridState::new(agents[0], &fruits))
}

fn fruits_checked(state: &FruitGridState) -> Result<Vec<usize>, TargetError> {
    let fruits: Vec<usize> = state.fruit_cells().collect();
    if fruits.len() > MAX_BRUTE_FORCE_FRUITS {
        return Err(TargetError::TooManyFruits(fruits.len()));
    }
    Ok(fruits)
}

/// Calls `visit` once per visiting order with the cumulative distance
/// travelled when each fruit is reached.
fn for_each_order(agent: usize, fruits: &[usize], visit: &mut impl FnMut(&[usize])) {
    fn go(at: usize, left: &mut Vec<usize>, reached: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if left.is_empty() {
            visit(reached);
            return;
        }
        let travelled = reached.last().copied().unwrap_or(0);
        for i in 0..left.len() {
            let next = left.remove(i);
            reached.push(travelled + grid_distance(at, next));
            go(next, left, reached, visit);
            reached.pop();
            left.insert(i, next);
        }
    }
    go(agent, &mut fruits.to_vec(), &mut Vec::with_capacity(fruits.len()), visit);
}

/// Negated length of the shortest L1 tour from the agent through every fruit.
pub fn tsp_target(state: &FruitGridState) -> Result<f64, TargetError> {
    let fruits = fruits_checked(state)?;
    let mut best = usize::MAX;
    for_each_order(state.agent, &fruits, &mut |reached| {
        best = best.min(reached.last().copied().unwrap_or(0));
    });
    Ok(0.0 - best as f64)
}

/// Best discounted fruit count over visiting orders: `max_sigma sum_i gamma^(D_i)`
/// with `D_i` the distance travelled when the i-th fruit is reached.
pub fn rl_target(state: &FruitGridState, gamma: f64) -> Result<f64, TargetError> {
    let fruits = fruits_checked(state)?;
    let mut best = f64::NEG_INFINITY;
    for_each_order(state.agent, &fruits, &mut |reached| {
        best = best.max(reached.iter().map(|&d| gamma.powi(d as i32)).sum());
    });
    Ok(best)
}

/// Per-cell `gamma^d(agent, cell)` where a fruit lies, and its sum.
pub fn ego_target(state: &FruitGridState, gamma: f64) -> (f64, [f64; GRID_CELLS]) {
    let mut vec = [0.0; GRID_CELLS];
    for c in state.fruit_cells() {
        vec[c] = gamma.powi(grid_distance(state.agent, c) as i32);
    }
    (vec.iter().sum(), vec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSample {
    pub state: FruitGridState,
    pub y_tsp: f64,
    pub y_rl: f64,
    pub y_ego_sum: f64,
    pub y_ego_vec: [f64; GRID_CELLS],
}

impl TargetSample {
    pub fn new(state: FruitGridState, gamma: f64) -> Result<Self, TargetError> {
        let (y_ego_sum, y_ego_vec) = ego_target(&state, gamma);
        Ok(Self { state, y_tsp: tsp_target(&state)?, y_rl: rl_target(&state, gamma)?, y_ego_sum, y_ego_vec })
    }

    pub fn encoding(&self) -> [f64; ENCODING_BITS] {
        encode(&self.state)
    }

    /// Regression target for `kind`.
    pub fn target(&self, kind: TargetKind) -> Vec<f64> {
        match kind {
            TargetKind::Tsp => vec![self.y_tsp],
            TargetKind::Rl => vec![self.y_rl],
            TargetKind::EgoSum => vec![self.y_ego_sum],
            TargetKind::EgoVec => self.y_ego_vec.to_vec(),
        }
    }

    /// Scalar value the target stands for (the vector target is summed).
    pub fn value(&self, kind: TargetKind) -> f64 {
        match kind {
            TargetKind::Tsp => self.y_tsp,
            TargetKind::Rl => self.y_rl,
            TargetKind::EgoSum | TargetKind::EgoVec => self.y_ego_sum,
        }
    }
}

/// `samples` states from consecutive [`fruit_grid_reset`] draws of one seeded stream.
pub fn generate_dataset(samples: usize, gamma: f64, seed: u64) -> Result<Vec<TargetSample>, TargetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| TargetSample::new(fruit_grid_reset(&mut rng), gamma)).collect()
}

fn dataset_header() -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((0..GRID_CELLS).map(|i| format!("fruit{i}")));
    h.extend((0..GRID_CELLS).map(|i| format!("agent{i}")));
    h.extend(["y_tsp", "y_rl", "y_ego_sum"].map(String::from));
    h.extend((0..GRID_CELLS).map(|i| format!("ego{i}")));
    h
}

/// One row per sample: `id`, 50 encoding bits, the three scalar targets,
/// then the 25 vector entries (79 columns).
pub fn write_dataset_csv<W: Write>(samples: &[TargetSample], out: W) -> Result<(), TargetError> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| TargetError::Dataset(e.to_string());
    w.write_record(dataset_header()).map_err(map)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.encoding().iter().map(|b| (*b as u8).to_string()));
        row.extend([s.y_tsp, s.y_rl, s.y_ego_sum].iter().map(f64::to_string));
        row.extend(s.y_ego_vec.iter().map(f64::to_string));
        w.write_record(&row).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<TargetSample>, TargetError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| TargetError::Dataset(e.to_string()))?;
    if header.iter().ne(dataset_header().iter().map(String::as_str)) {
        return Err(TargetError::Dataset("unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TargetError::Dataset(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|_| TargetError::Dataset(format!("bad number `{f}`"))))
            .collect::<Result<_, _>>()?;
        let state = decode(&vals[..ENCODING_BITS]).ok_or_else(|| TargetError::Dataset("bad encoding".into()))?;
        let mut y_ego_vec = [0.0; GRID_CELLS];
        y_ego_vec.copy_from_slice(&vals[ENCODING_BITS + 3..]);
        out.push(TargetSample {
            state,
            y_tsp: vals[ENCODING_BITS],
            y_rl: vals[ENCODING_BITS + 1],
            y_ego_sum: vals[ENCODING_BITS + 2],
            y_ego_vec,
        });
    }
    Ok(out)
}
