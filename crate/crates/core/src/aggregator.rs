//! Linear aggregation of advisor recommendations and action selection.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::advisors::AdvisorId;
use crate::mdp::{argmax_lowest, TieRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("advisor {id} sent {got} action values, expected {expected}")]
    Arity { id: AdvisorId, got: usize, expected: usize },
    #[error("advisor {0} sent a non-finite action value")]
    NonFinite(AdvisorId),
}

/// Local action values of one advisor at its current local state.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub advisor: AdvisorId,
    pub q: Vec<f64>,
}

/// `q_sigma[a] = sum_j w_j q_j[a]`. Advisors missing from `weights` get
/// weight 1; inactive advisors are simply left out of `recs`.
///
/// An empty list yields the zero vector of length `actions`.
pub fn aggregate(
    recs: &[Recommendation],
    weights: &HashMap<AdvisorId, f64>,
    actions: usize,
) -> Result<Vec<f64>, AggregateError> {
    let mut out = vec![0.0; actions];
    for rec in recs {
        if rec.q.len() != actions {
            return Err(AggregateError::Arity { id: rec.advisor, got: rec.q.len(), expected: actions });
        }
        if rec.q.iter().any(|v| !v.is_finite()) {
            return Err(AggregateError::NonFinite(rec.advisor));
        }
        let w = weights.get(&rec.advisor).copied().unwrap_or(1.0);
        accumulate(&mut out, w, &rec.q);
    }
    Ok(out)
}

/// `out += weight * q`.
#[inline]
pub fn accumulate(out: &mut [f64], weight: f64, q: &[f64]) {
    for (o, v) in out.iter_mut().zip(q) {
        *o += weight * v;
    }
}

/// Greedy action; `UniformRandom` draws among exact ties.
pub fn greedy_action<R: Rng + ?Sized>(q_sigma: &[f64], tie_rule: TieRule, rng: &mut R) -> usize {
    match tie_rule {
        TieRule::LowestIndex => argmax_lowest(q_sigma),
        TieRule::UniformRandom => {
            let best = q_sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties = q_sigma.iter().filter(|&&v| v == best).count();
            if ties == 1 {
                return argmax_lowest(q_sigma);
            }
            let pick = rng.random_range(0..ties);
            q_sigma
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == best)
                .nth(pick)
                .map(|(a, _)| a)
                .expect("tie index in range")
        }
    }
}

/// Epsilon-greedy: uniform over all actions with probability `epsilon`,
/// greedy (per `tie_rule`) otherwise.
pub fn select_action<R: Rng + ?Sized>(q_sigma: &[f64], epsilon: f64, tie_rule: TieRule, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q_sigma.len())
    } else {
        greedy_action(q_sigma, tie_rule, rng)
    }
}
