//! Oracles shared by the integration tests. Everything here is written
//! against the raw transition lists, without the library's solvers.
#![allow(dead_code)]

use madrl::mdp::TabularMdp;

/// Gaussian elimination with partial pivoting; `a` is row-major `n x n`.
pub fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        assert!(a[pivot * n + col].abs() > 1e-14, "singular system");
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    x
}

/// Exact `Q^pi` from the linear system over state-action pairs.
/// `pi[s * m + a]` is the probability of `a` in `s`.
pub fn exact_q(mdp: &TabularMdp, pi: &[f64]) -> Vec<f64> {
    let (n, m, g) = (mdp.state_count(), mdp.action_count(), mdp.discount());
    let size = n * m;
    let mut a = vec![0.0; size * size];
    let mut b = vec![0.0; size];
    for s in 0..n {
        for act in 0..m {
            let row = s * m + act;
            a[row * size + row] += 1.0;
            for o in mdp.outcomes(s, act) {
                b[row] += o.prob * o.reward;
                for a2 in 0..m {
                    a[row * size + o.next * m + a2] -= g * o.prob * pi[o.next * m + a2];
                }
            }
        }
    }
    solve_linear(a, b)
}

/// Optimal Q by exact policy iteration.
pub fn policy_iteration(mdp: &TabularMdp) -> Vec<f64> {
    let (n, m) = (mdp.state_count(), mdp.action_count());
    let mut choice = vec![0usize; n];
    loop {
        let mut pi = vec![0.0; n * m];
        for s in 0..n {
            pi[s * m + choice[s]] = 1.0;
        }
        let q = exact_q(mdp, &pi);
        let mut changed = false;
        for s in 0..n {
            let row = &q[s * m..(s + 1) * m];
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if row[choice[s]] < best - 1e-12 {
                choice[s] = row.iter().position(|&v| v == best).unwrap();
                changed = true;
            }
        }
        if !changed {
            return q;
        }
    }
}

pub fn uniform_pi(mdp: &TabularMdp) -> Vec<f64> {
    let m = mdp.action_count();
    vec![1.0 / m as f64; mdp.state_count() * m]
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// L1 distance on the 5x5 grid.
pub fn manhattan(a: usize, b: usize) -> usize {
    (a / 5).abs_diff(b / 5) + (a % 5).abs_diff(b % 5)
}

/// Held-Karp shortest open tour from `start` through every cell of `stops`.
pub fn held_karp(start: usize, stops: &[usize]) -> usize {
    let k = stops.len();
    if k == 0 {
        return 0;
    }
    let full = 1usize << k;
    let mut dp = vec![usize::MAX; full * k];
    for (i, &c) in stops.iter().enumerate() {
        dp[(1 << i) * k + i] = manhattan(start, c);
    }
    for mask in 1..full {
        for last in 0..k {
            let cur = dp[mask * k + last];
            if cur == usize::MAX || mask & (1 << last) == 0 {
                continue;
            }
            for nxt in 0..k {
                if mask & (1 << nxt) != 0 {
                    continue;
                }
                let m2 = mask | (1 << nxt);
                let cand = cur + manhattan(stops[last], stops[nxt]);
                if cand < dp[m2 * k + nxt] {
                    dp[m2 * k + nxt] = cand;
                }
            }
        }
    }
    (0..k).map(|l| dp[(full - 1) * k + l]).min().unwrap()
}
