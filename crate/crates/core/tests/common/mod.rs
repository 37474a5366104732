#![allow(dead_code)]

use std::collections::VecDeque;

use aimlab_core::mdp::GridSpec;
use aimlab_core::TabularGoalMdp;

/// Room grid neighbours written out by hand, independent of the grid builder:
/// 10x10, room over rows/cols 5..=9, doorway between (9,4) and (9,5).
pub fn room_neighbours(cell: (usize, usize)) -> Vec<(usize, usize)> {
    let (r, c) = cell;
    let in_room = |r: usize, c: usize| r >= 5 && c >= 5;
    let mut out = Vec::new();
    let candidates = [
        (r + 1 < 10).then(|| (r + 1, c)),
        (r > 0).then(|| (r - 1, c)),
        (c + 1 < 10).then(|| (r, c + 1)),
        (c > 0).then(|| (r, c - 1)),
    ];
    for (nr, nc) in candidates.into_iter().flatten() {
        let crosses = in_room(r, c) != in_room(nr, nc);
        let doorway = r == 9 && nr == 9 && ((c == 4 && nc == 5) || (c == 5 && nc == 4));
        if !crosses || doorway {
            out.push((nr, nc));
        }
    }
    out
}

/// Breadth-first distances to `goal` over an undirected neighbour function.
pub fn bfs_to(
    goal: (usize, usize),
    neighbours: impl Fn((usize, usize)) -> Vec<(usize, usize)>,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; 100];
    dist[goal.0 * 10 + goal.1] = 0.0;
    let mut queue = VecDeque::from([goal]);
    while let Some(cell) = queue.pop_front() {
        let d = dist[cell.0 * 10 + cell.1];
        for n in neighbours(cell) {
            let i = n.0 * 10 + n.1;
            if dist[i].is_infinite() {
                dist[i] = d + 1.0;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Closed-form shortest distance on the 10x10 torus.
pub fn torus_distance(a: (usize, usize), b: (usize, usize)) -> f64 {
    let wrap = |x: usize, y: usize| {
        let d = x.abs_diff(y);
        d.min(10 - d)
    };
    (wrap(a.0, b.0) + wrap(a.1, b.1)) as f64
}

/// Plain discounted value iteration on the full chain (absorbing state
/// included) for reward `r(s, a, s')`. Returns `Q[s * n_actions + a]`.
pub fn q_value_iteration(
    mdp: &TabularGoalMdp,
    goal: usize,
    reward: impl Fn(usize, usize, usize) -> f64,
    tol: f64,
) -> Vec<f64> {
    let slot = mdp.goal_slot(goal).unwrap();
    let (n, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let mut q = vec![0.0; n * na];
    loop {
        let v: Vec<f64> = (0..n)
            .map(|s| {
                q[s * na..(s + 1) * na]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut delta: f64 = 0.0;
        for s in 0..n {
            for a in 0..na {
                let updated: f64 = mdp
                    .outcomes(slot, s, a)
                    .iter()
                    .map(|&(sp, p)| p * (reward(s, a, sp) + gamma * v[sp]))
                    .sum();
                delta = delta.max((updated - q[s * na + a]).abs());
                q[s * na + a] = updated;
            }
        }
        if delta < tol {
            return q;
        }
    }
}

/// Actions within `tol` of the best in one row.
pub fn greedy_set(row: &[f64], tol: f64) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..row.len()).filter(|&a| row[a] >= best - tol).collect()
}

/// Pearson chi-square statistic of observed counts against probabilities.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

/// Open one-row corridor of `len` cells, start at the left end and goal at
/// the right end.
pub fn corridor(len: usize) -> GridSpec {
    GridSpec {
        width: len,
        height: 1,
        walls: Vec::new(),
        wrap: false,
        wind_columns: Vec::new(),
        wind_up_success: 0.6,
        wind_side_slip: 0.4,
        start_cell: (0, 0),
        goal_cell: (0, len - 1),
        gamma: 0.99,
    }
}
