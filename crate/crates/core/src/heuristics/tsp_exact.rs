//! Exact and approximate closed-tour solvers over point sets.

use crate::error::{Error, Result};
use crate::instances::{distance, Coord};

/// Largest point count the subset dynamic program accepts.
pub const EXACT_TSP_MAX: usize = 15;

/// Optimal closed tour by dynamic programming over subsets, with the
/// tour anchored at point 0. Returns the visiting order (starting at 0)
/// and the closed-tour length. `O(n^2 * 2^n)`; capped at
/// [`EXACT_TSP_MAX`] points.
pub fn tsp_exact(points: &[Coord]) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Config("tsp needs at least 2 points".into()));
    }
    if n > EXACT_TSP_MAX {
        return Err(Error::SizeLimit { what: "exact tsp", n, max: EXACT_TSP_MAX });
    }
    if n == 2 {
        return Ok((vec![0, 1], 2.0 * distance(points[0], points[1])));
    }

    let m = n - 1; // points 1..n relative to the anchor
    let full = 1usize << m;
    let d = |a: usize, b: usize| distance(points[a], points[b]);
    // dp[mask][j]: shortest path 0 -> (mask of points 1..) -> point j+1.
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![usize::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = d(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            let rest = (!mask) & (full - 1);
            let mut bits = rest;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let next = mask | (1 << k);
                let cand = cur + d(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j;
                }
            }
        }
    }
    let mut best = (f64::INFINITY, 0usize);
    for j in 0..m {
        let total = dp[(full - 1) * m + j] + d(j + 1, 0);
        if total < best.0 {
            best = (total, j);
        }
    }
    let mut order = Vec::with_capacity(n);
    let (mut mask, mut j) = (full - 1, best.1);
    while j != usize::MAX {
        order.push(j + 1);
        let pj = parent[mask * m + j];
        mask &= !(1 << j);
        j = pj;
    }
    order.push(0);
    order.reverse();
    Ok((order, best.0))
}

/// Nearest-neighbor construction from point 0 followed by
/// first-improvement 2-opt to a local optimum. Fallback for point sets
/// beyond [`EXACT_TSP_MAX`].
pub fn nn_two_opt(points: &[Coord]) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Config("tsp needs at least 2 points".into()));
    }
    let d = |a: usize, b: usize| distance(points[a], points[b]);
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    order.push(0);
    used[0] = true;
    for _ in 1..n {
        let last = *order.last().unwrap();
        let next = (0..n)
            .filter(|&k| !used[k])
            .min_by(|&a, &b| d(last, a).total_cmp(&d(last, b)))
            .unwrap();
        order.push(next);
        used[next] = true;
    }

    let mut improved = true;
    while improved {
        improved = false;
        'outer: for i in 0..n - 1 {
            for k in i + 2..n {
                if i == 0 && k == n - 1 {
                    continue; // same edge pair on a closed tour
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, e) = (order[k], order[(k + 1) % n]);
                if d(a, c) + d(b, e) + 1e-12 < d(a, b) + d(c, e) {
                    order[i + 1..=k].reverse();
                    improved = true;
                    continue 'outer;
                }
            }
        }
    }
    let len: f64 = (0..n).map(|i| d(order[i], order[(i + 1) % n])).sum();
    Ok((order, len))
}
