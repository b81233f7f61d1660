//! Wasserstein-2 transport between equal-size point clouds.
//!
//! Exact mode solves the assignment problem on squared Euclidean ground cost
//! with the O(m³) augmenting-path method (potentials + Dijkstra rows), capped
//! at 2048 points. Sliced mode is a heuristic: sort both clouds along random
//! directions, lift each 1-D sorting to an ambient matching, and keep the
//! cheapest. Every heuristic matching is feasible, so the sliced estimate is
//! an upper bound on the exact cost.

use super::MetricsError;
use crate::rng::RandomStream;
use crate::sphere::sample_uniform_sphere;
use serde::{Deserialize, Serialize};

/// Exact solves above this size are refused; use sliced mode instead.
pub const EXACT_SIZE_LIMIT: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum W2Mode {
    /// Optimal assignment; no matching at all beats the returned one.
    Exact,
    /// Best-of-`projections` sorted-projection matchings (upper-biased).
    Sliced { projections: usize, seed: u64 },
}

/// A matching between two clouds and its mean squared displacement.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportPlanResult {
    /// Mean of matched squared Euclidean distances under `matching`.
    pub cost: f64,
    /// `matching[i]` is the index in `b` assigned to point `i` of `a`.
    pub matching: Vec<usize>,
    /// Sliced mode only: mean cost across all tested projections (the
    /// returned matching is the cheapest of them).
    pub projection_mean_cost: Option<f64>,
}

impl TransportPlanResult {
    /// The W2 value: root of the mean matched squared distance.
    pub fn w2(&self) -> f64 {
        self.cost.sqrt()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assignment by shortest augmenting paths with potentials; `cost` is a
/// row-major `m x m` matrix. Returns the column matched to each row.
pub(crate) fn solve_assignment(cost: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(cost.len(), m * m);
    // 1-indexed arrays with a virtual column 0, after the classical
    // formulation; p[j] is the row currently matched to column j.
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * m..i0 * m];
            for j in 1..=m {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; m];
    for j in 1..=m {
        if p[j] != 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// W2 between two equal-size clouds of `n`-dimensional points (row-major).
pub fn wasserstein_estimate(
    a: &[f64],
    b: &[f64],
    n: usize,
    mode: W2Mode,
) -> Result<TransportPlanResult, MetricsError> {
    if n == 0 || a.len() % n != 0 || b.len() % n != 0 {
        return Err(MetricsError::SizeMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let m = a.len() / n;
    if m == 0 || b.len() / n != m {
        return Err(MetricsError::SizeMismatch {
            a: a.len() / n,
            b: b.len() / n,
        });
    }
    fn slice(cloud: &[f64], i: usize, n: usize) -> &[f64] {
        &cloud[i * n..(i + 1) * n]
    }
    let mean_cost = |matching: &[usize]| -> f64 {
        let total: f64 = matching
            .iter()
            .enumerate()
            .map(|(i, &j)| sq_dist(slice(a, i, n), slice(b, j, n)))
            .sum();
        total / m as f64
    };

    match mode {
        W2Mode::Exact => {
            if m > EXACT_SIZE_LIMIT {
                return Err(MetricsError::ExactSizeLimit {
                    max: EXACT_SIZE_LIMIT,
                    got: m,
                });
            }
            let mut cost = vec![0.0f64; m * m];
            for i in 0..m {
                for j in 0..m {
                    cost[i * m + j] = sq_dist(slice(a, i, n), slice(b, j, n));
                }
            }
            let matching = solve_assignment(&cost, m);
            Ok(TransportPlanResult {
                cost: mean_cost(&matching),
                matching,
                projection_mean_cost: None,
            })
        }
        W2Mode::Sliced { projections, seed } => {
            if projections == 0 {
                return Err(MetricsError::InvalidParameter(
                    "sliced mode needs at least one projection".into(),
                ));
            }
            let mut rng = RandomStream::new(seed, 0);
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut cost_sum = 0.0;
            let mut proj_a = vec![0.0f64; m];
            let mut proj_b = vec![0.0f64; m];
            for _ in 0..projections {
                let dir = sample_uniform_sphere(n, &mut rng).expect("n >= 2");
                let d = dir.coords();
                for i in 0..m {
                    proj_a[i] = slice(a, i, n).iter().zip(d).map(|(x, w)| x * w).sum();
                    proj_b[i] = slice(b, i, n).iter().zip(d).map(|(x, w)| x * w).sum();
                }
                let mut order_a: Vec<usize> = (0..m).collect();
                let mut order_b: Vec<usize> = (0..m).collect();
                order_a.sort_by(|&i, &j| proj_a[i].total_cmp(&proj_a[j]));
                order_b.sort_by(|&i, &j| proj_b[i].total_cmp(&proj_b[j]));
                let mut matching = vec![0usize; m];
                for r in 0..m {
                    matching[order_a[r]] = order_b[r];
                }
                let c = mean_cost(&matching);
                cost_sum += c;
                if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
                    best = Some((c, matching));
                }
            }
            let (cost, matching) = best.expect("projections >= 1");
            Ok(TransportPlanResult {
                cost,
                matching,
                projection_mean_cost: Some(cost_sum / projections as f64),
            })
        }
    }
}
