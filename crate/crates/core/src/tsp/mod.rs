//! Open-ended tour ordering: nearest-neighbour construction followed by
//! asymmetric 2-opt and Or-opt local search with seeded restarts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TspError {
    #[error("tour infeasible: no finite cost from {from} to {to}")]
    Infeasible { from: usize, to: usize },
    #[error("invalid tour problem: {0}")]
    Invalid(String),
}

/// Directed cost matrix with a fixed start and free return to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TourProblem {
    n: usize,
    cost: Vec<f64>,
    start: usize,
}

impl TourProblem {
    /// Builds a problem from a square matrix whose column `start` is zero.
    pub fn new(cost: Vec<Vec<f64>>, start: usize) -> Result<Self, TspError> {
        let n = cost.len();
        if n == 0 || start >= n {
            return Err(TspError::Invalid(format!("start {start} out of range for n = {n}")));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in cost.iter().enumerate() {
            if row.len() != n {
                return Err(TspError::Invalid(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &c) in row.iter().enumerate() {
                if c < 0.0 || c.is_nan() {
                    return Err(TspError::Invalid(format!("cost[{i}][{j}] = {c}")));
                }
                if (i == j || j == start) && c != 0.0 {
                    return Err(TspError::Invalid(format!("cost[{i}][{j}] must be zero")));
                }
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { n, cost: flat, start })
    }

    /// Like `new`, but first zeroes the diagonal and every edge back to `start`.
    pub fn open_ended(mut cost: Vec<Vec<f64>>, start: usize) -> Result<Self, TspError> {
        for (i, row) in cost.iter_mut().enumerate() {
            if let Some(c) = row.get_mut(i) {
                *c = 0.0;
            }
            if let Some(c) = row.get_mut(start) {
                *c = 0.0;
            }
        }
        Self::new(cost, start)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn start(&self) -> usize {
        self.start
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// Open-path cost of `order`, excluding the free return edge.
    pub fn path_cost(&self, order: &[usize]) -> f64 {
        order.windows(2).map(|w| self.cost(w[0], w[1])).sum()
    }

    /// Writes the matrix and a tour as plain text.
    pub fn dump<W: Write>(&self, tour: &[usize], mut out: W) -> std::io::Result<()> {
        writeln!(out, "n {} start {}", self.n, self.start)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.cost(i, j))).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        let t: Vec<String> = tour.iter().map(|v| v.to_string()).collect();
        writeln!(out, "tour {}", t.join(" "))?;
        writeln!(out, "cost {}", self.path_cost(tour))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub seed: u64,
    /// Independent local-search runs; the first is seeded by nearest neighbour.
    pub restarts: usize,
    /// Wall-clock safety cap. Results depend on timing only if it triggers.
    pub time_budget: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 16,
            time_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Every vertex exactly once, beginning with the start vertex.
    pub order: Vec<usize>,
    /// Open-path cost.
    pub cost: f64,
}

const EPS: f64 = 1e-10;

pub fn solve(problem: &TourProblem, options: &SolverOptions) -> Result<Tour, TspError> {
    let n = problem.n;
    for i in 0..n {
        for j in 0..n {
            if !problem.cost(i, j).is_finite() {
                return Err(TspError::Infeasible { from: i, to: j });
            }
        }
    }
    let began = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<Tour> = None;
    for run in 0..options.restarts.max(1) {
        if run > 0 && options.time_budget.is_some_and(|b| began.elapsed() > b) {
            break;
        }
        let mut order = if run == 0 {
            nearest_neighbour(problem)
        } else {
            let mut rest: Vec<usize> = (0..n).filter(|&v| v != problem.start).collect();
            rest.shuffle(&mut rng);
            std::iter::once(problem.start).chain(rest).collect()
        };
        local_search(problem, &mut order);
        let cost = problem.path_cost(&order);
        if best.as_ref().is_none_or(|b| cost < b.cost - EPS) {
            best = Some(Tour { order, cost });
        }
    }
    Ok(best.expect("at least one run"))
}

fn nearest_neighbour(p: &TourProblem) -> Vec<usize> {
    let mut used = vec![false; p.n];
    let mut order = vec![p.start];
    used[p.start] = true;
    let mut cur = p.start;
    while order.len() < p.n {
        let next = (0..p.n)
            .filter(|&v| !used[v])
            .min_by(|&a, &b| p.cost(cur, a).total_cmp(&p.cost(cur, b)).then(a.cmp(&b)))
            .unwrap();
        used[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

fn local_search(p: &TourProblem, order: &mut Vec<usize>) {
    loop {
        let a = two_opt_pass(p, order);
        let b = or_opt_pass(p, order);
        if !a && !b {
            break;
        }
    }
}

/// Forward and backward cumulative costs along `order` treated as a cycle.
fn prefix_sums(p: &TourProblem, order: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = order.len();
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    for k in 1..n {
        fwd[k] = fwd[k - 1] + p.cost(order[k - 1], order[k]);
        bwd[k] = bwd[k - 1] + p.cost(order[k], order[k - 1]);
    }
    (fwd, bwd)
}

/// Change in cycle cost from reversing `order[i..=j]`, `1 <= i < j < n`.
pub(crate) fn two_opt_delta(p: &TourProblem, order: &[usize], fwd: &[f64], bwd: &[f64], i: usize, j: usize) -> f64 {
    let n = order.len();
    let before = order[i - 1];
    let after = order[(j + 1) % n];
    let old = p.cost(before, order[i]) + (fwd[j] - fwd[i]) + p.cost(order[j], after);
    let new = p.cost(before, order[j]) + (bwd[j] - bwd[i]) + p.cost(order[i], after);
    new - old
}

fn two_opt_pass(p: &TourProblem, order: &mut [usize]) -> bool {
    let n = order.len();
    let mut improved_any = false;
    loop {
        let (fwd, bwd) = prefix_sums(p, order);
        let mut best = (-EPS, 0, 0);
        for i in 1..n {
            for j in i + 1..n {
                let d = two_opt_delta(p, order, &fwd, &bwd, i, j);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        if best.1 == 0 {
            return improved_any;
        }
        order[best.1..=best.2].reverse();
        improved_any = true;
    }
}

/// Moves segments of one to three vertices, optionally reversed. Applies the
/// first improving move found and returns whether any move was made.
fn or_opt_pass(p: &TourProblem, order: &mut Vec<usize>) -> bool {
    let n = order.len();
    let mut improved_any = false;
    'outer: loop {
        let (fwd, bwd) = prefix_sums(p, order);
        for len in 1..=3usize {
            for i in 1..n {
                let j = i + len - 1;
                if j >= n {
                    break;
                }
                let prev = order[i - 1];
                let next = order[(j + 1) % n];
                let (s, e) = (order[i], order[j]);
                let removed = p.cost(prev, s) + p.cost(e, next) - p.cost(prev, next);
                let inner_fwd = fwd[j] - fwd[i];
                let inner_bwd = bwd[j] - bwd[i];
                // Insert between order[k] and order[k+1] in the reduced cycle.
                for k in 0..n {
                    if k >= i - 1 && k <= j {
                        continue;
                    }
                    let a = order[k];
                    let b = order[(k + 1) % n];
                    let base = p.cost(a, b);
                    let keep = p.cost(a, s) + p.cost(e, b) - base;
                    let flip = p.cost(a, e) + p.cost(s, b) - base + (inner_bwd - inner_fwd);
                    let (gain, reverse) = if flip < keep - EPS { (flip, true) } else { (keep, false) };
                    if gain - removed < -EPS {
                        let mut seg: Vec<usize> = order.drain(i..=j).collect();
                        if reverse {
                            seg.reverse();
                        }
                        let at = if k < i { k + 1 } else { k + 1 - len };
                        order.splice(at..at, seg);
                        improved_any = true;
                        continue 'outer;
                    }
                }
            }
        }
        return improved_any;
    }
}

/// True if no single segment reversal lowers the cost of `order`.
pub fn is_two_opt_optimal(p: &TourProblem, order: &[usize]) -> bool {
    let n = order.len();
    let (fwd, bwd) = prefix_sums(p, order);
    (1..n).all(|i| (i + 1..n).all(|j| two_opt_delta(p, order, &fwd, &bwd, i, j) >= -EPS))
}

#[cfg(test)]
mod tests;
