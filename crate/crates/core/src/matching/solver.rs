use std::cmp::Ordering;
use std::time::{Duration, Instant};

use super::problem::{MatchProblem, MatchResult};
use crate::error::{Error, Result};

const PRUNE_SLACK: f64 = 1e-9;
const CLOCK_EVERY: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveLimits {
    /// Maximum `n1 * n2`.
    pub size_cap: usize,
    pub timeout: Option<Duration>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self { size_cap: 400, timeout: None }
    }
}

/// Search statistics of one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub expansions: u64,
    pub leaves: u64,
}

/// Exact minimizer of the reduced objective by depth-first branch and bound
/// over node assignments. Among optimal solutions the assignment vector
/// `(f(0), f(1), ...)` that is lexicographically smallest wins, with deletion
/// ordered after every target node.
pub fn solve(p: &MatchProblem, limits: &SolveLimits) -> Result<MatchResult> {
    solve_with_stats(p, limits).map(|(r, _)| r)
}

pub fn solve_with_stats(p: &MatchProblem, limits: &SolveLimits) -> Result<(MatchResult, SolveStats)> {
    let pairs = p.n1() * p.n2();
    if pairs > limits.size_cap {
        return Err(Error::SizeCap { pairs, cap: limits.size_cap });
    }
    let mut order: Vec<usize> = (0..p.n1()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(p.src_neighbors(i).len()), i));
    let mut rank = vec![0; p.n1()];
    order.iter().enumerate().for_each(|(r, &i)| rank[i] = r);

    let all_delete = vec![None; p.n1()];
    let mut search = Search {
        p,
        order,
        rank,
        assign: all_delete.clone(),
        used: vec![false; p.n2()],
        best_j: p.objective(&all_delete, &[]),
        best: all_delete,
        constant: p.deletion_total(),
        stats: SolveStats::default(),
        start: Instant::now(),
        timeout: limits.timeout,
    };
    search.dfs(0, 0.0)?;
    let result = MatchResult::from_assignment(p, &search.best);
    Ok((result, search.stats))
}

struct Search<'a> {
    p: &'a MatchProblem,
    order: Vec<usize>,
    rank: Vec<usize>,
    assign: Vec<Option<usize>>,
    used: Vec<bool>,
    best: Vec<Option<usize>>,
    best_j: f64,
    constant: f64,
    stats: SolveStats,
    start: Instant,
    timeout: Option<Duration>,
}

impl Search<'_> {
    fn dfs(&mut self, depth: usize, partial: f64) -> Result<()> {
        self.stats.expansions += 1;
        if self.stats.expansions % CLOCK_EVERY == 0 {
            if let Some(limit) = self.timeout {
                let elapsed = self.start.elapsed();
                if elapsed > limit {
                    return Err(Error::Timeout { elapsed_ms: elapsed.as_millis() });
                }
            }
        }
        if depth == self.order.len() {
            self.stats.leaves += 1;
            self.offer_leaf();
            return Ok(());
        }
        if partial + self.constant + self.bound(depth) > self.best_j + PRUNE_SLACK {
            return Ok(());
        }
        let i = self.order[depth];
        let mut options: Vec<(f64, Option<usize>)> = (0..self.p.n2())
            .filter(|&k| !self.used[k])
            .map(|k| (self.local_value(i, k), Some(k)))
            .collect();
        options.push((0.0, None));
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| option_key(a.1).cmp(&option_key(b.1))));
        for (value, choice) in options {
            if let Some(k) = choice {
                self.used[k] = true;
            }
            self.assign[i] = choice;
            let r = self.dfs(depth + 1, partial + value);
            self.assign[i] = None;
            if let Some(k) = choice {
                self.used[k] = false;
            }
            r?;
        }
        Ok(())
    }

    /// Contribution of mapping `i` to `k` given the nodes already assigned.
    fn local_value(&self, i: usize, k: usize) -> f64 {
        let p = self.p;
        let mut v = p.node_cost(i, k) - p.node_delete(i);
        for &(j, e) in p.src_neighbors(i) {
            if let Some(l) = self.assign[j] {
                if p.dst_has_edge(k, l) {
                    v += p.edge_credit(e).min(0.0);
                }
            }
        }
        v
    }

    /// Admissible lower bound on the contribution of unassigned nodes. An
    /// edge between two unassigned nodes is charged to the one assigned later.
    fn bound(&self, depth: usize) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        let mut pending: Vec<f64> = Vec::new();
        for &i in &self.order[depth..] {
            pending.clear();
            for &(j, e) in p.src_neighbors(i) {
                if self.assign[j].is_none() && self.rank[j] < self.rank[i] && self.rank[j] >= depth {
                    pending.push(p.edge_credit(e).min(0.0));
                }
            }
            pending.sort_by(f64::total_cmp);
            let mut best = 0.0f64;
            for k in (0..p.n2()).filter(|&k| !self.used[k]) {
                let mut v = self.local_value(i, k);
                v += pending.iter().take(p.dst_degree(k)).sum::<f64>();
                best = best.min(v);
            }
            total += best;
        }
        total
    }

    fn offer_leaf(&mut self) {
        let y = self.p.optimal_edges(&self.assign);
        let j = self.p.objective(&self.assign, &y);
        let better = match j.total_cmp(&self.best_j) {
            Ordering::Less => true,
            Ordering::Equal => lex_less(&self.assign, &self.best),
            Ordering::Greater => false,
        };
        if better {
            self.best_j = j;
            self.best.clone_from(&self.assign);
        }
    }
}

fn option_key(o: Option<usize>) -> usize {
    o.unwrap_or(usize::MAX)
}

pub(crate) fn lex_less(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    a.iter().map(|&o| option_key(o)).lt(b.iter().map(|&o| option_key(o)))
}
