use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{cosine_distance, SegmentGraph};

/// Error-tolerant subgraph matching instance between a source graph with
/// `n1` nodes and a target graph with `n2` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchProblem {
    n1: usize,
    n2: usize,
    /// Row-major `n1 x n2`.
    node_cost: Vec<f64>,
    node_delete: Vec<f64>,
    src_edges: Vec<(usize, usize)>,
    edge_delete: Vec<f64>,
    edge_subst: f64,
    dst_edges: Vec<(usize, usize)>,
    dst_adj: Vec<bool>,
    dst_degree: Vec<usize>,
    src_adj: Vec<Vec<(usize, usize)>>,
}

impl MatchProblem {
    /// Edges are unordered and stored as `(min, max)`; `edge_delete[e]`
    /// belongs to `src_edges[e]`.
    pub fn new(
        node_cost: Vec<Vec<f64>>,
        node_delete: Vec<f64>,
        src_edges: Vec<(usize, usize)>,
        edge_delete: Vec<f64>,
        n2: usize,
        dst_edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n1 = node_cost.len();
        if node_delete.len() != n1 {
            return Err(Error::DimensionMismatch { expected: n1, found: node_delete.len() });
        }
        if edge_delete.len() != src_edges.len() {
            return Err(Error::DimensionMismatch { expected: src_edges.len(), found: edge_delete.len() });
        }
        let mut flat = Vec::with_capacity(n1 * n2);
        for row in &node_cost {
            if row.len() != n2 {
                return Err(Error::DimensionMismatch { expected: n2, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        let costs_ok = flat.iter().chain(&node_delete).chain(&edge_delete).all(|c| c.is_finite() && *c >= 0.0);
        if !costs_ok {
            return Err(Error::NonFinite("match costs must be finite and non-negative"));
        }
        let src_edges = canonical_edges(src_edges, n1, "source")?;
        let dst_edges = canonical_edges(dst_edges, n2, "target")?;
        let mut dst_adj = vec![false; n2 * n2];
        let mut dst_degree = vec![0; n2];
        for &(k, l) in &dst_edges {
            dst_adj[k * n2 + l] = true;
            dst_adj[l * n2 + k] = true;
            dst_degree[k] += 1;
            dst_degree[l] += 1;
        }
        let mut src_adj = vec![Vec::new(); n1];
        for (e, &(i, j)) in src_edges.iter().enumerate() {
            src_adj[i].push((j, e));
            src_adj[j].push((i, e));
        }
        Ok(Self { n1, n2, node_cost: flat, node_delete, src_edges, edge_delete, edge_subst: 0.0, dst_edges, dst_adj, dst_degree, src_adj })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn node_cost(&self, i: usize, k: usize) -> f64 {
        self.node_cost[i * self.n2 + k]
    }

    pub fn node_delete(&self, i: usize) -> f64 {
        self.node_delete[i]
    }

    pub fn src_edges(&self) -> &[(usize, usize)] {
        &self.src_edges
    }

    pub fn edge_delete(&self, e: usize) -> f64 {
        self.edge_delete[e]
    }

    pub fn edge_subst(&self) -> f64 {
        self.edge_subst
    }

    pub fn dst_edges(&self) -> &[(usize, usize)] {
        &self.dst_edges
    }

    pub fn dst_has_edge(&self, k: usize, l: usize) -> bool {
        self.dst_adj[k * self.n2 + l]
    }

    pub fn dst_degree(&self, k: usize) -> usize {
        self.dst_degree[k]
    }

    /// `(neighbor, edge index)` pairs of source node `i`.
    pub fn src_neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.src_adj[i]
    }

    /// Credit of mapping source edge `e` onto a target edge.
    pub fn edge_credit(&self, e: usize) -> f64 {
        self.edge_subst - self.edge_delete[e]
    }

    /// Objective of deleting everything.
    pub fn deletion_total(&self) -> f64 {
        self.node_delete.iter().sum::<f64>() + self.edge_delete.iter().sum::<f64>()
    }

    /// Edge mappings implied by a node assignment: a source edge is mapped
    /// exactly when both endpoints land on a target edge and mapping it pays.
    pub fn optimal_edges(&self, assign: &[Option<usize>]) -> Vec<((usize, usize), (usize, usize))> {
        self.src_edges
            .iter()
            .enumerate()
            .filter_map(|(e, &(i, j))| match (assign[i], assign[j]) {
                (Some(k), Some(l)) if self.dst_has_edge(k, l) && self.edge_credit(e) < 0.0 => Some(((i, j), (k, l))),
                _ => None,
            })
            .collect()
    }

    /// Objective value, summed element by element: each source node adds its
    /// match or deletion cost in index order, then each source edge likewise.
    pub fn objective(&self, assign: &[Option<usize>], y: &[((usize, usize), (usize, usize))]) -> f64 {
        let mut mapped = vec![false; self.src_edges.len()];
        for ((i, j), _) in y {
            mapped[self.edge_index(*i, *j).expect("y references a source edge")] = true;
        }
        let mut total = 0.0;
        for (i, a) in assign.iter().enumerate() {
            total += match *a {
                Some(k) => self.node_cost(i, k),
                None => self.node_delete[i],
            };
        }
        for (e, m) in mapped.iter().enumerate() {
            total += if *m { self.edge_subst } else { self.edge_delete[e] };
        }
        total
    }

    /// Reduced form: `Σ_x (c(i→k) − c(i→ε)) + Σ_y (c(ij→kl) − c(ij→ε))`
    /// plus the constant `Σ c(i→ε) + Σ c(ij→ε)`.
    pub fn reduced_objective(&self, assign: &[Option<usize>], y: &[((usize, usize), (usize, usize))]) -> f64 {
        let mut j = 0.0;
        for (i, a) in assign.iter().enumerate() {
            if let Some(k) = *a {
                j += self.node_cost(i, k) - self.node_delete[i];
            }
        }
        for ((i, jn), _) in y {
            let e = self.edge_index(*i, *jn).expect("y references a source edge");
            j += self.edge_credit(e);
        }
        j + self.node_delete.iter().sum::<f64>() + self.edge_delete.iter().sum::<f64>()
    }

    /// Objective with explicit deletion variables:
    /// `Σ x c(i→k) + Σ α c(i→ε) + Σ y c(ij→kl) + Σ β c(ij→ε)`,
    /// where `α_i = 1 − Σ_k x_ik` and `β_ij = 1 − Σ_kl y_ij,kl`.
    pub fn full_objective(&self, assign: &[Option<usize>], y: &[((usize, usize), (usize, usize))]) -> f64 {
        let mut j = 0.0;
        for (i, a) in assign.iter().enumerate() {
            let alpha = match *a {
                Some(k) => {
                    j += self.node_cost(i, k);
                    0.0
                }
                None => 1.0,
            };
            j += alpha * self.node_delete[i];
        }
        for (e, &(a, b)) in self.src_edges.iter().enumerate() {
            let mapped = y.iter().filter(|((i, jn), _)| (*i, *jn) == (a, b) || (*jn, *i) == (a, b)).count() as f64;
            j += mapped * self.edge_subst + (1.0 - mapped) * self.edge_delete[e];
        }
        j
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.src_edges.binary_search(&key).ok()
    }
}

fn canonical_edges(edges: Vec<(usize, usize)>, n: usize, side: &str) -> Result<Vec<(usize, usize)>> {
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
    for (a, b) in edges {
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidGraph(format!("{side} edge ({a},{b}) invalid for {n} nodes")));
        }
        out.push((a.min(b), a.max(b)));
    }
    out.sort_unstable();
    if out.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidGraph(format!("duplicate {side} edge")));
    }
    Ok(out)
}

/// Node costs are cosine distances; deletion costs are constants.
pub fn build_problem(g1: &SegmentGraph, g2: &SegmentGraph, eps_node: f64, eps_edge: f64) -> Result<MatchProblem> {
    let costs = g1
        .nodes()
        .iter()
        .map(|a| g2.nodes().iter().map(|b| cosine_distance(&a.feature, &b.feature)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    MatchProblem::new(
        costs,
        vec![eps_node; g1.node_count()],
        g1.edges().iter().copied().collect(),
        vec![eps_edge; g1.edge_count()],
        g2.node_count(),
        g2.edges().iter().copied().collect(),
    )
}

/// Solution of one matching instance in component-local indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Matched node pairs `(i, k)` in increasing `i`.
    pub x: Vec<(usize, usize)>,
    /// Matched edge pairs `((i, j), (k, l))` with `k` the image of `i`.
    pub y: Vec<((usize, usize), (usize, usize))>,
    #[serde(rename = "J")]
    pub objective: f64,
}

impl MatchResult {
    pub fn from_assignment(p: &MatchProblem, assign: &[Option<usize>]) -> Self {
        let y = p.optimal_edges(assign);
        let objective = p.objective(assign, &y);
        let x = assign.iter().enumerate().filter_map(|(i, a)| a.map(|k| (i, k))).collect();
        Self { x, y, objective }
    }

    pub fn assignment(&self, n1: usize) -> Vec<Option<usize>> {
        let mut a = vec![None; n1];
        self.x.iter().for_each(|&(i, k)| a[i] = Some(k));
        a
    }

    /// Node deletion flags `α_i`.
    pub fn alpha(&self, n1: usize) -> Vec<bool> {
        self.assignment(n1).iter().map(Option::is_none).collect()
    }

    /// Edge deletion flags `β_ij`, aligned with the source edge list.
    pub fn beta(&self, p: &MatchProblem) -> Vec<bool> {
        p.src_edges().iter().map(|&(i, j)| !self.y.iter().any(|(s, _)| *s == (i, j))).collect()
    }
}
