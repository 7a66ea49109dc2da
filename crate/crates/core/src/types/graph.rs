use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Feature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentNode {
    #[serde(rename = "id")]
    pub segment_id: usize,
    pub feature: Feature,
    pub point_count: usize,
}

/// Undirected segment adjacency graph of one scene. Edges refer to node
/// positions and are stored as `(min, max)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct SegmentGraph {
    scene_id: usize,
    nodes: Vec<SegmentNode>,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl SegmentGraph {
    pub fn new(
        scene_id: usize,
        nodes: Vec<SegmentNode>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if let Some(first) = nodes.first() {
            let dim = first.feature.dim();
            if let Some(bad) = nodes.iter().find(|n| n.feature.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: bad.feature.dim() });
            }
        }
        let n = nodes.len();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) references a missing node")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|v| v.sort_unstable());
        Ok(Self { scene_id, nodes, edges: set, adjacency })
    }

    pub fn scene_id(&self) -> usize {
        self.scene_id
    }

    pub fn nodes(&self) -> &[SegmentNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Node position of a segment id.
    pub fn position_of(&self, segment_id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.segment_id == segment_id)
    }

    /// Replaces node features, keeping structure.
    pub fn with_features(&self, features: Vec<Feature>) -> Result<Self> {
        if features.len() != self.nodes.len() {
            return Err(Error::InvalidGraph(format!(
                "{} features for {} nodes",
                features.len(),
                self.nodes.len()
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .zip(features)
            .map(|(n, feature)| SegmentNode { feature, ..n.clone() })
            .collect();
        Self::new(self.scene_id, nodes, self.edges.iter().copied())
    }

    /// Induced subgraph on `members` (node positions, in the given order).
    pub fn induced(&self, members: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; self.nodes.len()];
        for (i, &m) in members.iter().enumerate() {
            local[m] = i;
        }
        let nodes = members.iter().map(|&m| self.nodes[m].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|(a, b)| local[*a] != usize::MAX && local[*b] != usize::MAX)
            .map(|&(a, b)| (local[a], local[b]));
        Self::new(self.scene_id, nodes, edges)
    }

    /// Whether `members` induce a connected subgraph. Empty sets count as
    /// connected.
    pub fn is_connected_subset(&self, members: &[usize]) -> bool {
        if members.len() <= 1 {
            return true;
        }
        let mut inside = vec![false; self.nodes.len()];
        members.iter().for_each(|&m| inside[m] = true);
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([members[0]]);
        seen[members[0]] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if inside[v] && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == members.len()
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn weakly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    scene_id: usize,
    nodes: Vec<SegmentNode>,
    edges: Vec<[usize; 2]>,
}

impl From<SegmentGraph> for GraphRepr {
    fn from(g: SegmentGraph) -> Self {
        GraphRepr {
            scene_id: g.scene_id,
            nodes: g.nodes,
            edges: g.edges.into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

impl TryFrom<GraphRepr> for SegmentGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        SegmentGraph::new(r.scene_id, r.nodes, r.edges.into_iter().map(|[a, b]| (a, b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{rng, DisjointSet};
    use proptest::prelude::*;
    use rand::Rng;

    fn plain(n: usize, edges: &[(usize, usize)]) -> SegmentGraph {
        let nodes = (0..n)
            .map(|i| SegmentNode { segment_id: i, feature: Feature::basis(2, 0), point_count: 200 })
            .collect();
        SegmentGraph::new(0, nodes, edges.iter().copied()).unwrap()
    }

    fn union_find_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut ds = DisjointSet::new(n);
        for &(a, b) in edges {
            ds.union(a, b);
        }
        ds.groups()
    }

    #[test]
    fn components_of_small_graphs() {
        assert!(plain(0, &[]).weakly_connected_components().is_empty());
        assert_eq!(plain(3, &[(0, 1)]).weakly_connected_components(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn rejects_malformed_edges() {
        let nodes = |n| {
            (0..n)
                .map(|i| SegmentNode { segment_id: i, feature: Feature::basis(2, 0), point_count: 1 })
                .collect::<Vec<_>>()
        };
        assert!(SegmentGraph::new(0, nodes(2), [(0, 0)]).is_err());
        assert!(SegmentGraph::new(0, nodes(2), [(0, 2)]).is_err());
        assert!(SegmentGraph::new(0, nodes(2), [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn random_graph_matches_union_find() {
        let mut r = rng::seeded(11);
        for _ in 0..50 {
            let n = 8;
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
                .filter(|_| r.random_bool(0.15))
                .collect();
            assert_eq!(plain(n, &edges).weakly_connected_components(), union_find_components(n, &edges));
        }
    }

    #[test]
    fn json_schema() {
        let g = plain(2, &[(1, 0)]);
        let v: serde_json::Value = serde_json::to_value(&g).unwrap();
        assert_eq!(v["edges"], serde_json::json!([[0, 1]]));
        assert_eq!(v["nodes"][1]["id"], 1);
        assert_eq!(v["nodes"][0]["point_count"], 200);
        let back: SegmentGraph = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn connected_subset() {
        let g = plain(4, &[(0, 1), (1, 2), (2, 3)]);
        assert!(g.is_connected_subset(&[0, 1, 2]));
        assert!(!g.is_connected_subset(&[0, 2]));
        assert!(g.is_connected_subset(&[]));
    }

    proptest! {
        #[test]
        fn partition_invariant_under_relabeling(seed in any::<u64>()) {
            let mut r = rng::seeded(seed);
            let n = 9;
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
                .filter(|_| r.random_bool(0.2))
                .collect();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let relabeled: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
            let original = plain(n, &edges).weakly_connected_components();
            let mut mapped: Vec<Vec<usize>> = original
                .iter()
                .map(|c| { let mut c: Vec<usize> = c.iter().map(|&v| perm[v]).collect(); c.sort(); c })
                .collect();
            mapped.sort();
            let mut other = plain(n, &relabeled).weakly_connected_components();
            other.sort();
            prop_assert_eq!(mapped, other);
        }
    }
}
