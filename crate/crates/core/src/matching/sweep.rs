use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{build_problem, MatchResult};
use super::solver::{solve, SolveLimits};
use super::MatchConfig;
use crate::error::{Error, Result};
use crate::registration::PairScore;
use crate::types::SegmentGraph;

/// A weakly connected component of one scene graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub scene: usize,
    /// Node positions in the scene graph, ascending.
    pub nodes: Vec<usize>,
    pub graph: SegmentGraph,
}

impl Component {
    /// Segment ids of the component's nodes.
    pub fn segments(&self) -> Vec<usize> {
        self.graph.nodes().iter().map(|n| n.segment_id).collect()
    }
}

/// Components of every scene, scene-major.
pub fn components(graphs: &[SegmentGraph]) -> Result<Vec<Component>> {
    let mut out = Vec::new();
    for g in graphs {
        for nodes in g.weakly_connected_components() {
            let graph = g.induced(&nodes)?;
            out.push(Component { scene: g.scene_id(), nodes, graph });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PairStatus {
    Solved,
    Failed { error: String },
}

/// Result of matching one source component against one target component,
/// with node ids translated to scene segment ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentMatch {
    pub src_scene: usize,
    pub dst_scene: usize,
    /// Segment ids of the source component.
    pub src_nodes: Vec<usize>,
    /// Segment ids of the target component.
    pub dst_nodes: Vec<usize>,
    pub src_edge_count: usize,
    pub x: Vec<(usize, usize)>,
    pub y: Vec<((usize, usize), (usize, usize))>,
    /// NaN (serialized as null) when the pair failed.
    #[serde(rename = "J", with = "nan_as_null")]
    pub objective: f64,
    #[serde(flatten)]
    pub status: PairStatus,
    pub solve_ms: f64,
    /// Registration scores of the matched node pairs, once computed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<PairScore>,
}

impl ComponentMatch {
    pub fn is_solved(&self) -> bool {
        self.status == PairStatus::Solved
    }

    /// `|V1| + |E1|` of the source component.
    pub fn source_size(&self) -> usize {
        self.src_nodes.len() + self.src_edge_count
    }

    /// Target segments hit by `x`, ascending.
    pub fn matched_targets(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.x.iter().map(|&(_, k)| k).collect();
        t.sort_unstable();
        t
    }

    fn from_result(src: &Component, dst: &Component, r: MatchResult, ms: f64) -> Self {
        let s = src.segments();
        let d = dst.segments();
        Self {
            src_scene: src.scene,
            dst_scene: dst.scene,
            x: r.x.iter().map(|&(i, k)| (s[i], d[k])).collect(),
            y: r.y.iter().map(|&((i, j), (k, l))| ((s[i], s[j]), (d[k], d[l]))).collect(),
            objective: r.objective,
            src_edge_count: src.graph.edge_count(),
            src_nodes: s,
            dst_nodes: d,
            status: PairStatus::Solved,
            solve_ms: ms,
            scores: Vec::new(),
        }
    }

    fn failed(src: &Component, dst: &Component, e: &Error, ms: f64) -> Self {
        Self {
            src_scene: src.scene,
            dst_scene: dst.scene,
            src_nodes: src.segments(),
            dst_nodes: dst.segments(),
            src_edge_count: src.graph.edge_count(),
            x: Vec::new(),
            y: Vec::new(),
            objective: f64::NAN,
            status: PairStatus::Failed { error: e.to_string() },
            solve_ms: ms,
            scores: Vec::new(),
        }
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Ordered pairs of components from distinct scenes, source-major.
pub fn component_pairs(comps: &[Component]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (a, ca) in comps.iter().enumerate() {
        for (b, cb) in comps.iter().enumerate() {
            if ca.scene != cb.scene {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Matches every component against every component of every other scene.
/// Per-pair failures (size cap, timeout) are recorded, not raised.
pub fn match_all_components(graphs: &[SegmentGraph], cfg: &MatchConfig) -> Result<Vec<ComponentMatch>> {
    if graphs.len() < 2 {
        return Err(Error::InvalidConfig("matching needs at least two scenes".into()));
    }
    let comps = components(graphs)?;
    let limits = SolveLimits { size_cap: cfg.size_cap, timeout: cfg.timeout_ms.map(Duration::from_millis) };
    Ok(component_pairs(&comps)
        .into_par_iter()
        .map(|(a, b)| {
            let (src, dst) = (&comps[a], &comps[b]);
            let start = Instant::now();
            let r = build_problem(&src.graph, &dst.graph, cfg.eps_node, cfg.eps_edge).and_then(|p| solve(&p, &limits));
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match r {
                Ok(r) => ComponentMatch::from_result(src, dst, r, ms),
                Err(e) => {
                    log::warn!("match {}:{:?} -> {}:{:?} failed: {e}", src.scene, src.segments(), dst.scene, dst.segments());
                    ComponentMatch::failed(src, dst, &e, ms)
                }
            }
        })
        .collect())
}
