use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DisjointSet, SegmentGraph};

/// Matched node pairs of one match that survived pruning, by segment id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivingMatch {
    pub src_scene: usize,
    pub dst_scene: usize,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnionKind {
    /// Two matched segments adjacent in their scene.
    Adjacent,
    /// A source segment and its image.
    Matched,
    /// Two matched segments of the same match, not adjacent.
    Grouped,
}

/// A union that joined two previously separate pseudo-objects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionEvent {
    /// Index into the surviving match list.
    pub source: usize,
    pub kind: UnionKind,
    pub a: (usize, usize),
    pub b: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenePseudoLabels {
    pub scene_id: usize,
    /// Segment id to pseudo-object id.
    pub labels: BTreeMap<usize, usize>,
    /// Unions that touched this scene.
    pub provenance: Vec<UnionEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabeling {
    pub scenes: Vec<ScenePseudoLabels>,
    /// Unions refused because they would join segments that are not
    /// connected in their scene.
    pub rejected_unions: usize,
}

impl PseudoLabeling {
    /// Every segment its own object.
    pub fn singletons(graphs: &[SegmentGraph]) -> Self {
        let scenes = graphs
            .iter()
            .map(|g| ScenePseudoLabels {
                scene_id: g.scene_id(),
                labels: g.nodes().iter().enumerate().map(|(i, n)| (n.segment_id, i)).collect(),
                provenance: Vec::new(),
            })
            .collect();
        Self { scenes, rejected_unions: 0 }
    }

    pub fn scene(&self, scene_id: usize) -> Option<&ScenePseudoLabels> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    /// Pseudo-object id of every segment of a scene, indexed by segment id.
    pub fn segment_labels(&self, scene_id: usize) -> Option<Vec<usize>> {
        self.scene(scene_id).map(|s| s.labels.values().copied().collect())
    }
}

struct Keys {
    index: HashMap<(usize, usize), usize>,
    keys: Vec<(usize, usize)>,
}

/// Union-find over `(scene, segment)` keys. Candidate unions are the
/// adjacencies among matched segments, the matched pairs, and the grouping of
/// all matched segments of one match on each side; they are retried until no
/// further union succeeds. A union is refused when the merged object would be
/// disconnected within some scene. `initial` seeds the classes.
pub fn merge_to_pseudolabels(
    matches: &[SurvivingMatch],
    graphs: &[SegmentGraph],
    initial: Option<&PseudoLabeling>,
) -> Result<PseudoLabeling> {
    let mut by_scene: HashMap<usize, &SegmentGraph> = HashMap::new();
    for g in graphs {
        if by_scene.insert(g.scene_id(), g).is_some() {
            return Err(Error::InvalidGraph(format!("scene {} given twice", g.scene_id())));
        }
    }
    let mut keys = Keys { index: HashMap::new(), keys: Vec::new() };
    for g in graphs {
        for n in g.nodes() {
            keys.index.insert((g.scene_id(), n.segment_id), keys.keys.len());
            keys.keys.push((g.scene_id(), n.segment_id));
        }
    }
    let lookup = |k: (usize, usize)| keys.index.get(&k).copied().ok_or(Error::MissingSegment { scene: k.0, segment: k.1 });
    let mut ds = DisjointSet::new(keys.keys.len());
    if let Some(init) = initial {
        for s in &init.scenes {
            let mut first: BTreeMap<usize, usize> = BTreeMap::new();
            for (&seg, &obj) in &s.labels {
                let id = lookup((s.scene_id, seg))?;
                match first.get(&obj) {
                    Some(&rep) => {
                        ds.union(rep, id);
                    }
                    None => {
                        first.insert(obj, id);
                    }
                }
            }
        }
    }

    let mut candidates: Vec<(usize, UnionKind, usize, usize)> = Vec::new();
    for (mi, m) in matches.iter().enumerate() {
        let g1 = by_scene.get(&m.src_scene).ok_or(Error::MissingSegment { scene: m.src_scene, segment: 0 })?;
        let g2 = by_scene.get(&m.dst_scene).ok_or(Error::MissingSegment { scene: m.dst_scene, segment: 0 })?;
        for (scene, g, side) in [(m.src_scene, g1, 0), (m.dst_scene, g2, 1)] {
            let nodes: Vec<usize> = m.pairs.iter().map(|p| if side == 0 { p.0 } else { p.1 }).collect();
            for (a, &u) in nodes.iter().enumerate() {
                for &v in &nodes[a + 1..] {
                    let (pu, pv) = (position(g, scene, u)?, position(g, scene, v)?);
                    if g.has_edge(pu, pv) {
                        candidates.push((mi, UnionKind::Adjacent, lookup((scene, u))?, lookup((scene, v))?));
                    }
                }
            }
        }
        for &(i, k) in &m.pairs {
            candidates.push((mi, UnionKind::Matched, lookup((m.src_scene, i))?, lookup((m.dst_scene, k))?));
        }
        for (scene, side) in [(m.src_scene, 0), (m.dst_scene, 1)] {
            let nodes: Vec<usize> = m.pairs.iter().map(|p| if side == 0 { p.0 } else { p.1 }).collect();
            for w in nodes.windows(2) {
                candidates.push((mi, UnionKind::Grouped, lookup((scene, w[0]))?, lookup((scene, w[1]))?));
            }
        }
    }
    // Adjacent unions first, then matched pairs, then grouping.
    candidates.sort_by_key(|c| (c.1 as u8, c.0));

    let mut events = Vec::new();
    let mut done = vec![false; candidates.len()];
    loop {
        let mut progress = false;
        for (ci, &(mi, kind, a, b)) in candidates.iter().enumerate() {
            if done[ci] {
                continue;
            }
            if ds.same(a, b) {
                done[ci] = true;
                continue;
            }
            if merged_is_connected(&mut ds, a, b, &keys.keys, &by_scene) {
                ds.union(a, b);
                done[ci] = true;
                progress = true;
                events.push(UnionEvent { source: mi, kind, a: keys.keys[a], b: keys.keys[b] });
            }
        }
        if !progress {
            break;
        }
    }
    let rejected = done.iter().filter(|d| !**d).count();
    for (ci, &(mi, _, a, b)) in candidates.iter().enumerate() {
        if !done[ci] {
            log::debug!("match {mi}: refused union of {:?} and {:?}", keys.keys[a], keys.keys[b]);
        }
    }

    let scenes = graphs
        .iter()
        .map(|g| {
            let s = g.scene_id();
            let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
            let mut labels = BTreeMap::new();
            for n in g.nodes() {
                let root = ds.find(keys.index[&(s, n.segment_id)]);
                let next = ids.len();
                let id = *ids.entry(root).or_insert(next);
                labels.insert(n.segment_id, id);
            }
            let provenance = events.iter().filter(|e| e.a.0 == s || e.b.0 == s).cloned().collect();
            ScenePseudoLabels { scene_id: s, labels, provenance }
        })
        .collect();
    Ok(PseudoLabeling { scenes, rejected_unions: rejected })
}

fn position(g: &SegmentGraph, scene: usize, segment: usize) -> Result<usize> {
    g.position_of(segment).ok_or(Error::MissingSegment { scene, segment })
}

/// Whether the union of the classes of `a` and `b` stays connected in every
/// scene it touches.
fn merged_is_connected(
    ds: &mut DisjointSet,
    a: usize,
    b: usize,
    keys: &[(usize, usize)],
    graphs: &HashMap<usize, &SegmentGraph>,
) -> bool {
    let (ra, rb) = (ds.find(a), ds.find(b));
    let mut per_scene: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, &(scene, seg)) in keys.iter().enumerate() {
        let r = ds.find(id);
        if r == ra || r == rb {
            per_scene.entry(scene).or_default().push(seg);
        }
    }
    per_scene.iter().all(|(scene, segs)| {
        let g = graphs[scene];
        let members: Vec<usize> = segs.iter().filter_map(|&s| g.position_of(s)).collect();
        g.is_connected_subset(&members)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Feature, SegmentNode};

    fn graph(scene: usize, n: usize, edges: &[(usize, usize)]) -> SegmentGraph {
        let nodes = (0..n).map(|i| SegmentNode { segment_id: i, feature: Feature::basis(4, 0), point_count: 200 }).collect();
        SegmentGraph::new(scene, nodes, edges.iter().copied()).unwrap()
    }

    fn sm(src: usize, dst: usize, pairs: &[(usize, usize)]) -> SurvivingMatch {
        SurvivingMatch { src_scene: src, dst_scene: dst, pairs: pairs.to_vec() }
    }

    #[test]
    fn no_matches_gives_singletons() {
        let g = [graph(0, 3, &[(0, 1)]), graph(1, 2, &[])];
        let p = merge_to_pseudolabels(&[], &g, None).unwrap();
        assert_eq!(p, PseudoLabeling::singletons(&g));
    }

    #[test]
    fn merges_across_scenes_transitively() {
        // Object = segments {0,1} in scene 0, {1,2} in scene 1, {0,1} in scene 2.
        let g = [graph(0, 3, &[(0, 1)]), graph(1, 3, &[(1, 2)]), graph(2, 2, &[(0, 1)])];
        let m = [sm(0, 1, &[(0, 1), (1, 2)]), sm(1, 2, &[(1, 0), (2, 1)])];
        let p = merge_to_pseudolabels(&m, &g, None).unwrap();
        assert_eq!(p.segment_labels(0).unwrap(), vec![0, 0, 1]);
        assert_eq!(p.segment_labels(1).unwrap(), vec![0, 1, 1]);
        assert_eq!(p.segment_labels(2).unwrap(), vec![0, 0]);
        assert_eq!(p.rejected_unions, 0);
    }

    #[test]
    fn connectivity_guard_refuses_disconnected_merge() {
        // Segments 0 and 2 of scene 0 are not adjacent.
        let g = [graph(0, 3, &[(0, 1)]), graph(1, 2, &[(0, 1)])];
        let m = [sm(0, 1, &[(0, 0), (2, 1)])];
        let p = merge_to_pseudolabels(&m, &g, None).unwrap();
        let l0 = p.segment_labels(0).unwrap();
        assert_ne!(l0[0], l0[2]);
        assert!(p.rejected_unions > 0);
        for s in &p.scenes {
            let gr = &g[s.scene_id];
            let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            s.labels.iter().for_each(|(&seg, &o)| by.entry(o).or_default().push(seg));
            assert!(by.values().all(|m| gr.is_connected_subset(m)));
        }
    }

    #[test]
    fn idempotent_on_own_output() {
        let g = [graph(0, 4, &[(0, 1), (1, 2), (2, 3)]), graph(1, 4, &[(0, 1), (2, 3)])];
        let m = [sm(0, 1, &[(0, 0), (1, 1), (3, 3)]), sm(1, 0, &[(2, 2), (3, 3)])];
        let once = merge_to_pseudolabels(&m, &g, None).unwrap();
        let twice = merge_to_pseudolabels(&m, &g, Some(&once)).unwrap();
        for (a, b) in once.scenes.iter().zip(&twice.scenes) {
            assert_eq!(a.labels, b.labels);
        }
    }

    #[test]
    fn unknown_segment_is_an_error() {
        let g = [graph(0, 1, &[]), graph(1, 1, &[])];
        assert!(merge_to_pseudolabels(&[sm(0, 1, &[(0, 4)])], &g, None).is_err());
    }
}
