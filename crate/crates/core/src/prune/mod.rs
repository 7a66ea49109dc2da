//! Pruning of component matches and merging of the surviving matched
//! segments into per-scene object pseudo-labels.

mod merge;

pub use merge::{merge_to_pseudolabels, PseudoLabeling, ScenePseudoLabels, SurvivingMatch, UnionEvent, UnionKind};

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::ComponentMatch;
use crate::registration::{score_matched_nodes, PairScore, RegistrationConfig};
use crate::types::{rng, PointCloud};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    /// Cost threshold ratio: a match passes when `J < alpha * (|V1| + |E1|)`.
    pub alpha: f64,
    /// Minimum registration precision and recall of a node pair.
    pub t2: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { alpha: 0.1, t2: 0.9 }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.t2 > 0.0 && self.t2 <= 1.0) {
            return Err(Error::InvalidConfig(format!("t2 = {} outside (0, 1]", self.t2)));
        }
        Ok(())
    }
}

pub fn criterion1_cost_gate(m: &ComponentMatch, cfg: &PruneConfig) -> bool {
    m.is_solved() && m.objective < cfg.alpha * m.source_size() as f64
}

/// Node pairs whose precision and recall both reach `t2`.
pub fn criterion2_registration_gate(scores: &[PairScore], cfg: &PruneConfig) -> Vec<(usize, usize)> {
    scores.iter().filter(|s| s.precision >= cfg.t2 && s.recall >= cfg.t2).map(|s| (s.i, s.k)).collect()
}

/// Indices of matches to drop: a match whose kept target nodes strictly
/// contain the target nodes of a complete match (every source node kept) into
/// the same target scene.
pub fn criterion3_isolation_filter(matches: &[(usize, usize, usize, Vec<(usize, usize)>)]) -> BTreeSet<usize> {
    // Entries: (dst_scene, source node count, match index, kept pairs).
    let targets = |pairs: &[(usize, usize)]| pairs.iter().map(|&(_, k)| k).collect::<BTreeSet<usize>>();
    let exact: Vec<(usize, BTreeSet<usize>)> = matches
        .iter()
        .filter(|(_, n, _, pairs)| *n > 0 && pairs.len() == *n)
        .map(|(scene, _, _, pairs)| (*scene, targets(pairs)))
        .collect();
    let mut drop = BTreeSet::new();
    for (scene, _, idx, pairs) in matches {
        let hat = targets(pairs);
        if exact.iter().any(|(s, v)| s == scene && v.len() < hat.len() && v.is_subset(&hat)) {
            drop.insert(*idx);
        }
    }
    drop
}

/// A match together with the outcome of each pruning step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedMatch {
    #[serde(flatten)]
    pub m: ComponentMatch,
    pub cost_gate: bool,
    /// Node pairs that passed registration.
    pub kept: Vec<(usize, usize)>,
    pub isolation_dropped: bool,
}

impl PrunedMatch {
    pub fn survives(&self) -> bool {
        self.cost_gate && !self.isolation_dropped && !self.kept.is_empty()
    }

    pub fn surviving(&self) -> Option<SurvivingMatch> {
        self.survives().then(|| SurvivingMatch { src_scene: self.m.src_scene, dst_scene: self.m.dst_scene, pairs: self.kept.clone() })
    }
}

/// Applies criteria 1–3. `clouds[s]` is the point cloud of scene `s`.
/// Registration runs only for matches that pass the cost gate.
pub fn prune_matches(
    matches: Vec<ComponentMatch>,
    clouds: &[&PointCloud],
    cfg: &PruneConfig,
    reg: &RegistrationConfig,
    seed: u64,
) -> Result<Vec<PrunedMatch>> {
    cfg.validate()?;
    reg.validate()?;
    let mut pruned = matches
        .into_par_iter()
        .enumerate()
        .map(|(n, mut m)| {
            let cost_gate = criterion1_cost_gate(&m, cfg);
            let mut kept = Vec::new();
            if cost_gate {
                let cloud = |s: usize| clouds.get(s).copied().ok_or(Error::MissingSegment { scene: s, segment: 0 });
                m.scores = score_matched_nodes(&m, cloud(m.src_scene)?, cloud(m.dst_scene)?, reg, rng::derive(seed, n as u64))?;
                kept = criterion2_registration_gate(&m.scores, cfg);
            }
            Ok(PrunedMatch { m, cost_gate, kept, isolation_dropped: false })
        })
        .collect::<Result<Vec<_>>>()?;
    apply_isolation_filter(&mut pruned);
    Ok(pruned)
}

/// Keeps every solved match and every matched pair, skipping all criteria.
pub fn accept_all(matches: Vec<ComponentMatch>) -> Vec<PrunedMatch> {
    matches
        .into_iter()
        .map(|m| {
            let solved = m.is_solved();
            let kept = if solved { m.x.clone() } else { Vec::new() };
            PrunedMatch { m, cost_gate: solved, kept, isolation_dropped: false }
        })
        .collect()
}

pub fn apply_isolation_filter(pruned: &mut [PrunedMatch]) {
    let entries: Vec<(usize, usize, usize, Vec<(usize, usize)>)> = pruned
        .iter()
        .enumerate()
        .filter(|(_, p)| p.cost_gate && !p.kept.is_empty())
        .map(|(i, p)| (p.m.dst_scene, p.m.src_nodes.len(), i, p.kept.clone()))
        .collect();
    for i in criterion3_isolation_filter(&entries) {
        pruned[i].isolation_dropped = true;
    }
}
