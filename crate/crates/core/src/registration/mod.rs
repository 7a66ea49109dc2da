//! Rigid registration of matched segment clouds and the precision/recall
//! scores that gate merging.

mod kabsch;
mod ransac;

pub use kabsch::{kabsch, residual_rms};
pub use ransac::{ransac_register, ransac_register_guided, score_alignment, RegistrationScore};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::ComponentMatch;
use crate::types::{PointCloud, RigidTransform, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    /// Minimum number of hypotheses; random triples fill up to this count.
    pub iters: usize,
    /// Inlier distance in meters.
    pub delta: f64,
    /// Register each matched node pair on its own instead of the whole
    /// matched component.
    pub per_pair: bool,
    pub score_points: usize,
    pub refine_top: usize,
    pub refine_rounds: usize,
    /// In component mode, pairs whose precision or recall falls below this
    /// under the component transform are registered again on their own
    /// transform, round after round, until no pair improves.
    pub regroup_below: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self { iters: 512, delta: 0.005, per_pair: false, score_points: 256, refine_top: 8, refine_rounds: 20, regroup_below: 0.9 }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta = {} must be positive", self.delta)));
        }
        if !(self.regroup_below >= 0.0) {
            return Err(Error::InvalidConfig(format!("regroup_below = {} must be non-negative", self.regroup_below)));
        }
        if self.refine_rounds == 0 {
            return Err(Error::InvalidConfig("refine_rounds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Registration score of one matched node pair, by segment id.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub i: usize,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Scores every matched node pair of `m`. By default the matched parts of
/// both components are registered as a whole and each pair is scored under
/// that transform; pairs it leaves unexplained (a component holding several
/// objects placed differently in the two scenes) are registered together
/// again, and so on while some pair gets explained.
pub fn score_matched_nodes(
    m: &ComponentMatch,
    src: &PointCloud,
    dst: &PointCloud,
    cfg: &RegistrationConfig,
    seed: u64,
) -> Result<Vec<PairScore>> {
    if m.x.is_empty() {
        return Ok(Vec::new());
    }
    let seg = |cloud: &PointCloud, scene: usize, s: usize| -> Result<Vec<Vec3>> {
        if s >= cloud.segment_count() {
            return Err(Error::MissingSegment { scene, segment: s });
        }
        Ok(cloud.segment_points(s))
    };
    let groups = m
        .x
        .iter()
        .map(|&(i, k)| Ok((seg(src, m.src_scene, i)?, seg(dst, m.dst_scene, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let pair_score = |(i, k): (usize, usize), g: &(Vec<Vec3>, Vec<Vec3>), t: &RigidTransform| {
        let s = score_alignment(&g.0, &g.1, t, cfg.delta);
        PairScore { i, k, precision: s.precision, recall: s.recall }
    };
    if cfg.per_pair {
        m.x.iter()
            .zip(&groups)
            .enumerate()
            .map(|(n, (&pair, g))| {
                let reg = ransac_register(&g.0, &g.1, cfg, crate::types::rng::derive(seed, n as u64))?;
                Ok(pair_score(pair, g, &reg.transform))
            })
            .collect()
    } else {
        let mut scores: Vec<Option<PairScore>> = vec![None; groups.len()];
        let mut open: Vec<usize> = (0..groups.len()).collect();
        let mut round = 0u64;
        while !open.is_empty() {
            let subset: Vec<(Vec<Vec3>, Vec<Vec3>)> = open.iter().map(|&n| groups[n].clone()).collect();
            let reg = match ransac_register_guided(&subset, cfg, crate::types::rng::derive(seed, round)) {
                Ok(r) => r,
                Err(Error::TooFewPoints { .. }) if round > 0 => break,
                Err(e) => return Err(e),
            };
            let mut still_open = Vec::new();
            for &n in &open {
                let s = pair_score(m.x[n], &groups[n], &reg.transform);
                let improved = scores[n].is_none_or(|old| s.precision + s.recall > old.precision + old.recall);
                if improved {
                    scores[n] = Some(s);
                }
                if s.precision < cfg.regroup_below || s.recall < cfg.regroup_below {
                    still_open.push(n);
                }
            }
            if still_open.len() == open.len() && round > 0 {
                break;
            }
            open = still_open;
            round += 1;
        }
        Ok(scores.into_iter().map(|s| s.expect("every pair scored in the first round")).collect())
    }
}
