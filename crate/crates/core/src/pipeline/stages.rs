use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, RegistrationOnlyConfig};
use crate::cluster::{cluster_image, ClusterConfig, LabelGrid};
use crate::embed::{train, Anchor, EmbedConfig, EmbeddingTable, GroupKey, TrainOutcome};
use crate::error::{Error, Result};
use crate::eval::{score_instances, Domain, MetricReport};
use crate::matching::{components, match_all_components, ComponentMatch, MatchConfig};
use crate::prune::{accept_all, merge_to_pseudolabels, prune_matches, PrunedMatch, PseudoLabeling, SurvivingMatch};
use crate::registration::{ransac_register, score_alignment, RegistrationConfig};
use crate::synth::{Dataset, LabeledImage, SceneData};
use crate::types::{rng, PointCloud, SegmentGraph};

/// Training-frame pixel count of every segment of a scene, at least 1.
pub fn segment_weights(scene: &SceneData) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = scene.graph().nodes().iter().map(|n| (n.segment_id, 0)).collect();
    for f in &scene.train_frames {
        for (seg, c) in f.segment_histogram() {
            *counts.entry(seg).or_default() += c;
        }
    }
    counts.into_iter().map(|(s, c)| (s, c.max(1) as f64)).collect()
}

fn anchors(ds: &Dataset, label: impl Fn(usize, usize) -> Result<usize>) -> Result<Vec<Vec<Anchor>>> {
    ds.scenes
        .iter()
        .map(|s| {
            segment_weights(s)
                .into_iter()
                .map(|(seg, weight)| {
                    Ok(Anchor { key: GroupKey::new(s.scene_id(), seg), label: label(s.scene_id(), seg)?, weight })
                })
                .collect()
        })
        .collect()
}

/// Stage-1 table: starts from the observed segment descriptors and is
/// trained with one label per segment.
pub fn train_phi1(ds: &Dataset, cfg: &EmbedConfig) -> Result<TrainOutcome> {
    let mut table = EmbeddingTable::new(ds.generator.feature_dim);
    for s in &ds.scenes {
        for n in s.graph().nodes() {
            table.insert(GroupKey::new(s.scene_id(), n.segment_id), n.feature.clone())?;
        }
    }
    train(table, &anchors(ds, |_, seg| Ok(seg))?, cfg)
}

/// Scene graphs carrying the rows of `table` as node features.
pub fn graphs_with_table(ds: &Dataset, table: &EmbeddingTable) -> Result<Vec<SegmentGraph>> {
    ds.scenes
        .iter()
        .map(|s| {
            let g = s.graph();
            let feats = g
                .nodes()
                .iter()
                .map(|n| table.require(&GroupKey::new(s.scene_id(), n.segment_id)).cloned())
                .collect::<Result<Vec<_>>>()?;
            g.with_features(feats)
        })
        .collect()
}

pub fn match_stage(ds: &Dataset, phi1: &EmbeddingTable, cfg: &MatchConfig) -> Result<Vec<ComponentMatch>> {
    match_all_components(&graphs_with_table(ds, phi1)?, cfg)
}

fn clouds(ds: &Dataset) -> Vec<&PointCloud> {
    ds.scenes.iter().map(SceneData::cloud).collect()
}

pub fn prune_stage(ds: &Dataset, matches: Vec<ComponentMatch>, cfg: &PipelineConfig, prune: bool) -> Result<Vec<PrunedMatch>> {
    if prune {
        prune_matches(matches, &clouds(ds), &cfg.prune, &cfg.registration, rng::derive(cfg.seed, 3))
    } else {
        Ok(accept_all(matches))
    }
}

pub fn merge_stage(ds: &Dataset, surviving: &[SurvivingMatch]) -> Result<PseudoLabeling> {
    merge_to_pseudolabels(surviving, &ds.graphs(), None)
}

/// Matches built without the graph solver: every pair of components from
/// different scenes is registered as a whole, and node pairs are accepted on
/// feature similarity plus registration precision and recall.
pub fn registration_only_matches(
    ds: &Dataset,
    phi1: &EmbeddingTable,
    reg: &RegistrationConfig,
    gate: &RegistrationOnlyConfig,
    seed: u64,
) -> Result<Vec<SurvivingMatch>> {
    let graphs = graphs_with_table(ds, phi1)?;
    let comps = components(&graphs)?;
    let cloud_of = |scene: usize| ds.scenes.iter().find(|s| s.scene_id() == scene).map(SceneData::cloud);
    let pairs = crate::matching::component_pairs(&comps);
    let found = pairs
        .into_par_iter()
        .enumerate()
        .map(|(n, (a, b))| {
            let (ca, cb) = (&comps[a], &comps[b]);
            let (Some(src), Some(dst)) = (cloud_of(ca.scene), cloud_of(cb.scene)) else {
                return Err(Error::MissingSegment { scene: ca.scene, segment: 0 });
            };
            let pts = |c: &PointCloud, segs: &[usize]| segs.iter().flat_map(|&s| c.segment_points(s)).collect::<Vec<_>>();
            let (sa, sb) = (ca.segments(), cb.segments());
            let whole = match ransac_register(&pts(src, &sa), &pts(dst, &sb), reg, rng::derive(seed, n as u64)) {
                Ok(r) => r,
                Err(Error::TooFewPoints { .. } | Error::DegenerateCorrespondences(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut kept = Vec::new();
            for (i, na) in ca.graph.nodes().iter().enumerate() {
                let seg_a = src.segment_points(sa[i]);
                for (k, nb) in cb.graph.nodes().iter().enumerate() {
                    if na.feature.dot(&nb.feature) <= gate.min_cosine {
                        continue;
                    }
                    let s = score_alignment(&seg_a, &dst.segment_points(sb[k]), &whole.transform, reg.delta);
                    if s.precision >= gate.min_precision_recall && s.recall >= gate.min_precision_recall {
                        kept.push((sa[i], sb[k]));
                    }
                }
            }
            Ok((!kept.is_empty()).then(|| SurvivingMatch { src_scene: ca.scene, dst_scene: cb.scene, pairs: kept }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// Stage-2 table: random rows trained with pseudo-object labels.
pub fn train_phi2(ds: &Dataset, labels: &PseudoLabeling, cfg: &EmbedConfig, seed: u64) -> Result<TrainOutcome> {
    let keys: Vec<GroupKey> = ds
        .scenes
        .iter()
        .flat_map(|s| s.graph().nodes().iter().map(move |n| GroupKey::new(s.scene_id(), n.segment_id)))
        .collect();
    let table = EmbeddingTable::random(keys, ds.generator.feature_dim, seed);
    let label = |scene: usize, seg: usize| {
        labels.scene(scene).and_then(|s| s.labels.get(&seg).copied()).ok_or(Error::MissingSegment { scene, segment: seg })
    };
    train(table, &anchors(ds, label)?, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub scene_id: usize,
    pub frame: usize,
    pub mask: LabelGrid,
}

/// Clusters one frame whose foreground pixels take the row of their segment.
pub fn infer_frame(img: &LabeledImage, table: &EmbeddingTable, cfg: &ClusterConfig) -> Result<LabelGrid> {
    let features = (0..img.pixel_count())
        .map(|p| img.segment_at(p).map(|s| table.require(&GroupKey::new(img.scene_id, s)).cloned()).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(cluster_image(img.width(), img.height(), &features, cfg)?.0)
}

/// Test frames selected for evaluation, as `(scene index, frame)`.
pub fn eval_frames(ds: &Dataset, stride: usize) -> Vec<(usize, usize)> {
    ds.scenes
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.test_frames.len()).step_by(stride.max(1)).map(move |t| (si, t)))
        .collect()
}

pub fn infer_stage(ds: &Dataset, phi2: &EmbeddingTable, cfg: &ClusterConfig, stride: usize) -> Result<Vec<FramePrediction>> {
    eval_frames(ds, stride)
        .into_par_iter()
        .map(|(si, t)| {
            let img = &ds.scenes[si].test_frames[t];
            Ok(FramePrediction { scene_id: img.scene_id, frame: t, mask: infer_frame(img, phi2, cfg)? })
        })
        .collect()
}

/// Point-level metrics of a pseudo-labeling against the true objects.
pub fn pseudo_label_metrics(ds: &Dataset, labels: &PseudoLabeling) -> Result<MetricReport> {
    let per_scene = ds
        .scenes
        .iter()
        .map(|s| {
            let cloud = s.cloud();
            let objects = cloud
                .object_ids()
                .ok_or_else(|| Error::MaskMismatch(format!("scene {} has no object ids", s.scene_id())))?;
            let seg_labels = &labels
                .scene(s.scene_id())
                .ok_or(Error::MissingSegment { scene: s.scene_id(), segment: 0 })?
                .labels;
            let pred: Vec<Option<usize>> = cloud.segment_ids().iter().map(|seg| seg_labels.get(seg).copied()).collect();
            let truth: Vec<Option<usize>> = objects.iter().map(|&o| Some(o)).collect();
            score_instances(&format!("scene {}", s.scene_id()), &pred, &truth)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::pooled(Domain::Points, ds.scenes.len(), per_scene.into_iter().flatten().collect()))
}

/// Pixel-level metrics of predicted masks against true object masks.
pub fn frame_metrics(ds: &Dataset, predictions: &[FramePrediction]) -> Result<MetricReport> {
    let per_frame = predictions
        .par_iter()
        .map(|p| {
            let img = ds
                .scenes
                .iter()
                .find(|s| s.scene_id() == p.scene_id)
                .and_then(|s| s.test_frames.get(p.frame))
                .ok_or_else(|| Error::MaskMismatch(format!("no test frame {} in scene {}", p.frame, p.scene_id)))?;
            if (p.mask.width, p.mask.height) != (img.width(), img.height()) {
                return Err(Error::MaskMismatch(format!("scene {} frame {}: mask size differs", p.scene_id, p.frame)));
            }
            let truth: Vec<Option<usize>> = (0..img.pixel_count()).map(|q| img.object_at(q)).collect();
            score_instances(&format!("scene {} frame {}", p.scene_id, p.frame), &p.mask.labels, &truth)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::pooled(Domain::Pixels, predictions.len(), per_frame.into_iter().flatten().collect()))
}
