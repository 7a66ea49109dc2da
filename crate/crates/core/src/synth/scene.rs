use rand::Rng;
use serde::{Deserialize, Serialize};

use super::templates::{random_subset, touching_pairs};
use super::{GeneratorConfig, ObjectTemplate};
use crate::error::{Error, Result};
use crate::spatial::GridIndex;
use crate::types::{rng, Feature, PointCloud, RigidTransform, SegmentGraph, SegmentNode, Vec3};

const PLACEMENT_RETRIES: usize = 200;
const SCENE_RETRIES: usize = 20;
const TABLE_FILL: f64 = 0.35;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub template_id: usize,
    /// Object frame to world; yaw about +z plus a translation on the table.
    pub pose: RigidTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: usize,
    pub instances: Vec<ObjectInstance>,
    pub occlusion_drop_prob: f64,
    pub feature_noise_sigma: f64,
    #[serde(default)]
    pub split_prob: f64,
    /// Seed for dropout, splitting and descriptor noise.
    pub seed: u64,
}

impl SceneSpec {
    pub fn contains(&self, template_id: usize) -> bool {
        self.instances.iter().any(|i| i.template_id == template_id)
    }
}

/// Which template part a segment was cut from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOrigin {
    pub object: usize,
    pub part: usize,
    /// `Some(0 | 1)` when the part was split into two segments.
    #[serde(default)]
    pub half: Option<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneInstance {
    pub graph: SegmentGraph,
    pub cloud: PointCloud,
    pub origins: Vec<SegmentOrigin>,
}

/// Templates plus scene layouts. Every object appears in at least two scenes.
pub fn generate_dataset(cfg: &GeneratorConfig, seed: u64) -> Result<(Vec<ObjectTemplate>, Vec<SceneSpec>)> {
    cfg.validate()?;
    let templates = super::generate_templates(cfg, seed)?;
    let k = cfg.k_objects;
    let mut r = rng::seeded(rng::derive(seed, 0x5CE_0000));
    let (lo, hi) = cfg.objects_per_scene;
    let (lo, hi) = (lo.min(k), hi.min(k));
    let mut members: Vec<Vec<usize>> = (0..cfg.m_scenes)
        .map(|_| {
            let n = r.random_range(lo..=hi);
            random_subset(k, n, &mut r)
        })
        .collect();
    for obj in 0..k {
        while members.iter().filter(|m| m.contains(&obj)).count() < 2 {
            // Add to the least crowded scene lacking it; ties to the lowest index.
            let target = (0..members.len())
                .filter(|&s| !members[s].contains(&obj))
                .min_by_key(|&s| members[s].len())
                .expect("m_scenes >= 2 leaves a scene without the object");
            members[target].push(obj);
            members[target].sort_unstable();
        }
    }
    let mut scenes = Vec::with_capacity(cfg.m_scenes);
    for (scene_id, ids) in members.iter().enumerate() {
        let mut placed = None;
        for attempt in 0..SCENE_RETRIES {
            let mut pr = rng::seeded(rng::derive(seed, 0x91A_0000 + (scene_id * SCENE_RETRIES + attempt) as u64));
            if let Some(instances) = place_objects(cfg, &templates, ids, &mut pr) {
                placed = Some(instances);
                break;
            }
        }
        let instances = placed
            .ok_or_else(|| Error::Placement(format!("scene {scene_id}: no layout after {SCENE_RETRIES} retries")))?;
        scenes.push(SceneSpec {
            scene_id,
            instances,
            occlusion_drop_prob: cfg.occlusion_drop_prob,
            feature_noise_sigma: cfg.feature_noise_sigma,
            split_prob: cfg.split_prob,
            seed: rng::derive(seed, 0xD0E_0000 + scene_id as u64),
        });
    }
    Ok((templates, scenes))
}

fn place_objects<R: Rng>(
    cfg: &GeneratorConfig,
    templates: &[ObjectTemplate],
    ids: &[usize],
    r: &mut R,
) -> Option<Vec<ObjectInstance>> {
    let mut order = ids.to_vec();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), r);
    let table = (order.iter().map(|&i| (templates[i].footprint_radius + 0.03).powi(2)).sum::<f64>() / TABLE_FILL).sqrt();
    let mut placed: Vec<(ObjectInstance, Vec<Vec3>)> = Vec::new();
    for &id in &order {
        let t = &templates[id];
        let mut ok = None;
        for _ in 0..PLACEMENT_RETRIES {
            let yaw = r.random_range(0.0..std::f64::consts::TAU);
            let (pose, partner) = if !placed.is_empty() && r.random_bool(cfg.touch_prob) {
                let j = r.random_range(0..placed.len());
                let phi = r.random_range(0.0..std::f64::consts::TAU);
                let (inst, pts) = &placed[j];
                let other = &templates[inst.template_id];
                match touching_pose(t, yaw, phi, inst.pose.translation(), other.footprint_radius, pts, cfg.adjacency_eps) {
                    Some(p) => (p, Some(j)),
                    None => continue,
                }
            } else {
                let reach = (table - t.footprint_radius).max(0.01);
                let rad = reach * r.random_range(0.0f64..1.0).sqrt();
                let ang = r.random_range(0.0..std::f64::consts::TAU);
                (RigidTransform::from_yaw(yaw, Vec3::new(rad * ang.cos(), rad * ang.sin(), 0.0)), None)
            };
            let c = pose.translation();
            let clear = placed.iter().enumerate().all(|(j, (inst, _))| {
                if Some(j) == partner {
                    return true;
                }
                let margin = if partner.is_some() { 2.0 * cfg.adjacency_eps } else { 0.02 };
                let oc = inst.pose.translation();
                let d = ((c.x - oc.x).powi(2) + (c.y - oc.y).powi(2)).sqrt();
                d >= t.footprint_radius + templates[inst.template_id].footprint_radius + margin
            });
            if clear {
                ok = Some(pose);
                break;
            }
        }
        let pose = ok?;
        let pts = t.parts.iter().flat_map(|p| p.points.iter().map(|q| pose.apply(q))).collect();
        placed.push((ObjectInstance { template_id: id, pose }, pts));
    }
    placed.sort_by_key(|(inst, _)| inst.template_id);
    Some(placed.into_iter().map(|(inst, _)| inst).collect())
}

/// Pose for `template` (rotated by `yaw`) approached from direction `phi`
/// towards an object centered at `partner_center` until the two surfaces
/// come within `0.6 * eps`. Starting outside both footprints guarantees
/// first contact happens before any interpenetration.
pub fn touching_pose(
    template: &ObjectTemplate,
    yaw: f64,
    phi: f64,
    partner_center: &Vec3,
    partner_radius: f64,
    partner_points: &[Vec3],
    eps: f64,
) -> Option<RigidTransform> {
    let index = GridIndex::new(partner_points, 0.6 * eps);
    let dir = Vec3::new(phi.cos(), phi.sin(), 0.0);
    let base = Vec3::new(partner_center.x, partner_center.y, 0.0);
    let mut d = template.footprint_radius + partner_radius + 0.02;
    while d > 0.0 {
        let pose = RigidTransform::from_yaw(yaw, base + dir * d);
        let hit = template.parts.iter().flat_map(|p| &p.points).any(|q| index.has_neighbor(&pose.apply(q)));
        if hit {
            return Some(pose);
        }
        d -= 0.002;
    }
    None
}

/// Instantiates a scene: applies dropout and optional part splitting, labels
/// segments contiguously in (instance, part) order, perturbs descriptors, and
/// links segments whose minimum point distance is below `adjacency_eps`.
pub fn build_segment_graph(scene: &SceneSpec, templates: &[ObjectTemplate], adjacency_eps: f64) -> Result<SceneInstance> {
    if adjacency_eps <= 0.0 {
        return Err(Error::InvalidConfig("adjacency_eps must be positive".into()));
    }
    let mut r = rng::seeded(scene.seed);
    let mut segments: Vec<(SegmentOrigin, Vec<Vec3>, Feature)> = Vec::new();
    for inst in &scene.instances {
        let t = templates
            .get(inst.template_id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown template {}", inst.template_id)))?;
        for (pi, part) in t.parts.iter().enumerate() {
            let dropped = scene.occlusion_drop_prob > 0.0 && r.random_bool(scene.occlusion_drop_prob);
            let split = scene.split_prob > 0.0 && r.random_bool(scene.split_prob);
            let cut_angle = r.random_range(0.0..std::f64::consts::TAU);
            if dropped {
                continue;
            }
            let pts: Vec<Vec3> = part.points.iter().map(|p| inst.pose.apply(p)).collect();
            let origin = SegmentOrigin { object: t.id, part: pi, half: None };
            let halves = if split { split_by_plane(&pts, cut_angle) } else { None };
            match halves {
                Some((a, b)) => {
                    for (h, half) in [a, b].into_iter().enumerate() {
                        let f = part.true_feature.perturbed(scene.feature_noise_sigma, &mut r);
                        segments.push((SegmentOrigin { half: Some(h as u8), ..origin }, half, f));
                    }
                }
                None => {
                    let f = part.true_feature.perturbed(scene.feature_noise_sigma, &mut r);
                    segments.push((origin, pts, f));
                }
            }
        }
    }
    let edges = touching_pairs(segments.iter().map(|s| s.1.as_slice()), adjacency_eps);
    let mut points = Vec::new();
    let mut seg_ids = Vec::new();
    let mut obj_ids = Vec::new();
    let mut nodes = Vec::with_capacity(segments.len());
    let mut origins = Vec::with_capacity(segments.len());
    for (sid, (origin, pts, feature)) in segments.into_iter().enumerate() {
        nodes.push(SegmentNode { segment_id: sid, feature, point_count: pts.len() });
        seg_ids.extend(std::iter::repeat_n(sid, pts.len()));
        obj_ids.extend(std::iter::repeat_n(origin.object, pts.len()));
        points.extend(pts);
        origins.push(origin);
    }
    let graph = SegmentGraph::new(scene.scene_id, nodes, edges)?;
    let cloud = PointCloud::new(points, seg_ids, Some(obj_ids))?;
    Ok(SceneInstance { graph, cloud, origins })
}

/// Cuts by the vertical plane through the centroid at `angle`; `None` when
/// either side would be empty.
fn split_by_plane(pts: &[Vec3], angle: f64) -> Option<(Vec<Vec3>, Vec<Vec3>)> {
    let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let n = Vec3::new(angle.cos(), angle.sin(), 0.0);
    let (a, b): (Vec<Vec3>, Vec<Vec3>) = pts.iter().partition(|p| (*p - c).dot(&n) < 0.0);
    (!a.is_empty() && !b.is_empty()).then_some((a, b))
}
