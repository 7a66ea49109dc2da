use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeneratorConfig, Primitive};
use crate::error::{Error, Result};
use crate::spatial::{clouds_within, GridIndex};
use crate::types::{rng, DisjointSet, Feature, RigidTransform, Vec3};

const IMPOSTOR_JITTER: f64 = 0.02;

/// One rigid part of an object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartTemplate {
    pub primitive: Primitive,
    /// Part frame to object frame.
    pub pose: RigidTransform,
    /// Surface samples in the object frame.
    pub points: Vec<Vec3>,
    /// Canonical appearance descriptor of the part.
    pub true_feature: Feature,
    /// Descriptor copied from a differently shaped part of an earlier object.
    #[serde(default)]
    pub impostor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTemplate {
    pub id: usize,
    pub parts: Vec<PartTemplate>,
    /// Touching part pairs `(a, b)`, `a < b`.
    pub adjacency: Vec<(usize, usize)>,
    /// Largest horizontal distance of any point from the object's z axis.
    pub footprint_radius: f64,
}

impl ObjectTemplate {
    pub fn point_count(&self) -> usize {
        self.parts.iter().map(|p| p.points.len()).sum()
    }
}

/// Builds `cfg.k_objects` templates. Object `i` draws from its own stream.
pub fn generate_templates(cfg: &GeneratorConfig, seed: u64) -> Result<Vec<ObjectTemplate>> {
    let mut out: Vec<ObjectTemplate> = Vec::with_capacity(cfg.k_objects);
    for id in 0..cfg.k_objects {
        let mut r = rng::seeded(rng::derive(seed, 0x0B1E_0000 + id as u64));
        let geometry = assemble_geometry(cfg, &mut r).ok_or_else(|| {
            Error::Placement(format!("could not assemble a connected object {id} after retries"))
        })?;
        let pool: Vec<(Feature, Primitive)> = out
            .iter()
            .flat_map(|o| o.parts.iter().filter(|p| !p.impostor).map(|p| (p.true_feature.clone(), p.primitive)))
            .collect();
        let (parts, adjacency) = geometry;
        let parts = parts
            .into_iter()
            .map(|(primitive, pose, points)| {
                let (true_feature, impostor) = pick_feature(cfg, &primitive, &pool, &mut r);
                PartTemplate { primitive, pose, points, true_feature, impostor }
            })
            .collect::<Vec<_>>();
        let footprint_radius = parts
            .iter()
            .flat_map(|p| p.points.iter())
            .map(|p| (p.x * p.x + p.y * p.y).sqrt())
            .fold(0.0, f64::max);
        out.push(ObjectTemplate { id, parts, adjacency, footprint_radius });
    }
    Ok(out)
}

fn pick_feature<R: Rng>(cfg: &GeneratorConfig, primitive: &Primitive, pool: &[(Feature, Primitive)], r: &mut R) -> (Feature, bool) {
    // Always draw both so the stream layout does not depend on the pool.
    let fresh = Feature::random(cfg.feature_dim, r);
    let impostor = cfg.impostor_prob > 0.0 && r.random_bool(cfg.impostor_prob);
    let other_kind: Vec<&(Feature, Primitive)> = pool
        .iter()
        .filter(|(_, p)| std::mem::discriminant(p) != std::mem::discriminant(primitive))
        .collect();
    if impostor && !other_kind.is_empty() {
        let (f, _) = other_kind[r.random_range(0..other_kind.len())];
        (f.perturbed(IMPOSTOR_JITTER, r), true)
    } else {
        (fresh, false)
    }
}

type Geometry = (Vec<(Primitive, RigidTransform, Vec<Vec3>)>, Vec<(usize, usize)>);

fn assemble_geometry<R: Rng>(cfg: &GeneratorConfig, r: &mut R) -> Option<Geometry> {
    let (lo, hi) = cfg.parts_per_object;
    let contact = 0.6 * cfg.adjacency_eps;
    'attempt: for _ in 0..200 {
        let n = r.random_range(lo..=hi);
        let mut parts: Vec<(Primitive, RigidTransform, Vec<Vec3>)> = Vec::with_capacity(n);
        let base = Primitive::random(r);
        let pose = RigidTransform::from_yaw(r.random_range(0.0..std::f64::consts::TAU), Vec3::zeros());
        let local = sample_part(cfg, &base, r);
        parts.push((base, pose, transform_all(&pose, &local)));
        while parts.len() < n {
            let parent = r.random_range(0..parts.len());
            let prim = Primitive::random(r);
            let yaw = r.random_range(0.0..std::f64::consts::TAU);
            let local = sample_part(cfg, &prim, r);
            let (pprim, ppose, ppoints) = &parts[parent];
            let on_ground = ppose.translation().z.abs() < 1e-12;
            let pose = if on_ground && r.random_bool(0.5) {
                // Slide in horizontally until the surfaces touch.
                let phi = r.random_range(0.0..std::f64::consts::TAU);
                let dir = Vec3::new(phi.cos(), phi.sin(), 0.0);
                let index = GridIndex::new(ppoints, contact);
                let base = *ppose.translation();
                let mut d = pprim.radius_xy() + prim.radius_xy() + 0.01;
                let mut found = None;
                while d > 0.0 {
                    let candidate = RigidTransform::from_yaw(yaw, base + dir * d);
                    if local.iter().any(|p| index.has_neighbor(&candidate.apply(p))) {
                        found = Some(candidate);
                        break;
                    }
                    d -= 0.002;
                }
                match found {
                    Some(p) => p,
                    None => continue 'attempt,
                }
            } else {
                let jitter = Vec3::new(r.random_range(-0.005..0.005), r.random_range(-0.005..0.005), 0.0);
                let top = ppose.translation() + Vec3::new(0.0, 0.0, pprim.height()) + jitter;
                RigidTransform::from_yaw(yaw, top)
            };
            // Bounding cylinders of non-parent parts must not overlap.
            let (c, h, rad) = (pose.translation(), prim.height(), prim.radius_xy());
            for (i, (qprim, qpose, _)) in parts.iter().enumerate() {
                if i == parent {
                    continue;
                }
                let qc = qpose.translation();
                let horiz = ((c.x - qc.x).powi(2) + (c.y - qc.y).powi(2)).sqrt();
                let vert_overlap = c.z < qc.z + qprim.height() - 1e-9 && qc.z < c.z + h - 1e-9;
                if vert_overlap && horiz < rad + qprim.radius_xy() {
                    continue 'attempt;
                }
            }
            let points = transform_all(&pose, &local);
            parts.push((prim, pose, points));
        }
        let adjacency = touching_pairs(parts.iter().map(|p| p.2.as_slice()), cfg.adjacency_eps);
        let mut ds = DisjointSet::new(parts.len());
        adjacency.iter().for_each(|&(a, b)| {
            ds.union(a, b);
        });
        if ds.groups().len() == 1 {
            return Some((parts, adjacency));
        }
    }
    None
}

fn sample_part<R: Rng>(cfg: &GeneratorConfig, prim: &Primitive, r: &mut R) -> Vec<Vec3> {
    let n = ((prim.area() / (cfg.point_spacing * cfg.point_spacing)).ceil() as usize).max(cfg.min_part_points);
    prim.sample_surface(n, r)
}

fn transform_all(t: &RigidTransform, pts: &[Vec3]) -> Vec<Vec3> {
    pts.iter().map(|p| t.apply(p)).collect()
}

pub(crate) fn touching_pairs<'a>(clouds: impl Iterator<Item = &'a [Vec3]>, eps: f64) -> Vec<(usize, usize)> {
    let clouds: Vec<&[Vec3]> = clouds.collect();
    let mut out = Vec::new();
    for a in 0..clouds.len() {
        for b in (a + 1)..clouds.len() {
            if clouds_within(clouds[a], clouds[b], eps) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Random subset of `0..k` of size `n`.
pub(crate) fn random_subset<R: Rng>(k: usize, n: usize, r: &mut R) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..k).collect();
    ids.shuffle(r);
    ids.truncate(n);
    ids.sort_unstable();
    ids
}
