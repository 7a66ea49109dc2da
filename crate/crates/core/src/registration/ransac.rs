use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Unit};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kabsch::{centroid, covariance, kabsch};
use super::RegistrationConfig;
use crate::error::{Error, Result};
use crate::spatial::GridIndex;
use crate::types::{rng, RigidTransform, Vec3};

const EIGEN_GAP: f64 = 0.1;
const SWEEP_STEP_DEG: f64 = 4.0;
const PRECHECK_POINTS: usize = 32;
const RANDOM_ROTATIONS: usize = 16;
const EARLY_ACCEPT: f64 = 0.99;

/// Quality of an alignment at a fixed distance threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationScore {
    pub transform: RigidTransform,
    /// Fraction of transformed source points within δ of the target.
    pub precision: f64,
    /// Fraction of target points within δ of the transformed source.
    pub recall: f64,
    /// RMS distance of source inliers to their nearest target point.
    pub inlier_rms: f64,
}

pub fn score_alignment(src: &[Vec3], dst: &[Vec3], t: &RigidTransform, delta: f64) -> RegistrationScore {
    let moved: Vec<Vec3> = src.iter().map(|p| t.apply(p)).collect();
    let dst_index = GridIndex::new(dst, delta);
    let mut inliers = 0usize;
    let mut sq = 0.0;
    for q in &moved {
        if let Some((_, d2)) = dst_index.nearest_within(q) {
            inliers += 1;
            sq += d2;
        }
    }
    let src_index = GridIndex::new(&moved, delta);
    let covered = dst.iter().filter(|q| src_index.has_neighbor(q)).count();
    let frac = |a: usize, n: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    RegistrationScore {
        transform: *t,
        precision: frac(inliers, moved.len()),
        recall: frac(covered, dst.len()),
        inlier_rms: if inliers == 0 { 0.0 } else { (sq / inliers as f64).sqrt() },
    }
}

/// Blind registration of `src` onto `dst`.
pub fn ransac_register(src: &[Vec3], dst: &[Vec3], cfg: &RegistrationConfig, seed: u64) -> Result<RegistrationScore> {
    ransac_register_guided(&[(src.to_vec(), dst.to_vec())], cfg, seed)
}

/// Registration of the union of `groups[g].0` onto the union of
/// `groups[g].1`, where each group is a hypothesized correspondence between a
/// source and a target segment. Hypotheses come in tiers: Kabsch fits on
/// group centroids and principal-axis alignments, then rotation sweeps about
/// a principal axis and the vertical, then random point triples drawn within
/// groups. Later tiers are skipped once some hypothesis explains the sample.
/// The best few are refined on nearest-neighbor correspondences with a
/// shrinking radius.
pub fn ransac_register_guided(
    groups: &[(Vec<Vec3>, Vec<Vec3>)],
    cfg: &RegistrationConfig,
    seed: u64,
) -> Result<RegistrationScore> {
    cfg.validate()?;
    let src: Vec<Vec3> = groups.iter().flat_map(|g| g.0.iter().copied()).collect();
    let dst: Vec<Vec3> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    if src.len() < 3 || dst.len() < 3 {
        return Err(Error::TooFewPoints { found: src.len().min(dst.len()) });
    }
    let mut r = rng::seeded(seed);
    let dst_index = GridIndex::new(&dst, cfg.delta);
    let stride = src.len().div_ceil(cfg.score_points.max(1));
    let sample: Vec<Vec3> = src.iter().step_by(stride.max(1)).copied().collect();
    let pre = &sample[..sample.len().min(PRECHECK_POINTS)];
    let mut hyps: Vec<RigidTransform> = Vec::new();
    let mut scored: Vec<(f64, usize)> = Vec::new();
    let mut best = 0.0f64;
    let score_new = |hyps: &[RigidTransform], from: usize, scored: &mut Vec<(f64, usize)>, best: &mut f64| {
        for (h, t) in hyps.iter().enumerate().skip(from) {
            if fraction_hit(&dst_index, t, pre) < 0.5 * *best {
                continue;
            }
            let f = fraction_hit(&dst_index, t, &sample);
            *best = best.max(f);
            scored.push((f, h));
        }
    };

    // Cheapest and most specific hypotheses first; later tiers run only
    // while nothing explains the sample yet.
    let usable: Vec<&(Vec<Vec3>, Vec<Vec3>)> = groups.iter().filter(|g| !g.0.is_empty() && !g.1.is_empty()).collect();
    for tier in 0..4 {
        let from = hyps.len();
        match tier {
            0 => {
                centroid_hypotheses(groups, &mut hyps, &mut r);
                principal_hypotheses(&src, &dst, &mut hyps);
                for (gs, gd) in &usable {
                    if groups.len() > 1 && gs.len() >= 3 && gd.len() >= 3 {
                        principal_hypotheses(gs, gd, &mut hyps);
                    }
                }
            }
            1 => {
                sweep_hypotheses(&src, &dst, &mut hyps, &mut r);
                for (gs, gd) in &usable {
                    if groups.len() > 1 && gs.len() >= 3 && gd.len() >= 3 {
                        sweep_hypotheses(gs, gd, &mut hyps, &mut r);
                    }
                }
            }
            _ => {
                let budget = if tier == 2 { cfg.iters / 4 } else { cfg.iters };
                let mut tries = 0;
                while hyps.len() < from + budget && tries < 4 * budget {
                    tries += 1;
                    let mut a = Vec::with_capacity(3);
                    let mut b = Vec::with_capacity(3);
                    for _ in 0..3 {
                        let (gs, gd) = usable.choose(&mut r).expect("non-empty groups");
                        a.push(*gs.choose(&mut r).expect("non-empty"));
                        b.push(*gd.choose(&mut r).expect("non-empty"));
                    }
                    if let Ok(t) = kabsch(&a, &b) {
                        hyps.push(t);
                    }
                }
            }
        }
        score_new(&hyps, from, &mut scored, &mut best);
        if best >= EARLY_ACCEPT {
            break;
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(cfg.refine_top.max(1));

    let radii: Vec<GridIndex> = [3.0, 2.0, 1.0].iter().map(|m| GridIndex::new(&dst, m * cfg.delta)).collect();
    let mut winner: Option<RegistrationScore> = None;
    for &(_, h) in &scored {
        let t = refine(&hyps[h], &src, &radii, cfg.refine_rounds);
        let s = score_alignment(&src, &dst, &t, cfg.delta);
        let better = winner.as_ref().is_none_or(|w| s.precision + s.recall > w.precision + w.recall);
        if better {
            winner = Some(s);
        }
    }
    Ok(winner.unwrap_or_else(|| score_alignment(&src, &dst, &RigidTransform::identity(), cfg.delta)))
}

fn fraction_hit(index: &GridIndex, t: &RigidTransform, pts: &[Vec3]) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    pts.iter().filter(|p| index.has_neighbor(&t.apply(p))).count() as f64 / pts.len() as f64
}

/// Nearest-neighbor Kabsch iterations; the correspondence radius steps down
/// from 3δ to δ over the rounds.
fn refine(start: &RigidTransform, src: &[Vec3], radii: &[GridIndex], rounds: usize) -> RigidTransform {
    let mut t = *start;
    for round in 0..rounds {
        let index = &radii[(round * radii.len() / rounds.max(1)).min(radii.len() - 1)];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for p in src {
            let q = t.apply(p);
            if let Some((j, _)) = index.nearest_within(&q) {
                a.push(*p);
                b.push(index.point(j));
            }
        }
        let Ok(next) = kabsch(&a, &b) else { break };
        let moved = (next.rotation() - t.rotation()).norm() + (next.translation() - t.translation()).norm();
        t = next;
        if moved < 1e-13 {
            break;
        }
    }
    t
}

fn sorted_eigen(points: &[Vec3]) -> (Vec3, [Vec3; 3], [f64; 3]) {
    let c = centroid(points);
    let eig = SymmetricEigen::new(covariance(points, &c));
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vecs = idx.map(|i| eig.eigenvectors.column(i).into_owned());
    let vals = idx.map(|i| eig.eigenvalues[i]);
    (c, vecs, vals)
}

fn frame(v: &[Vec3; 3], signs: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_columns(&[v[0] * signs[0], v[1] * signs[1], v[2] * signs[2]])
}

/// Rotation taking frame `a` to frame `b` with the sign of the third axis
/// chosen to keep it proper.
fn align_frames(va: &[Vec3; 3], vb: &[Vec3; 3], s0: f64, s1: f64) -> Matrix3<f64> {
    let fa = frame(va, [1.0, 1.0, 1.0]);
    let mut r = frame(vb, [s0, s1, 1.0]) * fa.transpose();
    if r.determinant() < 0.0 {
        r = frame(vb, [s0, s1, -1.0]) * fa.transpose();
    }
    r
}

fn push(out: &mut Vec<RigidTransform>, r: Matrix3<f64>, cs: &Vec3, cd: &Vec3) {
    out.push(RigidTransform::from_parts_unchecked(r, cd - r * cs));
}

fn axis_gaps(ls: &[f64; 3], ld: &[f64; 3]) -> (bool, bool) {
    let gap = |l: &[f64; 3], a: usize| if l[0] <= 0.0 { 0.0 } else { (l[a] - l[a + 1]) / l[0] };
    (gap(ls, 0).min(gap(ld, 0)) >= EIGEN_GAP, gap(ls, 1).min(gap(ld, 1)) >= EIGEN_GAP)
}

/// Principal-axis alignments with all sign choices, when all three axes are
/// well defined.
fn principal_hypotheses(src: &[Vec3], dst: &[Vec3], out: &mut Vec<RigidTransform>) {
    let (cs, vs, ls) = sorted_eigen(src);
    let (cd, vd, ld) = sorted_eigen(dst);
    if let (true, true) = axis_gaps(&ls, &ld) {
        for (s0, s1) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            push(out, align_frames(&vs, &vd, s0, s1), &cs, &cd);
        }
    }
}

/// Rotations about a well-defined principal axis when the other two are
/// ambiguous, random rotations when no axis is well defined, and a sweep
/// about the vertical.
fn sweep_hypotheses<R: Rng>(src: &[Vec3], dst: &[Vec3], out: &mut Vec<RigidTransform>, r: &mut R) {
    let (cs, vs, ls) = sorted_eigen(src);
    let (cd, vd, ld) = sorted_eigen(dst);
    let (top, bottom) = axis_gaps(&ls, &ld);
    let steps = (360.0 / SWEEP_STEP_DEG).round() as usize;
    if top != bottom {
        let axis = if top { 0 } else { 2 };
        for s in [1.0, -1.0] {
            let (s0, s1) = if axis == 0 { (s, 1.0) } else { (1.0, s) };
            let base = align_frames(&vs, &vd, s0, s1);
            let about = Unit::new_normalize(vd[axis]);
            for k in 0..steps {
                let rot = Rotation3::from_axis_angle(&about, (k as f64 * SWEEP_STEP_DEG).to_radians());
                push(out, rot.matrix() * base, &cs, &cd);
            }
        }
    } else if !top {
        for _ in 0..RANDOM_ROTATIONS {
            let axis = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            let Some(axis) = Unit::try_new(axis, 1e-9) else { continue };
            let rot = Rotation3::from_axis_angle(&axis, r.random_range(0.0..std::f64::consts::TAU));
            push(out, *rot.matrix(), &cs, &cd);
        }
    }
    for k in 0..steps {
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), (k as f64 * SWEEP_STEP_DEG).to_radians());
        push(out, *rot.matrix(), &cs, &cd);
    }
}

/// Kabsch on group centroids: all groups, then random triples of groups.
fn centroid_hypotheses<R: Rng>(groups: &[(Vec<Vec3>, Vec<Vec3>)], out: &mut Vec<RigidTransform>, r: &mut R) {
    let pairs: Vec<(Vec3, Vec3)> = groups
        .iter()
        .filter(|g| !g.0.is_empty() && !g.1.is_empty())
        .map(|(a, b)| (centroid(a), centroid(b)))
        .collect();
    if pairs.len() < 3 {
        return;
    }
    let (a, b): (Vec<Vec3>, Vec<Vec3>) = pairs.iter().copied().unzip();
    if let Ok(t) = kabsch(&a, &b) {
        out.push(t);
    }
    if pairs.len() > 3 {
        for _ in 0..32 {
            let pick: Vec<&(Vec3, Vec3)> = pairs.choose_multiple(r, 3).collect();
            let a: Vec<Vec3> = pick.iter().map(|p| p.0).collect();
            let b: Vec<Vec3> = pick.iter().map(|p| p.1).collect();
            if let Ok(t) = kabsch(&a, &b) {
                out.push(t);
            }
        }
    }
}
