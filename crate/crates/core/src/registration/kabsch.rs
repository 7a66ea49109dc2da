use nalgebra::{Matrix3, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::types::{RigidTransform, Vec3};

const DEGENERATE_RATIO: f64 = 1e-10;

pub(crate) fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Scatter matrix about the centroid.
pub(crate) fn covariance(points: &[Vec3], c: &Vec3) -> Matrix3<f64> {
    points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - c;
        acc + d * d.transpose()
    }) / points.len() as f64
}

/// Least-squares rigid motion taking `src[i]` onto `dst[i]`, restricted to
/// proper rotations.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch { expected: src.len(), found: dst.len() });
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints { found: src.len() });
    }
    if src.iter().chain(dst).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("correspondence coordinates"));
    }
    let cs = centroid(src);
    let cd = centroid(dst);
    for (pts, c, side) in [(src, &cs, "source"), (dst, &cd, "target")] {
        let ev = SymmetricEigen::new(covariance(pts, c)).eigenvalues;
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        if ev[0] <= 0.0 || ev[1] <= DEGENERATE_RATIO * ev[0] {
            return Err(Error::DegenerateCorrespondences(format!("{side} points are collinear or coincident")));
        }
    }
    let h = src.iter().zip(dst).fold(Matrix3::zeros(), |acc, (p, q)| acc + (p - cs) * (q - cd).transpose());
    let svd = SVD::new(h, true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let r = v * fix * u.transpose();
    Ok(RigidTransform::from_parts_unchecked(r, cd - r * cs))
}

/// Root-mean-square residual of `t` on the correspondences.
pub fn residual_rms(t: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    let s: f64 = src.iter().zip(dst).map(|(p, q)| (t.apply(p) - q).norm_squared()).sum();
    (s / src.len().max(1) as f64).sqrt()
}
