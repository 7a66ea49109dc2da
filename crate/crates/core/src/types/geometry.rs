use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or direction in meters.
pub type Vec3 = Vector3<f64>;

const ORTHO_TOL: f64 = 1e-9;

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    /// Fails unless `RᵀR = I` and `det R = +1` to 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rigid transform"));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!("rotation not orthonormal ({ortho:e})")));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!("determinant {det} is not +1")));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn translation_only(t: Vec3) -> Self {
        Self { rotation: Matrix3::identity(), translation: t }
    }

    /// Rotation by `yaw` radians about +z followed by `t`.
    pub fn from_yaw(yaw: f64, t: Vec3) -> Self {
        let rotation = *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix();
        Self { rotation, translation: t }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64, t: Vec3) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self { rotation: *Rotation3::from_axis_angle(&axis, angle).matrix(), translation: t }
    }

    /// Camera pose looking from `eye` towards `target`. The camera frame uses
    /// +z forward, +x right and +y down; the returned transform maps camera
    /// coordinates to world coordinates.
    pub fn look_at(eye: Vec3, target: Vec3, world_up: Vec3) -> Result<Self> {
        let forward = (target - eye).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidTransform("eye and target coincide".into())
        })?;
        let right = forward
            .cross(&world_up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidTransform("view direction parallel to up".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(rotation, eye)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = &t.rotation;
        TransformRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        RigidTransform::new(m, Vec3::from(r.translation))
    }
}
