use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default embedding dimension.
pub const FEATURE_DIM: usize = 16;

const UNIT_TOL: f64 = 1e-6;
const MIN_NORM: f64 = 1e-12;

/// A unit-norm embedding vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Feature(Vec<f64>);

impl Feature {
    /// Wraps values that are already unit norm (within 1e-6).
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
        let norm = l2(&values);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitNorm { norm });
        }
        Ok(Self(values))
    }

    /// Scales `values` onto the unit sphere.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
        let norm = l2(&values);
        if norm < MIN_NORM {
            return Err(Error::DegenerateNorm { norm });
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self(values))
    }

    /// Uniformly distributed direction on the sphere.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(f) = Self::normalized(v) {
                return f;
            }
        }
    }

    /// Standard basis vector `e_axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Self(v)
    }

    /// Adds isotropic Gaussian noise with per-component standard deviation
    /// `sigma`, then renormalizes.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Self {
        if sigma == 0.0 {
            return self.clone();
        }
        loop {
            let v: Vec<f64> = self
                .0
                .iter()
                .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            if let Ok(f) = Self::normalized(v) {
                return f;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Feature) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Feature {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::from_unit(values)
    }
}

impl From<Feature> for Vec<f64> {
    fn from(f: Feature) -> Self {
        f.0
    }
}

/// `1 − a·b`, in `[0, 2]` for unit inputs.
pub fn cosine_distance(a: &Feature, b: &Feature) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let d = 1.0 - a.dot(b);
    if !d.is_finite() {
        return Err(Error::NonFinite("cosine distance"));
    }
    Ok(d.clamp(0.0, 2.0))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
