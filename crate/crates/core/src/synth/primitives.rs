use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::types::Vec3;

/// Closed primitive surface in a local frame: centered on the z axis with
/// its base on `z = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Box { width: f64, depth: f64, height: f64 },
    Cylinder { radius: f64, height: f64 },
    /// Spherical cap of a sphere with `radius`, cut to `height <= radius`,
    /// closed by its base disk.
    SphereCap { radius: f64, height: f64 },
}

impl Primitive {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        match rng.random_range(0..3) {
            0 => Primitive::Box {
                width: rng.random_range(0.03..0.08),
                depth: rng.random_range(0.03..0.08),
                height: rng.random_range(0.03..0.08),
            },
            1 => Primitive::Cylinder { radius: rng.random_range(0.015..0.04), height: rng.random_range(0.03..0.09) },
            _ => {
                let radius = rng.random_range(0.025..0.045);
                Primitive::SphereCap { radius, height: radius * rng.random_range(0.5..1.0) }
            }
        }
    }

    /// Random primitive of a different kind than `self`.
    pub fn random_other_kind<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        loop {
            let p = Self::random(rng);
            if std::mem::discriminant(&p) != std::mem::discriminant(self) {
                return p;
            }
        }
    }

    pub fn height(&self) -> f64 {
        match *self {
            Primitive::Box { height, .. } | Primitive::Cylinder { height, .. } | Primitive::SphereCap { height, .. } => {
                height
            }
        }
    }

    /// Radius of the smallest z-axis cylinder enclosing the shape.
    pub fn radius_xy(&self) -> f64 {
        match *self {
            Primitive::Box { width, depth, .. } => (width * width + depth * depth).sqrt() / 2.0,
            Primitive::Cylinder { radius, .. } => radius,
            Primitive::SphereCap { radius, height } => cap_base_radius(radius, height),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Box { width, depth, height } => 2.0 * (width * depth + width * height + depth * height),
            Primitive::Cylinder { radius, height } => 2.0 * PI * radius * (radius + height),
            Primitive::SphereCap { radius, height } => {
                let a = cap_base_radius(radius, height);
                2.0 * PI * radius * height + PI * a * a
            }
        }
    }

    /// `n` points uniform over the surface.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec3> {
        (0..n).map(|_| self.sample_point(rng)).collect()
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match *self {
            Primitive::Box { width, depth, height } => {
                let faces = [width * depth, width * depth, depth * height, depth * height, width * height, width * height];
                let (hx, hy) = (width / 2.0, depth / 2.0);
                let u: f64 = rng.random_range(-1.0..1.0);
                let v: f64 = rng.random_range(0.0..1.0);
                match pick(&faces, rng) {
                    0 => Vec3::new(u * hx, (2.0 * v - 1.0) * hy, 0.0),
                    1 => Vec3::new(u * hx, (2.0 * v - 1.0) * hy, height),
                    2 => Vec3::new(-hx, u * hy, v * height),
                    3 => Vec3::new(hx, u * hy, v * height),
                    4 => Vec3::new(u * hx, -hy, v * height),
                    _ => Vec3::new(u * hx, hy, v * height),
                }
            }
            Primitive::Cylinder { radius, height } => {
                let disk = PI * radius * radius;
                let side = 2.0 * PI * radius * height;
                let phi = rng.random_range(0.0..2.0 * PI);
                match pick(&[disk, disk, side], rng) {
                    f @ (0 | 1) => {
                        let r = radius * rng.random_range(0.0f64..1.0).sqrt();
                        Vec3::new(r * phi.cos(), r * phi.sin(), if f == 0 { 0.0 } else { height })
                    }
                    _ => Vec3::new(radius * phi.cos(), radius * phi.sin(), rng.random_range(0.0..height)),
                }
            }
            Primitive::SphereCap { radius, height } => {
                let a = cap_base_radius(radius, height);
                let phi = rng.random_range(0.0..2.0 * PI);
                match pick(&[PI * a * a, 2.0 * PI * radius * height], rng) {
                    0 => {
                        let r = a * rng.random_range(0.0f64..1.0).sqrt();
                        Vec3::new(r * phi.cos(), r * phi.sin(), 0.0)
                    }
                    _ => {
                        // Archimedes: area is uniform in height along the axis.
                        let zc = rng.random_range((radius - height)..radius);
                        let rho = (radius * radius - zc * zc).max(0.0).sqrt();
                        Vec3::new(rho * phi.cos(), rho * phi.sin(), zc - (radius - height))
                    }
                }
            }
        }
    }
}

fn cap_base_radius(radius: f64, height: f64) -> f64 {
    (height * (2.0 * radius - height)).max(0.0).sqrt()
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}
