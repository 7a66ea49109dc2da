use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PointCloud, RigidTransform, Vec3};

/// Pinhole intrinsics; pixel `(u, v)` has its center at integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self { width: 160, height: 120, fx: 150.0, fy: 150.0, cx: 80.0, cy: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub intrinsics: Intrinsics,
    pub train_views: usize,
    pub test_views: usize,
    pub train_elevation_deg: f64,
    pub test_elevation_deg: f64,
    /// World-space splat radius of a point; 0 paints a single pixel.
    pub point_radius: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            intrinsics: Intrinsics::default(),
            train_views: 8,
            test_views: 20,
            train_elevation_deg: 55.0,
            test_elevation_deg: 45.0,
            point_radius: 0.01,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if k.width == 0 || k.height == 0 || !(k.fx > 0.0) || !(k.fy > 0.0) {
            return Err(Error::InvalidConfig("intrinsics need positive size and focal lengths".into()));
        }
        if self.train_views == 0 {
            return Err(Error::InvalidConfig("train_views must be >= 1".into()));
        }
        if !(self.point_radius >= 0.0 && self.point_radius.is_finite()) {
            return Err(Error::InvalidConfig("point_radius must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// `n` camera-to-world poses on a circle around `center`, all looking at it.
/// `phase` offsets the azimuth in units of the angular step.
pub fn orbit_cameras(center: &Vec3, distance: f64, n: usize, elevation_deg: f64, phase: f64) -> Result<Vec<RigidTransform>> {
    let el = elevation_deg.to_radians();
    (0..n)
        .map(|i| {
            let az = (i as f64 + phase) * std::f64::consts::TAU / n as f64;
            let eye = center + distance * Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            RigidTransform::look_at(eye, *center, Vec3::z())
        })
        .collect()
}

/// Per-pixel segment id, object id (`-1` for background) and depth in meters
/// (`0` for background).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImageRepr", into = "ImageRepr")]
pub struct LabeledImage {
    pub scene_id: usize,
    pub frame: usize,
    pub intrinsics: Intrinsics,
    pub camera: RigidTransform,
    segment: Vec<i32>,
    object: Vec<i32>,
    depth: Vec<f32>,
}

impl LabeledImage {
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn pixel_count(&self) -> usize {
        self.segment.len()
    }

    pub fn segment_at(&self, pixel: usize) -> Option<usize> {
        usize::try_from(self.segment[pixel]).ok()
    }

    pub fn object_at(&self, pixel: usize) -> Option<usize> {
        usize::try_from(self.object[pixel]).ok()
    }

    pub fn depth_at(&self, pixel: usize) -> f32 {
        self.depth[pixel]
    }

    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.segment.len()).filter(|&p| self.segment[p] >= 0)
    }

    /// Pixel coordinates `(u, v)` of a row-major index.
    pub fn uv(&self, pixel: usize) -> (f64, f64) {
        ((pixel % self.width()) as f64, (pixel / self.width()) as f64)
    }

    /// Pixel count per segment id.
    pub fn segment_histogram(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut h = std::collections::BTreeMap::new();
        for p in self.foreground() {
            *h.entry(self.segment[p] as usize).or_insert(0) += 1;
        }
        h
    }
}

/// Z-buffered splatting of `cloud` seen from `camera` (camera to world).
pub fn project_scene(
    cloud: &PointCloud,
    camera: &RigidTransform,
    k: &Intrinsics,
    point_radius: f64,
    scene_id: usize,
    frame: usize,
) -> LabeledImage {
    let n = k.width * k.height;
    let mut zbuf = vec![f64::INFINITY; n];
    let mut segment = vec![-1i32; n];
    let mut object = vec![-1i32; n];
    let world_to_cam = camera.inverse();
    let objects = cloud.object_ids();
    for (i, p) in cloud.points().iter().enumerate() {
        let q = world_to_cam.apply(p);
        if q.z <= 1e-6 {
            continue;
        }
        let u = k.fx * q.x / q.z + k.cx;
        let v = k.fy * q.y / q.z + k.cy;
        let rho = k.fx * point_radius / q.z;
        let reach = rho.floor() as i64;
        let (uc, vc) = (u.round() as i64, v.round() as i64);
        for dv in -reach - 1..=reach + 1 {
            for du in -reach - 1..=reach + 1 {
                let (px, py) = (uc + du, vc + dv);
                if px < 0 || py < 0 || px >= k.width as i64 || py >= k.height as i64 {
                    continue;
                }
                let inside = if du == 0 && dv == 0 {
                    true
                } else {
                    let (ex, ey) = (px as f64 - u, py as f64 - v);
                    ex * ex + ey * ey <= rho * rho
                };
                if !inside {
                    continue;
                }
                let idx = py as usize * k.width + px as usize;
                if q.z < zbuf[idx] {
                    zbuf[idx] = q.z;
                    segment[idx] = cloud.segment_ids()[i] as i32;
                    object[idx] = objects.map_or(-1, |o| o[i] as i32);
                }
            }
        }
    }
    let depth = zbuf.iter().map(|&z| if z.is_finite() { quantize_depth(z) } else { 0.0 }).collect();
    LabeledImage { scene_id, frame, intrinsics: *k, camera: camera.clone(), segment, object, depth }
}

fn quantize_depth(z: f64) -> f32 {
    (z * 1000.0).round() as i32 as f32 / 1000.0
}

#[derive(Serialize, Deserialize)]
struct ImageRepr {
    scene_id: usize,
    frame: usize,
    intrinsics: Intrinsics,
    camera: RigidTransform,
    segment: Vec<[i32; 2]>,
    object: Vec<[i32; 2]>,
    depth_mm: Vec<[i32; 2]>,
}

fn rle(values: impl Iterator<Item = i32>) -> Vec<[i32; 2]> {
    let mut out: Vec<[i32; 2]> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some(run) if run[0] == v => run[1] += 1,
            _ => out.push([v, 1]),
        }
    }
    out
}

fn unrle(runs: &[[i32; 2]], n: usize, what: &str) -> Result<Vec<i32>> {
    let mut out = Vec::with_capacity(n);
    for &[v, len] in runs {
        if len <= 0 {
            return Err(Error::InvalidConfig(format!("{what}: non-positive run length")));
        }
        out.extend(std::iter::repeat_n(v, len as usize));
    }
    if out.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: out.len() });
    }
    Ok(out)
}

impl From<LabeledImage> for ImageRepr {
    fn from(img: LabeledImage) -> Self {
        ImageRepr {
            scene_id: img.scene_id,
            frame: img.frame,
            intrinsics: img.intrinsics,
            camera: img.camera,
            segment: rle(img.segment.iter().copied()),
            object: rle(img.object.iter().copied()),
            depth_mm: rle(img.depth.iter().map(|&d| (d * 1000.0).round() as i32)),
        }
    }
}

impl TryFrom<ImageRepr> for LabeledImage {
    type Error = Error;

    fn try_from(r: ImageRepr) -> Result<Self> {
        let n = r.intrinsics.width * r.intrinsics.height;
        let segment = unrle(&r.segment, n, "segment")?;
        let object = unrle(&r.object, n, "object")?;
        let depth = unrle(&r.depth_mm, n, "depth_mm")?.into_iter().map(|mm| mm as f32 / 1000.0).collect();
        Ok(LabeledImage { scene_id: r.scene_id, frame: r.frame, intrinsics: r.intrinsics, camera: r.camera, segment, object, depth })
    }
}
