use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::Vec3;

/// Points with per-point segment labels and optional ground-truth object
/// labels. Segment ids always form the contiguous range `0..segment_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    segment_ids: Vec<usize>,
    object_ids: Option<Vec<usize>>,
    segment_count: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, segment_ids: Vec<usize>, object_ids: Option<Vec<usize>>) -> Result<Self> {
        if points.len() != segment_ids.len() {
            return Err(Error::InvalidPointCloud(format!(
                "{} points but {} segment ids",
                points.len(),
                segment_ids.len()
            )));
        }
        if let Some(obj) = &object_ids {
            if obj.len() != points.len() {
                return Err(Error::InvalidPointCloud(format!(
                    "{} points but {} object ids",
                    points.len(),
                    obj.len()
                )));
            }
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("point cloud"));
        }
        let segment_count = segment_ids.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; segment_count];
        for &s in &segment_ids {
            seen[s] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPointCloud(format!("segment {missing} has no points")));
        }
        Ok(Self { points, segment_ids, object_ids, segment_count })
    }

    /// A cloud whose points all belong to segment 0.
    pub fn unsegmented(points: Vec<Vec3>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![0; n], None)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn segment_ids(&self) -> &[usize] {
        &self.segment_ids
    }

    pub fn object_ids(&self) -> Option<&[usize]> {
        self.object_ids.as_deref()
    }

    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    /// Point indices of each segment, in point order.
    pub fn segment_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.segment_count];
        for (i, &s) in self.segment_ids.iter().enumerate() {
            out[s].push(i);
        }
        out
    }

    pub fn segment_points(&self, segment: usize) -> Vec<Vec3> {
        self.points
            .iter()
            .zip(&self.segment_ids)
            .filter(|(_, &s)| s == segment)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Line format `x y z segment_id [object_id]`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 48);
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{} {} {} {}", p.x, p.y, p.z, self.segment_ids[i]);
            if let Some(obj) = &self.object_ids {
                let _ = write!(out, " {}", obj[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut segs = Vec::new();
        let mut objs = Vec::new();
        let mut with_objects: Option<bool> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let has_obj = match fields.len() {
                4 => false,
                5 => true,
                n => {
                    return Err(Error::Parse { line: lineno + 1, msg: format!("expected 4 or 5 fields, got {n}") })
                }
            };
            if *with_objects.get_or_insert(has_obj) != has_obj {
                return Err(Error::Parse { line: lineno + 1, msg: "inconsistent object id column".into() });
            }
            let coord = |k: usize| -> Result<f64> {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line: lineno + 1, msg: format!("coordinate: {e}") })
            };
            let id = |k: usize| -> Result<usize> {
                fields[k]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse { line: lineno + 1, msg: format!("id: {e}") })
            };
            points.push(Vec3::new(coord(0)?, coord(1)?, coord(2)?));
            segs.push(id(3)?);
            if has_obj {
                objs.push(id(4)?);
            }
        }
        let objs = with_objects.unwrap_or(false).then_some(objs);
        Self::new(points, segs, objs)
    }
}
