//! Uniform-grid radius search over 3D points.

use rustc_hash::FxHashMap as HashMap;

use crate::types::Vec3;

type Cell = (i64, i64, i64);

/// Buckets points into cubic cells of edge `radius`, so every neighbor
/// within `radius` lives in the 27 cells around a query.
#[derive(Clone, Debug)]
pub struct GridIndex {
    radius: f64,
    cells: HashMap<Cell, Vec<u32>>,
    points: Vec<Vec3>,
}

impl GridIndex {
    pub fn new(points: &[Vec3], radius: f64) -> Self {
        assert!(radius > 0.0, "grid radius must be positive");
        let mut cells: HashMap<Cell, Vec<u32>> = HashMap::default();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, radius)).or_default().push(i as u32);
        }
        Self { radius, cells, points: points.to_vec() }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    /// Nearest indexed point strictly closer than `radius`, as `(index, distance²)`.
    pub fn nearest_within(&self, q: &Vec3) -> Option<(usize, f64)> {
        let r2 = self.radius * self.radius;
        let (cx, cy, cz) = cell_of(q, self.radius);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &i in bucket {
                        let d2 = (self.points[i as usize] - q).norm_squared();
                        if d2 < r2 && best.is_none_or(|(_, b)| d2 < b) {
                            best = Some((i as usize, d2));
                        }
                    }
                }
            }
        }
        best
    }

    pub fn has_neighbor(&self, q: &Vec3) -> bool {
        let r2 = self.radius * self.radius;
        let (cx, cy, cz) = cell_of(q, self.radius);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        if bucket.iter().any(|&i| (self.points[i as usize] - q).norm_squared() < r2) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Fraction of `queries` with an indexed point closer than the radius.
    pub fn coverage(&self, queries: impl IntoIterator<Item = Vec3>) -> f64 {
        let mut n = 0usize;
        let mut hit = 0usize;
        for q in queries {
            n += 1;
            hit += usize::from(self.has_neighbor(&q));
        }
        if n == 0 {
            0.0
        } else {
            hit as f64 / n as f64
        }
    }
}

fn cell_of(p: &Vec3, edge: f64) -> Cell {
    ((p.x / edge).floor() as i64, (p.y / edge).floor() as i64, (p.z / edge).floor() as i64)
}

/// Axis-aligned bounds of a point set.
pub fn bounds(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    Some(points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
}

/// Whether the minimum distance between two point sets is below `eps`.
pub fn clouds_within(a: &[Vec3], b: &[Vec3], eps: f64) -> bool {
    let (Some((alo, ahi)), Some((blo, bhi))) = (bounds(a), bounds(b)) else { return false };
    let gap = (blo - ahi).sup(&(alo - bhi)).sup(&Vec3::zeros());
    if gap.norm() >= eps {
        return false;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let index = GridIndex::new(large, eps);
    small.iter().any(|q| index.has_neighbor(q))
}
