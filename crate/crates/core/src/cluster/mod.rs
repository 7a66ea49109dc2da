//! Mean-shift segmentation of foreground pixels on the unit sphere with a
//! von Mises-Fisher feature kernel and a Gaussian kernel in pixel space,
//! followed by splitting clusters into 4-connected pieces.

mod grid;

pub use grid::{split_disconnected, LabelGrid};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::feature::dot;
use crate::types::Feature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub kappa: f64,
    pub sigma_px: f64,
    pub max_iters: usize,
    pub mode_merge_cos: f64,
    /// Every `seed_stride`-th foreground pixel starts a trajectory.
    pub seed_stride: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { kappa: 20.0, sigma_px: 15.0, max_iters: 50, mode_merge_cos: 0.95, seed_stride: 4 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidConfig(format!("kappa = {} must be positive", self.kappa)));
        }
        if !(self.sigma_px > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_px = {} must be positive", self.sigma_px)));
        }
        if self.seed_stride == 0 {
            return Err(Error::InvalidConfig("seed_stride must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelSample {
    pub feature: Feature,
    pub uv: (i64, i64),
}

const CONVERGED_COS: f64 = 1.0 - 1e-6;

/// One mean-shift update of mode `m` for a trajectory anchored at `uv`.
/// `None` when every weight underflows.
pub fn meanshift_step(m: &Feature, uv: (i64, i64), all: &[PixelSample], cfg: &ClusterConfig) -> Option<Feature> {
    let mut acc = vec![0.0; m.dim()];
    let mut total = 0.0;
    for s in all {
        let w = (cfg.kappa * (m.dot(&s.feature) - 1.0)).exp() * spatial(uv, s.uv, cfg.sigma_px);
        total += w;
        acc.iter_mut().zip(s.feature.as_slice()).for_each(|(a, f)| *a += w * f);
    }
    if !(total > 0.0) {
        return None;
    }
    Feature::normalized(acc).ok()
}

fn spatial(a: (i64, i64), b: (i64, i64), sigma: f64) -> f64 {
    let (du, dv) = ((a.0 - b.0) as f64, (a.1 - b.1) as f64);
    (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp()
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterStats {
    pub seeds: usize,
    pub modes: usize,
    pub non_converged: usize,
}

/// Cluster id per sample (ids in order of first appearance along the
/// canonical pixel order, row-major by `uv`). The number of clusters is not
/// an input.
pub fn cluster_pixels(samples: &[PixelSample], cfg: &ClusterConfig) -> Result<(Vec<usize>, ClusterStats)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Ok((Vec::new(), ClusterStats::default()));
    }
    let dim = samples[0].feature.dim();
    if let Some(bad) = samples.iter().find(|s| s.feature.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.feature.dim() });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&samples[a], &samples[b]);
        (sa.uv.1, sa.uv.0).cmp(&(sb.uv.1, sb.uv.0)).then_with(|| {
            sa.feature.as_slice().iter().map(|x| x.to_bits()).cmp(sb.feature.as_slice().iter().map(|x| x.to_bits()))
        })
    });

    // Identical features share one palette entry, so a trajectory costs one
    // pass over the pixels plus cheap iterations over the palette.
    let mut palette: Vec<&Feature> = Vec::new();
    let mut palette_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let entry: Vec<usize> = samples
        .iter()
        .map(|s| {
            let key: Vec<u64> = s.feature.as_slice().iter().map(|x| x.to_bits()).collect();
            *palette_of.entry(key).or_insert_with(|| {
                palette.push(&s.feature);
                palette.len() - 1
            })
        })
        .collect();

    let seeds: Vec<usize> = order.iter().copied().step_by(cfg.seed_stride).collect();
    let runs: Vec<(Feature, bool)> = seeds
        .par_iter()
        .map(|&s| {
            let uv = samples[s].uv;
            let mut mass = vec![0.0; palette.len()];
            for (j, p) in samples.iter().enumerate() {
                mass[entry[j]] += spatial(uv, p.uv, cfg.sigma_px);
            }
            let mut m = samples[s].feature.clone();
            for _ in 0..cfg.max_iters {
                let mut acc = vec![0.0; dim];
                let mut total = 0.0;
                for (p, f) in palette.iter().enumerate() {
                    if mass[p] == 0.0 {
                        continue;
                    }
                    let w = (cfg.kappa * (m.dot(f) - 1.0)).exp() * mass[p];
                    total += w;
                    acc.iter_mut().zip(f.as_slice()).for_each(|(a, x)| *a += w * x);
                }
                let next = if total > 0.0 { Feature::normalized(acc).ok() } else { None };
                let Some(next) = next else { return (m, false) };
                let moved = next.dot(&m);
                m = next;
                if moved > CONVERGED_COS {
                    return (m, true);
                }
            }
            (m, false)
        })
        .collect();

    let mut reps: Vec<&Feature> = Vec::new();
    let seed_cluster: Vec<usize> = runs
        .iter()
        .map(|(m, _)| match reps.iter().position(|r| r.dot(m) >= cfg.mode_merge_cos) {
            Some(c) => c,
            None => {
                reps.push(m);
                reps.len() - 1
            }
        })
        .collect();

    let two_s2 = 2.0 * cfg.sigma_px * cfg.sigma_px;
    let mut labels = vec![0usize; samples.len()];
    let assign: Vec<(usize, usize)> = order
        .par_iter()
        .enumerate()
        .map(|(rank, &px)| {
            if rank % cfg.seed_stride == 0 {
                return (px, seed_cluster[rank / cfg.seed_stride]);
            }
            let p = &samples[px];
            let mut best = (f64::INFINITY, 0);
            for (si, &s) in seeds.iter().enumerate() {
                let q = &samples[s];
                let (du, dv) = ((p.uv.0 - q.uv.0) as f64, (p.uv.1 - q.uv.1) as f64);
                let c = cfg.kappa * (1.0 - dot(p.feature.as_slice(), q.feature.as_slice())) + (du * du + dv * dv) / two_s2;
                if c < best.0 {
                    best = (c, si);
                }
            }
            (px, seed_cluster[best.1])
        })
        .collect();
    for (px, c) in assign {
        labels[px] = c;
    }
    // Renumber by first appearance in canonical order.
    let mut renum: HashMap<usize, usize> = HashMap::new();
    for &px in &order {
        let next = renum.len();
        renum.entry(labels[px]).or_insert(next);
    }
    labels.iter_mut().for_each(|l| *l = renum[l]);
    let stats = ClusterStats {
        seeds: seeds.len(),
        modes: reps.len(),
        non_converged: runs.iter().filter(|r| !r.1).count(),
    };
    Ok((labels, stats))
}

/// Clusters the foreground of a `width x height` grid given one feature per
/// foreground pixel (row-major, `None` for background) and splits clusters
/// into connected pieces.
pub fn cluster_image(
    width: usize,
    height: usize,
    features: &[Option<Feature>],
    cfg: &ClusterConfig,
) -> Result<(LabelGrid, ClusterStats)> {
    if features.len() != width * height {
        return Err(Error::DimensionMismatch { expected: width * height, found: features.len() });
    }
    let pixels: Vec<usize> = (0..features.len()).filter(|&p| features[p].is_some()).collect();
    let samples: Vec<PixelSample> = pixels
        .iter()
        .map(|&p| PixelSample {
            feature: features[p].clone().expect("foreground"),
            uv: ((p % width) as i64, (p / width) as i64),
        })
        .collect();
    let (labels, stats) = cluster_pixels(&samples, cfg)?;
    let mut grid = LabelGrid::empty(width, height);
    for (&p, &l) in pixels.iter().zip(&labels) {
        grid.labels[p] = Some(l);
    }
    Ok((split_disconnected(&grid), stats))
}
