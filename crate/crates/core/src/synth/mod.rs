//! Synthetic multi-scene datasets: objects assembled from rigid primitive
//! parts, tabletop scene layouts, per-scene segment graphs and labeled
//! projections. Parts are the over-segments, so segment consistency across
//! scenes is controlled directly by the generator's noise settings.

mod dataset;
mod primitives;
mod render;
mod scene;
mod templates;

pub use dataset::{Dataset, SceneData};
pub use primitives::Primitive;
pub use render::{orbit_cameras, project_scene, Intrinsics, LabeledImage, RenderConfig};
pub use scene::{
    build_segment_graph, generate_dataset, touching_pose, ObjectInstance, SceneInstance, SceneSpec, SegmentOrigin,
};
pub use templates::{generate_templates, ObjectTemplate, PartTemplate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs of the synthetic world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub k_objects: usize,
    pub m_scenes: usize,
    /// Inclusive range of parts per object.
    pub parts_per_object: (usize, usize),
    /// Inclusive range of objects per scene (clamped to `k_objects`).
    pub objects_per_scene: (usize, usize),
    /// Probability that a part is missing from a scene (occlusion).
    pub occlusion_drop_prob: f64,
    /// Per-component standard deviation of the Gaussian noise added to part
    /// descriptors in each scene before renormalization.
    pub feature_noise_sigma: f64,
    /// Probability that a part copies (up to small noise) the descriptor of a
    /// differently shaped part from another object.
    pub impostor_prob: f64,
    /// Probability that an object is placed in contact with an earlier one.
    pub touch_prob: f64,
    /// Probability that a part is cut into two segments in a scene.
    pub split_prob: f64,
    pub point_spacing: f64,
    pub min_part_points: usize,
    pub adjacency_eps: f64,
    pub feature_dim: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            k_objects: 5,
            m_scenes: 8,
            parts_per_object: (2, 4),
            objects_per_scene: (2, 4),
            occlusion_drop_prob: 0.0,
            feature_noise_sigma: 0.0,
            impostor_prob: 0.0,
            touch_prob: 0.3,
            split_prob: 0.0,
            point_spacing: 0.01,
            min_part_points: 200,
            adjacency_eps: 0.01,
            feature_dim: crate::types::FEATURE_DIM,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k_objects < 1 {
            return bad("k_objects must be >= 1".into());
        }
        if self.m_scenes < 2 {
            return bad("m_scenes must be >= 2".into());
        }
        let (lo, hi) = self.parts_per_object;
        if lo < 1 || hi < lo {
            return bad(format!("invalid parts_per_object range ({lo}, {hi})"));
        }
        let (lo, hi) = self.objects_per_scene;
        if lo < 1 || hi < lo {
            return bad(format!("invalid objects_per_scene range ({lo}, {hi})"));
        }
        for (name, p) in [
            ("occlusion_drop_prob", self.occlusion_drop_prob),
            ("impostor_prob", self.impostor_prob),
            ("touch_prob", self.touch_prob),
            ("split_prob", self.split_prob),
        ] {
            if !(0.0..1.0).contains(&p) && !(name != "occlusion_drop_prob" && p == 1.0) {
                return bad(format!("{name} = {p} outside [0, 1)"));
            }
        }
        if !(self.feature_noise_sigma >= 0.0 && self.feature_noise_sigma.is_finite()) {
            return bad("feature_noise_sigma must be finite and >= 0".into());
        }
        if !(self.point_spacing > 0.0 && self.adjacency_eps > 0.0) {
            return bad("point_spacing and adjacency_eps must be positive".into());
        }
        if self.feature_dim < 2 {
            return bad("feature_dim must be >= 2".into());
        }
        Ok(())
    }
}
