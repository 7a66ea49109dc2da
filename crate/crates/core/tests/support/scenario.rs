use rand::Rng;
use segmatch::synth::{build_segment_graph, generate_templates, GeneratorConfig, ObjectInstance, ObjectTemplate, Primitive, SceneSpec};
use segmatch::types::{PointCloud, RigidTransform, SegmentGraph, Vec3};

use super::oracle::rng;

/// A primitive of kind `target` (0 box, 1 cylinder, 2 cap) with the same
/// height as `p` and `scale` times its enclosing radius.
pub fn look_alike(p: &Primitive, target: u8, scale: f64) -> Primitive {
    let (h, a) = (p.height(), p.radius_xy() * scale);
    match target {
        0 => Primitive::Box { width: a * std::f64::consts::SQRT_2, depth: a * std::f64::consts::SQRT_2, height: h },
        1 => Primitive::Cylinder { radius: a, height: h },
        _ => {
            let h = h.min(a);
            Primitive::SphereCap { radius: (a * a + h * h) / (2.0 * h), height: h }
        }
    }
}

pub fn kind(p: &Primitive) -> u8 {
    match p {
        Primitive::Box { .. } => 0,
        Primitive::Cylinder { .. } => 1,
        Primitive::SphereCap { .. } => 2,
    }
}

/// One object seen in two scenes; in the second scene one part has been
/// swapped for a differently shaped part carrying the same descriptor.
pub struct ImpostorScenario {
    pub graphs: Vec<SegmentGraph>,
    pub clouds: Vec<PointCloud>,
    /// Segment id of the swapped part, identical in both scenes.
    pub impostor: usize,
}

/// The swapped part is re-drawn (other kinds, a few radii) until the swapped
/// object has the same segment graph as the original.
pub fn impostor_scenario(seed: u64) -> ImpostorScenario {
    let cfg = GeneratorConfig { k_objects: 1, parts_per_object: (3, 4), ..Default::default() };
    let original = generate_templates(&cfg, seed).unwrap().remove(0);
    let mut r = rng(seed ^ 0x1a2b);
    let yaws = (r.random_range(0.0..6.28), r.random_range(0.0..6.28));
    let scene = |id: usize, template: &ObjectTemplate, pose: RigidTransform| {
        let spec = SceneSpec {
            scene_id: id,
            instances: vec![ObjectInstance { template_id: 0, pose }],
            occlusion_drop_prob: 0.0,
            feature_noise_sigma: 0.0,
            split_prob: 0.0,
            seed: seed + id as u64,
        };
        build_segment_graph(&spec, std::slice::from_ref(template), cfg.adjacency_eps).unwrap()
    };
    let a = scene(0, &original, RigidTransform::from_yaw(yaws.0, Vec3::zeros()));
    let pose_b = RigidTransform::from_yaw(yaws.1, Vec3::new(0.3, -0.1, 0.0));
    let first = r.random_range(0..original.parts.len());
    for offset in 0..original.parts.len() {
        let impostor = (first + offset) % original.parts.len();
        let part = &original.parts[impostor];
        for target in (0..3u8).filter(|&t| t != kind(&part.primitive)) {
            for scale in [1.0, 1.1, 1.2, 0.9, 1.3] {
                let mut swapped = original.clone();
                let p = &mut swapped.parts[impostor];
                p.primitive = look_alike(&part.primitive, target, scale);
                let n = ((p.primitive.area() / (cfg.point_spacing * cfg.point_spacing)).ceil() as usize)
                    .max(cfg.min_part_points);
                p.points = p.primitive.sample_surface(n, &mut r).iter().map(|q| p.pose.apply(q)).collect();
                let b = scene(1, &swapped, pose_b.clone());
                if b.graph.edges() == a.graph.edges() {
                    return ImpostorScenario { graphs: vec![a.graph, b.graph], clouds: vec![a.cloud, b.cloud], impostor };
                }
            }
        }
    }
    panic!("no graph-preserving swap for seed {seed}");
}
