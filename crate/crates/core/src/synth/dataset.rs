use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::{orbit_cameras, project_scene, LabeledImage, RenderConfig};
use super::scene::{build_segment_graph, generate_dataset, SceneInstance, SceneSpec, SegmentOrigin};
use super::{GeneratorConfig, ObjectTemplate};
use crate::artifact::{read_json, read_text, write_json, write_json_compact, write_text};
use crate::error::{Error, Result};
use crate::types::{PointCloud, SegmentGraph, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneData {
    pub spec: SceneSpec,
    pub instance: SceneInstance,
    pub train_frames: Vec<LabeledImage>,
    pub test_frames: Vec<LabeledImage>,
}

impl SceneData {
    pub fn scene_id(&self) -> usize {
        self.spec.scene_id
    }

    pub fn graph(&self) -> &SegmentGraph {
        &self.instance.graph
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.instance.cloud
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub generator: GeneratorConfig,
    pub render: RenderConfig,
    pub seed: u64,
    pub templates: Vec<ObjectTemplate>,
    pub scenes: Vec<SceneData>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    generator: GeneratorConfig,
    render: RenderConfig,
    seed: u64,
    scenes: usize,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    spec: SceneSpec,
    origins: Vec<SegmentOrigin>,
    train_frames: usize,
    test_frames: usize,
}

impl Dataset {
    pub fn generate(generator: &GeneratorConfig, render: &RenderConfig, seed: u64) -> Result<Self> {
        render.validate()?;
        let (templates, specs) = generate_dataset(generator, seed)?;
        let scenes = specs
            .into_par_iter()
            .map(|spec| {
                let instance = build_segment_graph(&spec, &templates, generator.adjacency_eps)?;
                let (train_frames, test_frames) = render_views(&instance.cloud, render, spec.scene_id)?;
                Ok(SceneData { spec, instance, train_frames, test_frames })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { generator: generator.clone(), render: render.clone(), seed, templates, scenes })
    }

    pub fn graphs(&self) -> Vec<SegmentGraph> {
        self.scenes.iter().map(|s| s.instance.graph.clone()).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(
            &dir.join("dataset.json"),
            &Manifest {
                generator: self.generator.clone(),
                render: self.render.clone(),
                seed: self.seed,
                scenes: self.scenes.len(),
            },
        )?;
        write_json_compact(&dir.join("templates.json"), &self.templates)?;
        self.scenes.par_iter().try_for_each(|s| {
            let sd = dir.join(format!("scene_{}", s.scene_id()));
            write_json(
                &sd.join("scene.json"),
                &SceneFile {
                    spec: s.spec.clone(),
                    origins: s.instance.origins.clone(),
                    train_frames: s.train_frames.len(),
                    test_frames: s.test_frames.len(),
                },
            )?;
            write_text(&sd.join("cloud.txt"), &s.instance.cloud.to_text())?;
            write_json(&sd.join("graph.json"), &s.instance.graph)?;
            for (t, img) in s.train_frames.iter().enumerate() {
                write_json_compact(&sd.join("frames").join(format!("{t}.img.json")), img)?;
            }
            for (t, img) in s.test_frames.iter().enumerate() {
                write_json_compact(&sd.join("test_frames").join(format!("{t}.img.json")), img)?;
            }
            Ok(())
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(&dir.join("dataset.json"))?;
        let templates: Vec<ObjectTemplate> = read_json(&dir.join("templates.json"))?;
        let scenes = (0..manifest.scenes)
            .into_par_iter()
            .map(|k| {
                let sd = dir.join(format!("scene_{k}"));
                let file: SceneFile = read_json(&sd.join("scene.json"))?;
                let cloud = PointCloud::from_text(&read_text(&sd.join("cloud.txt"))?)?;
                let graph: SegmentGraph = read_json(&sd.join("graph.json"))?;
                if graph.node_count() != cloud.segment_count() || file.origins.len() != graph.node_count() {
                    return Err(Error::InvalidGraph(format!("scene {k}: graph, cloud and origins disagree")));
                }
                let train_frames = (0..file.train_frames)
                    .map(|t| read_json(&sd.join("frames").join(format!("{t}.img.json"))))
                    .collect::<Result<Vec<_>>>()?;
                let test_frames = (0..file.test_frames)
                    .map(|t| read_json(&sd.join("test_frames").join(format!("{t}.img.json"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SceneData {
                    spec: file.spec,
                    instance: SceneInstance { graph, cloud, origins: file.origins },
                    train_frames,
                    test_frames,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { generator: manifest.generator, render: manifest.render, seed: manifest.seed, templates, scenes })
    }
}

/// Training orbit and a half-step offset, lower test orbit.
fn render_views(cloud: &PointCloud, cfg: &RenderConfig, scene_id: usize) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>)> {
    let pts = cloud.points();
    let center = if pts.is_empty() { Vec3::zeros() } else { pts.iter().sum::<Vec3>() / pts.len() as f64 };
    let reach = pts.iter().map(|p| ((p.x - center.x).powi(2) + (p.y - center.y).powi(2)).sqrt()).fold(0.0, f64::max);
    let distance = 2.5 * (reach + 0.05);
    let k = &cfg.intrinsics;
    let render = |cams: Vec<_>| -> Vec<LabeledImage> {
        cams.iter().enumerate().map(|(t, c)| project_scene(cloud, c, k, cfg.point_radius, scene_id, t)).collect()
    };
    let train = render(orbit_cameras(&center, distance, cfg.train_views, cfg.train_elevation_deg, 0.0)?);
    let test = if cfg.test_views == 0 {
        Vec::new()
    } else {
        render(orbit_cameras(&center, distance, cfg.test_views, cfg.test_elevation_deg, 0.5)?)
    };
    Ok((train, test))
}
