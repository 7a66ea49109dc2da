//! End-to-end orchestration. Every stage reads its inputs from and writes its
//! outputs to the run directory, so any stage can be rerun from persisted
//! artifacts.

mod config;
mod stages;

pub use config::{EvalConfig, PipelineConfig, RegistrationOnlyConfig};
pub use stages::{
    eval_frames, frame_metrics, graphs_with_table, infer_frame, infer_stage, match_stage, merge_stage,
    prune_stage, pseudo_label_metrics, registration_only_matches, segment_weights, train_phi1, train_phi2,
    FramePrediction,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, write_json, write_json_compact, write_text};
use crate::cluster::LabelGrid;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{render_table, MetricReport};
use crate::matching::ComponentMatch;
use crate::prune::{PrunedMatch, PseudoLabeling, SurvivingMatch};
use crate::synth::Dataset;
use crate::types::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoMatching,
    NoPruning,
    RegistrationOnly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMatching => "no-matching",
            Variant::NoPruning => "no-pruning",
            Variant::RegistrationOnly => "registration-only",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Variant::Full, Variant::NoMatching, Variant::NoPruning, Variant::RegistrationOnly]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Generate,
    EmbedPhi1,
    Match,
    PruneMerge,
    TrainPhi2,
    Infer,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Generate, Stage::EmbedPhi1, Stage::Match, Stage::PruneMerge, Stage::TrainPhi2, Stage::Infer, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::EmbedPhi1 => "embed-phi1",
            Stage::Match => "match",
            Stage::PruneMerge => "prune-merge",
            Stage::TrainPhi2 => "train-phi2",
            Stage::Infer => "infer",
            Stage::Eval => "eval",
        }
    }
}

/// Artifact paths inside a run directory.
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn phi1(&self) -> PathBuf {
        self.root.join("step2_phi1").join("table.json")
    }

    pub fn phi1_losses(&self) -> PathBuf {
        self.root.join("step2_phi1").join("losses.json")
    }

    pub fn matches(&self) -> PathBuf {
        self.root.join("step3_match").join("matches.json")
    }

    pub fn registration_only(&self) -> PathBuf {
        self.root.join("step3_match").join("registration_only.json")
    }

    pub fn pruned(&self) -> PathBuf {
        self.root.join("step3_match").join("pruned.json")
    }

    pub fn pseudolabels(&self) -> PathBuf {
        self.root.join("step3_match").join("pseudolabels.json")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("step3_match").join("summary.json")
    }

    pub fn phi2(&self) -> PathBuf {
        self.root.join("step4_phi2").join("table.json")
    }

    pub fn phi2_losses(&self) -> PathBuf {
        self.root.join("step4_phi2").join("losses.json")
    }

    pub fn mask(&self, scene: usize, frame: usize) -> PathBuf {
        self.root.join("inference").join(format!("scene_{scene}")).join(format!("frame_{frame}.mask.json"))
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn timings(&self) -> PathBuf {
        self.root.join("timings.json")
    }
}

/// Counts describing how pseudo-labels were obtained.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub component_pairs: usize,
    pub solved: usize,
    pub failed: usize,
    pub passed_cost_gate: usize,
    pub surviving_matches: usize,
    pub kept_node_pairs: usize,
    pub rejected_unions: usize,
    pub pseudo_objects: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    pub matching: MatchSummary,
    /// Point-level metrics when every segment is its own object.
    pub pseudo_labels_parts_only: MetricReport,
    /// Point-level metrics of the pseudo-labels used to train the second
    /// embedding.
    pub pseudo_labels: MetricReport,
    /// Pixel-level metrics of the final segmentation on held-out views.
    pub segmentation_2d: MetricReport,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("variant: {}\nseed: {}\n\n", self.variant.name(), self.seed);
        out += &render_table(
            "3D pseudo-labels",
            &[("parts only", &self.pseudo_labels_parts_only), ("after matching", &self.pseudo_labels)],
        );
        out.push('\n');
        out += &render_table("2D segmentation", &[(self.variant.name(), &self.segmentation_2d)]);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub ms: f64,
}

fn count_objects(labels: &PseudoLabeling) -> usize {
    labels.scenes.iter().map(|s| s.labels.values().collect::<std::collections::BTreeSet<_>>().len()).sum()
}

/// Runs one stage of `variant` inside `layout`, reading earlier artifacts
/// from disk.
pub fn run_stage(cfg: &PipelineConfig, layout: &Layout, variant: Variant, stage: Stage) -> Result<()> {
    let start = Instant::now();
    let r = stage_body(cfg, layout, variant, stage).map_err(|e| e.in_stage(stage.name()));
    log::info!("stage {} finished in {:.1} ms", stage.name(), start.elapsed().as_secs_f64() * 1e3);
    r
}

fn load_dataset(layout: &Layout) -> Result<Dataset> {
    Dataset::load(&layout.dataset())
}

fn stage_body(cfg: &PipelineConfig, layout: &Layout, variant: Variant, stage: Stage) -> Result<()> {
    match stage {
        Stage::Generate => Dataset::generate(&cfg.generator, &cfg.render, cfg.seed)?.save(&layout.dataset()),
        Stage::EmbedPhi1 => {
            let out = train_phi1(&load_dataset(layout)?, &cfg.phi1)?;
            write_json_compact(&layout.phi1(), &out.table)?;
            write_json(&layout.phi1_losses(), &out.losses)
        }
        Stage::Match => {
            let ds = load_dataset(layout)?;
            let phi1: EmbeddingTable = read_json(&layout.phi1())?;
            match variant {
                Variant::Full | Variant::NoPruning => write_json(&layout.matches(), &match_stage(&ds, &phi1, &cfg.matching)?),
                Variant::RegistrationOnly => {
                    let found = registration_only_matches(
                        &ds,
                        &phi1,
                        &cfg.registration,
                        &cfg.registration_only,
                        rng::derive(cfg.seed, 4),
                    )?;
                    write_json(&layout.registration_only(), &found)
                }
                Variant::NoMatching => Ok(()),
            }
        }
        Stage::PruneMerge => {
            let ds = load_dataset(layout)?;
            let mut summary = MatchSummary::default();
            let surviving: Vec<SurvivingMatch> = match variant {
                Variant::Full | Variant::NoPruning => {
                    let matches: Vec<ComponentMatch> = read_json(&layout.matches())?;
                    summary.component_pairs = matches.len();
                    summary.solved = matches.iter().filter(|m| m.is_solved()).count();
                    summary.failed = summary.component_pairs - summary.solved;
                    let pruned = prune_stage(&ds, matches, cfg, variant == Variant::Full)?;
                    write_json(&layout.pruned(), &pruned)?;
                    summary.passed_cost_gate = pruned.iter().filter(|p| p.cost_gate).count();
                    pruned.iter().filter_map(PrunedMatch::surviving).collect()
                }
                Variant::RegistrationOnly => read_json(&layout.registration_only())?,
                Variant::NoMatching => Vec::new(),
            };
            summary.surviving_matches = surviving.len();
            summary.kept_node_pairs = surviving.iter().map(|m| m.pairs.len()).sum();
            let labels = merge_stage(&ds, &surviving)?;
            summary.rejected_unions = labels.rejected_unions;
            summary.pseudo_objects = count_objects(&labels);
            write_json(&layout.pseudolabels(), &labels)?;
            write_json(&layout.summary(), &summary)
        }
        Stage::TrainPhi2 => {
            let ds = load_dataset(layout)?;
            let labels: PseudoLabeling = read_json(&layout.pseudolabels())?;
            let out = train_phi2(&ds, &labels, &cfg.phi2, rng::derive(cfg.seed, 2))?;
            write_json_compact(&layout.phi2(), &out.table)?;
            write_json(&layout.phi2_losses(), &out.losses)
        }
        Stage::Infer => {
            let ds = load_dataset(layout)?;
            let phi2: EmbeddingTable = read_json(&layout.phi2())?;
            for p in infer_stage(&ds, &phi2, &cfg.cluster, cfg.eval.frame_stride)? {
                write_json_compact(&layout.mask(p.scene_id, p.frame), &p.mask)?;
            }
            Ok(())
        }
        Stage::Eval => {
            let report = evaluate(cfg, layout, variant)?;
            write_json(&layout.report_json(), &report)?;
            write_text(&layout.report_txt(), &report.to_text())
        }
    }
}

fn evaluate(cfg: &PipelineConfig, layout: &Layout, variant: Variant) -> Result<RunReport> {
    let ds = load_dataset(layout)?;
    let labels: PseudoLabeling = read_json(&layout.pseudolabels())?;
    let predictions = eval_frames(&ds, cfg.eval.frame_stride)
        .into_iter()
        .map(|(si, t)| {
            let scene_id = ds.scenes[si].scene_id();
            let mask: LabelGrid = read_json(&layout.mask(scene_id, t))?;
            Ok(FramePrediction { scene_id, frame: t, mask })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        variant,
        seed: cfg.seed,
        matching: read_json(&layout.summary())?,
        pseudo_labels_parts_only: pseudo_label_metrics(&ds, &PseudoLabeling::singletons(&ds.graphs()))?,
        pseudo_labels: pseudo_label_metrics(&ds, &labels)?,
        segmentation_2d: frame_metrics(&ds, &predictions)?,
    })
}

/// Runs every stage of `variant` in `dir`; writes the resolved config,
/// the report and per-stage timings.
pub fn run_variant(cfg: &PipelineConfig, variant: Variant, dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let layout = Layout::new(dir);
    write_json(&layout.config(), cfg)?;
    let mut timings = Vec::new();
    for stage in Stage::ALL {
        let start = Instant::now();
        run_stage(cfg, &layout, variant, stage)?;
        timings.push(StageTiming { stage, ms: start.elapsed().as_secs_f64() * 1e3 });
    }
    write_json(&layout.timings(), &timings)?;
    read_json(&layout.report_json())
}

pub fn run_full(cfg: &PipelineConfig) -> Result<RunReport> {
    run_variant(cfg, Variant::Full, &cfg.output)
}

/// Runs an ablation in `<output>/<variant name>`.
pub fn run_ablation(cfg: &PipelineConfig, variant: Variant) -> Result<RunReport> {
    run_variant(cfg, variant, &cfg.output.join(variant.name()))
}
