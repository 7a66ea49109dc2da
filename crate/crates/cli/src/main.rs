use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segmatch::artifact::{read_json, write_json_compact};
use segmatch::embed::EmbeddingTable;
use segmatch::pipeline::{infer_frame, run_ablation, run_full, run_stage, Layout, PipelineConfig, RunReport, Stage, Variant};
use segmatch::synth::LabeledImage;
use segmatch::Error;

#[derive(Parser)]
#[command(name = "segmatch", version, about = "Self-supervised object segmentation by segment graph matching on synthetic scenes")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON pipeline configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct VariantArg {
    /// Pipeline variant whose artifacts are produced.
    #[arg(long, default_value = "full", value_parser = parse_variant)]
    variant: Variant,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Generate,
    /// Train an embedding table.
    Embed {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Match segment graph components across scenes.
    Match {
        #[arg(long)]
        eps_node: Option<f64>,
        #[arg(long)]
        eps_edge: Option<f64>,
        #[command(flatten)]
        variant: VariantArg,
    },
    /// Prune matches and merge them into pseudo-labels.
    PruneMerge {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
        #[command(flatten)]
        variant: VariantArg,
    },
    /// Train the second embedding on pseudo-labels.
    TrainPhi2 {
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Segment test frames, or one image given `--image` and `--features`.
    Infer {
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_name = "FILE", requires = "features")]
        image: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "image")]
        features: Option<PathBuf>,
        /// Mask output for single-image mode (default: stdout).
        #[arg(long, value_name = "FILE")]
        mask_out: Option<PathBuf>,
    },
    /// Evaluate pseudo-labels and inferred masks.
    Eval {
        #[arg(long)]
        frame_stride: Option<usize>,
        #[command(flatten)]
        variant: VariantArg,
    },
    /// Run every stage.
    RunFull,
    /// Run an ablation variant in `<out>/<variant>`.
    Ablate {
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Config(String),
    Stage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Config(e.to_string()),
            e => Failure::Stage(e.to_string()),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.output, cli.out.clone());
    match &cli.command {
        Command::Embed { stage, tau, epochs, lr } => {
            let e = if *stage == 1 { &mut cfg.phi1 } else { &mut cfg.phi2 };
            set(&mut e.tau, *tau);
            set(&mut e.epochs, *epochs);
            set(&mut e.lr, *lr);
        }
        Command::TrainPhi2 { tau, epochs, lr } => {
            set(&mut cfg.phi2.tau, *tau);
            set(&mut cfg.phi2.epochs, *epochs);
            set(&mut cfg.phi2.lr, *lr);
        }
        Command::Match { eps_node, eps_edge, .. } => {
            set(&mut cfg.matching.eps_node, *eps_node);
            set(&mut cfg.matching.eps_edge, *eps_edge);
        }
        Command::PruneMerge { alpha, t2, .. } => {
            set(&mut cfg.prune.alpha, *alpha);
            set(&mut cfg.prune.t2, *t2);
        }
        Command::Infer { kappa, sigma, .. } => {
            set(&mut cfg.cluster.kappa, *kappa);
            set(&mut cfg.cluster.sigma_px, *sigma);
        }
        Command::Eval { frame_stride, .. } => set(&mut cfg.eval.frame_stride, *frame_stride),
        _ => {}
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn stage(cfg: &PipelineConfig, variant: Variant, stage: Stage) -> Result<(), Failure> {
    let layout = Layout::new(&cfg.output);
    segmatch::artifact::write_json(&layout.config(), cfg)?;
    run_stage(cfg, &layout, variant, stage)?;
    Ok(())
}

fn print_report(r: &RunReport) {
    print!("{}", r.to_text());
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot start {n} workers: {e}")))?;
    }
    match cli.command {
        Command::Generate => stage(&cfg, Variant::Full, Stage::Generate),
        Command::Embed { stage: 1, .. } => stage(&cfg, Variant::Full, Stage::EmbedPhi1),
        Command::Embed { .. } | Command::TrainPhi2 { .. } => stage(&cfg, Variant::Full, Stage::TrainPhi2),
        Command::Match { variant, .. } => stage(&cfg, variant.variant, Stage::Match),
        Command::PruneMerge { variant, .. } => stage(&cfg, variant.variant, Stage::PruneMerge),
        Command::Infer { image: Some(image), features: Some(features), mask_out, .. } => {
            let img: LabeledImage = read_json(&image)?;
            let table: EmbeddingTable = read_json(&features)?;
            let mask = infer_frame(&img, &table, &cfg.cluster)?;
            match mask_out {
                Some(path) => write_json_compact(&path, &mask)?,
                None => println!("{}", serde_json::to_string(&mask).map_err(|e| Failure::Stage(e.to_string()))?),
            }
            Ok(())
        }
        Command::Infer { .. } => stage(&cfg, Variant::Full, Stage::Infer),
        Command::Eval { variant, .. } => {
            stage(&cfg, variant.variant, Stage::Eval)?;
            let report: RunReport = read_json(&Layout::new(&cfg.output).report_json())?;
            print_report(&report);
            Ok(())
        }
        Command::RunFull => {
            print_report(&run_full(&cfg)?);
            Ok(())
        }
        Command::Ablate { variant } => {
            print_report(&run_ablation(&cfg, variant)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
