use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use supix_cli::commands::{
    cmd_cam, cmd_eval, cmd_pipeline, cmd_refine, cmd_slic, cmd_synth, CmdError,
};
use supix_core::refine::{IgnorePolicy, RefineParams};
use supix_core::slic::SlicParams;
use supix_core::synth::SynthParams;

#[derive(Parser)]
#[command(
    name = "supix",
    version,
    about = "Superpixel clustering, activation pseudo-masks, floodfill mask refinement, and IoU metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster images into superpixel partitions
    Slic {
        /// Input image; repeat to batch over several (then --out is a directory)
        #[arg(long, required = true, num_args = 1..)]
        image: Vec<PathBuf>,
        /// Target superpixel edge length in pixels
        #[arg(long, default_value_t = 16)]
        cluster_size: u32,
        /// Spatial-vs-color tradeoff; larger is squarer
        #[arg(long, default_value_t = 10.0)]
        compactness: f32,
        /// Clustering iterations
        #[arg(long, default_value_t = 10)]
        iters: u32,
        /// Fraction of cluster_size^2 below which regions are merged away
        #[arg(long, default_value_t = 0.25)]
        min_region_fraction: f32,
        /// Output partition file, or output directory with several --image
        #[arg(long)]
        out: PathBuf,
        /// Also write the image with superpixel boundaries painted red
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Worker threads for batch inputs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Turn feature stacks and classifier weights into pseudo-masks
    Cam {
        /// Feature stack tensor; repeat to batch (then --out is a directory)
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        /// Classifier weight tensor, [classes, maps]
        #[arg(long)]
        weights: PathBuf,
        /// Output mask width
        #[arg(long)]
        width: u32,
        /// Output mask height
        #[arg(long)]
        height: u32,
        /// Output mask file, or output directory with several --features
        #[arg(long)]
        out: PathBuf,
        /// Also write the upsampled per-class score tensor
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Worker threads for batch inputs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Rewrite masks toward each superpixel's dominant class
    Refine {
        /// Input mask; repeat to batch (then --out is a directory)
        #[arg(long, required = true, num_args = 1..)]
        mask: Vec<PathBuf>,
        /// Superpixel partition file
        #[arg(long)]
        partition: PathBuf,
        /// Dominance threshold in (0, 1]; rewrite only above it
        #[arg(long, default_value_t = 0.5)]
        tau: f32,
        /// How ignored pixels count in the dominance denominator:
        /// `exclude` or `count_in_total`
        #[arg(long, default_value = "exclude")]
        ignore_policy: String,
        /// Output mask file, or output directory with several --mask
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for batch inputs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare a predicted mask against ground truth
    Eval {
        /// Predicted mask
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth mask
        #[arg(long)]
        gt: PathBuf,
        /// Structured report path (default: prediction path with a
        /// .metrics.json extension)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run cluster -> mask -> refine -> evaluate from a config file
    Pipeline {
        /// Run configuration file
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a deterministic cell-partition fixture
    Synth {
        #[arg(long, default_value_t = 128)]
        width: u32,
        #[arg(long, default_value_t = 128)]
        height: u32,
        /// Number of classes in the ground-truth mask
        #[arg(long, default_value_t = 4)]
        classes: u16,
        /// Number of cells; every class gets at least one
        #[arg(long, default_value_t = 12)]
        sites: u32,
        /// Per-pixel label corruption rate; > 0 also writes corrupted.png
        #[arg(long, default_value_t = 0.15)]
        noise: f32,
        /// Per-channel RGB jitter amplitude
        #[arg(long, default_value_t = 6)]
        jitter: u8,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory receiving image.png, ground_truth.png, and
        /// optionally corrupted.png
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(command: Command) -> Result<(), CmdError> {
    match command {
        Command::Slic {
            image,
            cluster_size,
            compactness,
            iters,
            min_region_fraction,
            out,
            overlay,
            jobs,
        } => {
            let params = SlicParams {
                cluster_size,
                compactness,
                max_iterations: iters,
                min_region_fraction,
            };
            cmd_slic(&image, &params, &out, overlay.as_deref(), jobs)
        }
        Command::Cam {
            features,
            weights,
            width,
            height,
            out,
            scores,
            jobs,
        } => cmd_cam(&features, &weights, width, height, &out, scores.as_deref(), jobs),
        Command::Refine {
            mask,
            partition,
            tau,
            ignore_policy,
            out,
            jobs,
        } => {
            let ignore_policy = match ignore_policy.as_str() {
                "exclude" => IgnorePolicy::Exclude,
                "count_in_total" => IgnorePolicy::CountInTotal,
                other => {
                    return Err(CmdError::Validation(format!(
                        "--ignore-policy `{other}` is not `exclude` or `count_in_total`"
                    )))
                }
            };
            let params = RefineParams { tau, ignore_policy };
            cmd_refine(&mask, &partition, &params, &out, jobs)
        }
        Command::Eval { pred, gt, out } => cmd_eval(&pred, &gt, out.as_deref()),
        Command::Pipeline { config } => cmd_pipeline(&config),
        Command::Synth {
            width,
            height,
            classes,
            sites,
            noise,
            jitter,
            seed,
            out_dir,
        } => {
            let params = SynthParams {
                width,
                height,
                num_classes: classes,
                num_sites: sites,
                noise_rate: noise,
                color_jitter: jitter,
                seed,
            };
            cmd_synth(&params, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // Exit codes: 2 validation, 3 output I/O, 4 broken invariant.
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
