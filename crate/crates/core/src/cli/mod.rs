//! Command-line front end: `train`, `summarise`, `evaluate` and `sweep`.
//!
//! Exit codes: 0 on success, 1 for pipeline or domain failures, 2 for usage
//! errors and unreadable or malformed inputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::histograms::{FusionWeights, SignatureExtractor};
use crate::ingest::{FrameSource, IngestConfig};
use crate::manifest::RunConfig;

mod evaluate;
mod summarise;
mod sweep;
mod train;

pub use evaluate::{build_report, VideoEvalInput};
pub use sweep::{parse_grid, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "vidsum", version, about = "Keyframe video summaries from texture and colour histograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a texture codebook from randomly sampled frames.
    Train(TrainArgs),
    /// Summarise one frame source into keyframes.
    #[command(alias = "summarize")]
    Summarise(SummariseArgs),
    /// Score summaries against user summaries and/or ground-truth windows.
    Evaluate(EvaluateArgs),
    /// Run summarise + evaluate over a grid of tau and alpha values.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Frame rate of the source.
    #[arg(long, default_value_t = 1.0)]
    pub fps: f64,
    /// Sampling rate after temporal sub-sampling.
    #[arg(long, default_value_t = 1.0)]
    pub target_fps: f64,
    /// Frame width of a raw RGB stream.
    #[arg(long)]
    pub width: Option<usize>,
    /// Frame height of a raw RGB stream.
    #[arg(long)]
    pub height: Option<usize>,
    /// Frames with a lower pixel standard deviation are discarded.
    #[arg(long, default_value_t = 5.0)]
    pub sigma_min: f64,
}

impl IngestArgs {
    pub fn config(&self) -> Result<IngestConfig> {
        let cfg = IngestConfig {
            target_fps: self.target_fps,
            sigma_min: self.sigma_min,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Image directory, or raw stream when `--width/--height` are given.
    pub fn source(&self, path: &Path) -> Result<FrameSource> {
        match (self.width, self.height) {
            (Some(width), Some(height)) => Ok(FrameSource::Raw {
                path: path.to_path_buf(),
                width,
                height,
                fps: self.fps,
            }),
            (None, None) => {
                let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
                if !meta.is_dir() {
                    return Err(Error::Input(format!(
                        "{} is a file: raw streams need --width and --height",
                        path.display()
                    )));
                }
                Ok(FrameSource::ImageDir {
                    dir: path.to_path_buf(),
                    fps: self.fps,
                })
            }
            _ => Err(Error::Input("--width and --height must be given together".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    #[arg(long, default_value_t = 8)]
    pub block_size: usize,
    /// Pixels shared by neighbouring blocks.
    #[arg(long, default_value_t = 6)]
    pub overlap: usize,
    /// DCT coefficients kept per block (after dropping DC).
    #[arg(long, default_value_t = 15)]
    pub dim: usize,
    #[arg(long, default_value_t = 16)]
    pub hue_bins: usize,
}

impl FeatureArgs {
    pub fn config(&self) -> Result<FeatureConfig> {
        let cfg = FeatureConfig {
            block_size: self.block_size,
            overlap: self.overlap,
            dim: self.dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct KMeansArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training frame source; repeat for several videos.
    #[arg(long, required = true)]
    pub frames: Vec<PathBuf>,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Frames drawn at random from all sources (0 = use every frame).
    #[arg(long, default_value_t = 10)]
    pub sample: usize,
    /// Codebook size.
    #[arg(long = "G", default_value_t = 8)]
    pub g: usize,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    /// Output codebook file.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Png,
    Ppm,
    None,
}

impl ImageFormat {
    pub fn extension(self) -> Option<&'static str> {
        match self {
            ImageFormat::Png => Some("png"),
            ImageFormat::Ppm => Some("ppm"),
            ImageFormat::None => None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SummariseArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Distance threshold for cluster counting and duplicate removal.
    #[arg(long)]
    pub tau: f64,
    /// Texture weight; values below 1 add the hue histogram.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    /// Defaults to the last component of --frames.
    #[arg(long)]
    pub video_id: Option<String>,
    #[arg(long, value_enum, default_value_t = ImageFormat::Png)]
    pub images: ImageFormat,
    /// Add per-keyframe display durations and the compression ratio.
    #[arg(long)]
    pub storyboard: bool,
    /// Also dump every frame signature as JSON lines.
    #[arg(long)]
    pub signatures: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Directory of summary output directories (one per video), or a single one.
    #[arg(long)]
    pub auto: PathBuf,
    /// User summaries: <users>/<video_id>/<user_id>/<images>.
    #[arg(long)]
    pub users: Option<PathBuf>,
    /// CSV of video_id,start_s,end_s windows for long-term scoring.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Match threshold for comparing keyframes with user frames.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Output directory for report.json and report.csv.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Directory with one frame directory per video.
    #[arg(long)]
    pub videos: PathBuf,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Grid as start:step:stop, a comma list, or one value.
    #[arg(long)]
    pub tau: String,
    #[arg(long, default_value = "1.0")]
    pub alpha: String,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub users: Option<PathBuf>,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Grid points evaluated concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV; a JSON copy with the run config is written alongside.
    #[arg(short, long)]
    pub out: PathBuf,
}

impl RunConfig {
    fn from_parts(
        command: &str,
        ingest: Option<&IngestArgs>,
        features: &FeatureArgs,
        g: usize,
        kmeans: Option<&KMeansArgs>,
    ) -> Self {
        let defaults = KMeansArgs {
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
        };
        let km = kmeans.unwrap_or(&defaults);
        RunConfig {
            command: command.to_string(),
            frames: Vec::new(),
            codebook: None,
            fps: ingest.map_or(1.0, |i| i.fps),
            target_fps: ingest.map_or(1.0, |i| i.target_fps),
            width: ingest.and_then(|i| i.width),
            height: ingest.and_then(|i| i.height),
            sigma_min: ingest.map_or(0.0, |i| i.sigma_min),
            block_size: features.block_size,
            overlap: features.overlap,
            dim: features.dim,
            g,
            hue_bins: features.hue_bins,
            tau: None,
            alpha: None,
            delta: None,
            seed: km.seed,
            sample: None,
            max_iter: km.max_iter,
            tol: km.tol,
            tau_grid: Vec::new(),
            alpha_grid: Vec::new(),
        }
    }
}

pub(crate) fn load_codebook(path: &Path) -> Result<Codebook> {
    Codebook::load(path)
}

/// Signature extractor for a codebook; hue is computed only when needed.
pub(crate) fn extractor(features: &FeatureArgs, codebook: Codebook, with_hue: bool) -> Result<SignatureExtractor> {
    SignatureExtractor::new(features.config()?, codebook, with_hue.then_some(features.hue_bins))
}

pub(crate) fn weights(alpha: f64) -> Result<FusionWeights> {
    FusionWeights::new(alpha)
}

pub(crate) fn path_string(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train::run(&args).map(|_| ()),
        Command::Summarise(args) => summarise::run(&args).map(|_| ()),
        Command::Evaluate(args) => evaluate::run(&args).map(|_| ()),
        Command::Sweep(args) => sweep::run(&args).map(|_| ()),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub use summarise::summarise_to_dir;
pub use train::train_from_args;
