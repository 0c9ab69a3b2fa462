use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "sinco", version, about = "Coordinate-network image compression with a segmentation prior")]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Pretrain the segmentation network on image/mask pairs.
    TrainSeg(TrainSegArgs),
    /// Fit, quantize and store one image as a `.sinco` container.
    Compress(CompressArgs),
    /// Reconstruct an image from a `.sinco` container.
    Decompress(DecompressArgs),
    /// Score reconstructions against originals.
    Evaluate(EvaluateArgs),
    /// Compress a set of images under several λ values and tabulate the results.
    Sweep(SweepArgs),
    /// Repeat the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainSegArgs {
    /// Directory of `img_*.pgm` / `mask_*.pgm` pairs.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub data_dir: Option<PathBuf>,
    /// Train on this many synthetic phantoms instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Side length of synthetic phantoms.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 75)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    #[arg(long, default_value_t = 16)]
    pub base_channels: usize,
    /// Checkpoint path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Optional CSV of per-epoch mean BCE.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct CompressArgs {
    /// 8- or 16-bit PGM image.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output container; defaults to the input path with a `.sinco` extension.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.2)]
    pub bpp: f64,
    #[arg(long, default_value = "siren")]
    pub arch: String,
    /// Positional-encoding frequencies (PE-MLP only).
    #[arg(long, default_value_t = 12)]
    pub frequencies: usize,
    /// Sine frequency scale (SIREN only).
    #[arg(long, default_value_t = 30.0)]
    pub omega0: f32,
    /// Structural weight; 0 gives the plain INR baseline.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Binary mask PGM, required when lambda > 0.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Segmenter checkpoint, required when lambda > 0.
    #[arg(long)]
    pub seg: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional CSV loss trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct DecompressArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// 8-bit PGM output.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write a 16-bit PGM here.
    #[arg(long)]
    pub out16: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "original_dir")]
    pub original: Option<PathBuf>,
    /// `.sinco` container or PGM reconstruction.
    #[arg(long, required_unless_present = "original_dir")]
    pub compressed: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub seg: Option<PathBuf>,
    /// Batch mode: every `<stem>.pgm` here is matched with `<stem>.sinco` or `<stem>.pgm`.
    #[arg(long, conflicts_with_all = ["original", "compressed", "mask"], requires = "compressed_dir")]
    pub original_dir: Option<PathBuf>,
    #[arg(long)]
    pub compressed_dir: Option<PathBuf>,
    /// Batch masks: `mask_K.pgm` for `img_K.pgm`, else `<stem>.pgm`.
    #[arg(long, requires = "original_dir")]
    pub mask_dir: Option<PathBuf>,
    /// JSON-lines output; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Single image (with --mask).
    #[arg(long, conflicts_with_all = ["data_dir", "synthetic"])]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    pub mask: Option<PathBuf>,
    #[arg(long, conflicts_with = "synthetic")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Frozen segmenter checkpoint used by λ > 0 arms and for Dice.
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value = "siren")]
    pub arch: String,
    #[arg(long, default_value_t = 12)]
    pub frequencies: usize,
    #[arg(long, default_value_t = 30.0)]
    pub omega0: f32,
    #[arg(long, default_value_t = 1.2)]
    pub bpp: f64,
    #[arg(long, default_value_t = 2_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comparison CSV.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also keep every arm's container here.
    #[arg(long)]
    pub containers: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}
