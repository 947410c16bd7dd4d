use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use regionseq::ScanStrategy;

#[derive(Debug, Parser)]
#[command(
    name = "regionseq",
    version,
    about = "Patch-sequence BiLSTM classification of annotated tissue regions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Overrides `data.output_dir`.
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse annotations, rasterize and orientation-normalize each region.
    ExtractRegions(StageArgs),
    /// Compute the patch grid and scan order of every region.
    Tile(StageArgs),
    /// Turn each region's patches into a feature sequence.
    ExtractFeatures(StageArgs),
    /// Train on a holdout split and save the model.
    Train(StageArgs),
    /// Score the saved model on the holdout test set.
    Evaluate(StageArgs),
    /// k-fold cross-validation with one fresh model per fold.
    CrossValidate(StageArgs),
    /// Every stage in order.
    RunAll(StageArgs),
    /// Print the visit order of a grid, one `row,col` per line.
    Scan {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value = "scan2", value_parser = parse_strategy)]
        strategy: ScanStrategy,
    },
    /// Learnable-parameter count of the BiLSTM head.
    Flops {
        #[arg(long)]
        input_size: u64,
        /// Hidden units per direction.
        #[arg(long)]
        hidden: u64,
        #[arg(long)]
        classes: u64,
    },
    /// Write a small synthetic slide, its annotations and a matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        regions_per_class: usize,
    },
}

fn parse_strategy(s: &str) -> Result<ScanStrategy, String> {
    s.parse().map_err(|e: regionseq::scan::ScanError| e.to_string())
}
