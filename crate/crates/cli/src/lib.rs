//! Command-line pipeline: annotated slide in, region classifier and
//! metric reports out.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod stages;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use regionseq::annotation::{write_annotations, SchemaMapping};
use regionseq::flops::bilstm_flops;
use regionseq::raster::save_rgb;
use regionseq::scan::scan_order;
use regionseq::synthetic::{synthetic_slide, SlideSpec};
use regionseq::GridDims;

use cli::{Cli, Command, StageArgs};
use config::PipelineConfig;
use error::{CliError, CliResult};
use stages::Context;

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status. Data goes to `stdout`, diagnostics to the log.
pub fn run<W: Write>(args: Vec<String>, stdout: &mut W) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, &args, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn context(stage: StageArgs, args: &[String]) -> CliResult<Context> {
    let mut config = PipelineConfig::load(&stage.config)?;
    if let Some(out) = stage.output_dir {
        config.data.output_dir = out;
    }
    Ok(Context {
        config,
        config_path: stage.config,
        args: args.to_vec(),
    })
}

fn dispatch<W: Write>(command: Command, args: &[String], stdout: &mut W) -> CliResult<()> {
    match command {
        Command::ExtractRegions(s) => stages::extract_regions(&context(s, args)?).map(drop),
        Command::Tile(s) => stages::tile(&context(s, args)?).map(drop),
        Command::ExtractFeatures(s) => stages::extract_features(&context(s, args)?),
        Command::Train(s) => stages::train(&context(s, args)?),
        Command::Evaluate(s) => stages::evaluate(&context(s, args)?).map(drop),
        Command::CrossValidate(s) => stages::cross_validate_stage(&context(s, args)?).map(drop),
        Command::RunAll(s) => stages::run_all(&context(s, args)?),
        Command::Scan {
            rows,
            cols,
            strategy,
        } => {
            let mut problems = Vec::new();
            if rows == 0 {
                problems.push("--rows must be at least 1".to_string());
            }
            if cols == 0 {
                problems.push("--cols must be at least 1".to_string());
            }
            if !problems.is_empty() {
                return Err(CliError::Validation(problems));
            }
            let mut text = String::new();
            for (r, c) in scan_order(GridDims::new(rows, cols), strategy).visits {
                let _ = writeln!(text, "{r},{c}");
            }
            emit(stdout, &text)
        }
        Command::Flops {
            input_size,
            hidden,
            classes,
        } => {
            let problems: Vec<String> = [
                ("--input-size", input_size),
                ("--hidden", hidden),
                ("--classes", classes),
            ]
            .iter()
            .filter(|(_, v)| *v == 0)
            .map(|(n, _)| format!("{n} must be at least 1"))
            .collect();
            if !problems.is_empty() {
                return Err(CliError::Validation(problems));
            }
            let report = bilstm_flops(input_size, hidden, classes);
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            emit(stdout, &format!("{report}{json}\n"))
        }
        Command::Synth {
            out,
            seed,
            regions_per_class,
        } => synth(&out, seed, regions_per_class),
    }
}

fn emit<W: Write>(stdout: &mut W, text: &str) -> CliResult<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::data(format!("stdout: {e}")))
}

const SYNTH_CONFIG: &str = r#"# Demo pipeline on the synthetic slide.
[data]
slide = "slide.png"
annotations = "annotations.xml"
classes = ["Benign", "InSitu", "Invasive"]
output_dir = "out"

[regions]
normalize_rotation = true

[tile]
patch_side = 64
strategy = "scan2"

[features]
extractor = "toy"
grid = 2

[model]
hidden_size = 8

[train]
optimizer = "adam"
learning_rate = 0.003
max_epochs = 20
patience = 5
dropout_rate = 0.2
seed = 7

[split]
mode = "kfold"
folds = 3
seed = 11
"#;

fn synth(out: &Path, seed: u64, regions_per_class: usize) -> CliResult<()> {
    if regions_per_class == 0 {
        return Err(CliError::invalid("--regions-per-class must be at least 1"));
    }
    fs::create_dir_all(out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    let spec = SlideSpec {
        regions_per_class,
        cell: 160,
        seed,
        ..SlideSpec::default()
    };
    let (slide, regions) = synthetic_slide(&spec);
    save_rgb(&slide, &out.join("slide.png"))?;
    let xml = write_annotations(&regions, &SchemaMapping::default());
    artifacts::write_text(&out.join("annotations.xml"), &xml)?;
    artifacts::write_text(&out.join("config.toml"), SYNTH_CONFIG)?;
    log::info!(
        "synth: {} regions on a {}x{} slide in {}",
        regions.len(),
        slide.width(),
        slide.height(),
        out.display()
    );
    Ok(())
}
