use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracklet_core::pipeline::{run_pipeline, PipelineConfig, PipelineError, ResultWriter};
use tracklet_core::synthgen::{parse_script, render, write_sequence, SynthError};

const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "tracklet", version, about = "Multi-object tracking for fixed-camera frame sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track objects through a numbered PPM/PGM sequence.
    Run {
        /// `key = value` configuration file; defaults apply to omitted keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory holding the input frames (overrides `input`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory (overrides `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write annotated frames.
        #[arg(long)]
        annotate: bool,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Render a scene script to frames plus truth.jsonl.
    Synth {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure(u8, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Input(_) => EXIT_INPUT,
            PipelineError::Runtime { .. } | PipelineError::Io { .. } => EXIT_RUNTIME,
        };
        Failure(code, e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))?;
    PipelineConfig::parse(&text).map_err(|e| Failure(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn run(
    config: Option<PathBuf>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    annotate: bool,
    dump_config: bool,
) -> Result<(), Failure> {
    let mut cfg = load_config(config.as_deref())?;
    if input.is_some() {
        cfg.input = input;
    }
    if out.is_some() {
        cfg.out = out;
    }
    cfg.annotate |= annotate;
    if dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let out_dir = cfg
        .out
        .clone()
        .ok_or_else(|| Failure(EXIT_CONFIG, "no output directory given".into()))?;
    if cfg.input.is_none() {
        return Err(Failure(EXIT_CONFIG, "no input directory given".into()));
    }
    let mut writer = ResultWriter::create(&out_dir, cfg.annotate)?;
    let frames = run_pipeline(&cfg, |result, frame| writer.write(result, Some(frame)))?;
    writer.finish()?;
    eprintln!("processed {frames} frames into {}", out_dir.display());
    Ok(())
}

fn synth(script: &Path, out: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(script)
        .map_err(|e| Failure(EXIT_INPUT, format!("cannot read {}: {e}", script.display())))?;
    let classify = |e: SynthError| {
        let code = match e {
            SynthError::Parse { .. } | SynthError::InvalidScript(_) | SynthError::ObjectOutOfBounds { .. } => {
                EXIT_CONFIG
            }
            SynthError::Frame(_) => EXIT_INPUT,
            SynthError::Io { .. } => EXIT_RUNTIME,
        };
        Failure(code, e.to_string())
    };
    let scene = parse_script(&text, script.parent()).map_err(classify)?;
    let (frames, truth) = render(&scene).map_err(classify)?;
    write_sequence(&frames, &truth, out).map_err(|e| Failure(EXIT_RUNTIME, e.to_string()))?;
    eprintln!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            input,
            out,
            annotate,
            dump_config,
        } => run(config, input, out, annotate, dump_config),
        Command::Synth { script, out } => synth(&script, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("tracklet: {message}");
            ExitCode::from(code)
        }
    }
}
