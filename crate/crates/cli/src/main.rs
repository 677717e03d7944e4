mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lattice_fusion::eval::{Class, DEFAULT_PERMUTATION_CAP};
use lattice_fusion::events::{ClassifyMode, FrameSize};
use lattice_fusion::tracking::GForm;

#[derive(Parser, Debug)]
#[command(
    name = "lattice-fusion",
    version,
    about = "Joint detection, tracking and event recognition on score lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one object through a detections file.
    Track(TrackArgs),
    /// Track through detection prisms with the distance transform.
    Pyramid(PyramidArgs),
    /// Rank event models on the tracked object.
    Recognize(RecognizeArgs),
    /// Track and recognize jointly over detections.
    Joint(JointArgs),
    /// Detect, track and recognize jointly over prisms.
    Unified(UnifiedArgs),
    /// Agreement between two annotation files.
    Eval(EvalArgs),
    /// Generate a seeded synthetic scenario.
    Synth(SynthArgs),
    /// Time the linear and quadratic prism trackers.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct Coherency {
    #[arg(long, default_value = "euclidean")]
    g_form: GForm,
    /// Constant velocity `VX,VY` in pixels per frame; identity motion if absent.
    #[arg(long, value_name = "VX,VY", value_parser = parse_pair)]
    velocity: Option<(f64, f64)>,
    /// Keep only the best K detections per frame.
    #[arg(long, value_name = "K")]
    top_k: Option<usize>,
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Detections file; repeat to pool several detectors. `-` reads stdin.
    #[arg(long, default_value = "-")]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    coherency: Coherency,
    /// Added to the trained threshold when capping a source's offset.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    trained_threshold: f64,
    /// Add forward projections of the previous frame's detections.
    #[arg(long)]
    project: bool,
    #[arg(long, default_value_t = 0.0)]
    projection_penalty: f64,
}

#[derive(Args, Debug)]
struct PyramidArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Scale-change weight; defaults to the first prism's.
    #[arg(long)]
    alpha: Option<f64>,
    /// Use the all-pairs engine.
    #[arg(long)]
    quadratic: bool,
}

#[derive(Args, Debug)]
struct RecognizeArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value = "ml")]
    mode: ClassifyMode,
    #[arg(long, default_value = "1280x720", value_parser = parse_frame_size)]
    frame_size: FrameSize,
    #[command(flatten)]
    coherency: Coherency,
}

#[derive(Args, Debug)]
struct JointArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    models: PathBuf,
    /// Track file of the best-scoring model.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "1280x720", value_parser = parse_frame_size)]
    frame_size: FrameSize,
    #[command(flatten)]
    coherency: Coherency,
}

#[derive(Args, Debug)]
struct UnifiedArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    models: PathBuf,
    /// Result file of the best-scoring model.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value = "1280x720", value_parser = parse_frame_size)]
    frame_size: FrameSize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Two annotation files.
    #[arg(long, num_args = 2, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "person")]
    class: Class,
    /// Largest track count for which mappings are enumerated.
    #[arg(long, default_value_t = DEFAULT_PERMUTATION_CAP)]
    perm_cap: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Scenario file; a built-in moving box if absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Detections file.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    prisms: Option<PathBuf>,
    /// True box per frame, as a detections file.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the effective scenario here.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    fp_rate: Option<f64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = lattice_fusion::bench::DEFAULT_LADDER)]
    ladder: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    frames: usize,
    #[arg(long, default_value_t = 7)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Plot data file of `N engine seconds` lines.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_frame_size(s: &str) -> Result<FrameSize, String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    FrameSize::new(num(w)?, num(h)?).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(a) => commands::track(a),
        Command::Pyramid(a) => commands::pyramid(a),
        Command::Recognize(a) => commands::recognize(a),
        Command::Joint(a) => commands::joint(a),
        Command::Unified(a) => commands::unified(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind, e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
