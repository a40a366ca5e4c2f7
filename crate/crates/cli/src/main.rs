use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "vsr3d", version, about = "Visual speech recognition from face videos")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Pipeline configuration JSON; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic talking-face corpus with ground truth.
    Synth(SynthArgs),
    /// Track the mouth and write keypoints and ROI volumes.
    Segment(SegmentArgs),
    /// Write 3D-DCT feature vectors as CSV.
    Featurize(FeaturizeArgs),
    /// Train one-vs-rest SVMs for a unit kind.
    Train(TrainArgs),
    /// Decode sentences into timed label sequences.
    Decode(DecodeArgs),
    /// Score hypotheses against references.
    Eval(EvalArgs),
    /// Time every stage on synthetic videos of increasing length.
    Bench(BenchArgs),
    /// Render one class of a probability grid as a PGM image.
    GridHeatmap(HeatmapArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of synthetic classes (2-8).
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    sentences: usize,
    /// Units per sentence.
    #[arg(long, default_value_t = 8)]
    units: usize,
    /// Pixel noise standard deviation in 8-bit levels.
    #[arg(long, default_value_t = 4.0)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct FeatureOverrides {
    /// Colour channel: red, green, blue, lum, u, ulum, pseudohue.
    #[arg(long)]
    channel: Option<String>,
    /// Audio-visual shift in milliseconds.
    #[arg(long, value_name = "MS")]
    delta_t: Option<f64>,
    /// Uniform sub-sequence length.
    #[arg(long)]
    length: Option<usize>,
    /// Pyramid mask size.
    #[arg(long)]
    mask: Option<usize>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Corpus directory or a single sentence directory.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Force the lip row of frame 0 (aligned-frame pixels).
    #[arg(long)]
    lip_row: Option<usize>,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    /// Segmented corpus (or raw video corpus, segmented on the fly).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// phoneme, viseme, biphone or biviseme.
    #[arg(long, default_value = "phoneme")]
    units: String,
    #[command(flatten)]
    features: FeatureOverrides,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Grid-search report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "phoneme")]
    units: String,
    /// Take duration bounds from the training samples.
    #[arg(long)]
    derive_durations: bool,
    /// Comma-separated C values.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    /// Comma-separated RBF gamma values.
    #[arg(long, value_delimiter = ',')]
    gamma_grid: Option<Vec<f64>>,
    #[arg(long)]
    cv_split: Option<f64>,
    #[command(flatten)]
    features: FeatureOverrides,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Phoneme or viseme model.
    #[arg(long)]
    model: PathBuf,
    /// Biphone or bi-viseme model used with --use-biphones.
    #[arg(long)]
    pair_model: Option<PathBuf>,
    #[arg(long)]
    use_biphones: bool,
    /// phoneme or viseme; must match the model.
    #[arg(long)]
    units: Option<String>,
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving one transcript per sentence.
    #[arg(long)]
    out: PathBuf,
    /// Also write each probability grid here.
    #[arg(long)]
    grids: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Reference transcript, or a directory of them.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis transcript, or a directory of them.
    #[arg(long)]
    hyp: PathBuf,
    /// Competing hypotheses for a one-tailed paired t-test against --hyp.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Score as phonemes (default) or map both sides to visemes.
    #[arg(long, default_value = "phoneme")]
    units: String,
    /// Per-sentence report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Confusion matrix CSV.
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated video lengths in frames.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
    frames: Vec<usize>,
    /// Model to classify with; a small synthetic model is trained otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HeatmapArgs {
    /// Grid file written by `decode --grids`.
    #[arg(long)]
    grid: PathBuf,
    /// Class label to render.
    #[arg(long = "class")]
    class: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    let cfg = commands::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Segment(a) => commands::segment(a, &cfg),
        Command::Featurize(a) => commands::featurize(a, cfg),
        Command::Train(a) => commands::train(a, cfg),
        Command::Decode(a) => commands::decode(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a, cfg),
        Command::GridHeatmap(a) => commands::grid_heatmap(a),
    }
}
