use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use fgen_core::bounds::BoundSelection;
use fgen_core::supersample::Mode;
use fgen_core::DivergenceKind;

mod commands;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_FAILURE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "fgen", version, about = "f-information generalization bounds on supersample loss tensors")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the randomized invariant suites.
    Verify(VerifyArgs),
    /// Divergences between two distribution files.
    Divergence(DivergenceArgs),
    /// f-information of a joint file or plug-in estimates from a tensor file.
    Finfo(FinfoArgs),
    /// Evaluate generalization bounds on a tensor file.
    Bound(BoundArgs),
    /// Gaussian linear-classification experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, env = "FGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Print one JSON object keyed by suite name.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct DivergenceArgs {
    /// JSON file `{"support": [...], "probs": [...]}`.
    #[arg(long)]
    pub p: PathBuf,
    #[arg(long)]
    pub q: PathBuf,
    /// Divergence kind; every fixed kind when omitted.
    #[arg(long)]
    pub kind: Option<DivergenceKind>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "joint"])))]
pub struct FinfoArgs {
    /// Tensor file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON file `{"support": [...], "p0": [...], "p1": [...]}`.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[arg(long, default_value = "kl")]
    pub kind: DivergenceKind,
    #[arg(long, value_enum, default_value_t = ModeArg::Pooled)]
    pub mode: ModeArg,
    /// Uniform bins over the observed range instead of the default quantizer.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Pooled,
    Disintegrated,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pooled => Mode::Pooled,
            ModeArg::Disintegrated => Mode::Disintegrated,
        }
    }
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    /// Tensor file.
    #[arg(long)]
    pub input: PathBuf,
    /// `all` or a comma-separated list of bound names.
    #[arg(long, default_value = "all")]
    pub bounds: BoundSelection,
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    /// Drop (draw, row) cells with an empty mask stratum instead of failing.
    #[arg(long)]
    pub skip_empty_cells: bool,
    /// Report file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Task {
    Gaussian,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long, value_enum, default_value_t = Task::Gaussian)]
    pub task: Task,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub class_sep: f64,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,250,500")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub k1: usize,
    #[arg(long, default_value_t = 100)]
    pub k2: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub early_stop: f64,
    #[arg(long, env = "FGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `results.svg`.
    #[arg(long)]
    pub svg: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "info"
    } else {
        "warn"
    }))
    .format_timestamp(None)
    .init();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Verify(a) => commands::verify(&a),
        Command::Divergence(a) => commands::divergence(&a),
        Command::Finfo(a) => commands::finfo(&a),
        Command::Bound(a) => commands::bound(&a),
        Command::Experiment(a) => commands::experiment(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
