//! `shapefuzz`: generate datasets, train validity filters and run filtered
//! fuzzing campaigns from seeded, file-based configurations.

/// `println!` that exits quietly when stdout is a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("writing to stdout: {e}");
        }
    }};
}

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Operators, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Something failed while running (exit 2).
    Runtime(String),
    /// Artifacts were written but a requested threshold was missed (exit 3).
    Gate(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Gate(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Gate(m) => write!(f, "threshold not met: {m}"),
        }
    }
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "shapefuzz", version, about = "Learned input-validity pre-filters for tensor-operator fuzzing")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $SHAPEFUZZ_OUT or ./shapefuzz-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Operators: `all` or a comma-separated list.
    #[arg(long = "ops", visible_alias = "op", global = true)]
    ops: Option<String>,
    /// -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the operator catalog.
    Ops {
        #[arg(long)]
        json: bool,
    },
    /// Generate labeled datasets.
    Gen(GenArgs),
    /// Train leaderboards over seeded repetitions and keep the best models.
    Train(TrainArgs),
    /// Score a model on a dataset file.
    Eval(EvalArgs),
    /// Score trained models on a large fresh dataset.
    Generalize(GeneralizeArgs),
    /// Run unfiltered and/or filtered fuzzing per operator.
    Fuzz(FuzzArgs),
    /// Compare unfiltered and filtered campaigns across operators.
    Compare(CompareArgs),
    /// Measure how many injected-bug triggers the models let through.
    Bugs(BugsArgs),
    /// Cross-check the stub oracles against an external bridge process.
    Xcheck(XcheckArgs),
    /// Serve the built-in oracles over the bridge protocol on stdin/stdout.
    #[command(hide = true)]
    BridgeStub {
        /// Answer the opposite verdict for these operators.
        #[arg(long)]
        flip: Vec<String>,
        /// Answer UNSUPPORTED for these operators.
        #[arg(long)]
        unsupported: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct TrainingArgs {
    /// Training data producer: random, pairwise, weak or weak:<none|partial|full>.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    levels_per_param: Option<usize>,
    /// Directory of trained models (default: <out>/models).
    #[arg(long)]
    models: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    strategy: Option<String>,
    /// Samples per operator.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    levels_per_param: Option<usize>,
    /// Skip the encoded feature CSV.
    #[arg(long)]
    no_features: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    split: Option<f64>,
    /// Train once on this dataset file instead of generating data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Exit 3 if an operator with >= 10% positives averages below this precision.
    #[arg(long)]
    min_precision: Option<f64>,
    #[arg(long)]
    min_recall: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args, Debug)]
struct GeneralizeArgs {
    #[command(flatten)]
    training: TrainingArgs,
    /// Fresh samples per operator.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FuzzMode {
    Unfiltered,
    Filtered,
    Both,
}

#[derive(Args, Debug)]
struct CampaignArgs {
    /// Weak-generator relaxation: none, partial or full.
    #[arg(long)]
    relaxation: Option<String>,
    /// Candidates per operator.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    fn_audit: Option<usize>,
    /// Do not charge simulated execution cost.
    #[arg(long)]
    no_cost: bool,
}

#[derive(Args, Debug)]
struct FuzzArgs {
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    campaign: CampaignArgs,
    #[arg(long, value_enum, default_value = "both")]
    mode: FuzzMode,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Exit 3 unless the Wilcoxon p-value is below this.
    #[arg(long)]
    max_p: Option<f64>,
}

#[derive(Args, Debug)]
struct BugsArgs {
    #[command(flatten)]
    training: TrainingArgs,
    /// Valid samples drawn per operator.
    #[arg(long)]
    n: Option<usize>,
    /// Exit 3 if any operator's model keeps a smaller share of triggers.
    #[arg(long)]
    min_retention: Option<f64>,
}

#[derive(Args, Debug)]
struct XcheckArgs {
    /// Bridge executable.
    #[arg(long)]
    bridge: Option<String>,
    /// Argument passed to the bridge; repeatable.
    #[arg(long = "bridge-arg", allow_hyphen_values = true)]
    bridge_args: Vec<String>,
    /// Tuples per operator.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    min_agreement: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl TrainingArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.strategy, self.strategy.clone());
        set(&mut cfg.n_train, self.n_train);
        set(&mut cfg.levels_per_param, self.levels_per_param);
    }
}

impl CampaignArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.campaign.relaxation, self.relaxation.clone());
        set(&mut cfg.campaign.n, self.n);
        if self.batch_size.is_some() {
            cfg.campaign.batch_size = self.batch_size;
        }
        set(&mut cfg.campaign.fn_audit, self.fn_audit);
        if self.no_cost {
            cfg.campaign.simulate_cost = false;
        }
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    set(&mut cfg.seed, cli.seed);
    if let Some(ops) = &cli.ops {
        cfg.operators = Operators::parse(ops);
    }
    if cli.out.is_some() {
        cfg.out_dir = cli.out.clone();
    }
    match &cli.command {
        Command::Gen(a) => {
            set(&mut cfg.strategy, a.strategy.clone());
            set(&mut cfg.n_train, a.n);
            set(&mut cfg.levels_per_param, a.levels_per_param);
        }
        Command::Train(a) => {
            a.training.apply(cfg);
            set(&mut cfg.repetitions, a.reps);
            set(&mut cfg.split, a.split);
        }
        Command::Generalize(a) => {
            a.training.apply(cfg);
            set(&mut cfg.generalization.n, a.n);
        }
        Command::Fuzz(a) => {
            a.training.apply(cfg);
            a.campaign.apply(cfg);
        }
        Command::Compare(a) => {
            a.training.apply(cfg);
            a.campaign.apply(cfg);
        }
        Command::Bugs(a) => {
            a.training.apply(cfg);
            set(&mut cfg.bugs.n, a.n);
        }
        Command::Xcheck(a) => {
            set(&mut cfg.bridge.command, a.bridge.clone());
            if !a.bridge_args.is_empty() {
                cfg.bridge.args = a.bridge_args.clone();
            }
            set(&mut cfg.bridge.n, a.n);
        }
        Command::Ops { .. } | Command::Eval(_) | Command::BridgeStub { .. } => {}
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    apply_overrides(&cli, &mut cfg);
    cfg.validate()?;
    let models_dir = |t: &TrainingArgs| t.models.clone();
    match &cli.command {
        Command::Ops { json } => commands::ops(*json),
        Command::Gen(a) => commands::gen(&cfg, !a.no_features),
        Command::Train(a) => commands::train(
            &cfg,
            a.dataset.as_deref(),
            models_dir(&a.training),
            a.min_precision,
            a.min_recall,
        ),
        Command::Eval(a) => commands::eval(&cfg, &a.model, &a.dataset),
        Command::Generalize(a) => commands::generalize(&cfg, models_dir(&a.training)),
        Command::Fuzz(a) => commands::fuzz(&cfg, models_dir(&a.training), a.mode),
        Command::Compare(a) => commands::compare(&cfg, models_dir(&a.training), a.max_p),
        Command::Bugs(a) => commands::bugs(&cfg, models_dir(&a.training), a.min_retention),
        Command::Xcheck(a) => commands::xcheck(&cfg, cli.ops.is_some(), a.min_agreement),
        Command::BridgeStub { flip, unsupported } => commands::bridge_stub(flip, unsupported),
    }
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
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shapefuzz: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
