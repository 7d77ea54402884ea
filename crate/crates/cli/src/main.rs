//! `maryland`: variance curves, purity witnesses, positivity scans and
//! oracle checks for the linear kicked rotor with Markovian kicks.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "maryland", version, about = "Linear kicked rotor with Markovian stochastic kicks")]
struct Cli {
    /// Worker threads for the parallel kernels (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Momentum variance against the number of kicks.
    Variance(VarianceArgs),
    /// Purity of the evolved zero-momentum state and its monotonicity violations.
    Witness(WitnessArgs),
    /// Positivity probe of the two-step intertwiner over the angle torus.
    Delta(DeltaArgs),
    /// Cross-check every fast evaluation route against its oracle.
    Verify(VerifyArgs),
    /// Draw noise histories from the Markov chain.
    Sample(SampleArgs),
    /// Evolve a momentum eigenstate and dump the density matrix.
    Evolve(EvolveArgs),
}

#[derive(Args, Debug, Clone)]
struct Model {
    /// Kick strength.
    #[arg(long = "K", allow_negative_numbers = true)]
    k: f64,

    /// Kick period: `2pi`, `2pi*sqrt<k>` or `2pi*<decimal>`.
    #[arg(long, default_value = "2pi*sqrt2")]
    tau: String,

    /// Memory parameter of the kick chain, in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    a: f64,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Output file; defaults to `<command>.<format>` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Directory for default output files.
    #[arg(long, env = "MARYLAND_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args, Debug)]
struct VarianceArgs {
    #[command(flatten)]
    model: Model,

    /// Kick at every step instead of following the chain.
    #[arg(long)]
    deterministic: bool,

    #[arg(long = "N-max", visible_alias = "N", default_value_t = 500)]
    n_max: usize,

    /// Estimate by Monte Carlo with this many trials instead of the exact sum.
    #[arg(long)]
    trials: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[command(flatten)]
    model: Model,

    #[arg(long = "N-max", visible_alias = "N", default_value_t = 40)]
    n_max: usize,

    /// Quadrature points per angle; checked against twice as many.
    #[arg(long, default_value_t = 256)]
    grid: usize,

    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct DeltaArgs {
    #[command(flatten)]
    model: Model,

    /// Mesh points per angle.
    #[arg(long, default_value_t = 512)]
    grid: usize,

    /// Points with |cos(A/2)| at or below this are masked.
    #[arg(long, default_value_t = maryland::witness::DEFAULT_EPS_SING)]
    eps_sing: f64,

    /// Width of the interval smearing used to confirm a negative minimum.
    #[arg(long, default_value_t = 1e-3)]
    smear: f64,

    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Largest horizon for the enumeration oracles.
    #[arg(long = "max-N", default_value_t = 12)]
    max_n: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Offset added to every fast route (negative control).
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb: f64,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, default_value_t = 0.0)]
    a: f64,

    #[arg(long = "N", visible_alias = "N-max", default_value_t = 20)]
    n: usize,

    /// Number of independent histories.
    #[arg(long, default_value_t = 1)]
    count: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Recursive,
    Enumerated,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    model: Model,

    #[arg(long = "N", visible_alias = "N-max", default_value_t = 10)]
    n: usize,

    /// Initial momentum eigenstate.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    m: i64,

    /// Truncation radius; chosen from K, tau and N when omitted.
    #[arg(long)]
    n_max: Option<usize>,

    #[arg(long, value_enum, default_value_t = Route::Recursive)]
    route: Route,

    /// Binary output file; defaults to `evolve.rho` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, env = "MARYLAND_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    maryland::par::configure_threads(cli.threads);
    let result = match cli.command {
        Command::Variance(args) => commands::variance(&args),
        Command::Witness(args) => commands::witness(&args),
        Command::Delta(args) => commands::delta(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Sample(args) => commands::sample(&args),
        Command::Evolve(args) => commands::evolve(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
