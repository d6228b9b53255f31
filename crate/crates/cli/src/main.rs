mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use squatcalc_core::heat::{HeatForm, InitialCondition, Scheme};
use squatcalc_core::report::Format;
use squatcalc_core::PowerMethod;

use crate::commands::Failure;

/// Quaternionic S-functional calculus on matrices and periodic fields.
#[derive(Parser, Debug)]
#[command(name = "squatcalc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// S-spectrum of a quaternionic matrix as a list of spheres.
    Spectrum {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// f(T) by the S-functional calculus.
    Funcalc(FuncalcArgs),
    /// Fractional power T^alpha of a sectorial matrix.
    Fracpow(FracpowArgs),
    /// Generate, transform or measure SQF1 field files.
    Field {
        #[command(subcommand)]
        action: FieldCommand,
    },
    /// Fractional heat equation on a periodic cube.
    Heat(HeatArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Selftest {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Emit the outcomes as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, default_value = "json")]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FuncalcArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Function of s, e.g. "pow(s,0.5)" or "1/(1+s)".
    #[arg(long)]
    expr: String,
    /// Only `auto` is accepted; use --circle for an explicit contour.
    #[arg(long, default_value = "auto", conflicts_with = "circle")]
    contour: String,
    /// Circle `u,v,r` in the slice plane (mirrored when v is nonzero).
    #[arg(long, value_parser = parse_circle, allow_hyphen_values = true)]
    circle: Option<[f64; 3]>,
    /// First-pass nodes per arc.
    #[arg(long)]
    nodes: Option<usize>,
    /// Unit imaginary of the slice plane.
    #[arg(long)]
    axis: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct FracpowArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value = "spectral")]
    method: PowerMethod,
    /// Also run the other routes and report the differences.
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand, Debug)]
enum FieldCommand {
    /// Write a field sampled on an N^3 grid.
    Gen {
        #[arg(long)]
        grid: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        r#box: f64,
        /// gauss | modes:k1,k2,k3:a;... | random
        #[arg(long, default_value = "gauss")]
        init: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a spectral operator to a field.
    Apply {
        #[arg(long)]
        op: FieldOp,
        /// Exponent for the fractional operators.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Norms and extrema of a field as JSON.
    Norm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum FieldOp {
    /// The quaternionic nabla operator.
    Nabla,
    /// f_alpha(nabla) from the closed per-mode symbol.
    FracNabla,
    /// f_alpha(nabla) by quadrature.
    FracNablaQuad,
    /// (-Laplacian)^alpha.
    FracLaplacian,
}

#[derive(Args, Debug)]
struct HeatArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    grid: usize,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    r#box: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "exact")]
    scheme: Scheme,
    #[arg(long, default_value = "direct")]
    form: HeatForm,
    #[arg(long, default_value = "gauss")]
    init: InitialCondition,
    #[arg(long)]
    snap_every: Option<usize>,
    /// Directory for norms.csv and snapshots; norms go to standard output otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_circle(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three numbers u,v,r".to_string())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SQUATCALC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Input(format!("SQUATCALC_THREADS must be a non-negative integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum { matrix, output } => commands::spectrum(&matrix, &output).map(|_| true),
        Command::Funcalc(a) => commands::funcalc(&a).map(|_| true),
        Command::Fracpow(a) => commands::fracpow(&a).map(|_| true),
        Command::Field { action } => commands::field(action).map(|_| true),
        Command::Heat(a) => commands::heat(&a).map(|_| true),
        Command::Selftest { only, json } => commands::selftest(&only, json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("squatcalc: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
