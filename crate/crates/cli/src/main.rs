//! beltramikit: ellipticity, minimal distortion, staircase laminates, and
//! grid experiments for planar two-phase conductivities.
//!
//! Every run prints a JSON manifest to stdout (command, echoed input,
//! results, output file names) and keeps timing on stderr so reruns with
//! the same input produce byte-identical files. `--schema` documents the
//! file formats.

mod commands;
mod input;
mod schema;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Error with the process exit code it should produce.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// Bad input or environment: exit 2.
    pub fn input(message: String) -> CliError {
        CliError { code: 2, message }
    }

    /// Violated internal invariant: exit 4.
    pub fn internal(message: String) -> CliError {
        CliError { code: 4, message }
    }
}

impl From<beltramikit::Error> for CliError {
    fn from(e: beltramikit::Error) -> CliError {
        use beltramikit::Error::*;
        let code = match &e {
            BadParameter(_) => 2,
            NonSymmetric(_) | NonSpd(_) | NotElliptic(_) | DomainError(_) | NotTight { .. }
            | Infeasible(_) | SingularTransform(_) => 3,
            NotCollinear(_) | NotRankOne(..) | NumericalError(_) => 4,
            SolverFailure(_) => 5,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Validated BELTRAMIKIT_THREADS value for the manifest; the binary runs
/// serially, so any positive cap is honored trivially.
pub fn threads_json() -> Value {
    match std::env::var("BELTRAMIKIT_THREADS") {
        Ok(raw) => serde_json::json!(raw.trim().parse::<usize>().expect("validated at startup")),
        Err(_) => Value::Null,
    }
}

#[derive(Parser)]
#[command(
    name = "beltramikit",
    version,
    about = "Two-phase planar conductivity toolkit: ellipticity bounds, minimal \
             distortion, staircase laminates, grid experiments"
)]
struct Cli {
    /// Print input/output schemas (for the given subcommand, or all) and exit.
    #[arg(long, global = true)]
    schema: bool,

    /// Seed for commands that sample random pairs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Evaluation budget for the numeric distortion search.
    #[arg(long, global = true, default_value_t = 40_000)]
    budget: usize,

    /// Primary table format; defaults: analyze json, others csv.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ellipticity and minimal-distortion report for a conductivity pair.
    Analyze {
        /// JSON file {"sigma1": [[..],[..]], "sigma2": [[..],[..]]}.
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Inline matrix JSON, e.g. '[[2, 0], [0, 2]]'.
        #[arg(long, conflicts_with = "input", requires = "sigma2")]
        sigma1: Option<String>,
        /// Inline matrix JSON for the second phase.
        #[arg(long, conflicts_with = "input", requires = "sigma1")]
        sigma2: Option<String>,
        /// Report file to write (json or csv per --format).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Staircase laminate: atom dump, tree, and moment table.
    Laminate {
        /// Target distortion K > 1.
        #[arg(long)]
        k: f64,
        /// Unit stair steps after the geometric prologue.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Corner offset in [0, eps_max(K)).
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Grid experiments from a JSON config (fields, norms, stream function).
    Solve {
        /// JSON config; see --schema.
        #[arg(short, long)]
        input: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Closed form vs normalization route vs numeric search on many pairs.
    Verify {
        /// JSON array of {"sigma1": .., "sigma2": ..}; omit to sample.
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Number of pairs to sample when no input file is given.
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        /// Comparison table file (csv or json per --format).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn cmd_name(cmd: &Option<Cmd>) -> Option<&'static str> {
    match cmd {
        Some(Cmd::Analyze { .. }) => Some("analyze"),
        Some(Cmd::Laminate { .. }) => Some("laminate"),
        Some(Cmd::Solve { .. }) => Some("solve"),
        Some(Cmd::Verify { .. }) => Some("verify"),
        None => None,
    }
}

fn run(cli: Cli) -> Result<Value, CliError> {
    let format = cli.format;
    match cli.command.expect("checked by caller") {
        Cmd::Analyze {
            input,
            sigma1,
            sigma2,
            out,
        } => {
            let (s1, s2) = match (&input, &sigma1, &sigma2) {
                (Some(path), _, _) => {
                    let v = input::parse_json_file(path)?;
                    input::pair_from_value(&v)?
                }
                (None, Some(a), Some(b)) => (
                    input::inline_mat(a, "sigma1")?,
                    input::inline_mat(b, "sigma2")?,
                ),
                _ => {
                    return Err(CliError::input(
                        "provide --input FILE or both --sigma1 and --sigma2".into(),
                    ))
                }
            };
            commands::analyze(
                s1,
                s2,
                cli.budget,
                out.as_deref(),
                format.unwrap_or(Format::Json),
            )
        }
        Cmd::Laminate { k, n, eps, out } => {
            commands::laminate_cmd(k, n, eps, &out, format.unwrap_or(Format::Csv))
        }
        Cmd::Solve { input, out } => {
            let v = input::parse_json_file(&input)?;
            let cfg = input::parse_solve_config(&v)?;
            commands::solve_cmd(&cfg, &out, format.unwrap_or(Format::Csv))
        }
        Cmd::Verify { input, pairs, out } => {
            let parsed = match &input {
                Some(path) => {
                    let v = input::parse_json_file(path)?;
                    let arr = v.as_array().ok_or_else(|| {
                        CliError::input("pairs file must be a JSON array".into())
                    })?;
                    Some(
                        arr.iter()
                            .map(input::pair_from_value)
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                None => None,
            };
            commands::verify_cmd(
                parsed,
                pairs,
                cli.seed,
                cli.budget,
                out.as_deref(),
                format.unwrap_or(Format::Csv),
            )
        }
    }
}

fn main() -> ExitCode {
    // --schema short-circuits before argument validation so that
    // `beltramikit laminate --schema` works without --k/--out.
    let raw: Vec<String> = std::env::args().skip(1).collect();
    if raw.iter().any(|a| a == "--schema") {
        let sub = raw
            .iter()
            .find(|a| ["analyze", "laminate", "solve", "verify"].contains(&a.as_str()))
            .map(String::as_str);
        schema::print_schema(sub);
        return ExitCode::SUCCESS;
    }

    let cli = Cli::parse();

    if let Ok(raw) = std::env::var("BELTRAMIKIT_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {}
            _ => {
                eprintln!(
                    "error: BELTRAMIKIT_THREADS must be a positive integer, got {raw:?}"
                );
                return ExitCode::from(2);
            }
        }
    }

    if cli.schema {
        schema::print_schema(cmd_name(&cli.command));
        return ExitCode::SUCCESS;
    }
    if cli.command.is_none() {
        eprintln!("error: a subcommand is required (analyze, laminate, solve, verify); see --help");
        return ExitCode::from(2);
    }

    let name = cmd_name(&cli.command).expect("checked above");
    let started = Instant::now();
    match run(cli) {
        Ok(man) => {
            println!("{man}");
            eprintln!(
                "{name} finished in {:.1} ms",
                started.elapsed().as_secs_f64() * 1e3
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
