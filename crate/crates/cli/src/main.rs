mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgf_core::gf::State;
use pgf_core::oracle::RunConfig;

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "pgf", version, about = "Exact inference for discrete probabilistic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Emit a single JSON document on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Highest total degree shown in series expansions.
    #[arg(long, global = true, env = "PGF_DISPLAY_ORDER", default_value_t = 5, value_name = "N")]
    order: usize,
}

#[derive(Args, Debug, Clone, Default)]
pub struct StrategyArgs {
    /// Unroll every loop without an invariant at most N times.
    #[arg(long, value_name = "N")]
    pub unroll: Option<usize>,

    /// Loop invariant file; repeat to cover several loops in program order.
    #[arg(long = "invariant", value_name = "FILE")]
    pub invariants: Vec<PathBuf>,

    /// Assume the loops terminate almost surely, so verified invariants give
    /// exact results.
    #[arg(long)]
    pub assert_uast: bool,
}

#[derive(Args, Debug, Clone)]
pub struct InferArgs {
    pub program: PathBuf,

    /// Input distribution as a generating function over the program variables.
    #[arg(long, default_value = "1", value_name = "EXPR")]
    pub prior: String,

    #[command(flatten)]
    pub strategy: StrategyArgs,

    /// Query to answer on the result, e.g. "E[t]" or "Pr[x > 2]"; repeatable.
    #[arg(long = "query", value_name = "QUERY")]
    pub queries: Vec<String>,

    /// Report the unnormalized result instead of the conditioned posterior.
    #[arg(long)]
    pub unconditioned: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the output distribution of a program.
    Infer(InferArgs),
    /// Answer queries on the output distribution of a program.
    Query(InferArgs),
    /// Decide whether two loop-free programs have the same semantics.
    CheckEquiv { left: PathBuf, right: PathBuf },
    /// Check that a loop-free program is an invariant of the first loop.
    CheckInvariant {
        program: PathBuf,
        #[arg(long, value_name = "FILE")]
        invariant: PathBuf,
    },
    /// Solve for the parameters of an invariant template.
    Synthesize {
        program: PathBuf,
        #[arg(long, value_name = "FILE")]
        template: PathBuf,
        /// Also print the constraint system in SMT-LIB form.
        #[arg(long)]
        smtlib: bool,
    },
    /// Compare the exact posterior with Monte Carlo estimates.
    McCheck {
        program: PathBuf,
        /// Initial state such as "x=1,y=0"; unlisted variables start at 0.
        #[arg(long, value_parser = parse_state, default_value = "")]
        start: State,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long, default_value_t = RunConfig::default().samples)]
        samples: u64,
        #[arg(long, default_value_t = RunConfig::default().seed)]
        seed: u64,
        /// Runs that exceed this many loop iterations count as non-terminating.
        #[arg(long, default_value_t = RunConfig::default().max_steps)]
        max_steps: u64,
        /// Number of most frequent states to compare.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

fn parse_state(s: &str) -> Result<State, String> {
    let mut out = State::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, found '{part}'"))?;
        let v = v.trim().parse::<u64>().map_err(|e| format!("value of '{}': {e}", k.trim()))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = commands::Output { json: cli.json, order: cli.order };
    let result = match cli.command {
        Command::Infer(args) => commands::infer(&args, &out, false),
        Command::Query(args) => commands::infer(&args, &out, true),
        Command::CheckEquiv { left, right } => commands::check_equiv(&left, &right, &out),
        Command::CheckInvariant { program, invariant } => commands::check_invariant(&program, &invariant, &out),
        Command::Synthesize { program, template, smtlib } => commands::synthesize(&program, &template, smtlib, &out),
        Command::McCheck { program, start, strategy, samples, seed, max_steps, top } => {
            let cfg = RunConfig { samples, seed, max_steps, ..RunConfig::default() };
            commands::mc_check(&program, &start, &strategy, &cfg, top, &out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            if out.json {
                println!("{}", serde_json::json!({ "status": "error", "exit_code": code, "message": message }));
            }
            ExitCode::from(code)
        }
    }
}
