use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use projstate::hilbert::Mode;
use projstate::scenario::{Model, Scenario};
use serde_json::{json, Value};

mod commands;

/// Builds and verifies projective-state structures described by JSON
/// scenarios. Reports go to stdout as JSON, a summary to stderr.
#[derive(Debug, Parser)]
#[command(name = "projstate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Seed for every random choice; overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Unitaries for generated families.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Float)]
    mode: ModeArg,

    /// Run independent cases concurrently.
    #[arg(long, global = true)]
    parallel: bool,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Float,
}

impl ModeArg {
    fn mode(self) -> Mode {
        match self {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Float => Mode::Float,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::Exact => "exact",
            ModeArg::Float => "float",
        }
    }
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Pairings φ̂κ of the listed cases, checked against the bracket oracle.
    Pairing,
    /// Joins of system pairs.
    Join,
    /// Well-definedness conditions on the scenario systems.
    CheckConditions,
    /// Generates each family and checks the family laws, the inductive
    /// embeddings and the projective pull-backs.
    VerifyFamily,
    /// Generates each family and emits its matrices.
    GenerateFamily,
    /// Combines pairs of families over a product fragment.
    Combine,
    /// Θ joins and dominating Θ-members.
    ThetaJoin,
    /// Poisson brackets of functional pairs.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Pairing => "pairing",
            Command::Join => "join",
            Command::CheckConditions => "check-conditions",
            Command::VerifyFamily => "verify-family",
            Command::GenerateFamily => "generate-family",
            Command::Combine => "combine",
            Command::ThetaJoin => "theta-join",
            Command::Oracle => "oracle",
        }
    }
}

pub struct Settings {
    pub seed: u64,
    pub mode: Mode,
    pub parallel: bool,
}

pub struct Outcome {
    pub passed: bool,
    pub checks: usize,
    pub max_deviation: Option<f64>,
    pub results: Value,
}

fn emit(report: &Value, out: Option<&PathBuf>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(cli: &Cli) -> Result<Model, String> {
    let path = cli.scenario.as_ref().ok_or("--scenario is required")?;
    let scenario = Scenario::load(path).map_err(|e| e.to_string())?;
    Model::build(&scenario).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = load(&cli).and_then(|model| {
        let settings = Settings {
            seed: cli.seed.unwrap_or(model.seed),
            mode: cli.mode.mode(),
            parallel: cli.parallel,
        };
        commands::run(cli.command, &model, &settings)
            .map(|o| (o, settings.seed))
            .map_err(|e| e.to_string())
    });
    match result {
        Ok((outcome, seed)) => {
            let report = json!({
                "command": name,
                "seed": seed,
                "mode": cli.mode.name(),
                "status": if outcome.passed { "pass" } else { "fail" },
                "checks": outcome.checks,
                "max_deviation": outcome.max_deviation,
                "results": outcome.results,
            });
            if let Err(e) = emit(&report, cli.out.as_ref()) {
                eprintln!("{name}: {e}");
                return ExitCode::from(2);
            }
            let deviation = outcome
                .max_deviation
                .map(|d| format!(", max deviation {d:.3e}"))
                .unwrap_or_default();
            if outcome.passed {
                eprintln!("{name}: pass ({} checks{deviation})", outcome.checks);
                ExitCode::SUCCESS
            } else {
                eprintln!("{name}: FAIL ({} checks{deviation})", outcome.checks);
                ExitCode::from(1)
            }
        }
        Err(message) => {
            let report = json!({ "command": name, "status": "error", "error": message });
            let _ = emit(&report, cli.out.as_ref());
            eprintln!("{name}: error: {message}");
            ExitCode::from(2)
        }
    }
}
