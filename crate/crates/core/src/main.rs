use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cohframe::report::{self, Format, RunOptions, ScenarioKind};

/// Certify frame, HAP and comparison inequalities on finite groups.
#[derive(Debug, Parser)]
#[command(name = "cohframe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sampling-bound scenarios (separation constant and sampling inequality).
    CheckSeparation(CommonArgs),
    /// Run the frame-analysis scenarios.
    FrameBounds(CommonArgs),
    /// Frame analysis with the canonical dual vectors embedded.
    Dual(CommonArgs),
    /// Run the HAP scenarios.
    Hap(CommonArgs),
    /// Run the comparison scenarios.
    Compare(CommonArgs),
    /// Run the density scenarios.
    Density(CommonArgs),
    /// Run every scenario in the file.
    Suite(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file (a JSON array).
    #[arg(long)]
    scenarios: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Exit with status 2 if any check fails or any scenario errors.
    #[arg(long)]
    strict: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Override the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn parts(&self) -> (&CommonArgs, Option<ScenarioKind>, bool) {
        match self {
            Command::CheckSeparation(a) => (a, Some(ScenarioKind::SamplingBound), false),
            Command::FrameBounds(a) => (a, Some(ScenarioKind::FrameAnalysis), false),
            Command::Dual(a) => (a, Some(ScenarioKind::FrameAnalysis), true),
            Command::Hap(a) => (a, Some(ScenarioKind::Hap), false),
            Command::Compare(a) => (a, Some(ScenarioKind::Comparison), false),
            Command::Density(a) => (a, Some(ScenarioKind::Density), false),
            Command::Suite(a) => (a, None, false),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (args, kind, include_duals) = cli.command.parts();

    let mut scenarios = match report::load_scenarios(&args.scenarios) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    scenarios.retain(|s| kind.is_none_or(|k| s.kind == k));
    if let Some(seed) = args.seed {
        for s in &mut scenarios {
            s.seed = Some(seed);
        }
    }

    let reports = report::run_with(&scenarios, RunOptions { parallelism: args.parallel, include_duals });
    let rendered = report::emit(&reports, args.format);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{rendered}"),
    }

    if args.strict && reports.iter().any(|r| !r.passed()) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
