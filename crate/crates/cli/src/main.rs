use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weingarten_cli::{execute, write_summary, Command, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "weingarten", version, about = "Radial, Dirichlet and exterior solves for elliptic Weingarten graphs")]
struct Cli {
    /// Run file with the [relation], [domain], ... sections.
    #[arg(long, global = true, value_name = "PATH")]
    run: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`; default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and `verify` (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Seed for the randomized checks under `verify`.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Built-in relations.
    Relation {
        #[command(subcommand)]
        action: RelationAction,
    },
    /// Rotationally symmetric ends.
    Radial {
        #[command(subcommand)]
        action: RadialAction,
    },
    /// Dirichlet problem on a bounded domain.
    Dirichlet {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Dirichlet problem on an annulus around an end.
    Exterior {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Asymptotic fits of radial or grid CSV output.
    Fit {
        #[command(subcommand)]
        action: FitAction,
    },
    /// Run the acceptance suite; exits 6 if any criterion fails.
    Verify,
    /// Repeat a solve over the values of one run-file key.
    Sweep,
}

#[derive(Subcommand)]
enum RelationAction {
    /// Print the registry of built-in families.
    List,
    /// Validate the relation of the run file.
    Check,
}

#[derive(Subcommand)]
enum RadialAction {
    /// Integrate the radial equation and write `radial.csv`.
    Solve,
    /// Limit constant of a power or bounded end.
    Asymptote,
}

#[derive(Subcommand)]
enum SolveAction {
    /// Solve and write `grid.csv` and `solution.json`.
    Solve,
}

#[derive(Subcommand)]
enum FitAction {
    /// Fit the expansion of `[fit] input`.
    Expansion,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Top::Relation { action: RelationAction::List } => Command::RelationList,
        Top::Relation { action: RelationAction::Check } => Command::RelationCheck,
        Top::Radial { action: RadialAction::Solve } => Command::RadialSolve,
        Top::Radial { action: RadialAction::Asymptote } => Command::RadialAsymptote,
        Top::Dirichlet { action: SolveAction::Solve } => Command::DirichletSolve,
        Top::Exterior { action: SolveAction::Solve } => Command::ExteriorSolve,
        Top::Fit { action: FitAction::Expansion } => Command::FitExpansion,
        Top::Verify => Command::Verify,
        Top::Sweep => Command::Sweep,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(5);
        }
    };
    let inv = pool.install(|| execute(cmd, cli.run.as_deref(), cli.out.as_deref(), cli.seed));
    for line in &inv.lines {
        println!("{line}");
    }
    if let Some(e) = &inv.summary.error {
        eprintln!("error: {}", e.message);
    }
    match write_summary(&inv) {
        Ok(Some(path)) => println!("summary: {}", path.display()),
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if inv.summary.exit_code == 0 { e.code() } else { inv.summary.exit_code });
        }
    }
    ExitCode::from(inv.summary.exit_code)
}
