use clap::{Args, Parser, Subcommand};
use lndev_cli::scenario::{self, TaskKind};
use lndev_cli::run;
use std::path::PathBuf;
use std::process::ExitCode;

/// Scenario-driven toolkit for affine-connection spaces: identity checks,
/// classification, symmetry tests, and deviation-equation integration.
#[derive(Parser)]
#[command(name = "lndev", version, about)]
struct Cli {
    #[command(subcommand)]
    task: TaskCmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML; see the README for the schema).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for report.txt and series.csv
    /// (default: $LNDEV_OUT or the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario check tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum TaskCmd {
    /// Verify the Lie-derivative identity for the connection on the space.
    CheckIdentity(CommonArgs),
    /// Classify the space (torsion-free, flat, Einstein, ...).
    Classify(CommonArgs),
    /// Test a vector field for projective/affine/isometric/conformal symmetry.
    Symmetry(CommonArgs),
    /// Integrate the geodesic + deviation system and emit a CSV time series.
    Integrate(CommonArgs),
    /// Split the free-particle tidal acceleration into curvature and torsion parts.
    Tidal(CommonArgs),
    /// Cross-check the three constructions of the Lie derivative of Γ.
    LieOracle(CommonArgs),
    /// Evaluate the dragged-structure condition residual.
    DraggedResidual(CommonArgs),
}

impl TaskCmd {
    fn split(&self) -> (TaskKind, &CommonArgs) {
        match self {
            TaskCmd::CheckIdentity(a) => (TaskKind::CheckIdentity, a),
            TaskCmd::Classify(a) => (TaskKind::Classify, a),
            TaskCmd::Symmetry(a) => (TaskKind::Symmetry, a),
            TaskCmd::Integrate(a) => (TaskKind::Integrate, a),
            TaskCmd::Tidal(a) => (TaskKind::Tidal, a),
            TaskCmd::LieOracle(a) => (TaskKind::LieOracle, a),
            TaskCmd::DraggedResidual(a) => (TaskKind::DraggedResidual, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = cli.task.split();

    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.scenario.display());
            return ExitCode::from(2);
        }
    };
    let mut scenario = match scenario::parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if scenario.task != task {
        eprintln!(
            "error: scenario declares task `{}` but `{}` was requested",
            scenario.task.name(),
            task.name()
        );
        return ExitCode::from(2);
    }
    if let Some(seed) = args.seed {
        scenario.numerics.seed = seed;
    }
    if let Some(tol) = args.tol {
        if tol <= 0.0 {
            eprintln!("error: --tol must be positive");
            return ExitCode::from(2);
        }
        scenario.numerics.tolerance = tol;
    }

    let out_dir = args
        .out
        .clone()
        .or_else(|| scenario.output.dir.clone().map(PathBuf::from))
        .or_else(|| std::env::var_os("LNDEV_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }

    match run::run(&scenario, &out_dir) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if let Err(e) = std::fs::write(out_dir.join("report.txt"), &outcome.report) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(3);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
    }
}
