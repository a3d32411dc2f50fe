use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use decomp_cli::{run, Command, RunConfig};
use decomp_core::solvers::{SolverConfig, SolverKind};

#[derive(Parser, Debug)]
#[command(version, about = "Decomposition solvers for huge matrix games and affine variational inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Matrix game from a dense payoff or from factor oracles.
    MatrixGame(Common),
    /// Attacker vs. Defender resource allocation game.
    Blotto(Common),
    /// Affine monotone variational inequality.
    AffineVi(Common),
    /// Nash equilibrium of a game with pairwise bilinear interactions.
    Nash(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Problem spec (JSON).
    #[arg(long)]
    spec: PathBuf,

    /// First-order method for the primal problem: ellipsoid or md.
    #[arg(long, default_value = "ellipsoid")]
    solver: SolverKind,

    /// Target certified residual.
    #[arg(long, default_value_t = SolverConfig::default().eps_target)]
    eps: f64,

    #[arg(long, default_value_t = SolverConfig::default().max_steps)]
    max_steps: usize,

    /// Steps between certificate rounds (default 4n² for ellipsoid, 100 for md).
    #[arg(long)]
    cert_period: Option<usize>,

    /// Stop once the exact gap is at most this.
    #[arg(long, default_value_t = SolverConfig::default().gap_threshold)]
    gap_threshold: f64,

    /// Seed for generated problem data.
    #[arg(long)]
    seed: Option<u64>,

    /// Report path (default: <command>-report.json in $DECOMP_REPORT_DIR or the working directory).
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::MatrixGame(c) => (Command::MatrixGame, c),
        Cmd::Blotto(c) => (Command::Blotto, c),
        Cmd::AffineVi(c) => (Command::AffineVi, c),
        Cmd::Nash(c) => (Command::Nash, c),
    };
    let cfg = RunConfig {
        command,
        spec_path: c.spec,
        solver: c.solver,
        eps: c.eps,
        max_steps: c.max_steps,
        cert_period: c.cert_period,
        gap_threshold: c.gap_threshold,
        seed: c.seed,
        report_path: c.report,
    };
    match run(&cfg) {
        Ok(summary) => ExitCode::from(summary.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
