mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::Context;
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "lingrowth",
    version,
    about = "Linear-growth variational problems on grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized suites; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Verification suite, or `all`.
    #[arg(long, global = true)]
    suite: Option<String>,
    /// Run the non-convex demonstration rows instead of refusing.
    #[arg(long, global = true)]
    allow_nonconvex_demo: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Minimize the energy by continuation in epsilon.
    Solve,
    /// March the implicit gradient flow.
    Flow,
    /// Run verification suites.
    Verify,
    /// Solve a 1D problem for a range of lambda and compare jump heights.
    Sweep,
    /// Convert the artifacts in --out into whitespace tables for plotting.
    EmitPlotData,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Ok(threads) = std::env::var("LINGROWTH_THREADS") {
        let n = threads
            .parse()
            .map_err(|_| CliError::Parse(format!("LINGROWTH_THREADS: not a count: {threads}")))?;
        lingrowth::par::limit_threads(n)?;
    }
    let (config, base) = match &cli.config {
        Some(path) => {
            let (c, b) = RunConfig::load(path)?;
            (Some(c), b)
        }
        None => (None, PathBuf::from(".")),
    };
    let out = match (&cli.out, config.as_ref().and_then(|c| c.out.as_ref())) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("lingrowth-out"),
    };
    if !matches!(cli.command, Command::EmitPlotData) {
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    } else if !out.is_dir() {
        return Err(CliError::Parse(format!(
            "missing artifact directory {}",
            out.display()
        )));
    }
    let ctx = Context {
        seed: cli.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0),
        allow_nonconvex_demo: cli.allow_nonconvex_demo
            || config.as_ref().is_some_and(RunConfig::allow_nonconvex_demo),
        config,
        base,
        out,
        suite: cli.suite,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Flow => commands::flow(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::EmitPlotData => commands::emit_plot_data(&ctx),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
