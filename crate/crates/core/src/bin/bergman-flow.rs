use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bergman_flow::experiment::{load_config, parse_config, run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "bergman-flow", version, about = "Iterated Bergman kernels and Kähler-Einstein volume forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the kernel iteration and compare with the KE volume form
    Iterate(Common),
    /// Fit the leading boundary coefficient of the Bergman kernel
    BoundaryFit(Common),
    /// Exhaustion by sublevels and nested-domain monotonicity
    Exhaustion(Common),
    /// Plurisubharmonicity of fiberwise kernels over a Hartogs family
    Variation(Common),
    /// Closed-form oracle checks
    OracleSuite(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (default: the config's output_dir, else ./out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed for randomized checks
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Iterate(c) => (ExperimentKind::Iterate, c),
        Command::BoundaryFit(c) => (ExperimentKind::BoundaryFit, c),
        Command::Exhaustion(c) => (ExperimentKind::Exhaustion, c),
        Command::Variation(c) => (ExperimentKind::Variation, c),
        Command::OracleSuite(c) => (ExperimentKind::OracleSuite, c),
    };
    match execute(kind, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(kind: ExperimentKind, common: Common) -> bergman_flow::Result<bool> {
    let mut config: ExperimentConfig = match &common.config {
        Some(path) => load_config(path)?,
        None => parse_config("{}")?,
    };
    if let Some(k) = config.experiment {
        if k != kind {
            eprintln!("note: config names experiment `{}`, running `{}`", k.name(), kind.name());
        }
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let outcome = run_experiment(&config, kind, &out)?;
    print!("{}", outcome.summary);
    println!("artifacts in {}", out.display());
    Ok(outcome.passed())
}
