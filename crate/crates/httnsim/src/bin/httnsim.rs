use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use httnsim::config::{run_experiment, ExperimentConfig};
use httnsim::{Error, Result};

#[derive(Parser)]
#[command(name = "httnsim", version, about = "Noise propagation in hybrid tree tensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contract a tree against an observable.
    Contract(RunArgs),
    /// Effective noisy state and its physicality verdict.
    Physicality(RunArgs),
    /// Two-layer Deep VQE on a clustered Hamiltonian.
    Deepvqe(RunArgs),
    /// Entanglement-forged expectation values and the shot sampler.
    Forge(RunArgs),
    /// Noise-induced decay of layered trees.
    Decay(RunArgs),
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configuration's `output`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "HTTNSIM_THREADS")]
    threads: Option<usize>,
}

fn run(kind: &str, args: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment.kind() != kind {
        return Err(Error::Config(format!(
            "configuration describes a {} experiment, not {kind}",
            cfg.experiment.kind()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    let out = args.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let report = run_experiment(&cfg, &out)?;
    for line in report.lines {
        println!("{line}");
    }
    for path in report.artifacts {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Contract(a) => run("contract", a),
        Command::Physicality(a) => run("physicality", a),
        Command::Deepvqe(a) => run("deepvqe", a),
        Command::Forge(a) => run("forge", a),
        Command::Decay(a) => run("decay", a),
        Command::Validate { config } => ExperimentConfig::load(&config).and_then(|cfg| {
            cfg.validate()?;
            println!("ok {}", cfg.experiment.kind());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}
