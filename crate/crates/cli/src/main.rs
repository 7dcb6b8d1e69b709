use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ecc_cli::{run_experiment, CliError, ExperimentConfig, ExperimentKind};

/// Learn and evaluate error-correction code constructions.
#[derive(Debug, Parser)]
#[command(name = "ecc-construct", version)]
struct Args {
    /// Experiment to run; must match `kind` in the config.
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<PathBuf, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.kind != args.kind {
        return Err(CliError::Config {
            field: "kind".into(),
            msg: format!(
                "config has kind = \"{}\" but the subcommand is {}",
                cfg.kind.name(),
                args.kind.name()
            ),
        });
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    run_experiment(&cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(dir) => {
            println!("{}", dir.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
