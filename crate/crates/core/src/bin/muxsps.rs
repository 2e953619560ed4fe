use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use muxsps::report::{self, Command, RunError, RunSpec};

/// Heralded multiplexed single-photon source calculator.
#[derive(Debug, Parser)]
#[command(name = "muxsps", version)]
struct Cli {
    /// Command to run; overrides `run.command` from the configuration.
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Output table path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo samples for the cross-check.
    #[arg(long, value_name = "SAMPLES")]
    mc_check: Option<u64>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

fn load(cli: &Cli) -> Result<RunSpec, RunError> {
    let mut spec = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.display().to_string(),
                source,
            })?;
            RunSpec::from_toml(&text)?
        }
        (None, Some(name)) => report::preset(name)?,
        (None, None) => RunSpec::default(),
    };
    if let Some(c) = cli.command {
        spec.run.command = c;
    }
    if let Some(out) = &cli.out {
        spec.run.out = Some(out.display().to_string());
    }
    if let Some(w) = cli.workers {
        spec.run.workers = w;
    }
    if let Some(s) = cli.seed {
        spec.run.seed = s;
    }
    if let Some(n) = cli.mc_check {
        spec.run.mc_samples = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let spec = load(cli)?;
    if cli.dump_config {
        print!("{}", spec.to_toml());
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.run.workers)
        .build()
        .map_err(|e| RunError::config("run.workers", e))?;
    let rep = pool.install(|| report::run(&spec))?;
    match &spec.run.out {
        Some(path) => {
            std::fs::write(path, &rep.table).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
        }
        None => print!("{}", rep.table),
    }
    print!("{}", rep.summary);
    rep.check_consistency()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
