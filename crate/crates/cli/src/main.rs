mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde_json::Value;

use config::{load, parse_override, UsageError};

#[derive(Parser, Debug)]
#[command(name = "divmix", version, about = "Measure dataset diversity and run similar/diverse mixture experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a config value by dotted key, e.g. `--set sweep.n_grid=[25,50]`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed override: `seed` for synth, `sweep.seeds` for sweep, `mixture.seed` for partition.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More logging (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Render a synthetic corpus and its manifest.
    Synth,
    /// Extract GIST descriptors into a cache file.
    Gist,
    /// Distance histogram, eigenvalue spectrum and 2-D embedding of one set.
    Diversity,
    /// Label train images similar/diverse and optionally sample a mixture.
    Partition,
    /// Train and evaluate over the p x n mixture grid.
    Sweep,
    /// Compare the diversity of two sets.
    Compare,
}

enum Failure {
    Usage(UsageError),
    Core(divmix::Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<divmix::Error> for Failure {
    fn from(e: divmix::Error) -> Self {
        Failure::Core(e)
    }
}

fn seed_key(cmd: Command) -> Option<&'static str> {
    match cmd {
        Command::Synth => Some("seed"),
        Command::Sweep => Some("sweep.seeds"),
        Command::Partition => Some("mixture.seed"),
        _ => None,
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>, UsageError> {
    let mut out = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = cli.seed {
        let Some(key) = seed_key(cli.command) else {
            return Err(UsageError(format!("--seed does not apply to `{:?}`", cli.command).to_lowercase()));
        };
        let v = if key == "sweep.seeds" {
            Value::from(vec![seed])
        } else {
            Value::from(seed)
        };
        out.push((key.to_string(), v));
    }
    if let Some(dir) = &cli.out {
        let abs = std::env::current_dir()
            .map(|cwd| cwd.join(dir))
            .unwrap_or_else(|_| dir.clone());
        out.push(("out_dir".into(), Value::String(abs.display().to_string())));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError(format!("--threads: {e}")))?;
    }
    let Some(path) = &cli.config else {
        return Err(UsageError("--config PATH is required".into()).into());
    };
    let ov = overrides(cli)?;
    match cli.command {
        Command::Synth => {
            let l = load(path, &ov)?;
            commands::synth(l.config, &l.base)?
        }
        Command::Gist => {
            let l = load(path, &ov)?;
            commands::gist(l.config, &l.base)?
        }
        Command::Diversity => {
            let l = load(path, &ov)?;
            commands::diversity(l.config, &l.base)?
        }
        Command::Partition => {
            let l = load(path, &ov)?;
            commands::partition(l.config, &l.base)?
        }
        Command::Sweep => {
            let l = load(path, &ov)?;
            commands::sweep(l.config, &l.base)?
        }
        Command::Compare => {
            let l = load(path, &ov)?;
            commands::compare(l.config, &l.base)?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
