use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pathint_cli::commands::{self, Engine};
use pathint_cli::{CliError, Document, RawConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(version, about = "Path-integral dephasing of quantum-dot cavity systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// `key=value` overrides applied after the file.
    #[arg(long = "set", short = 's', global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Polarization trace for a single memory length.
    Propagate {
        /// Use the full-tensor engine.
        #[arg(long)]
        oracle: bool,
    },
    /// Fit and extrapolate decay rates over a list of memory lengths.
    SweepL,
    /// Golden-rule rates with and without virtual transitions.
    Fgr,
    /// Compare the compressed and full-tensor engines.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RawConfig::default(),
    };
    for s in &cli.set {
        raw.set_assignment(s)?;
    }
    let cfg = RunConfig::from_raw(raw)?;
    let (doc, check): (Document, Option<(f64, f64)>) = match cli.command {
        Command::Propagate { oracle } => {
            let engine = if oracle { Engine::Oracle } else { Engine::Compressed };
            (commands::propagate(&cfg, engine)?.1, None)
        }
        Command::SweepL => (commands::sweep(&cfg)?.1, None),
        Command::Fgr => (commands::fgr(&cfg)?.1, None),
        Command::Verify => {
            let (v, doc) = commands::verify(&cfg)?;
            (doc, Some((v.max_diff, cfg.tolerance)))
        }
    };
    let text = doc.render();
    match &cli.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    match check {
        Some((max_diff, tolerance)) if max_diff > tolerance => Err(CliError::Mismatch { max_diff, tolerance }),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pathint: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
