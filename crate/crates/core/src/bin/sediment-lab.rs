use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sediment_lab::cli::{self, RunConfig};
use sediment_lab::LabError;

#[derive(Parser)]
#[command(name = "sediment-lab", version, about = "Erosion flow runs, certification and transport diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured surface and write snapshots and diagnostics.
    Simulate(Common),
    /// Run the certification checks and write report.json.
    Verify(Common),
    /// Solve the transport problem at a snapshot and write transport.json.
    Transport(Common),
    /// Write graymaps of the initial fields or of a field CSV.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// Field CSV (x,y,value) to render instead of the initial fields.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding [output] directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the file is parsed.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, LabError> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let seed = std::env::var("SEDIMENT_LAB_SEED").ok();
        let mut cfg = cli::parse_with_overrides(&text, &self.overrides, seed.as_deref())?;
        if let Some(out) = &self.out {
            cfg.output.directory = out.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match &args.command {
        Command::Simulate(c) => c.load().and_then(|cfg| cli::cmd_simulate(&cfg)),
        Command::Verify(c) => c.load().and_then(|cfg| cli::cmd_verify(&cfg)),
        Command::Transport(c) => c.load().and_then(|cfg| cli::cmd_transport(&cfg)),
        Command::Heatmap { common, input } => common.load().and_then(|cfg| cli::cmd_heatmap(&cfg, input.as_deref())),
    };
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if !outcome.passed {
                eprintln!("certification failed; see report.json");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
