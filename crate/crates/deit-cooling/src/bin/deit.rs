//! Batch interface: load a TOML configuration, apply overrides, dispatch a
//! subcommand, and emit CSV/JSON data files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use deit_cooling::config::{self, RunConfig};
use deit_cooling::run::{self, Command as RunCommand, ErrorReport};

#[derive(Parser)]
#[command(
    name = "deit",
    version,
    about = "Master-equation simulator for single- and double-bright EIT \
             cooling of a trapped 40Ca+ ion"
)]
struct Cli {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override one config value, e.g. --set simulation.fock_dim=25.
    /// May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Worker threads for parameter sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Probe scattering spectrum of the tuned beam configuration.
    Spectrum,
    /// Cooling trajectory of the selected mode with an exponential rate
    /// fit.
    Cool,
    /// Steady state of the selected mode.
    Steady,
    /// Sweep the common detuning, retuning the pump powers at each point.
    Scan,
    /// Solve the pump powers that place the bright states on the mode
    /// frequencies.
    Tune,
    /// Closed-form Lamb-Dicke predictions for all three modes.
    Ldtheory,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Commands::Spectrum => RunCommand::Spectrum,
        Commands::Cool => RunCommand::Cool,
        Commands::Steady => RunCommand::Steady,
        Commands::Scan => RunCommand::Scan,
        Commands::Tune => RunCommand::Tune,
        Commands::Ldtheory => RunCommand::LdTheory,
    };
    let cmd_name = format!("{cmd:?}").to_lowercase();

    match run_cli(&cli, cmd) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = ErrorReport { error: e.to_string(), command: cmd_name };
            // machine-readable failure on stdout, human-readable on stderr
            println!(
                "{}",
                serde_json::to_string(&doc)
                    .unwrap_or_else(|_| format!("{{\"error\":\"{e}\"}}"))
            );
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_cli(
    cli: &Cli,
    cmd: RunCommand,
) -> deit_cooling::Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        // ignore the error if a pool already exists (e.g. repeated calls
        // in tests); rayon then keeps the first configuration
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut cfg = match &cli.config {
        Some(path) => config::parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    for assignment in &cli.set {
        config::apply_set(&mut cfg, assignment)?;
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    run::execute(cmd, &cfg, &out_dir)
}
