use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mech_sim::commands::{self, Outcome};
use mech_sim::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "mech-sim", version, about = "Quadratic optomechanics in the mechano-optical frame")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override a scalar config key, e.g. `--set run.n_steps=400`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decoherence budget of a physical parameter set.
    Budget,
    /// Exact and second-order fidelity between displaced-squeezed and mechano-optical dynamics.
    Fidelity,
    /// Wigner snapshots of one mode under the mechano-optical Hamiltonian.
    Wigner,
    /// Analytic spectrum with a diagonalization cross-check.
    Spectrum,
    /// Invariant suite with the errata ratios.
    Verify,
    /// Print the built-in parameter sets.
    Presets,
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("MECH_SIM_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("MECH_SIM_THREADS={raw:?} is not a thread count"))?;
        if n == 0 {
            bail!("MECH_SIM_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let load = || -> Result<RunConfig> {
        let path = cli
            .config
            .as_deref()
            .context("this command needs --config PATH")?;
        RunConfig::load(path, &cli.overrides)
    };
    let out_dir = |cfg: Option<&RunConfig>| -> PathBuf {
        cli.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    };
    let outcome: Outcome = match cli.command {
        Command::Presets => {
            println!("{}", serde_json::to_string_pretty(&commands::presets()?)?);
            return Ok(true);
        }
        Command::Verify => commands::verify(&out_dir(None))?,
        Command::Budget => {
            let cfg = load()?;
            commands::budget(&cfg, &out_dir(Some(&cfg)))?
        }
        Command::Fidelity => {
            let cfg = load()?;
            commands::fidelity(&cfg, &out_dir(Some(&cfg)))?
        }
        Command::Wigner => {
            let cfg = load()?;
            commands::wigner(&cfg, &out_dir(Some(&cfg)))?
        }
        Command::Spectrum => {
            let cfg = load()?;
            commands::spectrum(&cfg, &out_dir(Some(&cfg)))?
        }
    };
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    println!("{}", outcome.summary);
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: hard tolerances were not met");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
