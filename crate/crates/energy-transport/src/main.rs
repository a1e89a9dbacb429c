//! `etsim` — command-line front end for the energy-transport simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use energy_transport::admissible::RegionScanSpec;
use energy_transport::cli::{self, CheckStatus, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "etsim",
    about = "1-D energy-transport simulator with entropy diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one run described by a TOML config and write CSV outputs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accept scattering exponents outside [-1/2, 1/2).
        #[arg(long)]
        allow_extended_beta: bool,
    },
    /// Rasterize the admissible exponent set over a (beta, b) grid.
    RegionScan(RegionScanArgs),
    /// Run one simulation per beta and write a combined decay CSV.
    Sweep {
        /// Comma-separated scattering exponents, e.g. "-0.25,0.25".
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        betas: Vec<f64>,
        #[arg(long)]
        config: PathBuf,
        /// Output root; per-beta runs go into beta_<value>/ below it.
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
        #[arg(long)]
        allow_extended_beta: bool,
    },
    /// Run a short trajectory and check solver invariants on it.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        allow_extended_beta: bool,
    },
    /// Write the Gaussian-wells experiment preset as a config file.
    Preset {
        /// Scattering exponent.
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, default_value = "run.toml")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RegionScanArgs {
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    beta_min: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    beta_max: f64,
    #[arg(long, default_value_t = 0.01)]
    beta_step: f64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    b_min: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    b_max: f64,
    #[arg(long, default_value_t = 0.01)]
    b_step: f64,
    #[arg(long, default_value = "region_scan.csv")]
    out: PathBuf,
}

fn load_config(path: &Path) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let config = RunConfig::from_file(path)?;
    let dir = path.parent().map(Path::to_path_buf);
    Ok((config, dir))
}

fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            config,
            out,
            allow_extended_beta,
        } => {
            let (config, config_dir) = load_config(&config)?;
            let summary = cli::run(
                &config,
                out.as_deref(),
                allow_extended_beta,
                config_dir.as_deref(),
            )?;
            println!(
                "completed: {} accepted steps to t = {}, min n = {:e}, min theta = {:e}",
                summary.accepted_steps,
                summary.t_final,
                summary.min_n_over_run,
                summary.min_theta_over_run
            );
            println!("entropy monotone: {}", summary.entropy_report.monotone);
            if let Some(fit) = &summary.fits.exp_combined {
                println!(
                    "exponential decay fit on [{}, {}]: rate = {:.6}, r2 = {:.8}",
                    fit.window.0, fit.window.1, fit.exp_rate, fit.exp_r2
                );
            }
            Ok(())
        }
        Command::RegionScan(args) => {
            let spec = RegionScanSpec {
                beta_min: args.beta_min,
                beta_max: args.beta_max,
                beta_step: args.beta_step,
                b_min: args.b_min,
                b_max: args.b_max,
                b_step: args.b_step,
            };
            cli::write_region_scan(&spec, &args.out)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
        Command::Sweep {
            betas,
            config,
            out,
            allow_extended_beta,
        } => {
            let (config, config_dir) = load_config(&config)?;
            let entries = cli::sweep(
                &betas,
                &config,
                &out,
                allow_extended_beta,
                config_dir.as_deref(),
            )?;
            let mut failed = None;
            for entry in &entries {
                match &entry.result {
                    Ok(summary) => println!(
                        "beta = {}: ok ({} accepted steps, t_final = {})",
                        entry.beta, summary.accepted_steps, summary.t_final
                    ),
                    Err(e) => {
                        println!("beta = {}: FAILED ({e})", entry.beta);
                        failed = Some(entry.beta);
                    }
                }
            }
            match failed {
                None => Ok(()),
                Some(beta) => Err(CliError::SolverAbort(format!(
                    "sweep run for beta = {beta} failed"
                ))),
            }
        }
        Command::Verify {
            config,
            allow_extended_beta,
        } => {
            let (config, config_dir) = load_config(&config)?;
            let report = cli::verify(&config, allow_extended_beta, config_dir.as_deref())?;
            for check in &report.checks {
                let tag = match check.status {
                    CheckStatus::Pass => "PASS",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::Skipped => "SKIP",
                };
                println!("{tag} {:<24} {}", check.name, check.detail);
            }
            if report.all_passed() {
                Ok(())
            } else {
                Err(CliError::SolverAbort("verification checks failed".into()))
            }
        }
        Command::Preset { beta, out } => {
            let config = cli::gaussian_wells_preset(beta);
            std::fs::write(&out, config.to_toml())?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
