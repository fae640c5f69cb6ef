use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wfsim::shell::{self, CliError, Format, RunOptions, SweepOptions};

/// Relativistic Wigner-friend protocol simulator.
#[derive(Parser)]
#[command(name = "wfsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

impl Output {
    fn format(&self) -> Format {
        match self.format {
            OutFormat::Json => Format::Json,
            OutFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact enumeration and/or Monte Carlo for one configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        mc: bool,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Exact results across frame velocities with pairwise differences.
    CompareFrames {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
        beta_list: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Alice's basis toggle in the ordering-inverted frame.
    SignallingTest {
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Rest vs primed frame moments over an N×N angle grid (CSV).
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 21)]
        theta_grid: usize,
        /// Velocity of the primed frame.
        #[arg(long, allow_negative_numbers = true)]
        beta_prime: Option<f64>,
        /// Adds Monte Carlo columns with this many trials per point.
        #[arg(long)]
        mc_trials: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks the event geometry and prints beta*.
    ValidateGeometry {
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("WFSIM_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| CliError::Usage(format!("WFSIM_THREADS = `{v}` is not a thread count")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("WFSIM_THREADS: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, exact, mc, trials, seed, output } => {
            let c = shell::load_config(&config)?;
            let doc = shell::cmd_run(&c, &RunOptions { exact, mc, trials, seed })?;
            shell::write_output(&shell::render(&doc, output.format()), output.out.as_deref())
        }
        Command::CompareFrames { config, beta_list, output } => {
            let c = shell::load_config(&config)?;
            let doc = shell::cmd_compare_frames(&c, &beta_list)?;
            shell::write_output(&shell::render(&doc, output.format()), output.out.as_deref())
        }
        Command::SignallingTest { config, output } => {
            let c = shell::load_config(&config)?;
            let doc = shell::cmd_signalling_test(&c)?;
            shell::write_output(&shell::render(&doc, output.format()), output.out.as_deref())
        }
        Command::Sweep { config, theta_grid, beta_prime, mc_trials, out } => {
            let c = shell::load_config(&config)?;
            let text = shell::cmd_sweep(&c, &SweepOptions { grid: theta_grid, beta_prime, mc_trials })?;
            shell::write_output(&text, out.as_deref())
        }
        Command::ValidateGeometry { config, output } => {
            let c = shell::load_config(&config)?;
            let (doc, ok) = shell::cmd_validate_geometry(&c);
            shell::write_output(&shell::render(&doc, output.format()), output.out.as_deref())?;
            if ok {
                Ok(())
            } else {
                Err(CliError::GeometryInvalid(config.display().to_string()))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wfsim: {} error: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
