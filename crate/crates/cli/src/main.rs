use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vessel_cli::commands;
use vessel_cli::config::ScenarioConfig;
use vessel_cli::points::{read_points, PointRow};
use vessel_cli::CliError;

#[derive(Parser)]
#[command(name = "vessel-dmc", version, about = "Diffusive molecular communication in a blood vessel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV of observation points: rho_um,z_um,phi_rad[,t_s].
    #[arg(long, global = true)]
    points: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the pbs and link seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Radial eigenvalues, residuals and normalisations.
    Eigen,
    /// Analytic and free-space CGF at the requested points.
    Cgf,
    /// Particle-based estimates at the requested points.
    Pbs,
    /// Analytic and Monte Carlo bit error rate per slot duration.
    Ber,
    /// Observation probability and ISI on the link grid.
    Channel,
    /// Analytic model against the simulator, as a JSON summary.
    Compare,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let mut config = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.pbs.seed = seed;
        config.link.seed = seed;
    }
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let out = sink.as_mut();
    match cli.command {
        Command::Eigen => commands::eigen(&config, out)?,
        Command::Cgf => commands::cgf(&config, &points(cli)?, out)?,
        Command::Pbs => commands::pbs(&config, &points(cli)?, out)?,
        Command::Ber => commands::ber(&config, out)?,
        Command::Channel => commands::channel_table(&config, out)?,
        Command::Compare => {
            let rows = match &cli.points {
                Some(_) => points(cli)?,
                None => commands::default_compare_points(&config),
            };
            commands::compare(&config, &rows, out)?
        }
    }
    sink.flush()?;
    Ok(())
}

fn points(cli: &Cli) -> Result<Vec<PointRow>, CliError> {
    let path = cli
        .points
        .as_ref()
        .ok_or_else(|| CliError::Validation("--points is required for this command".into()))?;
    let file = File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    read_points(file)
}
