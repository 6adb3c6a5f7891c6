use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtunnel::config::parse_config;
use qtunnel::output::{write_contour_csv, write_trajectory_csv};
use qtunnel::scenario;

/// Canonical moment dynamics of tunneling ionization.
#[derive(Parser)]
#[command(name = "qtunnel", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSVs and plot scripts.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    /// Reserved; the dynamics is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Sweep worker threads (TUNNEL_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the field-free ground state (JSON).
    GroundState,
    /// Integrate one trajectory and write trajectory.csv.
    Evolve,
    /// Write the effective-potential equipotential contour.
    Contour,
    /// Evaluate the configured criteria for the configured pulse.
    Criteria,
    /// Run the configured sweep over all grid points.
    Sweep,
    /// Write the back-propagation comparison table.
    Backprop,
}

fn run(cli: &Cli) -> qtunnel::Result<()> {
    let config_path = cli.config.as_deref().ok_or_else(|| {
        qtunnel::Error::config("--config PATH is required")
    })?;
    let cfg = parse_config(config_path)?;
    cfg.validate()?;
    let threads = scenario::resolve_threads(cli.threads);
    match cli.command {
        Command::GroundState => {
            println!("{}", scenario::ground_state_report(&cfg)?);
        }
        Command::Evolve => {
            std::fs::create_dir_all(&cli.out)?;
            let model = cfg.model.resolve(cfg.u)?;
            let traj = scenario::run_trajectory(&cfg, &cfg.pulse)?;
            let path = cli.out.join("trajectory.csv");
            write_trajectory_csv(&path, &traj, &model, &cfg.pulse, &cfg.frame)?;
            println!("{}", path.display());
        }
        Command::Contour => {
            std::fs::create_dir_all(&cli.out)?;
            let grid = scenario::contour_grid(&cfg)?;
            let path = cli.out.join("contour.csv");
            write_contour_csv(&path, &grid)?;
            println!("{}", path.display());
        }
        Command::Criteria | Command::Sweep => {
            let report = scenario::run_scenario(&cfg, &cli.out, threads)?;
            for f in &report.files {
                println!("{}", f.display());
            }
        }
        Command::Backprop => {
            let path = scenario::run_backprop(&cfg, &cli.out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
