use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use fracstep_cli::{compare, execute, ConfigError, RunConfig, RunError, Strategy};

/// Adaptive time stepping for time-fractional subdiffusion problems.
///
/// Exit status: 0 on success, 2 if time stepping locks, 3 on configuration errors.
#[derive(Parser, Debug)]
#[command(name = "fracstep", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, required_unless_present = "compare")]
    config: Option<PathBuf>,

    /// Override the configured strategy: barrier, split or shift.
    #[arg(long)]
    strategy: Option<Strategy>,

    /// Output directory (overrides `out` in the configuration).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Compare several configurations of the same problem.
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    compare: Vec<PathBuf>,
}

fn load(path: &Path, strategy: Option<Strategy>) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = strategy {
        cfg.strategy = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunError> {
    if !cli.compare.is_empty() {
        let cfgs = cli
            .compare
            .iter()
            .map(|p| load(p, cli.strategy))
            .collect::<Result<Vec<_>, _>>()?;
        let out = cli.out.unwrap_or_else(|| PathBuf::from("compare"));
        for s in compare(&cfgs, &out)? {
            println!(
                "{}: {} steps, max error {:?}, {:.3}s",
                s.label, s.step_count, s.max_error, s.wall_time
            );
        }
        println!("wrote {}", out.join("compare.csv").display());
        return Ok(());
    }
    let path = cli
        .config
        .expect("clap requires --config without --compare");
    let cfg = load(&path, cli.strategy)?;
    let out = cli
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(cfg.label()));
    let s = execute(&cfg, &out)?;
    match s.max_error {
        Some(e) => println!(
            "{}: {} steps, max error {e:.3e} (bound {:.3e})",
            s.label, s.step_count, s.error_bound
        ),
        None => println!(
            "{}: {} steps, error bound {:.3e}",
            s.label, s.step_count, s.error_bound
        ),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracstep: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
