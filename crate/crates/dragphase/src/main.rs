//! Command-line front end: every experiment is a verb that loads a JSON
//! config, starts from the canonical co-located cluster, and writes CSVs
//! into --out. Exit code 0 on success; any failure prints a single
//! `error: ...` line on stderr and exits nonzero.

use std::error::Error;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dragphase::config::{load_config, Config};
use dragphase::dynamics::ConstellationState;
use dragphase::lp::{assemble, write_dump, SpacingTarget};
use dragphase::metrics::{write_lifetime_csv, write_run_csv, write_sweep_csv};
use dragphase::mpc::{
    find_min_horizon, run_horizon_sweep, run_lifetime, run_mpc, run_open_loop, PhaseReport,
};
use dragphase::sensitivity::build_reference;

#[derive(Parser)]
#[command(
    name = "dragphase",
    version,
    about = "Equal-spacing control of a satellite cluster by differential drag"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (see docs/config.md).
    #[arg(long)]
    config: PathBuf,
    /// Directory for result CSVs (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Also write the day-0 program to lp_initial.txt in --out.
    #[arg(long)]
    dump_lp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Scan upward for the smallest feasible acquisition horizon.
    MinHorizon {
        #[command(flatten)]
        common: Common,
    },
    /// Solve once at day 0 and apply the whole plan without feedback.
    OpenLoop {
        #[command(flatten)]
        common: Common,
        /// Plan length in days.
        #[arg(long)]
        horizon: usize,
    },
    /// Re-solve daily with a shrinking horizon, applying only day one.
    Mpc {
        #[command(flatten)]
        common: Common,
        /// Initial horizon in days.
        #[arg(long)]
        horizon: usize,
    },
    /// Run the feedback loop once per listed horizon.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons, days.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        horizons: Vec<usize>,
    },
    /// Acquisition, then drift and maintenance until re-entry.
    Lifetime {
        #[command(flatten)]
        common: Common,
        /// Stop (censored) after this many days even if still in orbit.
        #[arg(long)]
        max_days: Option<usize>,
    },
    /// Print the effective configuration after defaults.
    DumpConfig {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn initial_state(cfg: &Config) -> ConstellationState {
    ConstellationState::circular_cluster(
        cfg.scenario.n_sats,
        cfg.scenario.altitude0,
        &cfg.environment,
    )
}

/// Writes the day-0 program at the given horizon in the documented dump
/// format.
fn dump_initial_lp(
    cfg: &Config,
    state: &ConstellationState,
    horizon: usize,
    out: &Path,
) -> Result<(), Box<dyn Error>> {
    let target = SpacingTarget::equal_spacing(state.n_sats());
    let reference = build_reference(state, horizon, &cfg.scenario, &cfg.satellite, &cfg.environment)?;
    let lp = assemble(
        state,
        horizon,
        &reference,
        &target,
        &cfg.scenario,
        &cfg.satellite,
    );
    fs::create_dir_all(out)?;
    let file = fs::File::create(out.join("lp_initial.txt"))?;
    let mut w = BufWriter::new(file);
    write_dump(&lp, &mut w)?;
    w.flush()?;
    Ok(())
}

fn print_phase_line(verb: &str, report: &PhaseReport) {
    println!(
        "{verb}: days={} max_spacing_error_deg={:.6} max_altitude_drop_km={:.6} \
         predicted_drop_km={} recoveries={}",
        report.end_day - report.start_day,
        report.max_spacing_error,
        report.max_altitude_drop,
        report
            .predicted_max_drop
            .map(|d| format!("{d:.6}"))
            .unwrap_or_else(|| "-".into()),
        report.recoveries
    );
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::MinHorizon { common } => {
            let cfg = load_config(&common.config)?;
            let state = initial_state(&cfg);
            let t_star = find_min_horizon(&state, &cfg.scenario, &cfg.satellite, &cfg.environment)?;
            if common.dump_lp {
                dump_initial_lp(&cfg, &state, t_star, &common.out)?;
            }
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("min_horizon.csv"), format!("t_star\n{t_star}\n"))?;
            println!("min-horizon: t_star={t_star}");
        }
        Command::OpenLoop { common, horizon } => {
            let cfg = load_config(&common.config)?;
            let state = initial_state(&cfg);
            if common.dump_lp {
                dump_initial_lp(&cfg, &state, horizon, &common.out)?;
            }
            let (log, report) =
                run_open_loop(&state, horizon, &cfg.scenario, &cfg.satellite, &cfg.environment)?;
            write_run_csv(&log, std::slice::from_ref(&report), &common.out)?;
            print_phase_line("open-loop", &report);
        }
        Command::Mpc { common, horizon } => {
            let cfg = load_config(&common.config)?;
            let state = initial_state(&cfg);
            if common.dump_lp {
                dump_initial_lp(&cfg, &state, horizon, &common.out)?;
            }
            let (log, report) =
                run_mpc(&state, horizon, &cfg.scenario, &cfg.satellite, &cfg.environment)?;
            write_run_csv(&log, std::slice::from_ref(&report), &common.out)?;
            print_phase_line("mpc", &report);
        }
        Command::Sweep { common, horizons } => {
            let cfg = load_config(&common.config)?;
            let state = initial_state(&cfg);
            if let (true, Some(&t)) = (common.dump_lp, horizons.first()) {
                dump_initial_lp(&cfg, &state, t, &common.out)?;
            }
            let entries =
                run_horizon_sweep(&state, &horizons, &cfg.scenario, &cfg.satellite, &cfg.environment);
            write_sweep_csv(&entries, &common.out)?;
            for e in &entries {
                match (&e.error, e.max_altitude_drop) {
                    (None, Some(drop)) => {
                        println!("sweep: horizon={} max_altitude_drop_km={drop:.6}", e.horizon)
                    }
                    (Some(msg), _) => println!("sweep: horizon={} failed: {msg}", e.horizon),
                    _ => {}
                }
            }
        }
        Command::Lifetime { common, max_days } => {
            let cfg = load_config(&common.config)?;
            let state = initial_state(&cfg);
            if common.dump_lp {
                let t_star =
                    find_min_horizon(&state, &cfg.scenario, &cfg.satellite, &cfg.environment)?;
                dump_initial_lp(&cfg, &state, t_star, &common.out)?;
            }
            let run = run_lifetime(&state, &cfg.scenario, &cfg.satellite, &cfg.environment, max_days)?;
            write_run_csv(&run.log, &run.phases, &common.out)?;
            write_lifetime_csv(&run, &common.out)?;
            println!(
                "lifetime: total_days={} censored={} phases={}",
                run.total_days,
                run.censored,
                run.phases.len()
            );
        }
        Command::DumpConfig { common } => {
            let cfg = load_config(&common.config)?;
            let text = cfg.dump();
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("config.json"), &text)?;
            print!("{text}");
        }
    }
    Ok(())
}
