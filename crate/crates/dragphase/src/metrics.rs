//! Run logging, spacing metrics, and CSV emission.
//!
//! A run produces one `RunLog` (daily truth states plus derived spacing
//! errors) and one `PhaseReport` per phase. `write_run_csv` turns them into
//! four flat files: states.csv, spacing.csv, summary.csv, and solver.csv.
//! Floats are serialized with `{:.16e}` (17 significant digits), which
//! round-trips f64 exactly, so re-reading the files reconstructs the run
//! bit for bit; identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dynamics::ConstellationState;
use crate::lp::SpacingTarget;
use crate::mpc::{LifetimeRun, PhaseReport, SweepEntry};

/// One satellite's state on one logged day, with the area command applied
/// from this day to the next (None on the final record of a run).
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: usize,
    pub sat: usize,
    pub r: f64,
    pub r_dot: f64,
    pub omega: f64,
    pub theta: f64,
    pub area: Option<f64>,
}

/// Daily history of a run: N records per logged day plus the spacing-error
/// vector derived at logging time.
#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub n_sats: usize,
    pub records: Vec<DayRecord>,
    /// (day, spacing errors in degrees), one entry per logged day.
    pub spacing: Vec<(usize, Vec<f64>)>,
}

impl RunLog {
    pub fn new(n_sats: usize) -> Self {
        RunLog {
            n_sats,
            records: Vec::new(),
            spacing: Vec::new(),
        }
    }

    /// Appends one day: the truth state and the area commands about to be
    /// applied (None for the terminal record).
    pub fn push_day(
        &mut self,
        day: usize,
        state: &ConstellationState,
        areas: Option<&[f64]>,
        target: &SpacingTarget,
    ) {
        assert_eq!(state.n_sats(), self.n_sats, "state size changed mid-log");
        if let Some(a) = areas {
            assert_eq!(a.len(), self.n_sats, "area count mismatch");
        }
        for (i, s) in state.sats.iter().enumerate() {
            self.records.push(DayRecord {
                day,
                sat: i,
                r: s.r,
                r_dot: s.r_dot,
                omega: s.omega,
                theta: s.theta,
                area: areas.map(|a| a[i]),
            });
        }
        let theta: Vec<f64> = state.sats.iter().map(|s| s.theta).collect();
        self.spacing.push((day, spacing_errors(&theta, target)));
    }

    /// Number of simulated days (logged days minus the initial record).
    pub fn days(&self) -> usize {
        self.spacing.len().saturating_sub(1)
    }

    /// Spacing errors of the last logged day, deg.
    pub fn final_spacing(&self) -> Option<&[f64]> {
        self.spacing.last().map(|(_, e)| e.as_slice())
    }
}

/// Signed spacing errors (D·θ − Δ_des) in degrees; entry i compares the
/// pair (i, i+1), the last entry the wrap-around pair.
pub fn spacing_errors(theta: &[f64], target: &SpacingTarget) -> Vec<f64> {
    target
        .apply_d(theta)
        .iter()
        .zip(target.delta_des())
        .map(|(d, des)| (d - des).to_degrees())
        .collect()
}

/// Largest absolute spacing error, deg.
pub fn max_abs_spacing_error(errors: &[f64]) -> f64 {
    errors.iter().fold(0.0f64, |acc, e| acc.max(e.abs()))
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CsvError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Emits states.csv, spacing.csv, summary.csv, and solver.csv into `dir`
/// (created if absent) and returns the written paths.
pub fn write_run_csv(
    log: &RunLog,
    phases: &[PhaseReport],
    dir: &Path,
) -> Result<Vec<PathBuf>, CsvError> {
    fs::create_dir_all(dir).map_err(|source| CsvError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();

    let mut states = String::from("day,sat,r_km,r_dot_km_s,omega_rad_s,theta_rad,area_m2\n");
    for rec in &log.records {
        let area = rec.area.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            states,
            "{},{},{},{},{},{},{}",
            rec.day,
            rec.sat,
            fmt_f64(rec.r),
            fmt_f64(rec.r_dot),
            fmt_f64(rec.omega),
            fmt_f64(rec.theta),
            area
        );
    }
    paths.push(write_file(dir, "states.csv", &states)?);

    let mut spacing = String::from("day,pair,error_deg\n");
    for (day, errors) in &log.spacing {
        for (pair, e) in errors.iter().enumerate() {
            let _ = writeln!(spacing, "{},{},{}", day, pair, fmt_f64(*e));
        }
    }
    paths.push(write_file(dir, "spacing.csv", &spacing)?);

    let mut summary = String::from(
        "phase,start_day,end_day,max_spacing_error_deg,max_altitude_drop_km,\
         predicted_min_r_km,predicted_max_drop_km,recoveries\n",
    );
    for ph in phases {
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            ph.phase.as_str(),
            ph.start_day,
            ph.end_day,
            fmt_f64(ph.max_spacing_error),
            fmt_f64(ph.max_altitude_drop),
            ph.predicted_min_terminal_r.map(fmt_f64).unwrap_or_default(),
            ph.predicted_max_drop.map(fmt_f64).unwrap_or_default(),
            ph.recoveries
        );
    }
    paths.push(write_file(dir, "summary.csv", &summary)?);

    let mut solver = String::from("day,horizon,status,objective,iterations,recovery\n");
    for ph in phases {
        for s in &ph.solves {
            let _ = writeln!(
                solver,
                "{},{},{},{},{},{}",
                s.day,
                s.horizon,
                s.status,
                fmt_f64(s.objective),
                s.iterations,
                s.recovery
            );
        }
    }
    paths.push(write_file(dir, "solver.csv", &solver)?);

    Ok(paths)
}

/// Emits sweep.csv: one row per horizon, errors quoted so the file stays
/// one-row-per-run even when a message contains commas.
pub fn write_sweep_csv(entries: &[SweepEntry], dir: &Path) -> Result<PathBuf, CsvError> {
    fs::create_dir_all(dir).map_err(|source| CsvError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut text =
        String::from("horizon,days,max_altitude_drop_km,max_spacing_error_deg,error\n");
    for e in entries {
        let quoted = e
            .error
            .as_deref()
            .map(|msg| format!("\"{}\"", msg.replace('"', "\"\"")))
            .unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            e.horizon,
            e.days.map(|d| d.to_string()).unwrap_or_default(),
            e.max_altitude_drop.map(fmt_f64).unwrap_or_default(),
            e.max_spacing_error.map(fmt_f64).unwrap_or_default(),
            quoted
        );
    }
    write_file(dir, "sweep.csv", &text)
}

/// Emits lifetime.csv with the run's headline numbers.
pub fn write_lifetime_csv(run: &LifetimeRun, dir: &Path) -> Result<PathBuf, CsvError> {
    fs::create_dir_all(dir).map_err(|source| CsvError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut text = String::from("total_days,censored,phases\n");
    let _ = writeln!(
        text,
        "{},{},{}",
        run.total_days,
        run.censored,
        run.phases.len()
    );
    write_file(dir, "lifetime.csv", &text)
}
