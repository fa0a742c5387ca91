//! Drag-sensitivity coefficients and minimum-drag reference trajectories.
//!
//! The daily linear model treats the area command u as the only input:
//!   r(k+1) = r(k) + Δt·S^R(r̄(k), ω̄(k))·u(k)
//!   ω(k+1) = ω(k) + Δt·S^Ω(r̄(k), ω̄(k))·u(k)
//! with S^R, S^Ω the Gauss variation-of-parameters rates for a
//! quasi-circular orbit, frozen along a reference trajectory (r̄, ω̄)
//! generated under the minimum area. Minimum drag decays slowest, so every
//! admissible input keeps the true state at or below the reference; the
//! linearization is conservative in that sense.

use ndarray::Array2;
use rayon::prelude::*;

use crate::atmosphere::AtmosphereError;
use crate::config::{Environment, SatelliteParams, Scenario, KM2_PER_M2};
use crate::dynamics::{relative_speed, ConstellationState};

/// Radius sensitivity, km per (m²·s): −(C_D/m)·ρ(r)·v_rel²·√(r³/μ).
///
/// Strictly negative: more area always lowers the orbit.
pub fn s_radius(
    r: f64,
    omega: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<f64, AtmosphereError> {
    let rho = env.atmosphere.density(r - env.r_earth)?;
    let v = relative_speed(r, omega, env);
    Ok(-(p.c_d / p.mass) * rho * v * v * (r * r * r / env.mu_earth).sqrt() * KM2_PER_M2)
}

/// Angular-rate sensitivity, rad/s per (m²·s): (3/2)·(C_D/m)·ρ(r)·v_rel²/r.
///
/// Strictly positive: more area always speeds the satellite up (the drag
/// paradox, encoded in the sign pair with [`s_radius`]).
pub fn s_omega(
    r: f64,
    omega: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<f64, AtmosphereError> {
    let rho = env.atmosphere.density(r - env.r_earth)?;
    let v = relative_speed(r, omega, env);
    Ok(1.5 * (p.c_d / p.mass) * rho * v * v / r * KM2_PER_M2)
}

/// Minimum-drag reference trajectories with cached sensitivities.
///
/// All arrays are N×T: row i is satellite i, column k is day k. Day 0
/// equals the initial state, so `r_bar[(i, 0)]` is satellite i's current
/// radius and the cached sensitivities at k are evaluated at day k's
/// reference point.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub r_bar: Array2<f64>,
    pub omega_bar: Array2<f64>,
    /// S^R along the reference, km per (m²·s).
    pub s_r: Array2<f64>,
    /// S^Ω along the reference, rad/s per (m²·s).
    pub s_w: Array2<f64>,
    /// Command interval used for the Euler steps, s.
    pub dt_command: f64,
}

impl ReferenceTrajectory {
    pub fn n_sats(&self) -> usize {
        self.r_bar.nrows()
    }

    /// Horizon T in days.
    pub fn horizon(&self) -> usize {
        self.r_bar.ncols()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SensitivityError {
    #[error("horizon must be >= 1")]
    EmptyHorizon,
    #[error("reference for satellite {sat} leaves the atmosphere table at day {day}: {source}")]
    OutOfTable {
        sat: usize,
        day: usize,
        source: AtmosphereError,
    },
}

/// Iterates the daily model under u = area_min from each satellite's
/// current (r, ω) and caches S^R, S^Ω at every (satellite, day).
pub fn build_reference(
    c0: &ConstellationState,
    t_days: usize,
    scn: &Scenario,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<ReferenceTrajectory, SensitivityError> {
    if t_days == 0 {
        return Err(SensitivityError::EmptyHorizon);
    }
    let n = c0.n_sats();
    let dt = scn.dt_command;

    let rows: Vec<[Vec<f64>; 4]> = c0
        .sats
        .par_iter()
        .enumerate()
        .map(|(sat, s0)| {
            let mut r_row = Vec::with_capacity(t_days);
            let mut w_row = Vec::with_capacity(t_days);
            let mut sr_row = Vec::with_capacity(t_days);
            let mut sw_row = Vec::with_capacity(t_days);
            let (mut r, mut w) = (s0.r, s0.omega);
            for day in 0..t_days {
                let err = |source| SensitivityError::OutOfTable { sat, day, source };
                let sr = s_radius(r, w, p, env).map_err(err)?;
                let sw = s_omega(r, w, p, env).map_err(err)?;
                r_row.push(r);
                w_row.push(w);
                sr_row.push(sr);
                sw_row.push(sw);
                r += dt * sr * p.area_min;
                w += dt * sw * p.area_min;
            }
            Ok([r_row, w_row, sr_row, sw_row])
        })
        .collect::<Result<_, SensitivityError>>()?;

    let mut out = ReferenceTrajectory {
        r_bar: Array2::zeros((n, t_days)),
        omega_bar: Array2::zeros((n, t_days)),
        s_r: Array2::zeros((n, t_days)),
        s_w: Array2::zeros((n, t_days)),
        dt_command: dt,
    };
    for (i, [r_row, w_row, sr_row, sw_row]) in rows.into_iter().enumerate() {
        for k in 0..t_days {
            out.r_bar[(i, k)] = r_row[k];
            out.omega_bar[(i, k)] = w_row[k];
            out.s_r[(i, k)] = sr_row[k];
            out.s_w[(i, k)] = sw_row[k];
        }
    }
    Ok(out)
}
