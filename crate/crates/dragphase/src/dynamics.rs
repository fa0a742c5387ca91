//! Nonlinear truth simulator: planar polar two-body motion with a
//! tangential drag acceleration, integrated per satellite with classical
//! RK4 at a fixed fine step.
//!
//! The state is (r, ṙ, θ, ω) with θ kept unwrapped (cumulative radians),
//! so angular separations are plain differences with no 2π ambiguity.
//! Radial drag is neglected: the drag force acts along-track only, scaled
//! by the speed relative to the co-rotating atmosphere.

use rayon::prelude::*;

use crate::atmosphere::AtmosphereError;
use crate::config::{Environment, SatelliteParams, KM2_PER_M2};

/// One satellite's planar state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatState {
    /// Orbit radius, km.
    pub r: f64,
    /// Radial rate, km/s.
    pub r_dot: f64,
    /// Angular position, rad, unwrapped.
    pub theta: f64,
    /// Angular rate, rad/s.
    pub omega: f64,
}

/// Time derivative of [`SatState`] under a fixed drag area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatDerivative {
    pub r_dot: f64,
    pub r_ddot: f64,
    pub theta_dot: f64,
    pub omega_dot: f64,
}

/// The whole cluster at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationState {
    /// Seconds since the start of the run.
    pub epoch: f64,
    pub sats: Vec<SatState>,
}

impl ConstellationState {
    /// N identical satellites on one circular orbit: θ = 0, ṙ = 0,
    /// ω = √(μ/r³). The standard experiment start.
    pub fn circular_cluster(n_sats: usize, altitude_km: f64, env: &Environment) -> Self {
        let r = env.r_earth + altitude_km;
        let omega = (env.mu_earth / (r * r * r)).sqrt();
        ConstellationState {
            epoch: 0.0,
            sats: vec![
                SatState {
                    r,
                    r_dot: 0.0,
                    theta: 0.0,
                    omega,
                };
                n_sats
            ],
        }
    }

    pub fn n_sats(&self) -> usize {
        self.sats.len()
    }

    /// Lowest altitude in the cluster, km.
    pub fn min_altitude(&self, env: &Environment) -> f64 {
        self.sats
            .iter()
            .map(|s| s.r - env.r_earth)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    /// A satellite fell below the atmosphere table during propagation.
    #[error("satellite {sat} reentered at step {step} (altitude {alt_km:.3} km below table floor)")]
    Reentry { sat: usize, step: usize, alt_km: f64 },
    /// A satellite climbed above the atmosphere table (only reachable with
    /// pathological inputs; kept distinct from reentry for diagnosis).
    #[error("satellite {sat} left the table ceiling at step {step} (altitude {alt_km:.3} km)")]
    AboveTable { sat: usize, step: usize, alt_km: f64 },
    #[error("areas length {got} does not match cluster size {expected}")]
    AreaCount { got: usize, expected: usize },
    #[error("area {area} m² for satellite {sat} outside [{min}, {max}] m²")]
    AreaOutOfBounds {
        sat: usize,
        area: f64,
        min: f64,
        max: f64,
    },
    #[error("dt_total {dt_total} s is not a positive integer multiple of dt_fine {dt_fine} s")]
    StepMismatch { dt_total: f64, dt_fine: f64 },
}

/// Speed relative to the co-rotating atmosphere, km/s: r·(ω − ω_E·cos i).
///
/// Only the along-track component of the atmosphere's motion matters for a
/// planar model; cos(inclination) projects the Earth's rotation onto the
/// orbit plane. Polar orbits (i = 90°) see a stationary atmosphere.
pub fn relative_speed(r: f64, omega: f64, env: &Environment) -> f64 {
    r * (omega - env.omega_earth * env.cos_inclination())
}

/// Mean motion √(μ/a³), rad/s, with the semi-major axis from vis-viva.
///
/// Drag pumps a small eccentricity, so the sampled θ̇ oscillates around the
/// secular rate by ~2e·ω within each orbit while the mean motion stays put
/// (it moves only with orbital energy). Day-scale angle bookkeeping must
/// difference mean motions: an oscillation sampled once per day reads as a
/// phantom drift of ±2e·ω · 86400 s, which at e ≈ 1e-4 already spans the
/// whole spacing band over a few days. Equals ω exactly on circular states.
pub fn mean_motion(s: &SatState, env: &Environment) -> f64 {
    let v2 = s.r_dot * s.r_dot + (s.r * s.omega) * (s.r * s.omega);
    let inv_a = 2.0 / s.r - v2 / env.mu_earth;
    debug_assert!(inv_a > 0.0, "non-elliptic state: 1/a = {inv_a:e}");
    (env.mu_earth * inv_a * inv_a * inv_a).sqrt()
}

/// Tangential drag acceleration, km/s²: −½·(C_D/m)·ρ(h)·v_rel·|v_rel|·A.
///
/// Signed against the relative velocity, so ≤ 0 for prograde motion. The
/// formula is linear in `area`; command-level code keeps areas within
/// [`SatelliteParams::area_min`, `SatelliteParams::area_max`], while the
/// propagator accepts any finite area ≥ 0 (zero disables drag, which the
/// conservation tests rely on).
pub fn drag_accel_tangential(
    s: &SatState,
    area_m2: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<f64, AtmosphereError> {
    let rho = env.atmosphere.density(s.r - env.r_earth)?;
    let v = relative_speed(s.r, s.omega, env);
    // The one place m² meets km: area converts via KM2_PER_M2 so that
    // kg/km³ · (km/s)² · km² / kg = km/s².
    Ok(-0.5 * (p.c_d / p.mass) * rho * v * v.abs() * area_m2 * KM2_PER_M2)
}

/// Right-hand side of the equations of motion:
/// r̈ = rω² − μ/r², θ̈ = (−2ṙω + a_drag)/r.
pub fn state_derivative(
    s: &SatState,
    area_m2: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<SatDerivative, AtmosphereError> {
    let a_drag = drag_accel_tangential(s, area_m2, p, env)?;
    Ok(SatDerivative {
        r_dot: s.r_dot,
        r_ddot: s.r * s.omega * s.omega - env.mu_earth / (s.r * s.r),
        theta_dot: s.omega,
        omega_dot: (-2.0 * s.r_dot * s.omega + a_drag) / s.r,
    })
}

fn advance(s: &SatState, d: &SatDerivative, dt: f64) -> SatState {
    SatState {
        r: s.r + dt * d.r_dot,
        r_dot: s.r_dot + dt * d.r_ddot,
        theta: s.theta + dt * d.theta_dot,
        omega: s.omega + dt * d.omega_dot,
    }
}

/// One classical RK4 step of [`state_derivative`] with a fixed area.
pub fn rk4_step(
    s: &SatState,
    area_m2: f64,
    dt: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<SatState, AtmosphereError> {
    let k1 = state_derivative(s, area_m2, p, env)?;
    let k2 = state_derivative(&advance(s, &k1, 0.5 * dt), area_m2, p, env)?;
    let k3 = state_derivative(&advance(s, &k2, 0.5 * dt), area_m2, p, env)?;
    let k4 = state_derivative(&advance(s, &k3, dt), area_m2, p, env)?;
    let sixth = dt / 6.0;
    Ok(SatState {
        r: s.r + sixth * (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot),
        r_dot: s.r_dot + sixth * (k1.r_ddot + 2.0 * k2.r_ddot + 2.0 * k3.r_ddot + k4.r_ddot),
        theta: s.theta + sixth * (k1.theta_dot + 2.0 * k2.theta_dot + 2.0 * k3.theta_dot + k4.theta_dot),
        omega: s.omega + sixth * (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot),
    })
}

fn propagate_one(
    sat: usize,
    s0: &SatState,
    area_m2: f64,
    steps: usize,
    dt_fine: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<SatState, DynamicsError> {
    let floor = env.atmosphere.table().floor_km();
    let mut s = *s0;
    for step in 0..steps {
        s = rk4_step(&s, area_m2, dt_fine, p, env).map_err(|e| match e {
            AtmosphereError::OutOfRange { h_km, .. } if h_km <= floor => DynamicsError::Reentry {
                sat,
                step,
                alt_km: h_km,
            },
            AtmosphereError::OutOfRange { h_km, .. } => DynamicsError::AboveTable {
                sat,
                step,
                alt_km: h_km,
            },
            // Table I/O and shape errors cannot occur once an Atmosphere exists.
            other => unreachable!("density evaluation failed: {other}"),
        })?;
    }
    Ok(s)
}

/// Integrates every satellite independently for `dt_total` seconds with its
/// own fixed area.
///
/// Satellites are dynamically uncoupled, so this is a parallel map; results
/// are reassembled in index order, making the output bit-identical for any
/// worker count. Identical inputs give identical outputs.
pub fn propagate_interval(
    c: &ConstellationState,
    areas_m2: &[f64],
    dt_total: f64,
    dt_fine: f64,
    p: &SatelliteParams,
    env: &Environment,
) -> Result<ConstellationState, DynamicsError> {
    if areas_m2.len() != c.sats.len() {
        return Err(DynamicsError::AreaCount {
            got: areas_m2.len(),
            expected: c.sats.len(),
        });
    }
    // Tolerate only bound overshoot consistent with solver round-off.
    let slack = 1e-9 * p.area_max;
    for (sat, &a) in areas_m2.iter().enumerate() {
        if !(a >= p.area_min - slack && a <= p.area_max + slack) {
            return Err(DynamicsError::AreaOutOfBounds {
                sat,
                area: a,
                min: p.area_min,
                max: p.area_max,
            });
        }
    }
    if !(dt_fine > 0.0) || dt_total < 0.0 {
        return Err(DynamicsError::StepMismatch { dt_total, dt_fine });
    }
    let steps_f = dt_total / dt_fine;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(DynamicsError::StepMismatch { dt_total, dt_fine });
    }
    let steps = steps as usize;

    let sats = c
        .sats
        .par_iter()
        .enumerate()
        .map(|(i, s)| propagate_one(i, s, areas_m2[i], steps, dt_fine, p, env))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstellationState {
        epoch: c.epoch + dt_total,
        sats,
    })
}
