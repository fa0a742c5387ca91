//! Scenario and physical-parameter loading.
//!
//! Every other module is parameter-free: all constants, bounds, and
//! tolerances enter through [`Config`], loaded from a single JSON file.
//! Only `n_sats` is mandatory; every other key has a shipped default
//! (see `docs/config.md` for the schema).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atmosphere::{Atmosphere, AtmosphereError, DensityColumn, HarrisPriesterTable};

/// Conversion from m² (drag-area inputs) to km² (internal length unit).
///
/// Areas stay in m² throughout the code; this constant appears exactly once,
/// inside the drag acceleration term, so no other site mixes the unit systems.
pub const KM2_PER_M2: f64 = 1e-6;

/// Drag-relevant satellite constants, identical across the cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteParams {
    /// Drag coefficient, dimensionless.
    pub c_d: f64,
    /// Satellite mass, kg.
    pub mass: f64,
    /// Smallest commandable cross-sectional area, m².
    pub area_min: f64,
    /// Largest commandable cross-sectional area, m².
    pub area_max: f64,
}

/// Central body, rotation, and atmosphere model.
#[derive(Debug, Clone)]
pub struct Environment {
    /// Gravitational parameter, km³/s².
    pub mu_earth: f64,
    /// Earth rotation rate, rad/s.
    pub omega_earth: f64,
    /// Earth radius used for altitude conversion, km.
    pub r_earth: f64,
    /// Orbit-plane inclination, degrees in [0, 180].
    pub inclination: f64,
    /// Density model evaluated at orbit radius − `r_earth`.
    pub atmosphere: Atmosphere,
}

impl Environment {
    /// cos of the inclination, the projection factor of Earth rotation onto
    /// the orbit plane's angular motion.
    pub fn cos_inclination(&self) -> f64 {
        self.inclination.to_radians().cos()
    }
}

/// Run-level scenario: cluster size, tolerances, cadences, stop conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Number of satellites in the cluster.
    pub n_sats: usize,
    /// Initial circular-orbit altitude, km.
    pub altitude0: f64,
    /// Half-width of the terminal angular-spacing band, degrees.
    pub eps_theta: f64,
    /// Half-width of the terminal relative-rate band, rad/s.
    pub eps_omega: f64,
    /// Command interval: one area command per satellite per interval, s.
    pub dt_command: f64,
    /// Integrator step of the truth propagator, s.
    pub dt_fine: f64,
    /// Upper limit of the minimum-horizon search, days.
    pub horizon_max: usize,
    /// Altitude at which the constellation is considered reentered, km.
    pub reentry_altitude: f64,
    /// Spacing error that re-triggers corrective phasing, degrees.
    pub maintenance_threshold: f64,
}

impl Scenario {
    /// Spacing half-band in radians.
    pub fn eps_theta_rad(&self) -> f64 {
        self.eps_theta.to_radians()
    }

    /// Maintenance re-trigger threshold in degrees (alias for symmetry with
    /// [`Self::eps_theta_rad`]; stored value is already degrees).
    pub fn maintenance_threshold_deg(&self) -> f64 {
        self.maintenance_threshold
    }

    /// Integrator steps per command interval.
    pub fn steps_per_command(&self) -> usize {
        (self.dt_command / self.dt_fine).round() as usize
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Config {
    pub satellite: SatelliteParams,
    pub environment: Environment,
    pub scenario: Scenario,
    /// The raw key set actually used, kept for bit-exact echoing.
    file: ConfigFile,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config key `{key}` invalid: {message}")]
    Validation { key: &'static str, message: String },
    #[error("atmosphere table: {0}")]
    Atmosphere(#[from] AtmosphereError),
}

/// On-disk schema. Flat key set; all optional except `n_sats`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n_sats: usize,
    #[serde(default = "defaults::c_d")]
    c_d: f64,
    #[serde(default = "defaults::mass")]
    mass: f64,
    #[serde(default = "defaults::area_min")]
    area_min: f64,
    #[serde(default = "defaults::area_max")]
    area_max: f64,
    #[serde(default = "defaults::mu_earth")]
    mu_earth: f64,
    #[serde(default = "defaults::omega_earth")]
    omega_earth: f64,
    #[serde(default = "defaults::r_earth")]
    r_earth: f64,
    #[serde(default = "defaults::inclination")]
    inclination: f64,
    /// Path to a Harris-Priester CSV; `None` selects the bundled table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atmosphere_table: Option<String>,
    #[serde(default)]
    density_column: DensityColumn,
    #[serde(default = "defaults::altitude0")]
    altitude0: f64,
    #[serde(default = "defaults::eps_theta")]
    eps_theta: f64,
    #[serde(default = "defaults::eps_omega")]
    eps_omega: f64,
    #[serde(default = "defaults::dt_command")]
    dt_command: f64,
    #[serde(default = "defaults::dt_fine")]
    dt_fine: f64,
    #[serde(default = "defaults::horizon_max")]
    horizon_max: usize,
    #[serde(default = "defaults::reentry_altitude")]
    reentry_altitude: f64,
    #[serde(default = "defaults::maintenance_threshold")]
    maintenance_threshold: f64,
}

mod defaults {
    //! Shipped defaults. The satellite constants are representative of a
    //! small cubesat (smallest/largest face of a 3U bus), not tied to any
    //! particular mission; the astrodynamic constants are the standard ones.
    pub fn c_d() -> f64 {
        2.2
    }
    pub fn mass() -> f64 {
        5.0
    }
    pub fn area_min() -> f64 {
        0.01
    }
    pub fn area_max() -> f64 {
        0.03
    }
    pub fn mu_earth() -> f64 {
        398_600.441_8
    }
    pub fn omega_earth() -> f64 {
        7.292_115_9e-5
    }
    pub fn r_earth() -> f64 {
        6_378.137
    }
    /// Sun-synchronous at ~475 km.
    pub fn inclination() -> f64 {
        97.2
    }
    pub fn altitude0() -> f64 {
        475.0
    }
    pub fn eps_theta() -> f64 {
        0.1
    }
    pub fn eps_omega() -> f64 {
        1e-18
    }
    pub fn dt_command() -> f64 {
        86_400.0
    }
    pub fn dt_fine() -> f64 {
        10.0
    }
    pub fn horizon_max() -> usize {
        400
    }
    pub fn reentry_altitude() -> f64 {
        200.0
    }
    pub fn maintenance_threshold() -> f64 {
        0.1
    }
}

/// Loads and validates a JSON config file.
///
/// Pure in the file contents (plus the optional atmosphere CSV it names):
/// identical bytes yield identical configurations.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ConfigFile = serde_json::from_str(&text)?;
    let table = match &file.atmosphere_table {
        Some(p) => {
            // Relative table paths resolve against the config file's directory.
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            HarrisPriesterTable::from_csv_path(&base.join(p))?
        }
        None => HarrisPriesterTable::bundled(),
    };
    Config::from_parts(file, table)
}

/// Builds a config from an in-memory JSON string and an explicit table.
/// Test seam; `load_config` is the production path.
pub fn config_from_str(json: &str, table: HarrisPriesterTable) -> Result<Config, ConfigError> {
    let file: ConfigFile = serde_json::from_str(json)?;
    Config::from_parts(file, table)
}

impl Config {
    fn from_parts(file: ConfigFile, table: HarrisPriesterTable) -> Result<Config, ConfigError> {
        let f = &file;
        validate(f)?;
        let satellite = SatelliteParams {
            c_d: f.c_d,
            mass: f.mass,
            area_min: f.area_min,
            area_max: f.area_max,
        };
        let environment = Environment {
            mu_earth: f.mu_earth,
            omega_earth: f.omega_earth,
            r_earth: f.r_earth,
            inclination: f.inclination,
            atmosphere: Atmosphere::new(table, f.density_column),
        };
        let scenario = Scenario {
            n_sats: f.n_sats,
            altitude0: f.altitude0,
            eps_theta: f.eps_theta,
            eps_omega: f.eps_omega,
            dt_command: f.dt_command,
            dt_fine: f.dt_fine,
            horizon_max: f.horizon_max,
            reentry_altitude: f.reentry_altitude,
            maintenance_threshold: f.maintenance_threshold,
        };
        Ok(Config {
            satellite,
            environment,
            scenario,
            file,
        })
    }

    /// Serializes the effective configuration (defaults filled in) as JSON.
    ///
    /// Numbers round-trip bit-exactly: parsing the output yields a config
    /// equal to this one.
    pub fn dump(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(&self.file).expect("config serialization is total");
        out.push('\n');
        out
    }
}

fn validate(f: &ConfigFile) -> Result<(), ConfigError> {
    fn bad(key: &'static str, message: impl Into<String>) -> ConfigError {
        ConfigError::Validation {
            key,
            message: message.into(),
        }
    }
    fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(bad(key, format!("must be finite and > 0, got {v}")))
        }
    }
    positive("c_d", f.c_d)?;
    positive("mass", f.mass)?;
    positive("area_min", f.area_min)?;
    positive("area_max", f.area_max)?;
    if f.area_min >= f.area_max {
        return Err(bad(
            "area_min",
            format!(
                "must satisfy 0 < area_min < area_max, got {} >= {}",
                f.area_min, f.area_max
            ),
        ));
    }
    positive("mu_earth", f.mu_earth)?;
    positive("r_earth", f.r_earth)?;
    if !(f.omega_earth.is_finite() && f.omega_earth >= 0.0) {
        return Err(bad("omega_earth", "must be finite and >= 0"));
    }
    if !(0.0..=180.0).contains(&f.inclination) {
        return Err(bad(
            "inclination",
            format!("must lie in [0, 180] degrees, got {}", f.inclination),
        ));
    }
    if f.n_sats < 2 {
        return Err(bad("n_sats", format!("need at least 2, got {}", f.n_sats)));
    }
    positive("altitude0", f.altitude0)?;
    positive("eps_theta", f.eps_theta)?;
    positive("eps_omega", f.eps_omega)?;
    positive("dt_command", f.dt_command)?;
    positive("dt_fine", f.dt_fine)?;
    if f.dt_fine > f.dt_command {
        return Err(bad(
            "dt_fine",
            format!(
                "must satisfy 0 < dt_fine <= dt_command, got {} > {}",
                f.dt_fine, f.dt_command
            ),
        ));
    }
    let steps = f.dt_command / f.dt_fine;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(bad(
            "dt_fine",
            format!(
                "dt_command must be an integer multiple of dt_fine, got {} / {}",
                f.dt_command, f.dt_fine
            ),
        ));
    }
    if f.horizon_max < 1 {
        return Err(bad("horizon_max", "must be >= 1"));
    }
    positive("reentry_altitude", f.reentry_altitude)?;
    if f.reentry_altitude >= f.altitude0 {
        return Err(bad(
            "reentry_altitude",
            format!(
                "must be below altitude0, got {} >= {}",
                f.reentry_altitude, f.altitude0
            ),
        ));
    }
    positive("maintenance_threshold", f.maintenance_threshold)?;
    Ok(())
}
