//! Harris-Priester atmospheric density, diurnal-free variant.
//!
//! The model is a 50-node table of (altitude, min density, max density)
//! covering 100-1000 km. The full Harris-Priester model modulates between
//! the two columns with the angle to the apex of the diurnal bulge; this
//! variant drops the diurnal term and collapses the columns with a
//! configurable combiner (default: geometric mean, which preserves the
//! log-linearity the table is built around). Between nodes the density is
//! interpolated exponentially, i.e. linearly in log-density.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// One table row: altitude in km, densities in kg/km³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpNode {
    pub h_km: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

/// Ordered Harris-Priester coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct HarrisPriesterTable {
    nodes: Vec<HpNode>,
}

/// Which density the diurnal-free model reports at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityColumn {
    Min,
    Max,
    #[default]
    GeometricMean,
}

#[derive(Debug, thiserror::Error)]
pub enum AtmosphereError {
    #[error("altitude {h_km} km outside atmosphere table range [{lo_km}, {hi_km}] km")]
    OutOfRange { h_km: f64, lo_km: f64, hi_km: f64 },
    #[error("cannot read atmosphere table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("atmosphere table line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// The table bundled with the crate (`data/harris_priester.csv`).
const BUNDLED_CSV: &str = include_str!("../../../data/harris_priester.csv");

impl HarrisPriesterTable {
    /// Parses the standard bundled table. Infallible because the bundled
    /// file is validated by this crate's tests.
    pub fn bundled() -> Self {
        Self::from_csv_str(BUNDLED_CSV).expect("bundled table is well-formed")
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, AtmosphereError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AtmosphereError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    /// Parses `h_km, rho_min_kg_per_km3, rho_max_kg_per_km3` rows.
    /// The header row is required; blank lines are ignored.
    pub fn from_csv_str(text: &str) -> Result<Self, AtmosphereError> {
        let malformed = |line: usize, message: String| AtmosphereError::Malformed { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (n, header) = lines
            .next()
            .ok_or_else(|| malformed(1, "empty file".into()))?;
        let expect = ["h_km", "rho_min_kg_per_km3", "rho_max_kg_per_km3"];
        let got: Vec<&str> = header.split(',').map(str::trim).collect();
        if got != expect {
            return Err(malformed(
                n + 1,
                format!("expected header `{}`, got `{header}`", expect.join(", ")),
            ));
        }
        let mut nodes = Vec::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(malformed(
                    n + 1,
                    format!("expected 3 comma-separated fields, got {}", fields.len()),
                ));
            }
            let parse = |s: &str| -> Result<f64, AtmosphereError> {
                s.parse::<f64>()
                    .map_err(|e| malformed(n + 1, format!("bad number `{s}`: {e}")))
            };
            nodes.push(HpNode {
                h_km: parse(fields[0])?,
                rho_min: parse(fields[1])?,
                rho_max: parse(fields[2])?,
            });
        }
        Self::from_nodes(nodes)
    }

    /// Validates node ordering, positivity, and column monotonicity.
    pub fn from_nodes(nodes: Vec<HpNode>) -> Result<Self, AtmosphereError> {
        let invalid =
            |i: usize, message: String| AtmosphereError::Malformed { line: i + 2, message };
        if nodes.len() < 2 {
            return Err(AtmosphereError::Malformed {
                line: 1,
                message: "need at least 2 nodes".into(),
            });
        }
        for (i, n) in nodes.iter().enumerate() {
            if !(n.rho_min > 0.0 && n.rho_max > 0.0) {
                return Err(invalid(i, format!("densities must be > 0 at h={}", n.h_km)));
            }
            if n.rho_min > n.rho_max {
                return Err(invalid(
                    i,
                    format!("rho_min > rho_max at h={} km", n.h_km),
                ));
            }
            if i > 0 {
                let p = &nodes[i - 1];
                if n.h_km <= p.h_km {
                    return Err(invalid(
                        i,
                        format!("altitudes must strictly increase, {} after {}", n.h_km, p.h_km),
                    ));
                }
                if n.rho_min >= p.rho_min || n.rho_max >= p.rho_max {
                    return Err(invalid(
                        i,
                        format!("densities must strictly decrease with altitude at h={}", n.h_km),
                    ));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[HpNode] {
        &self.nodes
    }

    /// Lowest tabulated altitude, km.
    pub fn floor_km(&self) -> f64 {
        self.nodes[0].h_km
    }

    /// Highest tabulated altitude, km.
    pub fn ceiling_km(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].h_km
    }
}

/// A table with a column choice applied: the object the dynamics query.
///
/// Node log-densities of the selected column are precomputed once, so a
/// density evaluation is a binary search plus one `exp`.
#[derive(Debug, Clone)]
pub struct Atmosphere {
    table: HarrisPriesterTable,
    column: DensityColumn,
    h: Vec<f64>,
    ln_rho: Vec<f64>,
}

impl Atmosphere {
    pub fn new(table: HarrisPriesterTable, column: DensityColumn) -> Self {
        let h: Vec<f64> = table.nodes.iter().map(|n| n.h_km).collect();
        let ln_rho: Vec<f64> = table
            .nodes
            .iter()
            .map(|n| match column {
                DensityColumn::Min => n.rho_min.ln(),
                DensityColumn::Max => n.rho_max.ln(),
                // ln √(min·max), evaluated as a mean of logs to avoid any
                // intermediate over/underflow.
                DensityColumn::GeometricMean => 0.5 * (n.rho_min.ln() + n.rho_max.ln()),
            })
            .collect();
        Self {
            table,
            column,
            h,
            ln_rho,
        }
    }

    pub fn table(&self) -> &HarrisPriesterTable {
        &self.table
    }

    pub fn column(&self) -> DensityColumn {
        self.column
    }

    /// Density at altitude `h_km`, kg/km³.
    ///
    /// Exponential interpolation between the bracketing nodes: the value is
    /// continuous, strictly decreasing, and matches the node densities
    /// exactly at the nodes. Out-of-range altitudes are an error; there is
    /// no extrapolation on either side.
    pub fn density(&self, h_km: f64) -> Result<f64, AtmosphereError> {
        let lo = self.h[0];
        let hi = self.h[self.h.len() - 1];
        if !(h_km >= lo && h_km <= hi) {
            return Err(AtmosphereError::OutOfRange {
                h_km,
                lo_km: lo,
                hi_km: hi,
            });
        }
        // partition_point returns the first node > h, so i brackets h from
        // below; the top endpoint reuses the last interval.
        let i = self
            .h
            .partition_point(|&node| node <= h_km)
            .clamp(1, self.h.len() - 1)
            - 1;
        let frac = (h_km - self.h[i]) / (self.h[i + 1] - self.h[i]);
        Ok((self.ln_rho[i] + frac * (self.ln_rho[i + 1] - self.ln_rho[i])).exp())
    }
}
