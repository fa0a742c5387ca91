//! Phasing a cluster of low-orbit satellites into an equally spaced ring
//! using nothing but differential atmospheric drag.
//!
//! Every satellite can set its cross-sectional area between a minimum and a
//! maximum once per command interval. Flying more area than a sibling
//! lowers an orbit faster, and a lower orbit moves faster around the
//! planet: modulating area modulates relative drift, which is enough to
//! reach and then hold any in-plane spacing pattern, at the price of
//! altitude spent into drag.
//!
//! The crate splits the problem the way the modules are named:
//!
//! - [`config`]: run parameters, validation, JSON round-tripping.
//! - [`atmosphere`]: the bundled density table and its interpolation.
//! - [`dynamics`]: the planar truth propagator (RK4 on polar two-body
//!   motion with tangential drag).
//! - [`sensitivity`]: per-day response of radius and angular rate to area,
//!   frozen along a minimum-drag reference.
//! - [`lp`]: assembly of the daily plan as a linear program over area
//!   commands.
//! - [`simplex`]: the bounded-variable two-phase solver behind every plan.
//! - [`mpc`]: horizon search, open-loop and feedback rollouts, drift and
//!   maintenance phases, lifetime runs.
//! - [`metrics`]: run logs, spacing errors, CSV emission.
//!
//! The `dragphase` binary exposes all of it behind CLI verbs; the book
//! under `book/` walks through the same pipeline chapter by chapter, and
//! its code snippets compile as doctests of this crate.

pub mod atmosphere;
pub mod config;
pub mod dynamics;
pub mod lp;
pub mod metrics;
pub mod mpc;
pub mod sensitivity;
pub mod simplex;

// Compile the book's code snippets as doctests so the guide can never
// drift from the API it narrates.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Model, "../../../book/src/model.md");
    chapter!(LinearModel, "../../../book/src/linear-model.md");
    chapter!(Optimization, "../../../book/src/optimization.md");
    chapter!(Solver, "../../../book/src/solver.md");
    chapter!(Mpc, "../../../book/src/mpc.md");
    chapter!(Cli, "../../../book/src/cli.md");
    chapter!(Configuration, "../../../book/src/configuration.md");
}
