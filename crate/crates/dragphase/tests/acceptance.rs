//! Acceptance gate: one test per numbered criterion, hard gates first,
//! then the full-scale calibration report. libtest's per-test ok/FAILED
//! line is the per-criterion verdict; each test also prints its measured
//! numbers (visible with `--show-output`, or automatically on failure).
//!
//! Criteria 1 through 8 assert hard bounds. Criterion 9 compares headline
//! numbers of the full-scale configuration against calibration targets
//! with a 30% tolerance and prints a verdict per number; its hard
//! assertions cover only what must hold regardless of calibration (runs
//! succeed, bands met, physical orderings). Shipped satellite constants
//! are much weaker in drag authority than the targets assume, so several
//! "outside 30%" verdicts are expected and honest.

use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dragphase::atmosphere::HarrisPriesterTable;
use dragphase::config::{config_from_str, Config, Environment, SatelliteParams, Scenario};
use dragphase::dynamics::{
    mean_motion, propagate_interval, rk4_step, ConstellationState, DynamicsError, SatState,
};
use dragphase::lp::{build_s_bar, LinearProgram, SpacingTarget};
use dragphase::metrics::RunLog;
use dragphase::mpc::{
    find_min_horizon, run_horizon_sweep, run_lifetime, run_mpc, run_open_loop, PhaseKind,
    PhaseReport, OMEGA_MATCH_TOL,
};
use dragphase::sensitivity::build_reference;
use dragphase::simplex::{solve, LpStatus, SolveOptions};

/// Shipped-defaults configuration for `n` satellites, with optional JSON
/// key overrides (comma-joined `"key": value` pairs).
fn shipped(n: usize, overrides: &str) -> Config {
    let json = if overrides.is_empty() {
        format!("{{\"n_sats\": {n}}}")
    } else {
        format!("{{\"n_sats\": {n}, {overrides}}}")
    };
    config_from_str(&json, HarrisPriesterTable::bundled()).expect("valid acceptance config")
}

fn specific_energy(s: &SatState, env: &Environment) -> f64 {
    0.5 * (s.r_dot * s.r_dot + (s.r * s.omega) * (s.r * s.omega)) - env.mu_earth / s.r
}

fn specific_angular_momentum(s: &SatState) -> f64 {
    s.r * s.r * s.omega
}

#[test]
fn criterion_1_zero_drag_conservation_and_kepler_closure() {
    let started = Instant::now();
    let cfg = shipped(2, "");
    let (p, env) = (&cfg.satellite, &cfg.environment);
    let dt = cfg.scenario.dt_fine;
    assert_eq!(dt, 10.0, "shipped truth step");

    let c = ConstellationState::circular_cluster(1, 475.0, env);
    let s0 = c.sats[0];
    let period = 2.0 * std::f64::consts::PI * (s0.r.powi(3) / env.mu_earth).sqrt();
    let e0 = specific_energy(&s0, env);
    let h0 = specific_angular_momentum(&s0);

    let whole = (period / dt).floor() as usize;
    let mut s = s0;
    let mut worst_de: f64 = 0.0;
    let mut worst_dh: f64 = 0.0;
    for _ in 0..whole {
        s = rk4_step(&s, 0.0, dt, p, env).unwrap();
        worst_de = worst_de.max(((specific_energy(&s, env) - e0) / e0).abs());
        worst_dh = worst_dh.max(((specific_angular_momentum(&s) - h0) / h0).abs());
    }
    let rest = period - whole as f64 * dt;
    if rest > 0.0 {
        s = rk4_step(&s, 0.0, rest, p, env).unwrap();
    }
    assert!(worst_de < 1e-9, "relative energy drift {worst_de:e}");
    assert!(worst_dh < 1e-9, "relative momentum drift {worst_dh:e}");
    let dr = (s.r - s0.r).abs();
    assert!(dr < 1e-6, "one-period |dr| = {dr:e} km");
    let took = started.elapsed().as_secs_f64();
    assert!(took < 1.0, "took {took:.3} s, bound 1 s");
    println!(
        "criterion 1: energy drift {worst_de:.2e}, momentum drift {worst_dh:.2e} \
         (bound 1e-9); period closure |dr| {dr:.2e} km (bound 1e-6); {took:.3} s"
    );
}

#[test]
fn criterion_2_drag_paradox_in_one_day() {
    let cfg = shipped(5, "");
    let (p, env, scn) = (&cfg.satellite, &cfg.environment, &cfg.scenario);
    let c = ConstellationState::circular_cluster(5, scn.altitude0, env);
    let out = propagate_interval(
        &c,
        &vec![p.area_max; 5],
        scn.dt_command,
        scn.dt_fine,
        p,
        env,
    )
    .unwrap();
    for (i, (before, after)) in c.sats.iter().zip(&out.sats).enumerate() {
        assert!(after.r < before.r, "sat {i}: radius must fall");
        assert!(after.omega > before.omega, "sat {i}: rate must rise");
    }
    println!(
        "criterion 2: one max-drag day moves every satellite dr = {:.4} km, \
         domega = {:+.3e} rad/s",
        out.sats[0].r - c.sats[0].r,
        out.sats[0].omega - c.sats[0].omega
    );
}

#[test]
fn criterion_3_one_day_linear_predictions_within_5_percent() {
    let cfg = shipped(2, "");
    let (p, env, scn) = (&cfg.satellite, &cfg.environment, &cfg.scenario);
    let mut worst: f64 = 0.0;
    for alt in [400.0, 425.0, 450.0, 475.0, 500.0] {
        let c = ConstellationState::circular_cluster(1, alt, env);
        let s0 = c.sats[0];
        let sr = dragphase::sensitivity::s_radius(s0.r, s0.omega, p, env).unwrap();
        let sw = dragphase::sensitivity::s_omega(s0.r, s0.omega, p, env).unwrap();
        for area in [p.area_min, 0.5 * (p.area_min + p.area_max), p.area_max] {
            let truth =
                propagate_interval(&c, &[area], scn.dt_command, scn.dt_fine, p, env).unwrap();
            let dr_truth = truth.sats[0].r - s0.r;
            let dw_truth = truth.sats[0].omega - s0.omega;
            let dr_lin = scn.dt_command * sr * area;
            let dw_lin = scn.dt_command * sw * area;
            let er = (dr_lin - dr_truth).abs() / dr_truth.abs();
            let ew = (dw_lin - dw_truth).abs() / dw_truth.abs();
            worst = worst.max(er).max(ew);
            assert!(er <= 0.05, "alt {alt}, area {area}: dr off by {er:.4}");
            assert!(ew <= 0.05, "alt {alt}, area {area}: domega off by {ew:.4}");
        }
    }
    println!(
        "criterion 3: worst one-day relative prediction error {:.3}% over \
         400-500 km x three areas (bound 5%)",
        100.0 * worst
    );
}

/// Dense random program in raw (unequilibrated) form; every variable
/// bounded, so the feasible set is a polytope and vertex enumeration is a
/// complete oracle.
fn random_boxed_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let mut a = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = rng.random_range(-1.5..1.5);
        }
    }
    LinearProgram {
        cost: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        a,
        b: (0..m).map(|_| rng.random_range(-0.4..1.2)).collect(),
        lower: (0..n).map(|_| rng.random_range(-1.5..-0.1)).collect(),
        upper: (0..n).map(|_| rng.random_range(0.2..1.8)).collect(),
        row_scale: vec![1.0; m],
        n_sats: 1,
        horizon: 1,
    }
}

/// Solves the square system formed by the chosen active constraints with
/// plain Gauss-Jordan; None when singular.
fn active_set_point(normals: &[(Vec<f64>, f64)], pick: &[usize]) -> Option<Vec<f64>> {
    let n = pick.len();
    let mut m = vec![0.0; n * (n + 1)];
    for (r, &idx) in pick.iter().enumerate() {
        m[r * (n + 1)..r * (n + 1) + n].copy_from_slice(&normals[idx].0);
        m[r * (n + 1) + n] = normals[idx].1;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x * (n + 1) + col].abs().total_cmp(&m[y * (n + 1) + col].abs()))?;
        if m[piv * (n + 1) + col].abs() < 1e-10 {
            return None;
        }
        for k in 0..=n {
            m.swap(col * (n + 1) + k, piv * (n + 1) + k);
        }
        let d = m[col * (n + 1) + col];
        for k in 0..=n {
            m[col * (n + 1) + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * (n + 1) + col];
                for k in 0..=n {
                    m[r * (n + 1) + k] -= f * m[col * (n + 1) + k];
                }
            }
        }
    }
    Some((0..n).map(|r| m[r * (n + 1) + n]).collect())
}

/// Best feasible vertex objective by trying every choice of n active
/// constraints; None when no combination yields a feasible point.
fn best_vertex_objective(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_cols();
    let mut normals: Vec<(Vec<f64>, f64)> = (0..lp.n_rows())
        .map(|i| ((0..n).map(|j| lp.a[(i, j)]).collect(), lp.b[i]))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        normals.push((e.clone(), lp.lower[j]));
        normals.push((e, lp.upper[j]));
    }
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = active_set_point(&normals, &pick) {
            if lp.max_violation(&x) <= 1e-7 {
                let obj: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(obj, |cur: f64| cur.min(obj)));
            }
        }
        // Advance to the next n-combination of the normal list.
        let total = normals.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] != i + total - n {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn criterion_4_lp_solver_matches_vertex_enumeration() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_97);
    let (mut optimal, mut infeasible) = (0usize, 0usize);
    for case in 0..25 {
        let n = rng.random_range(2..=6usize);
        let m = rng.random_range(2..=8usize);
        let lp = random_boxed_lp(&mut rng, n, m);
        let sol = solve(&lp, &SolveOptions::default()).unwrap();
        let oracle = best_vertex_objective(&lp);
        match sol.status {
            LpStatus::Optimal => {
                optimal += 1;
                let best =
                    oracle.unwrap_or_else(|| panic!("case {case}: oracle finds no vertex"));
                assert!(
                    (sol.objective - best).abs() <= 1e-9 * (1.0 + best.abs()),
                    "case {case}: solver {} vs oracle {best}",
                    sol.objective
                );
            }
            LpStatus::Infeasible => {
                infeasible += 1;
                assert!(
                    oracle.is_none(),
                    "case {case}: solver infeasible, oracle found {oracle:?}"
                );
            }
            other => panic!("case {case}: unexpected status {other:?}"),
        }
    }
    assert!(optimal >= 5, "only {optimal} optimal draws");
    assert!(infeasible >= 1, "only {infeasible} infeasible draws");
    let took = started.elapsed().as_secs_f64();
    assert!(took < 10.0, "took {took:.2} s, bound 10 s");
    println!(
        "criterion 4: 25 random programs, {optimal} optimal all matching the \
         vertex oracle to 1e-9, {infeasible} infeasible all flagged; {took:.2} s"
    );
}

#[test]
fn criterion_5_matrix_predictions_equal_daily_recursion() {
    let cfg = shipped(3, "");
    let (p, env, scn) = (&cfg.satellite, &cfg.environment, &cfg.scenario);
    let c = ConstellationState::circular_cluster(3, scn.altitude0, env);
    let t = 4usize;
    let reference = build_reference(&c, t, scn, p, env).unwrap();
    let sb = build_s_bar(&reference);
    let dt = scn.dt_command;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..t)
                    .map(|_| rng.random_range(p.area_min..=p.area_max))
                    .collect()
            })
            .collect();
        for i in 0..3 {
            // Day-by-day recursion with the frozen per-day sensitivities.
            let (mut r, mut w, mut th) = (c.sats[i].r, c.sats[i].omega, c.sats[i].theta);
            for k in 0..t {
                let sw = reference.s_w[(i, k)];
                th += dt * w + 0.5 * dt * dt * sw * u[i][k];
                w += dt * sw * u[i][k];
                r += dt * reference.s_r[(i, k)] * u[i][k];
            }
            // One-shot lifted-map prediction of the same day-T state.
            let (mut acc_r, mut acc_w, mut acc_a) = (0.0, 0.0, 0.0);
            for k in 0..t {
                let col = i * t + k;
                acc_r += sb.s_r[(i, col)] * u[i][k];
                acc_w += sb.s_w[(i, col)] * u[i][k];
                acc_a += sb.s_alpha[(i, col)] * u[i][k];
            }
            let r_m = c.sats[i].r + dt * acc_r;
            let w_m = c.sats[i].omega + dt * acc_w;
            let th_m = c.sats[i].theta + dt * t as f64 * c.sats[i].omega + dt * dt * acc_a;
            for (got, want) in [(r, r_m), (w, w_m), (th, th_m)] {
                let err = (got - want).abs() / want.abs().max(1.0);
                worst = worst.max(err);
                assert!(err <= 1e-9, "recursion {got:e} vs matrix {want:e}");
            }
        }
    }
    println!(
        "criterion 5: 100 random command plans, worst relative mismatch \
         {worst:.2e} (bound 1e-9)"
    );
}

/// The shared desk-scale feedback run: scan plus acquisition, computed
/// once and reused by criteria 6, 7, and 8.
struct DeskScaleRun {
    cfg: Config,
    c0: ConstellationState,
    t_star: usize,
    log: RunLog,
    report: PhaseReport,
    wall_s: f64,
}

static DESK_SCALE: OnceLock<DeskScaleRun> = OnceLock::new();

fn desk_scale() -> &'static DeskScaleRun {
    DESK_SCALE.get_or_init(|| {
        let cfg = shipped(20, "");
        let c0 = ConstellationState::circular_cluster(20, cfg.scenario.altitude0, &cfg.environment);
        let started = Instant::now();
        let t_star =
            find_min_horizon(&c0, &cfg.scenario, &cfg.satellite, &cfg.environment).unwrap();
        let (log, report) =
            run_mpc(&c0, t_star, &cfg.scenario, &cfg.satellite, &cfg.environment).unwrap();
        let wall_s = started.elapsed().as_secs_f64();
        DeskScaleRun {
            cfg,
            c0,
            t_star,
            log,
            report,
            wall_s,
        }
    })
}

/// Pairwise mean-motion differences of the last logged day, rad/s.
fn final_pair_rate_gaps(log: &RunLog, n: usize, env: &Environment) -> Vec<f64> {
    let rates: Vec<f64> = log.records[log.records.len() - n..]
        .iter()
        .map(|rec| {
            mean_motion(
                &SatState {
                    r: rec.r,
                    r_dot: rec.r_dot,
                    theta: rec.theta,
                    omega: rec.omega,
                },
                env,
            )
        })
        .collect();
    SpacingTarget::equal_spacing(n).apply_d(&rates)
}

/// Worst altitude drop after `days` of a constant equal-area coast, km.
fn constant_area_drop(
    c0: &ConstellationState,
    area: f64,
    days: usize,
    scn: &Scenario,
    p: &SatelliteParams,
    env: &Environment,
) -> f64 {
    let mut s = c0.clone();
    for _ in 0..days {
        s = propagate_interval(
            &s,
            &vec![area; c0.n_sats()],
            scn.dt_command,
            scn.dt_fine,
            p,
            env,
        )
        .unwrap();
    }
    c0.sats
        .iter()
        .zip(&s.sats)
        .map(|(a, b)| a.r - b.r)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_6_desk_scale_feedback_acquires_the_band() {
    let run = desk_scale();
    let (p, env, scn) = (&run.cfg.satellite, &run.cfg.environment, &run.cfg.scenario);

    let errors = run.log.final_spacing().unwrap();
    assert_eq!(errors.len(), 20);
    for (i, e) in errors.iter().enumerate() {
        assert!(
            e.abs() <= scn.eps_theta,
            "pair {i}: final error {e:.5} deg above {}",
            scn.eps_theta
        );
    }
    let worst_gap = final_pair_rate_gaps(&run.log, 20, env)
        .iter()
        .fold(0.0f64, |a, g| a.max(g.abs()));
    assert!(
        worst_gap <= OMEGA_MATCH_TOL,
        "worst pair rate gap {worst_gap:e} above {OMEGA_MATCH_TOL:e} rad/s"
    );

    let days = run.log.days();
    let lo = constant_area_drop(&run.c0, p.area_min, days, scn, p, env);
    let hi = constant_area_drop(&run.c0, p.area_max, days, scn, p, env);
    let drop = run.report.max_altitude_drop;
    assert!(
        lo < drop && drop < hi,
        "drop {drop:.4} km not strictly inside [{lo:.4}, {hi:.4}]"
    );
    assert!(run.wall_s < 300.0, "took {:.1} s, bound 300 s", run.wall_s);
    println!(
        "criterion 6: N=20, T*={}, {} days, max spacing error {:.4} deg (band 0.1), \
         worst rate gap {:.2e} rad/s (bound {:.0e}), drop {:.3} km strictly within \
         [{:.3}, {:.3}] km coast baselines; scan+run {:.1} s",
        run.t_star, days, run.report.max_spacing_error, worst_gap, OMEGA_MATCH_TOL, drop, lo, hi,
        run.wall_s
    );
}

#[test]
fn criterion_7_open_loop_fails_where_feedback_succeeds() {
    let run = desk_scale();
    let (p, env, scn) = (&run.cfg.satellite, &run.cfg.environment, &run.cfg.scenario);

    let (ol_log, ol_report) = run_open_loop(&run.c0, run.t_star, scn, p, env).unwrap();
    let ol_worst = ol_log
        .final_spacing()
        .unwrap()
        .iter()
        .fold(0.0f64, |a, e| a.max(e.abs()));
    let violates = ol_worst > scn.eps_theta;
    let predicted = ol_report.predicted_max_drop.unwrap();
    let underpredicts = ol_report.max_altitude_drop >= predicted;
    assert!(
        violates || underpredicts,
        "open loop met the band ({ol_worst:.4} deg) and beat its prediction \
         ({:.4} < {predicted:.4} km)",
        ol_report.max_altitude_drop
    );

    // The feedback run over the same scenario met every tolerance.
    assert!(run.report.max_spacing_error <= scn.eps_theta);
    let worst_gap = final_pair_rate_gaps(&run.log, 20, env)
        .iter()
        .fold(0.0f64, |a, g| a.max(g.abs()));
    assert!(worst_gap <= OMEGA_MATCH_TOL);
    println!(
        "criterion 7: open loop final error {ol_worst:.3} deg (violates band: \
         {violates}), drop {:.3} km vs predicted {predicted:.3} km (underpredicts: \
         {underpredicts}); feedback error {:.4} deg with rate gap {:.2e} rad/s",
        ol_report.max_altitude_drop, run.report.max_spacing_error, worst_gap
    );
}

#[test]
fn criterion_8_maintenance_holds_the_band_for_200_days() {
    let run = desk_scale();
    let (p, env, scn) = (&run.cfg.satellite, &run.cfg.environment, &run.cfg.scenario);
    let cap = run.report.end_day + 200;
    let life = run_lifetime(&run.c0, scn, p, env, Some(cap)).unwrap();
    assert!(life.censored, "re-entered before day {cap}");
    assert_eq!(
        life.phases[0].end_day, run.report.end_day,
        "deterministic acquisition replay"
    );

    let bursts: Vec<&PhaseReport> = life
        .phases
        .iter()
        .filter(|ph| ph.phase == PhaseKind::Maintenance)
        .collect();
    assert!(!bursts.is_empty(), "no maintenance burst in 200 days");
    let mut worst_end: f64 = 0.0;
    for b in &bursts {
        worst_end = worst_end.max(b.max_spacing_error);
        assert!(
            b.max_spacing_error <= scn.eps_theta,
            "burst ending day {} left {:.4} deg",
            b.end_day,
            b.max_spacing_error
        );
    }
    println!(
        "criterion 8: {} maintenance bursts across 200 post-acquisition days, \
         worst end-of-burst error {worst_end:.4} deg (band 0.1)",
        bursts.len()
    );
}

/// Constant-area days until the lowest satellite reaches the re-entry
/// altitude; `true` when re-entry was actually reached within `cap` days.
fn coast_days_to_reentry(
    c0: &ConstellationState,
    area: f64,
    cap: usize,
    scn: &Scenario,
    p: &SatelliteParams,
    env: &Environment,
) -> (usize, bool) {
    let mut s = c0.clone();
    for day in 0..cap {
        if s.min_altitude(env) <= scn.reentry_altitude {
            return (day, true);
        }
        match propagate_interval(&s, &vec![area; c0.n_sats()], scn.dt_command, scn.dt_fine, p, env)
        {
            Ok(next) => s = next,
            // Diving below the density table inside a day is re-entry too.
            Err(DynamicsError::Reentry { .. }) => return (day + 1, true),
            Err(e) => panic!("coast failed on day {day}: {e}"),
        }
    }
    (cap, false)
}

fn verdict(measured: f64, target: f64) -> &'static str {
    if (measured / target - 1.0).abs() <= 0.30 {
        "within 30%"
    } else {
        "outside 30%"
    }
}

#[test]
fn low_altitude_lifetime_is_bracketed_by_drag_baselines() {
    // Desk-scale and uncensored: from 300 km the whole mission fits in
    // seconds, so the lifetime ordering is checked without a day cap.
    let cfg = shipped(4, "\"altitude0\": 300.0");
    let (p, env, scn) = (&cfg.satellite, &cfg.environment, &cfg.scenario);
    let c0 = ConstellationState::circular_cluster(4, scn.altitude0, env);
    let (max_drag_days, max_reached) = coast_days_to_reentry(&c0, p.area_max, 400, scn, p, env);
    let (min_drag_days, min_reached) = coast_days_to_reentry(&c0, p.area_min, 400, scn, p, env);
    assert!(max_reached && min_reached);
    let life = run_lifetime(&c0, scn, p, env, None).unwrap();
    assert!(!life.censored);
    assert!(
        max_drag_days < life.total_days && life.total_days < min_drag_days,
        "lifetime {} days not strictly inside [{max_drag_days}, {min_drag_days}]",
        life.total_days
    );
    println!(
        "uncensored 300 km mission: {} days, strictly between the all-max \
         ({max_drag_days}) and all-min ({min_drag_days}) coast lifetimes",
        life.total_days
    );
}

#[test]
fn criterion_9_full_scale_calibration_report() {
    // Coarse truth step for the multi-year runs; on these near-circular
    // orbits the 60 s and 10 s integrations differ by ~1e-6 relative.
    let cfg = shipped(105, "\"dt_fine\": 60.0");
    let (p, env, scn) = (&cfg.satellite, &cfg.environment, &cfg.scenario);
    let c0 = ConstellationState::circular_cluster(105, scn.altitude0, env);

    // Smallest feasible acquisition horizon.
    let started = Instant::now();
    let t_star = find_min_horizon(&c0, scn, p, env).unwrap();
    let scan_s = started.elapsed().as_secs_f64();
    println!(
        "calibration horizon: t_star={t_star} target=71 ({}); scan {scan_s:.0} s",
        verdict(t_star as f64, 71.0)
    );

    // Acquisition run: must meet its own bands, and the runtime bound is a
    // hard gate.
    let started = Instant::now();
    let (log, report) = run_mpc(&c0, t_star, scn, p, env).unwrap();
    let mpc_s = started.elapsed().as_secs_f64();
    assert!(mpc_s < 1800.0, "acquisition took {mpc_s:.0} s, bound 1800 s");
    assert!(report.max_spacing_error <= scn.eps_theta);
    let worst_gap = final_pair_rate_gaps(&log, 105, env)
        .iter()
        .fold(0.0f64, |a, g| a.max(g.abs()));
    assert!(worst_gap <= OMEGA_MATCH_TOL);
    println!(
        "calibration acquisition drop: {:.3} km target=10.71 ({}); {} days, \
         max error {:.4} deg, rate gap {:.2e} rad/s, {mpc_s:.0} s",
        report.max_altitude_drop,
        verdict(report.max_altitude_drop, 10.71),
        log.days(),
        report.max_spacing_error,
        worst_gap
    );

    // Fixed 71-day coast drops under the two drag extremes.
    let lo71 = constant_area_drop(&c0, p.area_min, 71, scn, p, env);
    let hi71 = constant_area_drop(&c0, p.area_max, 71, scn, p, env);
    assert!(lo71 < hi71);
    println!(
        "calibration 71-day coast drops: min-drag {lo71:.3} km target=2.84 ({}), \
         max-drag {hi71:.3} km target=19.88 ({})",
        verdict(lo71, 2.84),
        verdict(hi71, 19.88)
    );

    // Horizon sweep around the scanned minimum: longer plans may spend
    // less altitude, with an interior best horizon.
    let horizons = [t_star, t_star * 6 / 5, t_star * 7 / 5];
    let entries = run_horizon_sweep(&c0, &horizons, scn, p, env);
    for e in &entries {
        assert!(e.error.is_none(), "horizon {}: {:?}", e.horizon, e.error);
    }
    let best = entries
        .iter()
        .min_by(|a, b| {
            a.max_altitude_drop
                .unwrap()
                .total_cmp(&b.max_altitude_drop.unwrap())
        })
        .unwrap();
    for e in &entries {
        println!(
            "calibration sweep point: T={} drop={:.3} km over {} days",
            e.horizon,
            e.max_altitude_drop.unwrap(),
            e.days.unwrap()
        );
    }
    println!(
        "calibration sweep best: T={} target=98 ({}); drop {:.3} km target=8.28 ({})",
        best.horizon,
        verdict(best.horizon as f64, 98.0),
        best.max_altitude_drop.unwrap(),
        verdict(best.max_altitude_drop.unwrap(), 8.28)
    );

    // Mission lifetime against the coast brackets. The controlled run is
    // capped; the cap exceeds 1.3x the target, so the verdict resolves
    // even when censored.
    let (max_drag_days, max_reached) = coast_days_to_reentry(&c0, p.area_max, 4000, scn, p, env);
    assert!(max_reached, "max-drag coast still aloft after 4000 days");
    println!(
        "calibration all-max lifetime: {max_drag_days} days target=232 ({})",
        verdict(max_drag_days as f64, 232.0)
    );
    let (min_drag_days, min_reached) = coast_days_to_reentry(&c0, p.area_min, 4000, scn, p, env);
    assert!(min_reached, "min-drag coast still aloft after 4000 days");
    println!(
        "calibration all-min lifetime: {min_drag_days} days target=1410 ({})",
        verdict(min_drag_days as f64, 1410.0)
    );
    let life = run_lifetime(&c0, scn, p, env, Some(1500)).unwrap();
    assert!(
        life.total_days > max_drag_days,
        "controlled lifetime {} did not outlast the all-max coast {max_drag_days}",
        life.total_days
    );
    if !life.censored {
        assert!(life.total_days <= min_drag_days);
    }
    let shown = if life.censored {
        format!(">= {} (censored)", life.total_days)
    } else {
        life.total_days.to_string()
    };
    println!(
        "calibration controlled lifetime: {shown} days target=1059 ({}); \
         bracketed by [{max_drag_days}, {min_drag_days}]",
        if life.censored && life.total_days as f64 > 1.3 * 1059.0 {
            "outside 30%"
        } else {
            verdict(life.total_days as f64, 1059.0)
        }
    );
}
