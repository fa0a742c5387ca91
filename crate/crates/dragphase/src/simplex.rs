//! Self-contained two-phase bounded-variable primal simplex.
//!
//! Solves min cost·x over a·x ≤ b, lower ≤ x ≤ upper as produced by the
//! assembly module. One slack per general row turns the system into
//! equalities; the basis inverse is kept dense and updated in product form,
//! with a full refactorization every `REFACTOR_EVERY` pivots to contain
//! drift. Nonbasic variables rest at a bound, which keeps the area-command
//! box out of the row count entirely: the basis stays 5N no matter how long
//! the horizon grows.
//!
//! Phase 1 plants an artificial (column −e_i, cost 1) in every row whose
//! slack starts below zero and minimizes their sum; a positive optimum is
//! the infeasibility gap reported to the horizon search. Phase 2 pins the
//! artificial bounds to [0, 0] and minimizes the true cost.
//!
//! Determinism: Dantzig pricing with lowest-index tie-breaking, switching
//! to Bland's rule after `BLAND_AFTER` consecutive degenerate pivots, and a
//! fixed leaving-row rule (smallest ratio, then largest pivot magnitude,
//! then lowest position). Identical inputs replay identical pivot
//! sequences.
//!
//! A bound flip leaves the basis, hence the pricing vector, unchanged, so
//! after a flip the next entering candidate comes from the same priced
//! batch instead of a fresh pass. Acquisition-scale programs flip on the
//! order of N·T/2 area variables; batching turns that many pricing passes
//! into a handful.
//!
//! Callers solving a sequence of related programs can seed the nonbasic
//! rest bounds from the previous solution (`SolveOptions::warm_at_upper`).
//! The hint changes only the starting corner, never the answer: rows the
//! seeded point violates still get artificials and both phases run as
//! usual. A good hint leaves phase 1 nothing to do and phase 2 a handful
//! of pivots, which is what makes the daily re-solve loop cheap.

use thiserror::Error;

use crate::lp::LinearProgram;

/// Pivots between full basis-inverse rebuilds. The rebuild is O(m³), the
/// product-form update O(m²); this keeps the rebuild share of a long solve
/// near m/REFACTOR_EVERY while the equilibrated data keeps drift slow
/// enough that residuals stay at solver tolerance.
const REFACTOR_EVERY: usize = 250;
/// Consecutive degenerate pivots before Bland's rule engages.
const BLAND_AFTER: usize = 50;
/// Smallest acceptable ratio-test denominator.
const PIVOT_TOL: f64 = 1e-8;
/// Step lengths below this count as degenerate for the stall detector.
const DEGEN_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limit",
        })
    }
}

/// Solver verdict plus the point it stopped at.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variables only (area commands then t), length n_cols.
    pub x: Vec<f64>,
    /// Optimal cost when status is optimal; the phase-1 infeasibility gap
    /// (sum of artificial values, equilibrated units) when infeasible.
    pub objective: f64,
    /// Largest constraint or bound violation of `x`, equilibrated units.
    pub max_primal_residual: f64,
    /// Pivots plus bound flips performed across both phases.
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Feasibility tolerance, equilibrated units.
    pub feas_tol: f64,
    /// Reduced-cost (dual) tolerance, equilibrated units.
    pub opt_tol: f64,
    pub max_iters: usize,
    /// Start each boxed structural column at its upper bound where true
    /// (length n_cols). Purely a starting-corner hint; see the module doc.
    pub warm_at_upper: Option<Vec<bool>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iters: 200_000,
            warm_at_upper: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("lp dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Column roles, in index order: structural, then one slack per row, then
/// any artificials.
struct Worker<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n_struct: usize,
    /// Sparse columns for every variable, structural and synthetic.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// basis[i] = column occupying row position i.
    basis: Vec<usize>,
    /// Column -> basis position, usize::MAX when nonbasic.
    pos: Vec<usize>,
    /// Nonbasic rest bound; only meaningful with a finite upper bound.
    at_upper: Vec<bool>,
    /// Values of the basic variables, aligned with `basis`.
    x_b: Vec<f64>,
    /// Dense basis inverse, row-major m×m.
    binv: Vec<f64>,
    artificials: Vec<usize>,
    pivots_since_refactor: usize,
    iterations: usize,
    degenerate_streak: usize,
}

enum PhaseEnd {
    Converged,
    Unbounded,
    IterationLimit,
}

impl<'a> Worker<'a> {
    fn new(lp: &'a LinearProgram, warm: Option<&[bool]>) -> Self {
        let m = lp.n_rows();
        let n_struct = lp.n_cols();
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_struct + m);
        for j in 0..n_struct {
            let mut col = Vec::new();
            for i in 0..m {
                let v = lp.a[(i, j)];
                if v != 0.0 {
                    col.push((i, v));
                }
            }
            cols.push(col);
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }

        let mut w = Worker {
            lp,
            m,
            n_struct,
            cols,
            lower,
            upper,
            basis: (0..m).map(|i| n_struct + i).collect(),
            pos: Vec::new(),
            at_upper: vec![false; n_struct + m],
            x_b: vec![0.0; m],
            binv: identity(m),
            artificials: Vec::new(),
            pivots_since_refactor: 0,
            iterations: 0,
            degenerate_streak: 0,
        };
        w.pos = vec![usize::MAX; w.cols.len()];
        for (i, &j) in w.basis.iter().enumerate() {
            w.pos[j] = i;
        }
        // A variable with only a finite upper bound rests there; nb_value's
        // 0 fallback is reserved for fully free columns.
        for j in 0..w.at_upper.len() {
            if w.lower[j] == f64::NEG_INFINITY && w.upper[j].is_finite() {
                w.at_upper[j] = true;
            }
        }
        // Seed boxed structural columns from the caller's hint; columns
        // without two finite bounds keep the rules above.
        if let Some(hint) = warm {
            for (j, &up) in hint.iter().enumerate() {
                if up && w.lower[j].is_finite() && w.upper[j].is_finite() {
                    w.at_upper[j] = true;
                }
            }
        }

        // Initial slacks at b − a·x_N; rows starting violated get an
        // artificial basic variable with column −e_i, so its value is the
        // (positive) violation.
        let slack0 = w.rhs_minus_nonbasic();
        for i in 0..m {
            if slack0[i] < 0.0 {
                let art = w.cols.len();
                w.cols.push(vec![(i, -1.0)]);
                w.lower.push(0.0);
                w.upper.push(f64::INFINITY);
                w.at_upper.push(false);
                w.pos.push(usize::MAX);
                let slack = n_struct + i;
                w.pos[slack] = usize::MAX;
                w.basis[i] = art;
                w.pos[art] = i;
                w.x_b[i] = -slack0[i];
                w.binv[i * m + i] = -1.0;
                w.artificials.push(art);
            } else {
                w.x_b[i] = slack0[i];
            }
        }
        w
    }

    fn nb_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else if self.lower[j].is_finite() {
            self.lower[j]
        } else {
            0.0
        }
    }

    /// b minus every nonbasic column's contribution at its rest value.
    fn rhs_minus_nonbasic(&self) -> Vec<f64> {
        let mut rhs = self.lp.b.clone();
        for j in 0..self.cols.len() {
            if self.pos[j] != usize::MAX {
                continue;
            }
            let v = self.nb_value(j);
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * v;
                }
            }
        }
        rhs
    }

    /// Rebuilds the dense basis inverse and the basic values from scratch.
    fn refactorize(&mut self) {
        let m = self.m;
        let mut b_mat = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            for &(row, v) in &self.cols[j] {
                b_mat[row * m + i] = v;
            }
        }
        self.binv = invert(&mut b_mat, m).expect("basis matrix became singular");
        let rhs = self.rhs_minus_nonbasic();
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.binv[i * m + k] * rhs[k];
            }
            self.x_b[i] = acc;
        }
        self.pivots_since_refactor = 0;
    }

    /// y = cost_B · B⁻¹, skipping zero basic costs (there are few: the
    /// artificials in phase 1, t in phase 2).
    fn pricing_vector(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += c * row[k];
                }
            }
        }
        y
    }

    /// α = B⁻¹ · a_q for a sparse column.
    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(row, v) in &self.cols[q] {
            for i in 0..m {
                alpha[i] += self.binv[i * m + row] * v;
            }
        }
        alpha
    }

    /// One phase of the simplex loop under the given cost vector (length =
    /// total columns). Converged means no eligible entering column remains.
    fn run_phase(&mut self, cost: &[f64], opts: &SolveOptions) -> PhaseEnd {
        loop {
            if self.iterations >= opts.max_iters {
                return PhaseEnd::IterationLimit;
            }
            let y = self.pricing_vector(cost);

            // Eligible entering candidates: (column, improvement, direction).
            let bland = self.degenerate_streak >= BLAND_AFTER;
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..self.cols.len() {
                if self.pos[j] != usize::MAX {
                    continue;
                }
                let width = self.upper[j] - self.lower[j];
                if width <= 0.0 {
                    continue;
                }
                let mut d = cost[j];
                for &(i, a) in &self.cols[j] {
                    d -= y[i] * a;
                }
                let free = self.lower[j] == f64::NEG_INFINITY && self.upper[j] == f64::INFINITY;
                if free {
                    if d < -opts.opt_tol {
                        cands.push((j, -d, 1.0));
                    } else if d > opts.opt_tol {
                        cands.push((j, d, -1.0));
                    }
                } else if self.at_upper[j] {
                    if d > opts.opt_tol {
                        cands.push((j, d, -1.0));
                    }
                } else if d < -opts.opt_tol {
                    cands.push((j, -d, 1.0));
                }
                if bland && !cands.is_empty() {
                    break;
                }
            }
            if cands.is_empty() {
                return PhaseEnd::Converged;
            }
            if !bland {
                cands.sort_unstable_by(|a, b| {
                    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
                });
            }

            // Bound flips keep y valid, so work through the batch until a
            // pivot forces a re-price.
            for &(q, _, sigma) in &cands {
                if self.iterations >= opts.max_iters {
                    return PhaseEnd::IterationLimit;
                }
                let alpha = self.ftran(q);
                let own_limit = self.upper[q] - self.lower[q];

                let mut best_ratio = f64::INFINITY;
                let mut leave: Option<(usize, f64, bool)> = None; // (row, |pivot|, hits_upper)
                for i in 0..self.m {
                    let g = sigma * alpha[i];
                    let bj = self.basis[i];
                    let (ratio, hits_upper, mag) = if g > PIVOT_TOL {
                        if self.lower[bj] == f64::NEG_INFINITY {
                            continue;
                        }
                        (((self.x_b[i] - self.lower[bj]) / g).max(0.0), false, g)
                    } else if g < -PIVOT_TOL {
                        if self.upper[bj] == f64::INFINITY {
                            continue;
                        }
                        (((self.upper[bj] - self.x_b[i]) / -g).max(0.0), true, -g)
                    } else {
                        continue;
                    };
                    let better = match &leave {
                        None => ratio < best_ratio,
                        Some((row, best_mag, _)) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio > best_ratio + 1e-12 {
                                false
                            } else if bland {
                                self.basis[i] < self.basis[*row]
                            } else {
                                mag > *best_mag
                            }
                        }
                    };
                    if better {
                        best_ratio = best_ratio.min(ratio);
                        leave = Some((i, mag, hits_upper));
                    }
                }

                if own_limit <= best_ratio {
                    if own_limit == f64::INFINITY {
                        return PhaseEnd::Unbounded;
                    }
                    // Flip q to its other bound; basis untouched.
                    for i in 0..self.m {
                        self.x_b[i] -= sigma * own_limit * alpha[i];
                    }
                    self.at_upper[q] = !self.at_upper[q];
                    self.iterations += 1;
                    if own_limit > DEGEN_TOL {
                        self.degenerate_streak = 0;
                    }
                    continue;
                }

                let (r, _, hits_upper) = leave.expect("bounded ratio without leaving row");
                let delta = best_ratio;
                let entering_value = self.nb_value(q) + sigma * delta;
                for i in 0..self.m {
                    if i != r {
                        self.x_b[i] -= sigma * delta * alpha[i];
                    }
                }
                let leaving = self.basis[r];
                self.at_upper[leaving] = hits_upper;
                self.pos[leaving] = usize::MAX;
                self.basis[r] = q;
                self.pos[q] = r;
                self.x_b[r] = entering_value;
                self.update_binv(&alpha, r);
                self.iterations += 1;
                self.pivots_since_refactor += 1;
                if delta > DEGEN_TOL {
                    self.degenerate_streak = 0;
                } else {
                    self.degenerate_streak += 1;
                }
                if self.pivots_since_refactor >= REFACTOR_EVERY {
                    self.refactorize();
                }
                break;
            }
        }
    }

    /// Product-form update after the entering column (with FTRAN image
    /// `alpha`) replaces basis position r.
    fn update_binv(&mut self, alpha: &[f64], r: usize) {
        let m = self.m;
        let ar = alpha[r];
        let row_r: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = alpha[i] / ar;
            if f != 0.0 {
                let row_i = &mut self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    row_i[k] -= f * row_r[k];
                }
            }
        }
        let row = &mut self.binv[r * m..(r + 1) * m];
        for k in 0..m {
            row[k] /= ar;
        }
    }

    /// Current structural point.
    fn extract(&self) -> Vec<f64> {
        (0..self.n_struct)
            .map(|j| {
                if self.pos[j] != usize::MAX {
                    self.x_b[self.pos[j]]
                } else {
                    self.nb_value(j)
                }
            })
            .collect()
    }

    /// Sum of artificial values (basic ones; nonbasic artificials rest at 0).
    fn infeasibility_gap(&self) -> f64 {
        self.artificials
            .iter()
            .map(|&a| {
                if self.pos[a] != usize::MAX {
                    self.x_b[self.pos[a]].max(0.0)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut id = vec![0.0; m * m];
    for i in 0..m {
        id[i * m + i] = 1.0;
    }
    id
}

/// Gauss-Jordan inversion with partial pivoting; None on singularity.
fn invert(mat: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let mut inv = identity(m);
    for col in 0..m {
        let mut piv = col;
        let mut best = mat[col * m + col].abs();
        for r in col + 1..m {
            let v = mat[r * m + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..m {
                mat.swap(col * m + k, piv * m + k);
                inv.swap(col * m + k, piv * m + k);
            }
        }
        let d = mat[col * m + col];
        for k in 0..m {
            mat[col * m + k] /= d;
            inv[col * m + k] /= d;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = mat[r * m + col];
            if f != 0.0 {
                for k in 0..m {
                    mat[r * m + k] -= f * mat[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
    }
    Some(inv)
}

/// Solves the program. Errors only on malformed dimensions; infeasibility,
/// unboundedness, and iteration exhaustion are reported in the status.
pub fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution, SolverError> {
    let m = lp.n_rows();
    let n = lp.n_cols();
    if lp.a.nrows() != m || lp.a.ncols() != n {
        return Err(SolverError::DimensionMismatch(format!(
            "matrix {}x{} vs {} rows, {} cols",
            lp.a.nrows(),
            lp.a.ncols(),
            m,
            n
        )));
    }
    if lp.cost.len() != n || lp.lower.len() != n || lp.upper.len() != n || lp.row_scale.len() != m {
        return Err(SolverError::DimensionMismatch(
            "cost/bounds/row_scale lengths disagree with matrix".into(),
        ));
    }
    if let Some(hint) = &opts.warm_at_upper {
        if hint.len() != n {
            return Err(SolverError::DimensionMismatch(format!(
                "warm-start hint length {} vs {} structural columns",
                hint.len(),
                n
            )));
        }
    }

    let mut w = Worker::new(lp, opts.warm_at_upper.as_deref());

    if !w.artificials.is_empty() {
        let mut cost1 = vec![0.0; w.cols.len()];
        for &a in &w.artificials {
            cost1[a] = 1.0;
        }
        match w.run_phase(&cost1, opts) {
            PhaseEnd::Converged => {}
            // Phase 1 is bounded below by zero, so an unbounded ray cannot
            // occur; map it defensively anyway.
            PhaseEnd::Unbounded | PhaseEnd::IterationLimit => {
                let x = w.extract();
                let resid = lp.max_violation(&x);
                return Ok(LpSolution {
                    status: LpStatus::IterationLimit,
                    x,
                    objective: w.infeasibility_gap(),
                    max_primal_residual: resid,
                    iterations: w.iterations,
                });
            }
        }
        let gap = w.infeasibility_gap();
        if gap > opts.feas_tol {
            let x = w.extract();
            let resid = lp.max_violation(&x);
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x,
                objective: gap,
                max_primal_residual: resid,
                iterations: w.iterations,
            });
        }
        // Lock the artificials out of phase 2.
        for &a in &w.artificials {
            w.upper[a] = 0.0;
        }
        w.degenerate_streak = 0;
    }

    let mut cost2 = vec![0.0; w.cols.len()];
    cost2[..n].copy_from_slice(&lp.cost);
    let end = w.run_phase(&cost2, opts);
    let x = w.extract();
    let resid = lp.max_violation(&x);
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    let status = match end {
        PhaseEnd::Converged => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(LpSolution {
        status,
        x,
        objective,
        max_primal_residual: resid,
        iterations: w.iterations,
    })
}
