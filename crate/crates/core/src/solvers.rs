//! The two competing MINLP algorithms plus an enumeration oracle.
//!
//! Branch & bound solves the continuous relaxation at every node and
//! branches on the most fractional discrete variable with a floor/ceiling
//! bound split. Outer approximation alternates between a MILP master built
//! from accumulated hyperplane cuts (lower bounds) and fixed-assignment NLP
//! subproblems (upper bounds and fresh cuts). The brute solver enumerates
//! every discrete assignment and solves one NLP each; it exists to check
//! the other two.

use crate::expr::{grad, Expr};
use crate::lp::{solve_milp, LinearProgram, LpError, MilpLimits, MilpStatus};
use crate::model::Problem;
use crate::nlp::{solve_relaxation, NlpError, NlpOptions, NlpResult, NlpStatus};
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Absolute pruning tolerance for branch & bound.
const BNB_PRUNE_TOL: f64 = 1e-6;
/// Relative OA termination tolerance (shared scale with B&B pruning).
const OA_REL_TOL: f64 = 1e-5;
/// Safety margin subtracted from barrier objectives used as lower bounds.
const BOUND_SAFETY: f64 = 1e-7;
/// Discrete assignments the brute solver refuses to enumerate past.
const BRUTE_CAP: u128 = 1 << 16;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{location} is not provably convex; pass the unknown-curvature override to solve anyway (no optimality guarantee)")]
    NonconvexBody { location: String },
    #[error("discrete variable `{0}` needs finite bounds")]
    UnboundedDiscrete(String),
    #[error("{count} discrete assignments exceed the enumeration cap of {cap}")]
    TooManyAssignments { count: u128, cap: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AlgorithmId {
    Oa,
    Bb,
    Brute,
}

impl std::fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlgorithmId::Oa => write!(f, "OA"),
            AlgorithmId::Bb => write!(f, "BB"),
            AlgorithmId::Brute => write!(f, "brute"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeLimit,
}

/// One row of the bound trace: best-known bounds after an iteration
/// (a processed node for B&B, a master/subproblem round for OA).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub algorithm: AlgorithmId,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub point: Option<Vec<f64>>,
    pub wall_seconds: f64,
    /// Best-known lower/upper bounds per iteration; lower entries are
    /// nondecreasing and upper entries nonincreasing by construction.
    pub trace: Vec<TracePoint>,
    /// Nodes processed (B&B/brute) or master iterations (OA).
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub time_limit: Option<Duration>,
    pub max_bnb_nodes: usize,
    pub max_oa_iterations: usize,
    /// Accept bodies the curvature classifier cannot prove convex. Both
    /// algorithms lose their optimality guarantee in that case.
    pub allow_unknown_curvature: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit: None,
            max_bnb_nodes: 100_000,
            max_oa_iterations: 500,
            allow_unknown_curvature: false,
        }
    }
}

/// A supporting hyperplane row over `(variables..., eta)`.
#[derive(Debug, Clone)]
pub struct Cut {
    /// Coefficients over the problem variables followed by eta; the row
    /// reads `coefficients . (x, eta) <= rhs`.
    pub coefficients: Vec<f64>,
    pub rhs: f64,
    /// Point the cut was generated at (full variable space).
    pub point: Vec<f64>,
    /// Function value at the generation point (objective or residual).
    pub value: f64,
}

impl Cut {
    /// For an objective cut, the eta the cut forces at `point`.
    pub fn eta_at(&self, point: &[f64]) -> f64 {
        let n = point.len();
        let dot: f64 = self.coefficients[..n]
            .iter()
            .zip(point)
            .map(|(c, v)| c * v)
            .sum();
        dot - self.rhs
    }
}

/// Hyperplane cuts partitioned by origin.
#[derive(Debug, Clone, Default)]
pub struct CutSet {
    pub objective_cuts: Vec<Cut>,
    pub constraint_cuts: Vec<Cut>,
}

impl CutSet {
    fn extend(&mut self, other: CutSet) {
        self.objective_cuts.extend(other.objective_cuts);
        self.constraint_cuts.extend(other.constraint_cuts);
    }

    pub fn len(&self) -> usize {
        self.objective_cuts.len() + self.constraint_cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Extra information the OA loop produces, kept out of the shared report.
#[derive(Debug, Clone, Default)]
pub struct OaDiagnostics {
    /// Discrete assignments in subproblem order.
    pub visited_assignments: Vec<Vec<i64>>,
    /// Every cut generated during the run.
    pub cuts: CutSet,
}

fn check_solvable(p: &Problem, limits: &SolveLimits) -> Result<(), SolveError> {
    if !limits.allow_unknown_curvature {
        if let Some((location, _)) = p.first_nonconvex_body() {
            return Err(SolveError::NonconvexBody { location });
        }
    }
    for idx in p.discrete_indices() {
        let v = &p.variables[idx];
        let bounded = v.effective_lower().is_some_and(f64::is_finite)
            && v.effective_upper().is_some_and(f64::is_finite);
        if !bounded {
            return Err(SolveError::UnboundedDiscrete(v.name.clone()));
        }
    }
    Ok(())
}

fn effective_box(p: &Problem) -> (Vec<f64>, Vec<f64>) {
    let lower = p
        .variables
        .iter()
        .map(|v| v.effective_lower().unwrap_or(f64::NEG_INFINITY))
        .collect();
    let upper = p
        .variables
        .iter()
        .map(|v| v.effective_upper().unwrap_or(f64::INFINITY))
        .collect();
    (lower, upper)
}

/// A point is usable as an incumbent when it satisfies constraints and
/// bounds to tolerance; barrier iterates always do, uncertified ones are
/// re-checked here.
fn point_is_feasible(p: &Problem, point: &[f64]) -> bool {
    let ok_constraints = p
        .constraints
        .iter()
        .all(|c| c.residual(point).map_or(false, |r| r <= 1e-6));
    let ok_bounds = p.variables.iter().zip(point).all(|(v, &x)| {
        v.effective_lower().map_or(true, |l| x >= l - 1e-6)
            && v.effective_upper().map_or(true, |u| x <= u + 1e-6)
    });
    ok_constraints && ok_bounds
}

fn over_time(started: Instant, limits: &SolveLimits) -> bool {
    limits
        .time_limit
        .is_some_and(|tl| started.elapsed() >= tl)
}

// ---------------------------------------------------------------------------
// branch & bound
// ---------------------------------------------------------------------------

struct BnbNode {
    bound: f64,
    depth: usize,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start: Option<Vec<f64>>,
}

impl PartialEq for BnbNode {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for BnbNode {}
impl PartialOrd for BnbNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for BnbNode {
    // max-heap: smallest bound first, then deepest, then newest
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.id.cmp(&other.id))
    }
}

fn most_fractional_discrete(point: &[f64], discrete: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &j in discrete {
        let frac = (point[j] - point[j].round()).abs();
        if frac <= 1e-6 {
            continue;
        }
        if best.map_or(true, |(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best
}

/// NLP-based branch & bound over the discrete variables.
pub fn bnb_solve(p: &Problem, limits: &SolveLimits) -> Result<SolveReport, SolveError> {
    let started = Instant::now();
    check_solvable(p, limits)?;
    let discrete = p.discrete_indices();
    let (root_lower, root_upper) = effective_box(p);
    let nlp_opts = NlpOptions::default();

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(BnbNode {
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: 0,
        lower: root_lower,
        upper: root_upper,
        start: None,
    });

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut lower_bound = f64::NEG_INFINITY;
    let mut nodes = 0usize;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if over_time(started, limits) || nodes >= limits.max_bnb_nodes {
            hit_limit = true;
            break;
        }
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - BNB_PRUNE_TOL {
                continue;
            }
        }
        nodes += 1;

        let relax = solve_relaxation(
            p,
            &node.lower,
            &node.upper,
            node.start.as_deref(),
            &nlp_opts,
        )?;

        match relax.status {
            NlpStatus::Infeasible => {}
            NlpStatus::Optimal | NlpStatus::IterationLimit => {
                // a converged barrier objective under-approximates the node
                // optimum only after the safety margin; an unconverged one
                // keeps the parent's bound
                let node_bound = if relax.status == NlpStatus::Optimal {
                    relax.objective - BOUND_SAFETY
                } else {
                    node.bound
                };
                let dominated = incumbent
                    .as_ref()
                    .is_some_and(|(inc, _)| node_bound >= inc - BNB_PRUNE_TOL);
                if !dominated {
                    match most_fractional_discrete(&relax.point, &discrete) {
                        None => {
                            // integral point: feasible for the MINLP
                            let better = incumbent
                                .as_ref()
                                .map_or(true, |(inc, _)| relax.objective < *inc);
                            if better {
                                let mut point = relax.point.clone();
                                for &j in &discrete {
                                    point[j] = point[j].round();
                                }
                                incumbent = Some((relax.objective, point));
                            }
                        }
                        Some((j, _)) => {
                            let v = relax.point[j];
                            for (lo_j, hi_j) in [(None, Some(v.floor())), (Some(v.ceil()), None)] {
                                let mut lower = node.lower.clone();
                                let mut upper = node.upper.clone();
                                if let Some(l) = lo_j {
                                    lower[j] = l;
                                }
                                if let Some(h) = hi_j {
                                    upper[j] = h;
                                }
                                if lower[j] > upper[j] {
                                    continue;
                                }
                                next_id += 1;
                                let mut start = relax.point.clone();
                                start[j] = start[j].clamp(lower[j], upper[j]);
                                heap.push(BnbNode {
                                    bound: node_bound,
                                    depth: node.depth + 1,
                                    id: next_id,
                                    lower,
                                    upper,
                                    start: Some(start),
                                });
                            }
                        }
                    }
                }
            }
        }

        let open_min = heap
            .iter()
            .map(|n| n.bound)
            .fold(f64::INFINITY, f64::min)
            .min(incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o));
        lower_bound = lower_bound.max(open_min);
        trace.push(TracePoint {
            iteration: nodes,
            lower: lower_bound,
            upper: incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o),
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    let wall_seconds = started.elapsed().as_secs_f64();
    let (status, objective, point) = match (&incumbent, hit_limit) {
        (Some((obj, pt)), false) => (SolveStatus::Optimal, Some(*obj), Some(pt.clone())),
        (Some((obj, pt)), true) => (SolveStatus::TimeLimit, Some(*obj), Some(pt.clone())),
        (None, true) => (SolveStatus::TimeLimit, None, None),
        (None, false) => (SolveStatus::Infeasible, None, None),
    };
    Ok(SolveReport {
        algorithm: AlgorithmId::Bb,
        status,
        objective,
        point,
        wall_seconds,
        trace,
        iterations: nodes,
    })
}

// ---------------------------------------------------------------------------
// outer approximation
// ---------------------------------------------------------------------------

/// Merge a continuous part and a discrete assignment back into the full
/// variable order.
pub fn merge_point(p: &Problem, x_continuous: &[f64], y_discrete: &[i64]) -> Vec<f64> {
    let mut out = vec![0.0; p.n_vars()];
    let mut xi = 0usize;
    let mut yi = 0usize;
    for (k, v) in p.variables.iter().enumerate() {
        if v.domain.is_discrete() {
            out[k] = y_discrete[yi] as f64;
            yi += 1;
        } else {
            out[k] = x_continuous[xi];
            xi += 1;
        }
    }
    out
}

/// Fixed-assignment NLP subproblem: `p` with the discrete variables pinned
/// to `y_fixed`. On infeasible assignments the slack-minimization point is
/// returned, flagged infeasible, so feasibility cuts can be generated.
pub fn oa_subproblem(p: &Problem, y_fixed: &[i64]) -> Result<NlpResult, SolveError> {
    let (mut lower, mut upper) = effective_box(p);
    for (slot, &j) in p.discrete_indices().iter().enumerate() {
        let v = y_fixed[slot] as f64;
        lower[j] = v;
        upper[j] = v;
    }
    Ok(solve_relaxation(p, &lower, &upper, None, &NlpOptions::default())?)
}

/// Hyperplane cuts at an arbitrary point of the full variable space: one
/// objective cut and one cut per constraint.
pub fn cuts_at_point(p: &Problem, point: &[f64]) -> Result<CutSet, SolveError> {
    let make = |e: &Expr, shift: f64, eta: f64| -> Result<Cut, SolveError> {
        let value = crate::expr::eval(e, point).map_err(NlpError::from)? - shift;
        let g = grad(e, point).map_err(NlpError::from)?;
        let dot: f64 = g.iter().zip(point).map(|(c, v)| c * v).sum();
        let mut coefficients = g;
        coefficients.push(eta);
        Ok(Cut {
            coefficients,
            rhs: dot - value,
            point: point.to_vec(),
            value,
        })
    };

    let mut cuts = CutSet::default();
    // f(z) >= f(z0) + grad.(z - z0)  =>  grad.z - eta <= grad.z0 - f(z0)
    cuts.objective_cuts.push(make(&p.objective, 0.0, -1.0)?);
    // g(z0) + grad.(z - z0) <= 0     =>  grad.z <= grad.z0 - g(z0)
    for c in &p.constraints {
        cuts.constraint_cuts.push(make(&c.body, c.rhs, 0.0)?);
    }
    Ok(cuts)
}

/// Cuts at a (continuous part, discrete assignment) pair.
pub fn oa_cuts(p: &Problem, x_bar: &[f64], y_bar: &[i64]) -> Result<CutSet, SolveError> {
    let point = merge_point(p, x_bar, y_bar);
    cuts_at_point(p, &point)
}

fn rounded_assignment(p: &Problem, point: &[f64]) -> Vec<i64> {
    p.discrete_indices()
        .iter()
        .map(|&j| {
            let v = &p.variables[j];
            let lo = v.effective_lower().unwrap();
            let hi = v.effective_upper().unwrap();
            point[j].round().clamp(lo, hi) as i64
        })
        .collect()
}

fn master_program(p: &Problem, cuts: &CutSet) -> LinearProgram {
    let n = p.n_vars();
    let (mut lower, mut upper) = effective_box(p);
    lower.push(f64::NEG_INFINITY); // eta
    upper.push(f64::INFINITY);
    let mut integrality: Vec<bool> = p.variables.iter().map(|v| v.domain.is_discrete()).collect();
    integrality.push(false);

    let mut objective = vec![0.0; n];
    objective.push(1.0); // min eta

    let rows = cuts
        .objective_cuts
        .iter()
        .chain(&cuts.constraint_cuts)
        .map(|c| (c.coefficients.clone(), c.rhs))
        .collect();

    LinearProgram {
        objective,
        rows,
        lower,
        upper,
        integrality,
    }
}

/// Outer approximation. See [`oa_solve_with_diagnostics`] for the variant
/// that also returns the cut pool and visited assignments.
pub fn oa_solve(p: &Problem, limits: &SolveLimits) -> Result<SolveReport, SolveError> {
    oa_solve_with_diagnostics(p, limits).map(|(report, _)| report)
}

pub fn oa_solve_with_diagnostics(
    p: &Problem,
    limits: &SolveLimits,
) -> Result<(SolveReport, OaDiagnostics), SolveError> {
    let started = Instant::now();
    check_solvable(p, limits)?;
    let (lower, upper) = effective_box(p);
    let nlp_opts = NlpOptions::default();
    let mut diag = OaDiagnostics::default();
    let mut trace: Vec<TracePoint> = Vec::new();

    let finish = |status: SolveStatus,
                  incumbent: &Option<(f64, Vec<f64>)>,
                  trace: Vec<TracePoint>,
                  iterations: usize,
                  diag: OaDiagnostics,
                  started: Instant| {
        let (objective, point) = match incumbent {
            Some((obj, pt)) => (Some(*obj), Some(pt.clone())),
            None => (None, None),
        };
        Ok((
            SolveReport {
                algorithm: AlgorithmId::Oa,
                status,
                objective,
                point,
                wall_seconds: started.elapsed().as_secs_f64(),
                trace,
                iterations,
            },
            diag,
        ))
    };

    // continuous relaxation: seed cuts, the initial assignment, and a valid
    // global lower bound
    let relax = solve_relaxation(p, &lower, &upper, None, &nlp_opts)?;
    if relax.status == NlpStatus::Infeasible {
        return finish(SolveStatus::Infeasible, &None, trace, 0, diag, started);
    }
    let mut cuts = CutSet::default();
    cuts.extend(cuts_at_point(p, &relax.point)?);
    let mut lower_bound = if relax.status == NlpStatus::Optimal {
        relax.objective - BOUND_SAFETY
    } else {
        f64::NEG_INFINITY
    };
    let mut upper_bound = f64::INFINITY;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;

    // subproblem runner: updates incumbent and the cut pool
    let visit = |assignment: Vec<i64>,
                     cuts: &mut CutSet,
                     incumbent: &mut Option<(f64, Vec<f64>)>,
                     upper_bound: &mut f64,
                     diag: &mut OaDiagnostics|
     -> Result<(), SolveError> {
        let sub = oa_subproblem(p, &assignment)?;
        let point = sub.point.clone();
        let certified = sub.status == NlpStatus::Optimal
            || (sub.status == NlpStatus::IterationLimit && point_is_feasible(p, &point));
        if certified {
            // cuts at any point of a convex function are valid; a feasible
            // point's objective is a valid upper bound even uncertified
            let fresh = cuts_at_point(p, &point)?;
            if sub.objective < *upper_bound {
                *upper_bound = sub.objective;
                *incumbent = Some((sub.objective, point));
            }
            cuts.extend(fresh);
        } else {
            // feasibility cuts from the slack-minimization point
            let fresh = cuts_at_point(p, &point)?;
            cuts.constraint_cuts.extend(fresh.constraint_cuts);
        }
        diag.visited_assignments.push(assignment);
        Ok(())
    };

    let initial = rounded_assignment(p, &relax.point);
    visit(initial, &mut cuts, &mut incumbent, &mut upper_bound, &mut diag)?;

    let milp_limits = MilpLimits {
        time_limit: limits.time_limit.map(|tl| tl.saturating_sub(started.elapsed())),
        ..MilpLimits::default()
    };

    let mut iterations = 0usize;
    loop {
        if iterations >= limits.max_oa_iterations {
            diag.cuts = cuts;
            return finish(SolveStatus::TimeLimit, &incumbent, trace, iterations, diag, started);
        }
        if over_time(started, limits) {
            diag.cuts = cuts;
            return finish(SolveStatus::TimeLimit, &incumbent, trace, iterations, diag, started);
        }
        iterations += 1;

        let master = master_program(p, &cuts);
        let msol = solve_milp(&master, &milp_limits)?;
        match msol.status {
            MilpStatus::Infeasible => {
                // valid cuts exclude nothing feasible: the instance itself
                // is infeasible
                debug_assert!(incumbent.is_none());
                diag.cuts = cuts;
                return finish(SolveStatus::Infeasible, &None, trace, iterations, diag, started);
            }
            MilpStatus::Unbounded | MilpStatus::TimeLimit => {
                diag.cuts = cuts;
                return finish(SolveStatus::TimeLimit, &incumbent, trace, iterations, diag, started);
            }
            MilpStatus::Optimal => {}
        }
        lower_bound = lower_bound.max(msol.objective);
        trace.push(TracePoint {
            iteration: iterations,
            lower: lower_bound,
            upper: upper_bound,
            seconds: started.elapsed().as_secs_f64(),
        });

        if lower_bound >= upper_bound - OA_REL_TOL * upper_bound.abs().max(1.0) {
            diag.cuts = cuts;
            let status = if incumbent.is_some() {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            };
            return finish(status, &incumbent, trace, iterations, diag, started);
        }

        let assignment = rounded_assignment(p, &msol.point);
        visit(assignment, &mut cuts, &mut incumbent, &mut upper_bound, &mut diag)?;

        // refresh the trace row with the post-subproblem upper bound
        if let Some(last) = trace.last_mut() {
            last.upper = upper_bound;
            last.seconds = started.elapsed().as_secs_f64();
        }
    }
}

// ---------------------------------------------------------------------------
// brute-force oracle
// ---------------------------------------------------------------------------

/// Enumerate every discrete assignment (up to `2^16`), solve one NLP each,
/// and return the best. Independent of both real algorithms.
pub fn brute_solve(p: &Problem, limits: &SolveLimits) -> Result<SolveReport, SolveError> {
    let started = Instant::now();
    check_solvable(p, limits)?;
    let discrete = p.discrete_indices();

    let ranges: Vec<(i64, i64)> = discrete
        .iter()
        .map(|&j| {
            let v = &p.variables[j];
            let lo = v.effective_lower().unwrap().ceil() as i64;
            let hi = v.effective_upper().unwrap().floor() as i64;
            (lo, hi)
        })
        .collect();
    let count: u128 = ranges
        .iter()
        .map(|(lo, hi)| (hi - lo + 1).max(0) as u128)
        .product();
    if count > BRUTE_CAP {
        return Err(SolveError::TooManyAssignments { count, cap: BRUTE_CAP });
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut assignment: Vec<i64> = ranges.iter().map(|(lo, _)| *lo).collect();
    let mut warm: Option<Vec<f64>> = None;
    let mut solved = 0usize;
    let mut hit_limit = false;

    'enumerate: loop {
        if over_time(started, limits) {
            hit_limit = true;
            break;
        }
        let (mut lower, mut upper) = effective_box(p);
        for (slot, &j) in discrete.iter().enumerate() {
            lower[j] = assignment[slot] as f64;
            upper[j] = assignment[slot] as f64;
        }
        let sub = solve_relaxation(p, &lower, &upper, warm.as_deref(), &NlpOptions::default())?;
        solved += 1;
        let usable = match sub.status {
            NlpStatus::Optimal => true,
            NlpStatus::IterationLimit => point_is_feasible(p, &sub.point),
            NlpStatus::Infeasible => false,
        };
        if usable {
            warm = Some(sub.point.clone());
            let better = best.as_ref().map_or(true, |(obj, _)| sub.objective < *obj);
            if better {
                let mut point = sub.point.clone();
                for (slot, &j) in discrete.iter().enumerate() {
                    point[j] = assignment[slot] as f64;
                }
                best = Some((sub.objective, point));
            }
        }

        // odometer increment
        for slot in 0..ranges.len() {
            assignment[slot] += 1;
            if assignment[slot] <= ranges[slot].1 {
                continue 'enumerate;
            }
            assignment[slot] = ranges[slot].0;
        }
        break;
    }

    let wall_seconds = started.elapsed().as_secs_f64();
    let (status, objective, point) = match (&best, hit_limit) {
        (Some((obj, pt)), false) => (SolveStatus::Optimal, Some(*obj), Some(pt.clone())),
        (Some((obj, pt)), true) => (SolveStatus::TimeLimit, Some(*obj), Some(pt.clone())),
        (None, true) => (SolveStatus::TimeLimit, None, None),
        (None, false) => (SolveStatus::Infeasible, None, None),
    };
    let trace = vec![TracePoint {
        iteration: solved,
        lower: objective.unwrap_or(f64::INFINITY),
        upper: objective.unwrap_or(f64::INFINITY),
        seconds: wall_seconds,
    }];
    Ok(SolveReport {
        algorithm: AlgorithmId::Brute,
        status,
        objective,
        point,
        wall_seconds,
        trace,
        iterations: solved,
    })
}
