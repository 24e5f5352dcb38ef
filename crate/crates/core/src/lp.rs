//! Dense LP and MILP solvers for the outer-approximation master problem:
//! a bounded-variable primal simplex with Bland's anti-cycling rule, and a
//! best-bound branch & bound over its relaxations.

use nalgebra::{DMatrix, DVector};
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

const RC_TOL: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const INT_TOL: f64 = 1e-6;
const GAP_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row {row} has {got} coefficients but the program has {expected} variables")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("program data contains a non-finite coefficient")]
    NonFiniteData,
    #[error("integer variable {0} needs finite bounds for branch and bound")]
    UnboundedInteger(usize),
    #[error("simplex stalled after {0} pivots; numerically degenerate program")]
    Stalled(usize),
}

/// `min c.x  s.t.  rows: a.x <= b,  lower <= x <= upper`, with an
/// integrality mask for MILP solves. Infinite bounds are allowed on
/// continuous variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integrality: Vec<bool>,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for (i, (a, b)) in self.rows.iter().enumerate() {
            if a.len() != n {
                return Err(LpError::RowLength { row: i, expected: n, got: a.len() });
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFiniteData);
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFiniteData);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    /// Best point found (undefined content on infeasible/unbounded).
    pub point: Vec<f64>,
    pub objective: f64,
    /// Branch-and-bound nodes processed (1 when the root already solves it).
    pub node_count: usize,
    /// Global lower bound at termination.
    pub best_bound: f64,
}

/// LP solution with the dual information the simplex produces.
#[derive(Debug, Clone)]
pub struct LpDetail {
    pub result: MilpResult,
    /// One dual per row (zero for rows whose slack is strictly positive).
    pub duals: Vec<f64>,
    /// Reduced costs of the structural variables.
    pub reduced_costs: Vec<f64>,
}

/// Solve the LP relaxation (the integrality mask is ignored).
pub fn solve_lp(lp: &LinearProgram) -> Result<MilpResult, LpError> {
    solve_lp_detail(lp).map(|d| d.result)
}

/// Like [`solve_lp`] but also returns duals and reduced costs.
pub fn solve_lp_detail(lp: &LinearProgram) -> Result<LpDetail, LpError> {
    lp.validate()?;
    Simplex::new(lp, &lp.lower, &lp.upper).solve()
}

/// Time and node caps for MILP solves.
#[derive(Debug, Clone)]
pub struct MilpLimits {
    pub max_nodes: usize,
    pub time_limit: Option<Duration>,
}

impl Default for MilpLimits {
    fn default() -> Self {
        MilpLimits {
            max_nodes: 200_000,
            time_limit: None,
        }
    }
}

// ---------------------------------------------------------------------------
// bounded-variable primal simplex
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeZero,
}

struct Simplex {
    // columns: structural then slack then artificial
    a: DMatrix<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    n_structural: usize,
    n_rows: usize,
    phase1_cost: Vec<f64>,
    n_artificial: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Simplex {
        let n = lp.n_vars();
        let m = lp.rows.len();

        // place structurals at a finite bound (free ones rest at zero)
        let mut x = vec![0.0; n];
        let mut state = vec![VarState::FreeZero; n];
        for j in 0..n {
            if lower[j].is_finite() {
                x[j] = lower[j];
                state[j] = VarState::AtLower;
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                state[j] = VarState::AtUpper;
            }
        }

        // residuals decide slack-vs-artificial per row
        let residual: Vec<f64> = lp
            .rows
            .iter()
            .map(|(a, b)| b - a.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>())
            .collect();
        let n_artificial = residual.iter().filter(|r| **r < 0.0).count();
        let total = n + m + n_artificial;

        let mut a = DMatrix::zeros(m, total);
        for (i, (row, _)) in lp.rows.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                a[(i, j)] = c;
            }
            a[(i, n + i)] = 1.0; // slack
        }

        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        lo.extend(std::iter::repeat(0.0).take(m + n_artificial));
        hi.extend(std::iter::repeat(f64::INFINITY).take(m + n_artificial));

        let mut x_all = x;
        x_all.extend(std::iter::repeat(0.0).take(m + n_artificial));
        let mut state_all = state;
        state_all.extend(std::iter::repeat(VarState::AtLower).take(m + n_artificial));

        let mut basis = Vec::with_capacity(m);
        let mut art = 0usize;
        let mut phase1_cost = vec![0.0; total];
        for (i, &r) in residual.iter().enumerate() {
            if r >= 0.0 {
                basis.push(n + i);
                x_all[n + i] = r;
                state_all[n + i] = VarState::Basic;
            } else {
                let col = n + m + art;
                a[(i, col)] = -1.0;
                basis.push(col);
                x_all[col] = -r;
                state_all[col] = VarState::Basic;
                phase1_cost[col] = 1.0;
                art += 1;
            }
        }

        let mut cost = lp.objective.clone();
        cost.extend(std::iter::repeat(0.0).take(m + n_artificial));

        Simplex {
            a,
            cost,
            lo,
            hi,
            x: x_all,
            state: state_all,
            basis,
            n_structural: n,
            n_rows: m,
            phase1_cost,
            n_artificial,
        }
    }

    fn basis_lu(&self) -> nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn> {
        let m = self.n_rows;
        let mut b = DMatrix::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            b.set_column(i, &self.a.column(j).into_owned());
        }
        b.lu()
    }

    fn duals(&self, cost: &[f64]) -> DVector<f64> {
        let m = self.n_rows;
        if m == 0 {
            return DVector::zeros(0);
        }
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
        let mut bt = DMatrix::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            for r in 0..m {
                bt[(i, r)] = self.a[(r, j)];
            }
        }
        bt.lu().solve(&cb).expect("basis stays nonsingular")
    }

    /// Optimize `cost` from the current basis. Returns false on unbounded.
    fn optimize(&mut self, cost_vec: Vec<f64>, forbid_artificials: bool) -> Result<bool, LpError> {
        let total = self.cost.len();
        let max_pivots = 200 * (total + self.n_rows) + 1000;
        let mut pivots = 0usize;

        loop {
            pivots += 1;
            if pivots > max_pivots {
                return Err(LpError::Stalled(pivots));
            }

            let y = self.duals(&cost_vec);
            // Bland: smallest eligible index enters
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                if forbid_artificials && j >= self.n_structural + self.n_rows {
                    continue;
                }
                let d = cost_vec[j] - y.dot(&self.a.column(j).into_owned());
                let dir = match self.state[j] {
                    VarState::AtLower if d < -RC_TOL => 1.0,
                    VarState::AtUpper if d > RC_TOL => -1.0,
                    VarState::FreeZero if d.abs() > RC_TOL => -d.signum(),
                    _ => continue,
                };
                entering = Some((j, dir));
                break;
            }
            let Some((e, dir)) = entering else {
                return Ok(true); // optimal for this phase
            };

            // direction of basic values as x_e moves by +dir
            let lu = self.basis_lu();
            let w = if self.n_rows == 0 {
                DVector::zeros(0)
            } else {
                lu.solve(&self.a.column(e).into_owned())
                    .expect("basis stays nonsingular")
            };

            // ratio test: entering's own range, then each basic's bound
            let own_range = self.hi[e] - self.lo[e];
            let mut t_best = if own_range.is_finite() { own_range } else { f64::INFINITY };
            let mut leave: Option<usize> = None; // row index; None = bound flip
            for i in 0..self.n_rows {
                let q = self.basis[i];
                let delta = -dir * w[i];
                let t = if delta > RATIO_TOL {
                    if self.hi[q].is_finite() {
                        (self.hi[q] - self.x[q]) / delta
                    } else {
                        continue;
                    }
                } else if delta < -RATIO_TOL {
                    (self.x[q] - self.lo[q]) / (-delta)
                } else {
                    continue;
                };
                let t = t.max(0.0);
                // Bland-style leaving rule: strict improvement, else
                // smallest variable index among ties
                if t < t_best - RATIO_TOL
                    || (t < t_best + RATIO_TOL
                        && leave.map_or(t_best.is_infinite(), |cur| q < self.basis[cur]))
                {
                    t_best = t;
                    leave = Some(i);
                }
            }

            if t_best.is_infinite() {
                return Ok(false); // unbounded ray
            }

            // apply the move
            self.x[e] += dir * t_best;
            for i in 0..self.n_rows {
                let q = self.basis[i];
                self.x[q] -= dir * t_best * w[i];
            }

            match leave {
                None => {
                    // bound flip: no basis change
                    self.state[e] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    // snap to the exact bound to avoid drift
                    self.x[e] = if dir > 0.0 { self.hi[e] } else { self.lo[e] };
                }
                Some(i) => {
                    let q = self.basis[i];
                    let delta = -dir * w[i];
                    self.state[q] = if delta > 0.0 {
                        self.x[q] = self.hi[q];
                        VarState::AtUpper
                    } else {
                        self.x[q] = self.lo[q];
                        VarState::AtLower
                    };
                    self.basis[i] = e;
                    self.state[e] = VarState::Basic;
                }
            }
        }
    }

    fn solve(mut self) -> Result<LpDetail, LpError> {
        // phase 1: drive artificials to zero
        if self.n_artificial > 0 {
            let p1 = self.phase1_cost.clone();
            let ok = self.optimize(p1, false)?;
            debug_assert!(ok, "phase 1 is bounded below by zero");
            let infeas: f64 = (0..self.n_artificial)
                .map(|k| self.x[self.n_structural + self.n_rows + k])
                .sum();
            if infeas > PHASE1_TOL {
                return Ok(self.finish(MilpStatus::Infeasible));
            }
            // pin artificials at zero for phase 2
            for k in 0..self.n_artificial {
                let j = self.n_structural + self.n_rows + k;
                self.hi[j] = 0.0;
            }
        }

        let c = self.cost.clone();
        let bounded = self.optimize(c, true)?;
        if !bounded {
            return Ok(self.finish(MilpStatus::Unbounded));
        }
        Ok(self.finish(MilpStatus::Optimal))
    }

    fn finish(&self, status: MilpStatus) -> LpDetail {
        let n = self.n_structural;
        let point: Vec<f64> = self.x[..n].to_vec();
        let objective = self
            .cost[..n]
            .iter()
            .zip(&point)
            .map(|(c, v)| c * v)
            .sum();
        let y = if status == MilpStatus::Optimal {
            self.duals(&self.cost)
        } else {
            DVector::zeros(self.n_rows)
        };
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| self.cost[j] - y.dot(&self.a.column(j).into_owned()))
            .collect();
        LpDetail {
            result: MilpResult {
                status,
                point,
                objective,
                node_count: 1,
                best_bound: objective,
            },
            duals: y.iter().copied().collect(),
            reduced_costs,
        }
    }
}

// ---------------------------------------------------------------------------
// MILP branch & bound
// ---------------------------------------------------------------------------

struct HeapNode {
    bound: f64,
    depth: usize,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    // max-heap: best node = smallest bound, then deepest (dive), then newest
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.id.cmp(&other.id))
    }
}

fn most_fractional(point: &[f64], integrality: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &is_int) in integrality.iter().enumerate() {
        if !is_int {
            continue;
        }
        let frac = (point[j] - point[j].round()).abs();
        if frac <= INT_TOL {
            continue;
        }
        if best.map_or(true, |(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// Best-bound branch & bound over LP relaxations, branching on the most
/// fractional integer variable. Returns the global optimum within an
/// absolute gap of 1e-7, or the incumbent plus bound on a time/node cap.
pub fn solve_milp(lp: &LinearProgram, limits: &MilpLimits) -> Result<MilpResult, LpError> {
    lp.validate()?;
    for (j, &is_int) in lp.integrality.iter().enumerate() {
        if is_int && (!lp.lower[j].is_finite() || !lp.upper[j].is_finite()) {
            return Err(LpError::UnboundedInteger(j));
        }
    }

    let started = Instant::now();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(HeapNode {
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: next_id,
        lower: lp.lower.clone(),
        upper: lp.upper.clone(),
    });

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut global_bound = f64::NEG_INFINITY;
    let mut root_unbounded = false;

    while let Some(node) = heap.pop() {
        global_bound = global_bound.max(node.bound);
        if let Some((inc_obj, _)) = &incumbent {
            if node.bound >= inc_obj - GAP_TOL {
                continue; // cannot improve
            }
        }
        if nodes >= limits.max_nodes
            || limits.time_limit.is_some_and(|tl| started.elapsed() >= tl)
        {
            let (objective, point) = incumbent.unwrap_or((f64::INFINITY, vec![]));
            return Ok(MilpResult {
                status: MilpStatus::TimeLimit,
                point,
                objective,
                node_count: nodes,
                best_bound: global_bound,
            });
        }

        nodes += 1;
        let debug = std::env::var("MILP_DEBUG").is_ok() && nodes <= 40;
        let sub = LinearProgram {
            objective: lp.objective.clone(),
            rows: lp.rows.clone(),
            lower: node.lower.clone(),
            upper: node.upper.clone(),
            integrality: lp.integrality.clone(),
        };
        let relax = Simplex::new(&sub, &node.lower, &node.upper).solve()?.result;
        if debug {
            eprintln!(
                "node {nodes} depth {} bound {:.6} -> {:?} obj {:.6} point {:?}",
                node.depth, node.bound, relax.status, relax.objective, relax.point
            );
        }
        match relax.status {
            MilpStatus::Infeasible => continue,
            MilpStatus::Unbounded => {
                if node.depth == 0 {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            _ => {}
        }

        if let Some((inc_obj, _)) = &incumbent {
            if relax.objective >= inc_obj - GAP_TOL {
                continue;
            }
        }

        match most_fractional(&relax.point, &lp.integrality) {
            None => {
                // integral: candidate incumbent
                let better = incumbent
                    .as_ref()
                    .map_or(true, |(obj, _)| relax.objective < *obj);
                if better {
                    incumbent = Some((relax.objective, relax.point));
                }
            }
            Some(j) => {
                let v = relax.point[j];
                let mut left = (node.lower.clone(), node.upper.clone());
                left.1[j] = v.floor();
                let mut right = (node.lower.clone(), node.upper.clone());
                right.0[j] = v.ceil();
                for (lo, hi) in [left, right] {
                    if lo[j] > hi[j] {
                        continue;
                    }
                    next_id += 1;
                    heap.push(HeapNode {
                        bound: relax.objective,
                        depth: node.depth + 1,
                        id: next_id,
                        lower: lo,
                        upper: hi,
                    });
                }
            }
        }
    }

    if root_unbounded {
        return Ok(MilpResult {
            status: MilpStatus::Unbounded,
            point: vec![],
            objective: f64::NEG_INFINITY,
            node_count: nodes,
            best_bound: f64::NEG_INFINITY,
        });
    }
    match incumbent {
        Some((objective, point)) => Ok(MilpResult {
            status: MilpStatus::Optimal,
            point,
            objective,
            node_count: nodes,
            best_bound: objective,
        }),
        None => Ok(MilpResult {
            status: MilpStatus::Infeasible,
            point: vec![],
            objective: f64::INFINITY,
            node_count: nodes,
            best_bound: f64::INFINITY,
        }),
    }
}
