//! Embedded MILP solver.
//!
//! LP relaxations are solved by a bounded-variable primal simplex; integrality
//! and indicator constraints are enforced by branch-and-bound. Indicator rows
//! live in the relaxation permanently but their logical variable stays free
//! until a node fixes the binary at its active value.

mod branch;
pub(crate) mod simplex;

use std::time::Duration;

use crate::error::SolveError;
use crate::milp::{MilpModel, Relation, Sense};

pub use branch::{check_feasible, solve_milp, Feasibility};
use simplex::{LpData, LpStatus, Simplex, SimplexTolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Reduced-cost tolerance of the simplex method.
    pub optimality_tol: f64,
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-6,
            integrality_tol: 1e-6,
            optimality_tol: 1e-9,
            node_limit: 1_000_000,
            time_limit: None,
        }
    }
}

impl SolverConfig {
    pub(crate) fn simplex_tolerances(&self) -> SimplexTolerances {
        SimplexTolerances {
            dual: self.optimality_tol,
            ..SimplexTolerances::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatusKind {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatusKind,
    pub objective: Option<f64>,
    pub assignment: Option<Vec<f64>>,
    pub iterations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Feasibility,
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MilpStatus {
    /// Feasibility mode found a witness.
    Feasible,
    /// Optimization mode proved optimality.
    Optimal,
    Infeasible,
    Unbounded,
    /// A node or time limit stopped the search before a verdict.
    Inconclusive(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub wall_time: Duration,
    /// Objective of the root relaxation (optimization mode only).
    pub root_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub witness: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub stats: SolveStats,
}

/// Relaxation of `model` in bounded row form. Linear constraints come first,
/// followed by one row per indicator (free until activated).
pub(crate) fn relaxation(model: &MilpModel) -> LpData {
    let n = model.num_variables();
    let mut lp = LpData {
        num_cols: n,
        col_lo: model.variables().iter().map(|v| v.lower).collect(),
        col_hi: model.variables().iter().map(|v| v.upper).collect(),
        cost: vec![0.0; n],
        ..Default::default()
    };
    let mut push = |terms: &[(f64, crate::milp::VarId)], lo: f64, hi: f64| {
        lp.rows.push(terms.iter().map(|&(c, v)| (v.0, c)).collect());
        lp.row_lo.push(lo);
        lp.row_hi.push(hi);
    };
    for c in model.constraints() {
        let (lo, hi) = row_range(c.relation, c.rhs);
        push(&c.terms, lo, hi);
    }
    for ind in model.indicators() {
        push(&ind.implied.terms, f64::NEG_INFINITY, f64::INFINITY);
    }
    lp
}

pub(crate) fn row_range(rel: Relation, rhs: f64) -> (f64, f64) {
    match rel {
        Relation::Le => (f64::NEG_INFINITY, rhs),
        Relation::Ge => (rhs, f64::INFINITY),
        Relation::Eq => (rhs, rhs),
    }
}

/// Minimization cost vector for the model objective under `sense`.
pub(crate) fn cost_vector(model: &MilpModel, sense: Option<Sense>) -> Vec<f64> {
    let mut cost = vec![0.0; model.num_variables()];
    if let (Some(obj), Some(sense)) = (model.objective(), sense) {
        let sign = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for &(c, v) in &obj.terms {
            cost[v.0] += sign * c;
        }
    }
    cost
}

/// Solves the LP relaxation of `model` using its objective (if any).
///
/// Integrality is dropped. Indicator implications are included only when the
/// bounds of their binary pin it to the active value.
pub fn solve_lp(model: &MilpModel, config: &SolverConfig) -> Result<LpOutcome, SolveError> {
    let mut lp = relaxation(model);
    let sense = model.objective().map(|o| o.sense);
    lp.cost = cost_vector(model, sense);
    let first_indicator_row = model.num_constraints();
    let mut simplex = Simplex::new(&lp, config.simplex_tolerances());
    for (k, ind) in model.indicators().enumerate() {
        let var = model.variable(ind.binary);
        let a = ind.active_value();
        if var.lower == a && var.upper == a {
            let (lo, hi) = row_range(ind.implied.relation, ind.implied.rhs);
            simplex.set_row_bounds(first_indicator_row + k, lo, hi);
        }
    }
    let status = simplex.solve()?;
    let iterations = simplex.iterations;
    Ok(match status {
        LpStatus::Optimal => {
            let x = simplex.solution();
            let objective = model.objective().map(|o| o.value(&x)).unwrap_or(0.0);
            LpOutcome {
                status: LpStatusKind::Optimal,
                objective: Some(objective),
                assignment: Some(x),
                iterations,
            }
        }
        LpStatus::Cutoff => unreachable!("no cutoff requested"),
        LpStatus::Infeasible => LpOutcome {
            status: LpStatusKind::Infeasible,
            objective: None,
            assignment: None,
            iterations,
        },
        LpStatus::Unbounded => LpOutcome {
            status: LpStatusKind::Unbounded,
            objective: None,
            assignment: None,
            iterations,
        },
    })
}
