use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::{LpData, LpStatus, Simplex};
use super::{
    cost_vector, relaxation, row_range, MilpOutcome, MilpStatus, Mode, SolveStats, SolverConfig,
};
use crate::error::SolveError;
use crate::milp::{LinearConstraint, MilpModel, Relation, Sense, VarKind};

/// Result of a satisfiability query.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Sat(Vec<f64>),
    Unsat,
}

impl Feasibility {
    pub fn is_sat(&self) -> bool {
        matches!(self, Feasibility::Sat(_))
    }
}

/// Decides satisfiability of `model` (its objective is ignored).
///
/// `Unsat` is only returned after the whole search tree has been fathomed;
/// hitting a limit yields [`SolveError::Inconclusive`].
pub fn check_feasible(model: &MilpModel, config: &SolverConfig) -> Result<Feasibility, SolveError> {
    let out = solve_milp(model, Mode::Feasibility, config)?;
    match out.status {
        MilpStatus::Feasible | MilpStatus::Optimal => {
            Ok(Feasibility::Sat(out.witness.expect("witness")))
        }
        MilpStatus::Infeasible => Ok(Feasibility::Unsat),
        MilpStatus::Unbounded => Err(SolveError::Numerical(
            "feasibility query reported unbounded".into(),
        )),
        MilpStatus::Inconclusive(why) => Err(SolveError::Inconclusive(why)),
    }
}

struct IndicatorRow {
    row: usize,
    /// Row bounds while the implication is not enforced.
    idle: (f64, f64),
    binary: usize,
    active: f64,
    lo: f64,
    hi: f64,
    implied: LinearConstraint,
}

#[derive(Debug, Clone)]
struct Node {
    /// Bounds of the integer columns, aligned with `Search::int_cols`.
    bounds: Vec<(f64, f64)>,
    /// Relaxation objective of the parent (minimization form).
    estimate: f64,
    depth: u32,
    seq: u64,
}

/// Heap entry ordered so that `BinaryHeap::pop` yields the lowest estimate,
/// then the deepest node, then the oldest.
struct Ranked(Node);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .estimate
            .total_cmp(&self.0.estimate)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

enum Frontier {
    Depth(Vec<Node>),
    Best(BinaryHeap<Ranked>),
}

impl Frontier {
    fn push(&mut self, node: Node) {
        match self {
            Frontier::Depth(stack) => stack.push(node),
            Frontier::Best(heap) => heap.push(Ranked(node)),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Depth(stack) => stack.pop(),
            Frontier::Best(heap) => heap.pop().map(|r| r.0),
        }
    }
}

enum Visit {
    Pruned,
    Integral {
        x: Vec<f64>,
        cost: f64,
    },
    Branch {
        col: usize,
        value: f64,
        up_first: bool,
        cost: f64,
    },
    Unbounded,
}

struct Search<'a> {
    model: &'a MilpModel,
    config: &'a SolverConfig,
    simplex: Simplex,
    int_cols: Vec<usize>,
    int_pos: Vec<Option<usize>>,
    indicators: Vec<IndicatorRow>,
    cost: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(model: &'a MilpModel, config: &'a SolverConfig, sense: Option<Sense>) -> Self {
        let mut lp = relaxation(model);
        lp.cost = cost_vector(model, sense);
        add_indicator_envelopes(model, &mut lp);
        let activity = box_rows(&mut lp);
        let cost = lp.cost.clone();
        let simplex = Simplex::new(&lp, config.simplex_tolerances());
        let int_cols: Vec<usize> = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind != VarKind::Continuous)
            .map(|(j, _)| j)
            .collect();
        let mut int_pos = vec![None; model.num_variables()];
        for (k, &j) in int_cols.iter().enumerate() {
            int_pos[j] = Some(k);
        }
        let indicators = model
            .indicators()
            .enumerate()
            .map(|(k, ind)| {
                let (lo, hi) = row_range(ind.implied.relation, ind.implied.rhs);
                let row = model.num_constraints() + k;
                let idle = activity[row];
                // Enforced range, boxed by the activity range where that is tighter.
                let (lo, hi) = if lo.max(idle.0) <= hi.min(idle.1) {
                    (lo.max(idle.0), hi.min(idle.1))
                } else {
                    (lo, hi)
                };
                IndicatorRow {
                    row,
                    idle,
                    binary: ind.binary.0,
                    active: ind.active_value(),
                    lo,
                    hi,
                    implied: ind.implied.clone(),
                }
            })
            .collect();
        Search {
            model,
            config,
            simplex,
            int_cols,
            int_pos,
            indicators,
            cost,
        }
    }

    fn root_bounds(&self) -> Option<Vec<(f64, f64)>> {
        let tol = self.config.integrality_tol;
        let mut bounds = Vec::with_capacity(self.int_cols.len());
        for &j in &self.int_cols {
            let v = self.model.variable(crate::milp::VarId(j));
            let lo = (v.lower - tol).ceil();
            let hi = (v.upper + tol).floor();
            if lo > hi {
                return None;
            }
            bounds.push((lo, hi));
        }
        Some(bounds)
    }

    fn apply(&mut self, bounds: &[(f64, f64)]) {
        for (k, &j) in self.int_cols.iter().enumerate() {
            let (lo, hi) = bounds[k];
            self.simplex.set_col_bounds(j, lo, hi);
        }
        for ind in &self.indicators {
            let (lo, hi) = bounds[self.int_pos[ind.binary].expect("indicator binary is integral")];
            if lo == ind.active && hi == ind.active {
                self.simplex.set_row_bounds(ind.row, ind.lo, ind.hi);
            } else {
                self.simplex.set_row_bounds(ind.row, ind.idle.0, ind.idle.1);
            }
        }
    }

    fn cost_of(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn visit(&mut self, node: &Node, cutoff: Option<f64>) -> Result<Visit, SolveError> {
        self.apply(&node.bounds);
        match self.simplex.solve_with_cutoff(cutoff)? {
            LpStatus::Infeasible | LpStatus::Cutoff => return Ok(Visit::Pruned),
            LpStatus::Unbounded => return Ok(Visit::Unbounded),
            LpStatus::Optimal => {}
        }
        let cost = self.simplex.objective();
        if let Some(c) = cutoff {
            if cost >= c {
                return Ok(Visit::Pruned);
            }
        }
        let x = self.simplex.solution();
        let itol = self.config.integrality_tol;
        let ftol = self.config.feasibility_tol;

        // Indicator violations take priority over fractionality.
        let mut pick: Option<(usize, f64)> = None;
        let mut worst = ftol;
        for ind in &self.indicators {
            let (lo, hi) = node.bounds[self.int_pos[ind.binary].expect("binary")];
            if lo == hi {
                continue;
            }
            let b = x[ind.binary];
            if (b - ind.active).abs() <= itol {
                let act = ind.implied.lhs(&x);
                let viol = (ind.lo - act).max(act - ind.hi);
                if viol > worst {
                    worst = viol;
                    pick = Some((ind.binary, ind.active));
                }
            }
        }
        if let Some((col, active)) = pick {
            return Ok(Visit::Branch {
                col,
                value: active,
                up_first: active > 0.5,
                cost,
            });
        }

        let mut best_dist = itol;
        let mut frac: Option<(usize, f64)> = None;
        for &j in &self.int_cols {
            let v = x[j];
            let dist = (v - v.round()).abs();
            if dist > best_dist {
                best_dist = dist;
                frac = Some((j, v));
            }
        }
        if let Some((col, value)) = frac {
            return Ok(Visit::Branch {
                col,
                value,
                up_first: value - value.floor() >= 0.5,
                cost,
            });
        }

        let x = self.polish(node, x);
        let cost = self.cost_of(&x);
        Ok(Visit::Integral { x, cost })
    }

    /// Re-solves with integer columns pinned to their rounded values so the
    /// witness is exactly integral; keeps the original point if that fails.
    fn polish(&mut self, node: &Node, x: Vec<f64>) -> Vec<f64> {
        let exact = self.int_cols.iter().all(|&j| x[j] == x[j].round());
        let mut out = if exact {
            x
        } else {
            let pinned: Vec<(f64, f64)> = self
                .int_cols
                .iter()
                .map(|&j| (x[j].round(), x[j].round()))
                .collect();
            self.apply(&pinned);
            let polished = match self.simplex.solve() {
                Ok(LpStatus::Optimal) => {
                    let y = self.simplex.solution();
                    (self.model.max_violation(&y) <= self.model.max_violation(&x)).then_some(y)
                }
                _ => None,
            };
            self.apply(&node.bounds);
            polished.unwrap_or(x)
        };
        for &j in &self.int_cols {
            out[j] = out[j].round();
        }
        out
    }
}

/// Replaces infinite row bounds by the row's activity range under the column
/// bounds, which is redundant but keeps every logical variable boxed so that
/// the dual simplex can always restore dual feasibility by bound flips.
/// Node bounds only narrow the columns, so the ranges stay valid throughout
/// the search. Returns each row's activity range.
fn box_rows(lp: &mut LpData) -> Vec<(f64, f64)> {
    let mut ranges = Vec::with_capacity(lp.rows.len());
    for (i, row) in lp.rows.iter().enumerate() {
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(j, a) in row.iter().filter(|&&(_, a)| a != 0.0) {
            let (l, h) = (lp.col_lo[j], lp.col_hi[j]);
            let (low, high) = if a >= 0.0 {
                (a * l, a * h)
            } else {
                (a * h, a * l)
            };
            lo += low;
            hi += high;
        }
        if lp.row_lo[i] == f64::NEG_INFINITY && lo.is_finite() {
            lp.row_lo[i] = lo.min(lp.row_hi[i]);
        }
        if lp.row_hi[i] == f64::INFINITY && hi.is_finite() {
            lp.row_hi[i] = hi.max(lp.row_lo[i]);
        }
        ranges.push((lo, hi));
    }
    ranges
}

/// Appends, for every indicator whose implied row has finite activity bounds,
/// the row relaxed by its activity range on the inactive side:
/// `a·x ≤ rhs + M·|z − active|`. The rows are valid for every integral
/// assignment, so they only strengthen node relaxations; the implication itself
/// is still enforced by branching.
fn add_indicator_envelopes(model: &MilpModel, lp: &mut LpData) {
    for ind in model.indicators() {
        let c = &ind.implied;
        let (mut min_act, mut max_act) = (0.0, 0.0);
        for &(a, v) in &c.terms {
            let (lo, hi) = (lp.col_lo[v.0], lp.col_hi[v.0]);
            let (low, high) = if a >= 0.0 {
                (a * lo, a * hi)
            } else {
                (a * hi, a * lo)
            };
            min_act += low;
            max_act += high;
        }
        let z = ind.binary.0;
        let sides = match c.relation {
            Relation::Le => vec![(1.0, max_act - c.rhs)],
            Relation::Ge => vec![(-1.0, c.rhs - min_act)],
            Relation::Eq => vec![(1.0, max_act - c.rhs), (-1.0, c.rhs - min_act)],
        };
        for (sign, big_m) in sides {
            if !big_m.is_finite() || big_m <= 0.0 {
                continue;
            }
            // sign·(a·x) ≤ sign·rhs + M·(1 − z)  or  … + M·z
            let mut row: Vec<(usize, f64)> =
                c.terms.iter().map(|&(a, v)| (v.0, sign * a)).collect();
            let rhs = sign * c.rhs;
            if ind.active {
                row.push((z, big_m));
                lp.row_hi.push(rhs + big_m);
            } else {
                row.push((z, -big_m));
                lp.row_hi.push(rhs);
            }
            lp.row_lo.push(f64::NEG_INFINITY);
            lp.rows.push(row);
        }
    }
}

/// Branch-and-bound over integer columns with native indicator handling.
///
/// `Mode::Feasibility` dives depth-first and stops at the first integral,
/// indicator-consistent node. The optimization modes use best-bound search
/// on the model objective with the requested sense.
pub fn solve_milp(
    model: &MilpModel,
    mode: Mode,
    config: &SolverConfig,
) -> Result<MilpOutcome, SolveError> {
    let start = Instant::now();
    let sense = match mode {
        Mode::Feasibility => None,
        Mode::Minimize => Some(Sense::Minimize),
        Mode::Maximize => Some(Sense::Maximize),
    };
    let mut search = Search::new(model, config, sense);
    let mut stats = SolveStats::default();
    let to_user = |cost: f64| -> f64 {
        let constant = model.objective().map_or(0.0, |o| o.constant);
        match sense {
            Some(Sense::Maximize) => constant - cost,
            _ => constant + cost,
        }
    };
    let finish = |status: MilpStatus,
                  witness: Option<Vec<f64>>,
                  objective: Option<f64>,
                  mut stats: SolveStats,
                  search: &Search| {
        stats.simplex_iterations = search.simplex.iterations;
        stats.wall_time = start.elapsed();
        MilpOutcome {
            status,
            witness,
            objective,
            stats,
        }
    };

    let Some(root) = search.root_bounds() else {
        return Ok(finish(MilpStatus::Infeasible, None, None, stats, &search));
    };
    let mut frontier = match mode {
        Mode::Feasibility => Frontier::Depth(Vec::new()),
        _ => Frontier::Best(BinaryHeap::new()),
    };
    frontier.push(Node {
        bounds: root,
        estimate: f64::NEG_INFINITY,
        depth: 0,
        seq: 0,
    });
    let mut seq = 1u64;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;

    // In best-bound mode the search plunges into the preferred child of each
    // branched node (siblings go to the heap), which keeps consecutive LPs
    // one bound change apart and finds incumbents early.
    let mut dive: Option<Node> = None;
    while let Some(node) = dive.take().or_else(|| frontier.pop()) {
        let cutoff = incumbent.as_ref().map(|(_, c)| c - 1e-9 * (1.0 + c.abs()));
        if let Some(c) = cutoff {
            if node.estimate >= c {
                continue;
            }
        }
        if stats.nodes >= config.node_limit {
            let why = format!("node limit {} reached", config.node_limit);
            return Ok(finish(
                MilpStatus::Inconclusive(why),
                None,
                None,
                stats,
                &search,
            ));
        }
        if let Some(limit) = config.time_limit {
            if start.elapsed() > limit {
                let why = format!("time limit {:?} reached", limit);
                return Ok(finish(
                    MilpStatus::Inconclusive(why),
                    None,
                    None,
                    stats,
                    &search,
                ));
            }
        }
        stats.nodes += 1;
        let visit = search.visit(&node, cutoff)?;
        if node.depth == 0 && sense.is_some() {
            if let Visit::Integral { cost, .. } | Visit::Branch { cost, .. } = visit {
                stats.root_bound = Some(to_user(cost));
            }
        }
        match visit {
            Visit::Pruned => {}
            Visit::Unbounded => {
                return Ok(finish(MilpStatus::Unbounded, None, None, stats, &search));
            }
            Visit::Integral { x, cost } => {
                if sense.is_none() {
                    return Ok(finish(MilpStatus::Feasible, Some(x), None, stats, &search));
                }
                if incumbent.as_ref().is_none_or(|(_, c)| cost < *c) {
                    incumbent = Some((x, cost));
                }
            }
            Visit::Branch {
                col,
                value,
                up_first,
                cost,
            } => {
                let k = search.int_pos[col].expect("branching on an integer column");
                let (lo, hi) = node.bounds[k];
                let binary = model.variables()[col].kind == VarKind::Binary;
                let (down_hi, up_lo) = if binary {
                    (0.0, 1.0)
                } else {
                    (value.floor(), value.ceil())
                };
                let mut down = node.bounds.clone();
                down[k] = (lo, down_hi.min(hi));
                let mut up = node.bounds;
                up[k] = (up_lo.max(lo), hi);
                let mut children = Vec::with_capacity(2);
                for b in [down, up] {
                    if b[k].0 <= b[k].1 {
                        children.push(b);
                    }
                }
                // The stack pops the last child first; otherwise the first
                // child is the plunge target.
                let depth_first = matches!(frontier, Frontier::Depth(_));
                if up_first != depth_first {
                    children.reverse();
                }
                for (k, bounds) in children.into_iter().enumerate() {
                    let child = Node {
                        bounds,
                        estimate: cost,
                        depth: node.depth + 1,
                        seq,
                    };
                    seq += 1;
                    if k == 0 && !depth_first {
                        dive = Some(child);
                    } else {
                        frontier.push(child);
                    }
                }
            }
        }
    }

    match incumbent {
        Some((x, _)) => {
            let objective = model.objective().map(|o| o.value(&x)).or(Some(0.0));
            Ok(finish(
                MilpStatus::Optimal,
                Some(x),
                objective,
                stats,
                &search,
            ))
        }
        None => Ok(finish(MilpStatus::Infeasible, None, None, stats, &search)),
    }
}
