//! Entailment by exhaustive activation-pattern enumeration.
//!
//! Fixing every ReLU to on or off turns the network into an affine map, so
//! `C ∧ F ∧ ¬E` becomes a union of plain LPs (one per pattern and rival
//! class) over the free inputs. The LPs are solved with `minilp`, which
//! shares no code with the crate's own simplex. Patterns are enumerated
//! depth-first, neuron by neuron, pruning prefixes whose sign constraints are
//! already infeasible.

use std::collections::BTreeSet;
use std::time::Instant;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use super::EntailmentVerdict;
use crate::error::ExplainError;
use crate::model::{Ann, FeatureKind, Instance};

/// Largest total hidden-neuron count the oracle accepts.
pub const ORACLE_HIDDEN_LIMIT: usize = 10;

const INTEGER_ASSIGNMENT_LIMIT: usize = 4096;
const CONSTANT_TOL: f64 = 1e-9;

/// `coef · y + constant` over the free continuous inputs `y`.
#[derive(Debug, Clone)]
struct Affine {
    coef: Vec<f64>,
    constant: f64,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Affine {
            coef: vec![0.0; n],
            constant: 0.0,
        }
    }

    fn combine(weights: &[f64], bias: f64, terms: &[Affine], n: usize) -> Self {
        let mut out = Affine::zero(n);
        out.constant = bias;
        for (&w, t) in weights.iter().zip(terms) {
            if w == 0.0 {
                continue;
            }
            out.constant += w * t.constant;
            for (c, &tc) in out.coef.iter_mut().zip(&t.coef) {
                *c += w * tc;
            }
        }
        out
    }

    fn minus(&self, other: &Affine) -> Affine {
        Affine {
            coef: self
                .coef
                .iter()
                .zip(&other.coef)
                .map(|(a, b)| a - b)
                .collect(),
            constant: self.constant - other.constant,
        }
    }
}

/// Constraint `expr ≤ 0` (or `≥ 0`).
struct Sign {
    expr: Affine,
    nonpositive: bool,
}

struct Search<'a> {
    ann: &'a Ann,
    class: usize,
    /// Feature domain of each free continuous input.
    domains: Vec<(f64, f64)>,
    constraints: Vec<Sign>,
    lps: u64,
}

impl Search<'_> {
    /// A point satisfying all current constraints, if one exists.
    fn feasible(&mut self) -> Result<Option<Vec<f64>>, ExplainError> {
        self.lps += 1;
        let n = self.domains.len();
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self
            .domains
            .iter()
            .map(|&d| problem.add_var(0.0, d))
            .collect();
        for c in &self.constraints {
            let mut expr = LinearExpr::empty();
            let mut empty = true;
            for (k, &a) in c.expr.coef.iter().enumerate() {
                if a != 0.0 {
                    expr.add(vars[k], a);
                    empty = false;
                }
            }
            if empty {
                let v = c.expr.constant;
                let ok = if c.nonpositive {
                    v <= CONSTANT_TOL
                } else {
                    v >= -CONSTANT_TOL
                };
                if !ok {
                    return Ok(None);
                }
                continue;
            }
            let op = if c.nonpositive {
                ComparisonOp::Le
            } else {
                ComparisonOp::Ge
            };
            problem.add_constraint(expr, op, -c.expr.constant);
        }
        if n == 0 {
            return Ok(Some(Vec::new()));
        }
        match problem.solve() {
            Ok(sol) => Ok(Some(vars.iter().map(|&v| *sol.var_value(v)).collect())),
            Err(minilp::Error::Infeasible) => Ok(None),
            Err(e) => Err(ExplainError::Oracle(e.to_string())),
        }
    }

    fn descend(
        &mut self,
        layer: usize,
        prev: &[Affine],
        current: &mut Vec<Affine>,
    ) -> Result<Option<Vec<f64>>, ExplainError> {
        let n = self.domains.len();
        let hidden = self.ann.hidden_layers();
        if layer == hidden.len() {
            let out = self.ann.output_layer();
            let logits: Vec<Affine> = (0..out.size())
                .map(|j| Affine::combine(&out.weights[j], out.bias[j], prev, n))
                .collect();
            let class = self.class;
            for j in (0..logits.len()).filter(|&j| j != class) {
                self.constraints.push(Sign {
                    expr: logits[class].minus(&logits[j]),
                    nonpositive: true,
                });
                let found = self.feasible()?;
                self.constraints.pop();
                if found.is_some() {
                    return Ok(found);
                }
            }
            return Ok(None);
        }
        let spec = &hidden[layer];
        let i = current.len();
        if i == spec.size() {
            let next = std::mem::take(current);
            let found = self.descend(
                layer + 1,
                &next,
                &mut Vec::with_capacity(hidden.get(layer + 1).map_or(0, |l| l.size())),
            )?;
            *current = next;
            return Ok(found);
        }
        let pre = Affine::combine(&spec.weights[i], spec.bias[i], prev, n);
        for active in [true, false] {
            self.constraints.push(Sign {
                expr: pre.clone(),
                nonpositive: !active,
            });
            if self.feasible()?.is_some() {
                current.push(if active { pre.clone() } else { Affine::zero(n) });
                let found = self.descend(layer, prev, current)?;
                current.pop();
                if found.is_some() {
                    self.constraints.pop();
                    return Ok(found);
                }
            }
            self.constraints.pop();
        }
        Ok(None)
    }
}

/// Decides `C ∧ F ⊨ E` for class `class` by enumerating activation patterns.
/// Free integer and binary features are enumerated value by value.
pub fn brute_force_entails(
    ann: &Ann,
    instance: &Instance,
    free: &BTreeSet<usize>,
    class: usize,
) -> Result<EntailmentVerdict, ExplainError> {
    let start = Instant::now();
    let hidden = ann.total_hidden();
    if hidden > ORACLE_HIDDEN_LIMIT {
        return Err(ExplainError::TooLarge {
            limit: ORACLE_HIDDEN_LIMIT,
            found: hidden,
        });
    }
    ann.check_instance(instance)?;
    if class >= ann.num_classes() {
        return Err(ExplainError::Encoding(
            crate::error::EncodingError::ClassOutOfRange {
                class,
                classes: ann.num_classes(),
            },
        ));
    }
    if let Some(&k) = free.iter().find(|&&k| k >= ann.num_inputs()) {
        return Err(ExplainError::FeatureOutOfRange(k));
    }

    let features = ann.features();
    let continuous: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&k| features[k].kind == FeatureKind::Continuous)
        .collect();
    let integral: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&k| features[k].kind != FeatureKind::Continuous)
        .collect();
    let mut combos = 1usize;
    for &k in &integral {
        let span = (features[k].upper - features[k].lower) as usize + 1;
        combos = combos.saturating_mul(span);
    }
    if combos > INTEGER_ASSIGNMENT_LIMIT {
        return Err(ExplainError::Oracle(format!(
            "{combos} integer assignments exceed the enumeration limit {INTEGER_ASSIGNMENT_LIMIT}"
        )));
    }

    let n = continuous.len();
    let mut search = Search {
        ann,
        class,
        domains: continuous
            .iter()
            .map(|&k| (features[k].lower, features[k].upper))
            .collect(),
        constraints: Vec::new(),
        lps: 0,
    };
    let mut point = instance.values.clone();
    for combo in 0..combos {
        let mut rest = combo;
        for &k in &integral {
            let span = (features[k].upper - features[k].lower) as usize + 1;
            point[k] = features[k].lower + (rest % span) as f64;
            rest /= span;
        }
        let inputs: Vec<Affine> = (0..ann.num_inputs())
            .map(|k| match continuous.iter().position(|&c| c == k) {
                Some(pos) => {
                    let mut a = Affine::zero(n);
                    a.coef[pos] = 1.0;
                    a
                }
                None => Affine {
                    coef: vec![0.0; n],
                    constant: point[k],
                },
            })
            .collect();
        if let Some(y) = search.descend(0, &inputs, &mut Vec::new())? {
            for (&k, &v) in continuous.iter().zip(&y) {
                point[k] = v.clamp(features[k].lower, features[k].upper);
            }
            return Ok(EntailmentVerdict {
                holds: false,
                counterexample: Some(Instance::new(point)),
                nodes: search.lps,
                solve_time: start.elapsed(),
            });
        }
    }
    Ok(EntailmentVerdict {
        holds: true,
        counterexample: None,
        nodes: search.lps,
        solve_time: start.elapsed(),
    })
}
