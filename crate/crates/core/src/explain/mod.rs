//! Deletion-based minimal explanations.
//!
//! An explanation for an instance `v` predicted as class `i` is a subset `C`
//! of the fixings `x_k = v_k` such that `C ∧ F ⊨ E`, where `F` is the encoded
//! network and `E = ⋀_{j≠i} o_i > o_j`. Entailment is decided by checking
//! `C ∧ F ∧ ¬E` for infeasibility. Fixings are realized as variable bounds,
//! so the encoding is built once per class and only bounds change between
//! checks.

mod oracle;
pub mod report;
mod verify;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{build, EncodedNetwork, EncodingKind};
use crate::error::{EncodingError, ExplainError};
use crate::model::{margin, Ann, FeatureKind, Instance};
use crate::solver::{solve_milp, MilpStatus, Mode, SolverConfig};

pub use oracle::{brute_force_entails, ORACLE_HIDDEN_LIMIT};
pub use verify::{
    verify_explanation, verify_with_encoding, VerificationFailure, VerificationReport,
};

/// Counterexamples and instance margins at or below this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EntailmentVerdict {
    pub holds: bool,
    /// A point of the feature space satisfying `C ∧ ¬E` (when `holds` is false).
    pub counterexample: Option<Instance>,
    pub nodes: u64,
    pub solve_time: Duration,
}

/// Order in which the deletion search tries to drop features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureOrder {
    Natural,
    Reverse,
    Seeded(u64),
}

impl FeatureOrder {
    pub fn permutation(self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        match self {
            FeatureOrder::Natural => {}
            FeatureOrder::Reverse => order.reverse(),
            FeatureOrder::Seeded(seed) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        }
        order
    }
}

impl std::fmt::Display for FeatureOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureOrder::Natural => f.write_str("natural"),
            FeatureOrder::Reverse => f.write_str("reverse"),
            FeatureOrder::Seeded(s) => write!(f, "seed:{s}"),
        }
    }
}

impl std::str::FromStr for FeatureOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "natural" => Ok(FeatureOrder::Natural),
            "reverse" => Ok(FeatureOrder::Reverse),
            _ => s
                .strip_prefix("seed:")
                .and_then(|n| n.parse().ok())
                .map(FeatureOrder::Seeded)
                .ok_or_else(|| {
                    format!("unknown order {s:?} (expected natural, reverse or seed:N)")
                }),
        }
    }
}

/// One entailment check of the deletion search.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub feature: usize,
    /// Whether the prediction still followed with `feature` freed.
    pub holds: bool,
    pub nodes: u64,
    pub solve_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub class: usize,
    /// `(feature, value)` pairs in feature-index order.
    pub kept: Vec<(usize, f64)>,
    /// Freed features in the order they were dropped.
    pub dropped: Vec<usize>,
    pub order: Vec<usize>,
    pub checks: Vec<CheckRecord>,
    pub total_time: Duration,
}

impl Explanation {
    pub fn kept_features(&self) -> Vec<usize> {
        self.kept.iter().map(|&(k, _)| k).collect()
    }
}

fn negated_class(enc: &EncodedNetwork) -> Result<usize, ExplainError> {
    enc.negation
        .as_ref()
        .map(|n| n.class)
        .ok_or(ExplainError::Encoding(EncodingError::NotNegated))
}

/// Decides `C ∧ F ⊨ E` where `C` fixes every feature outside `free` to its
/// instance value and `E` is the prediction `enc` was negated for. Input
/// bounds are restored before returning, whatever the outcome.
pub fn entails(
    ann: &Ann,
    enc: &mut EncodedNetwork,
    instance: &Instance,
    free: &BTreeSet<usize>,
    config: &SolverConfig,
) -> Result<EntailmentVerdict, ExplainError> {
    negated_class(enc)?;
    ann.check_instance(instance)?;
    if let Some(&k) = free.iter().find(|&&k| k >= ann.num_inputs()) {
        return Err(ExplainError::FeatureOutOfRange(k));
    }
    let saved: Vec<(f64, f64)> = enc
        .inputs
        .iter()
        .map(|&v| {
            let var = enc.model.variable(v);
            (var.lower, var.upper)
        })
        .collect();
    let mut apply = || -> Result<(), ExplainError> {
        for (k, f) in ann.features().iter().enumerate() {
            if free.contains(&k) {
                enc.set_input_bounds(k, f.lower, f.upper)?;
            } else {
                enc.fix_input(k, instance.values[k])?;
            }
        }
        Ok(())
    };
    let applied = apply();
    let result = applied.and_then(|()| {
        let out = solve_milp(&enc.model, Mode::Feasibility, config)?;
        let nodes = out.stats.nodes;
        let solve_time = out.stats.wall_time;
        match out.status {
            MilpStatus::Infeasible => Ok(EntailmentVerdict {
                holds: true,
                counterexample: None,
                nodes,
                solve_time,
            }),
            MilpStatus::Feasible | MilpStatus::Optimal => {
                let witness = out.witness.expect("feasible outcome carries a witness");
                Ok(EntailmentVerdict {
                    holds: false,
                    counterexample: Some(counterexample(ann, enc, &witness)),
                    nodes,
                    solve_time,
                })
            }
            MilpStatus::Unbounded => Err(ExplainError::Solve(crate::error::SolveError::Numerical(
                "feasibility query reported unbounded".into(),
            ))),
            MilpStatus::Inconclusive(why) => Err(ExplainError::Solve(
                crate::error::SolveError::Inconclusive(why),
            )),
        }
    });
    for (k, &(lo, hi)) in saved.iter().enumerate() {
        enc.set_input_bounds(k, lo, hi)?;
    }
    result
}

/// Input coordinates of a witness, snapped into the feature domains.
fn counterexample(ann: &Ann, enc: &EncodedNetwork, witness: &[f64]) -> Instance {
    let values = ann
        .features()
        .iter()
        .zip(&enc.inputs)
        .map(|(f, v)| {
            let x = witness[v.0].clamp(f.lower, f.upper);
            if f.kind == FeatureKind::Continuous {
                x
            } else {
                x.round()
            }
        })
        .collect();
    Instance::new(values)
}

/// Rejects instances whose prediction is (numerically) tied.
pub fn checked_prediction(ann: &Ann, instance: &Instance) -> Result<usize, ExplainError> {
    ann.check_instance(instance)?;
    let logits = ann.forward(&instance.values).logits;
    let class = crate::model::argmax(&logits);
    let m = margin(&logits, class);
    if m < TIE_TOLERANCE {
        return Err(ExplainError::TieMargin {
            margin: m,
            tolerance: TIE_TOLERANCE,
        });
    }
    Ok(class)
}

/// Deletion search: starting from all fixings, free each feature of `order` in
/// turn and keep it freed if the prediction is still entailed.
pub fn minimal_explanation(
    ann: &Ann,
    enc: &mut EncodedNetwork,
    instance: &Instance,
    order: &[usize],
    config: &SolverConfig,
) -> Result<Explanation, ExplainError> {
    let start = Instant::now();
    let class = checked_prediction(ann, instance)?;
    let encoded = negated_class(enc)?;
    if encoded != class {
        return Err(ExplainError::ClassMismatch {
            encoded,
            predicted: class,
        });
    }
    let n = ann.num_inputs();
    let mut seen = vec![false; n];
    for &k in order {
        if k >= n || std::mem::replace(&mut seen[k], true) {
            return Err(ExplainError::FeatureOutOfRange(k));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(ExplainError::Model(
            crate::error::ModelError::InvalidInstance(
                "feature order is not a permutation of all features".into(),
            ),
        ));
    }

    let mut free = BTreeSet::new();
    let mut dropped = Vec::new();
    let mut checks = Vec::with_capacity(n);
    for &k in order {
        free.insert(k);
        let verdict = entails(ann, enc, instance, &free, config)?;
        checks.push(CheckRecord {
            feature: k,
            holds: verdict.holds,
            nodes: verdict.nodes,
            solve_time: verdict.solve_time,
        });
        if verdict.holds {
            dropped.push(k);
        } else {
            free.remove(&k);
        }
    }
    let kept = (0..n)
        .filter(|k| !free.contains(k))
        .map(|k| (k, instance.values[k]))
        .collect();
    Ok(Explanation {
        class,
        kept,
        dropped,
        order: order.to_vec(),
        checks,
        total_time: start.elapsed(),
    })
}

/// Explains many instances of one network with one encoding, building the
/// network encoding once and one negated copy per predicted class.
#[derive(Debug, Clone)]
pub struct Explainer<'a> {
    ann: &'a Ann,
    base: EncodedNetwork,
    negated: Vec<Option<EncodedNetwork>>,
    config: SolverConfig,
}

impl<'a> Explainer<'a> {
    pub fn new(ann: &'a Ann, base: EncodedNetwork, config: SolverConfig) -> Self {
        Explainer {
            ann,
            negated: vec![None; ann.num_classes()],
            base,
            config,
        }
    }

    /// Tightens bounds and encodes `ann` with `kind`.
    pub fn build(
        ann: &'a Ann,
        kind: EncodingKind,
        config: SolverConfig,
    ) -> Result<Self, ExplainError> {
        let base = build(ann, kind, &config)?;
        Ok(Explainer::new(ann, base, config))
    }

    pub fn base(&self) -> &EncodedNetwork {
        &self.base
    }

    pub fn kind(&self) -> EncodingKind {
        self.base.kind
    }

    /// Encoding with `¬E` for `class`, built on first use.
    pub fn encoding_for(&mut self, class: usize) -> Result<&mut EncodedNetwork, ExplainError> {
        if self.negated[class].is_none() {
            self.negated[class] = Some(self.base.with_negation(class)?);
        }
        Ok(self.negated[class].as_mut().expect("just built"))
    }

    pub fn explain(
        &mut self,
        instance: &Instance,
        order: &[usize],
    ) -> Result<Explanation, ExplainError> {
        let class = checked_prediction(self.ann, instance)?;
        let ann = self.ann;
        let config = self.config.clone();
        let enc = self.encoding_for(class)?;
        minimal_explanation(ann, enc, instance, order, &config)
    }

    pub fn entails(
        &mut self,
        instance: &Instance,
        free: &BTreeSet<usize>,
        class: usize,
    ) -> Result<EntailmentVerdict, ExplainError> {
        let ann = self.ann;
        let config = self.config.clone();
        let enc = self.encoding_for(class)?;
        entails(ann, enc, instance, free, &config)
    }
}

/// Explains `instances` with `jobs` workers, each owning its own copy of
/// `base`. Results are returned in input order; timing is measured inside
/// each worker.
pub fn explain_batch(
    ann: &Ann,
    base: &EncodedNetwork,
    instances: &[Instance],
    order: &[usize],
    config: &SolverConfig,
    jobs: usize,
) -> Vec<Result<Explanation, ExplainError>> {
    let jobs = jobs.max(1).min(instances.len().max(1));
    if jobs == 1 {
        let mut ex = Explainer::new(ann, base.clone(), config.clone());
        return instances
            .iter()
            .map(|inst| ex.explain(inst, order))
            .collect();
    }
    let chunk = instances.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = instances
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut ex = Explainer::new(ann, base.clone(), config.clone());
                    part.iter()
                        .map(|inst| ex.explain(inst, order))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("explanation worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests;
