//! Independent re-check of an explanation against a freshly built encoding.

use std::collections::BTreeSet;
use std::fmt;

use super::{checked_prediction, entails, Explanation, TIE_TOLERANCE};
use crate::encoding::{build, EncodedNetwork, EncodingKind};
use crate::error::ExplainError;
use crate::model::{margin, Ann, Instance};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum VerificationFailure {
    ClassMismatch {
        claimed: usize,
        predicted: usize,
    },
    /// Kept and dropped features do not partition the feature set.
    NotPartition,
    ValueMismatch {
        feature: usize,
    },
    /// The kept fixings alone do not entail the prediction.
    Insufficient,
    /// Freeing `feature` alone still entails the prediction.
    NotMinimal {
        feature: usize,
    },
    /// The counterexample found when freeing `feature` is not a misclassified
    /// (or tied) point.
    BadCounterexample {
        feature: usize,
        margin: f64,
    },
}

impl VerificationFailure {
    pub fn feature(&self) -> Option<usize> {
        match *self {
            VerificationFailure::ValueMismatch { feature }
            | VerificationFailure::NotMinimal { feature }
            | VerificationFailure::BadCounterexample { feature, .. } => Some(feature),
            _ => None,
        }
    }

    /// Message naming features by their schema names.
    pub fn describe(&self, ann: &Ann) -> String {
        let name = |k: usize| {
            ann.features()
                .get(k)
                .map_or_else(|| format!("#{k}"), |f| f.name.clone())
        };
        match *self {
            VerificationFailure::ClassMismatch { claimed, predicted } => {
                format!("explanation claims class {claimed} but the network predicts {predicted}")
            }
            VerificationFailure::NotPartition => {
                "kept and dropped features do not partition the features".into()
            }
            VerificationFailure::ValueMismatch { feature } => {
                format!("kept value of {} differs from the instance", name(feature))
            }
            VerificationFailure::Insufficient => {
                "kept features do not entail the prediction".into()
            }
            VerificationFailure::NotMinimal { feature } => {
                format!(
                    "{} is kept but the prediction holds without it",
                    name(feature)
                )
            }
            VerificationFailure::BadCounterexample { feature, margin } => {
                format!(
                    "counterexample for {} has margin {margin:e}, not a misclassification",
                    name(feature)
                )
            }
        }
    }
}

impl fmt::Display for VerificationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub failures: Vec<VerificationFailure>,
    /// Counterexample found for each kept feature.
    pub counterexamples: Vec<(usize, Instance)>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks sufficiency and one-at-a-time minimality of `explanation` on an
/// encoding of kind `kind` rebuilt from scratch (bounds included).
pub fn verify_explanation(
    ann: &Ann,
    kind: EncodingKind,
    instance: &Instance,
    explanation: &Explanation,
    config: &SolverConfig,
) -> Result<VerificationReport, ExplainError> {
    let predicted = checked_prediction(ann, instance)?;
    if predicted != explanation.class {
        return Ok(VerificationReport {
            failures: vec![VerificationFailure::ClassMismatch {
                claimed: explanation.class,
                predicted,
            }],
            counterexamples: Vec::new(),
        });
    }
    let mut enc = build(ann, kind, config)?;
    crate::encoding::attach_negation(&mut enc, predicted)?;
    verify_with_encoding(ann, &mut enc, instance, explanation, config)
}

/// As [`verify_explanation`], on a caller-supplied encoding negated for the
/// explanation's class.
pub fn verify_with_encoding(
    ann: &Ann,
    enc: &mut EncodedNetwork,
    instance: &Instance,
    explanation: &Explanation,
    config: &SolverConfig,
) -> Result<VerificationReport, ExplainError> {
    let mut report = VerificationReport::default();
    let predicted = checked_prediction(ann, instance)?;
    if predicted != explanation.class {
        report.failures.push(VerificationFailure::ClassMismatch {
            claimed: explanation.class,
            predicted,
        });
        return Ok(report);
    }

    let n = ann.num_inputs();
    let kept: BTreeSet<usize> = explanation.kept.iter().map(|&(k, _)| k).collect();
    let dropped: BTreeSet<usize> = explanation.dropped.iter().copied().collect();
    let partition = kept.len() == explanation.kept.len()
        && dropped.len() == explanation.dropped.len()
        && kept.is_disjoint(&dropped)
        && kept.len() + dropped.len() == n
        && kept.iter().chain(&dropped).all(|&k| k < n);
    if !partition {
        report.failures.push(VerificationFailure::NotPartition);
        return Ok(report);
    }
    for &(k, v) in &explanation.kept {
        if v != instance.values[k] {
            report
                .failures
                .push(VerificationFailure::ValueMismatch { feature: k });
        }
    }

    let free: BTreeSet<usize> = (0..n).filter(|k| !kept.contains(k)).collect();
    if !entails(ann, enc, instance, &free, config)?.holds {
        report.failures.push(VerificationFailure::Insufficient);
    }
    for &k in &kept {
        let mut relaxed = free.clone();
        relaxed.insert(k);
        let verdict = entails(ann, enc, instance, &relaxed, config)?;
        match verdict.counterexample {
            None => report
                .failures
                .push(VerificationFailure::NotMinimal { feature: k }),
            Some(cex) => {
                let m = margin(&ann.forward(&cex.values).logits, predicted);
                let respects_fixings = kept
                    .iter()
                    .filter(|&&j| j != k)
                    .all(|&j| (cex.values[j] - instance.values[j]).abs() <= TIE_TOLERANCE);
                if m > TIE_TOLERANCE || !respects_fixings {
                    report
                        .failures
                        .push(VerificationFailure::BadCounterexample {
                            feature: k,
                            margin: m,
                        });
                }
                report.counterexamples.push((k, cex));
            }
        }
    }
    Ok(report)
}
