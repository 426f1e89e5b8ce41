//! Structured explanation reports, bound to a model by content hash.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CheckRecord, Explanation};
use crate::encoding::EncodingKind;
use crate::model::{Ann, Instance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub feature: usize,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRef {
    pub feature: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub feature: usize,
    pub name: String,
    /// `"dropped"` if the prediction still held with the feature freed.
    pub verdict: String,
    pub nodes: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Explained,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub index: usize,
    pub values: Vec<f64>,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<String>,
    #[serde(default)]
    pub kept: Vec<FeatureValue>,
    #[serde(default)]
    pub dropped: Vec<FeatureRef>,
    #[serde(default)]
    pub order: Vec<usize>,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
    pub total_seconds: f64,
}

impl ReportEntry {
    pub fn explained(
        ann: &Ann,
        index: usize,
        instance: &Instance,
        explanation: &Explanation,
    ) -> Self {
        let name = |k: usize| ann.features()[k].name.clone();
        ReportEntry {
            index,
            values: instance.values.clone(),
            status: EntryStatus::Explained,
            diagnostic: None,
            predicted_class: Some(explanation.class),
            predicted_label: Some(ann.classes()[explanation.class].clone()),
            kept: explanation
                .kept
                .iter()
                .map(|&(k, value)| FeatureValue {
                    feature: k,
                    name: name(k),
                    value,
                })
                .collect(),
            dropped: explanation
                .dropped
                .iter()
                .map(|&k| FeatureRef {
                    feature: k,
                    name: name(k),
                })
                .collect(),
            order: explanation.order.clone(),
            checks: explanation
                .checks
                .iter()
                .map(|c| CheckEntry {
                    feature: c.feature,
                    name: name(c.feature),
                    verdict: if c.holds { "dropped" } else { "kept" }.into(),
                    nodes: c.nodes,
                    seconds: c.solve_time.as_secs_f64(),
                })
                .collect(),
            total_seconds: explanation.total_time.as_secs_f64(),
        }
    }

    pub fn rejected(index: usize, instance: &Instance, diagnostic: impl Into<String>) -> Self {
        ReportEntry {
            index,
            values: instance.values.clone(),
            status: EntryStatus::Rejected,
            diagnostic: Some(diagnostic.into()),
            predicted_class: None,
            predicted_label: None,
            kept: Vec::new(),
            dropped: Vec::new(),
            order: Vec::new(),
            checks: Vec::new(),
            total_seconds: 0.0,
        }
    }

    pub fn instance(&self) -> Instance {
        Instance::new(self.values.clone())
    }

    /// The explanation recorded in this entry (`None` if rejected).
    pub fn explanation(&self) -> Option<Explanation> {
        if self.status != EntryStatus::Explained {
            return None;
        }
        Some(Explanation {
            class: self.predicted_class?,
            kept: self.kept.iter().map(|f| (f.feature, f.value)).collect(),
            dropped: self.dropped.iter().map(|f| f.feature).collect(),
            order: self.order.clone(),
            checks: self
                .checks
                .iter()
                .map(|c| CheckRecord {
                    feature: c.feature,
                    holds: c.verdict == "dropped",
                    nodes: c.nodes,
                    solve_time: Duration::from_secs_f64(c.seconds.max(0.0)),
                })
                .collect(),
            total_time: Duration::from_secs_f64(self.total_seconds.max(0.0)),
        })
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return MeanStd {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub model: String,
    pub model_hash: String,
    pub dataset: String,
    pub encoding: EncodingKind,
    pub order: String,
    pub build_seconds: f64,
    pub explain_seconds: MeanStd,
    pub entries: Vec<ReportEntry>,
}

impl ExplanationReport {
    /// Copy with every wall-clock field set to zero.
    pub fn zero_timings(&self) -> Self {
        let mut r = self.clone();
        r.build_seconds = 0.0;
        r.explain_seconds = MeanStd {
            mean: 0.0,
            std: 0.0,
        };
        for e in &mut r.entries {
            e.total_seconds = 0.0;
            for c in &mut e.checks {
                c.seconds = 0.0;
            }
        }
        r
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
