//! Feedforward ReLU networks, feature domains and prediction semantics.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Integer,
    Binary,
}

impl FeatureKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, FeatureKind::Continuous)
    }
}

/// Domain `[lower, upper]` of one input feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub lower: f64,
    pub upper: f64,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Continuous,
            lower,
            upper,
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), ModelError> {
        let bad = || ModelError::InvalidBounds {
            field: field.to_string(),
            lower: self.lower,
            upper: self.upper,
        };
        if !self.lower.is_finite() || !self.upper.is_finite() || self.lower > self.upper {
            return Err(bad());
        }
        match self.kind {
            FeatureKind::Continuous => {}
            FeatureKind::Integer => {
                if self.lower.fract() != 0.0 || self.upper.fract() != 0.0 {
                    return Err(bad());
                }
            }
            FeatureKind::Binary => {
                if self.lower != 0.0 || self.upper != 1.0 {
                    return Err(bad());
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite()
            && value >= self.lower
            && value <= self.upper
            && (!self.kind.is_integral() || value.fract() == 0.0)
    }
}

/// One affine layer: `weights` is `rows × inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        Layer { weights, bias }
    }

    pub fn size(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// `Σ_j w_ij·x_j + b_i`
    pub fn affine(&self, i: usize, x: &[f64]) -> f64 {
        self.weights[i]
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias[i]
    }
}

/// Feedforward network whose hidden layers apply ReLU and whose last layer is
/// linear. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ann {
    name: String,
    features: Vec<FeatureSpec>,
    layers: Vec<Layer>,
    classes: Vec<String>,
}

impl Ann {
    pub fn new(
        name: impl Into<String>,
        features: Vec<FeatureSpec>,
        layers: Vec<Layer>,
        classes: Vec<String>,
    ) -> Result<Self, ModelError> {
        let ann = Ann {
            name: name.into(),
            features,
            layers,
            classes,
        };
        ann.validate()?;
        Ok(ann)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.features.is_empty() {
            return Err(ModelError::Malformed(
                "features: at least one feature is required".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(ModelError::Malformed(
                "layers: at least one layer is required".into(),
            ));
        }
        for (i, f) in self.features.iter().enumerate() {
            f.validate(&format!("features[{i}]"))?;
        }
        let mut prev = self.features.len();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.is_empty() {
                return Err(ModelError::Malformed(format!(
                    "layers[{l}].weights: empty layer"
                )));
            }
            if layer.bias.len() != layer.weights.len() {
                return Err(ModelError::DimensionMismatch {
                    field: format!("layers[{l}].bias"),
                    expected: layer.weights.len(),
                    found: layer.bias.len(),
                });
            }
            for (i, row) in layer.weights.iter().enumerate() {
                if row.len() != prev {
                    return Err(ModelError::DimensionMismatch {
                        field: format!("layers[{l}].weights[{i}]"),
                        expected: prev,
                        found: row.len(),
                    });
                }
                if let Some(j) = row.iter().position(|w| !w.is_finite()) {
                    return Err(ModelError::NonFinite(format!(
                        "layers[{l}].weights[{i}][{j}]"
                    )));
                }
            }
            if let Some(i) = layer.bias.iter().position(|b| !b.is_finite()) {
                return Err(ModelError::NonFinite(format!("layers[{l}].bias[{i}]")));
            }
            prev = layer.size();
        }
        if self.classes.len() != prev {
            return Err(ModelError::DimensionMismatch {
                field: "classes".into(),
                expected: prev,
                found: self.classes.len(),
            });
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Hidden layers (all but the last).
    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &Layer {
        self.layers.last().expect("validated network has a layer")
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_inputs(&self) -> usize {
        self.features.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden_layers().iter().map(Layer::size).collect()
    }

    pub fn total_hidden(&self) -> usize {
        self.hidden_layers().iter().map(Layer::size).sum()
    }

    /// Layer sizes from input to output, e.g. `[2, 1, 2]`.
    pub fn architecture(&self) -> Vec<usize> {
        std::iter::once(self.num_inputs())
            .chain(self.layers.iter().map(Layer::size))
            .collect()
    }

    pub fn check_instance(&self, instance: &Instance) -> Result<(), ModelError> {
        if instance.values.len() != self.features.len() {
            return Err(ModelError::DimensionMismatch {
                field: "instance".into(),
                expected: self.features.len(),
                found: instance.values.len(),
            });
        }
        for (f, &v) in self.features.iter().zip(&instance.values) {
            if !f.contains(v) {
                return Err(ModelError::InvalidInstance(format!(
                    "value {v} of feature {} is outside its domain [{}, {}] or not integral",
                    f.name, f.lower, f.upper
                )));
            }
        }
        Ok(())
    }

    /// Exact forward pass (no Softmax).
    pub fn forward(&self, point: &[f64]) -> Activations {
        assert_eq!(point.len(), self.num_inputs(), "input dimension mismatch");
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let mut current = point.to_vec();
        for layer in self.hidden_layers() {
            let z: Vec<f64> = (0..layer.size())
                .map(|i| layer.affine(i, &current))
                .collect();
            current = z.iter().map(|&v| v.max(0.0)).collect();
            pre.push(z);
            hidden.push(current.clone());
        }
        let out = self.output_layer();
        let logits = (0..out.size()).map(|i| out.affine(i, &current)).collect();
        Activations {
            pre,
            hidden,
            logits,
        }
    }

    pub fn predict(&self, point: &[f64]) -> usize {
        argmax(&self.forward(point).logits)
    }

    /// Structured-text form accepted by [`load_model`].
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

/// Result of [`Ann::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// Pre-activation values of each hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// ReLU outputs of each hidden layer.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

/// A point of the feature space, aligned with the network's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<f64>,
}

impl Instance {
    pub fn new(values: Vec<f64>) -> Self {
        Instance { values }
    }
}

impl From<Vec<f64>> for Instance {
    fn from(values: Vec<f64>) -> Self {
        Instance { values }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `min_{j≠class} (o_class − o_j)`; positive iff `class` is the strict argmax.
pub fn margin(logits: &[f64], class: usize) -> f64 {
    logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != class)
        .map(|(_, &o)| logits[class] - o)
        .fold(f64::INFINITY, f64::min)
}

/// Parses and validates a model file.
pub fn load_model(text: &str) -> Result<Ann, ModelError> {
    let ann: Ann = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    ann.validate()?;
    Ok(ann)
}

/// Hex SHA-256 of a file's bytes; binds reports and caches to a model.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Two-input fixture nets with hand-checkable behavior.
pub mod fixtures {
    use super::*;

    fn unit_features() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::continuous("x1", 0.0, 1.0),
            FeatureSpec::continuous("x2", 0.0, 1.0),
        ]
    }

    /// Logits `(|x1 − x2|, −|x1 − x2|)`.
    pub fn tiny_net() -> Ann {
        Ann::new(
            "TinyNet",
            unit_features(),
            vec![
                Layer::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0.0, 0.0]),
                Layer::new(vec![vec![1.0, 1.0], vec![-1.0, -1.0]], vec![0.0, 0.0]),
            ],
            vec!["differ".into(), "same".into()],
        )
        .expect("valid fixture")
    }

    /// Predicts class 0 iff `x1 > 0.6`.
    pub fn gate_net() -> Ann {
        Ann::new(
            "GateNet",
            unit_features(),
            vec![
                Layer::new(vec![vec![1.0, 0.0]], vec![-0.5]),
                Layer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.2]),
            ],
            vec!["open".into(), "closed".into()],
        )
        .expect("valid fixture")
    }
}
