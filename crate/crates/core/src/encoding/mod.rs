//! MILP encodings of a ReLU network.
//!
//! Two encodings of the same network are supported:
//!
//! * [`EncodingKind::Indicator`] splits every pre-activation into a positive
//!   part `x` and a negative part `s` (`pre = x − s`) and selects one of them
//!   with indicator constraints on a binary `z` (`z = 1 → x ≤ 0`,
//!   `z = 0 → s ≤ 0`).
//! * [`EncodingKind::BigM`] has no `s` variables; the ReLU is sandwiched by
//!   linear inequalities scaled by the neuron's pre-activation bounds, with
//!   `z = 1` meaning the neuron is active.
//!
//! Both need per-neuron bounds, which [`tighten_bounds`] computes by solving
//! MILPs over the already encoded prefix of the network. The negated
//! prediction `⋁_{j≠i} o_i ≤ o_j` is attached separately so that a single
//! encoding of the network can be reused for several predicted classes.

mod bounds;
mod layers;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::EncodingError;
use crate::milp::{LinearConstraint, MilpModel, VarId, VarKind};
use crate::model::Ann;
use crate::solver::SolverConfig;

pub use bounds::{
    tighten_bounds, tighten_bounds_with, BoundsCache, Interval, NetworkBounds, TightenOptions,
    BOUND_PADDING,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Indicator,
    #[serde(rename = "bigm")]
    BigM,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 2] = [EncodingKind::Indicator, EncodingKind::BigM];

    pub fn name(self) -> &'static str {
        match self {
            EncodingKind::Indicator => "indicator",
            EncodingKind::BigM => "bigm",
        }
    }
}

impl std::fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "indicator" => Ok(EncodingKind::Indicator),
            "bigm" | "big-m" => Ok(EncodingKind::BigM),
            other => Err(format!(
                "unknown encoding {other:?} (expected indicator or bigm)"
            )),
        }
    }
}

/// MILP variables of one hidden neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeuronVars {
    /// ReLU output.
    pub x: VarId,
    /// Negative part of the pre-activation (indicator encoding only).
    pub s: Option<VarId>,
    pub z: VarId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Negation {
    pub class: usize,
    /// `(j, q_j)` for every rival class `j`.
    pub q: Vec<(usize, VarId)>,
}

/// Variable, binary and constraint counts of an encoding.
///
/// Every non-binary variable counts as real (integer input features
/// included). A variable with at least one finite bound contributes one
/// constraint; binary domain declarations contribute none. Linear and
/// indicator constraints count one each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub real_vars: usize,
    pub binary_vars: usize,
    pub constraints: usize,
}

impl EncodingStats {
    /// Closed-form counts for `C ∧ F ∧ ¬E` with the indicator encoding.
    pub fn indicator_formula(n_inputs: usize, hidden: &[usize], n_outputs: usize) -> Self {
        let sum: usize = hidden.iter().sum();
        EncodingStats {
            real_vars: n_inputs + n_outputs + 2 * sum,
            binary_vars: n_outputs - 1 + sum,
            constraints: n_inputs + 2 * n_outputs + 5 * sum,
        }
    }

    /// Closed-form counts for `C ∧ F ∧ ¬E` with the big-M encoding.
    pub fn bigm_formula(n_inputs: usize, hidden: &[usize], n_outputs: usize) -> Self {
        let sum: usize = hidden.iter().sum();
        EncodingStats {
            real_vars: n_inputs + n_outputs + sum,
            binary_vars: n_outputs - 1 + sum,
            constraints: n_inputs + 2 * n_outputs + 4 * sum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncodedNetwork {
    pub kind: EncodingKind,
    pub model: MilpModel,
    pub inputs: Vec<VarId>,
    pub hidden: Vec<Vec<NeuronVars>>,
    pub outputs: Vec<VarId>,
    pub bounds: NetworkBounds,
    pub negation: Option<Negation>,
    /// Time spent emitting constraints (bound tightening excluded).
    pub encode_time: Duration,
}

impl EncodedNetwork {
    /// Bound tightening plus constraint emission.
    pub fn build_time(&self) -> Duration {
        self.bounds.elapsed + self.encode_time
    }

    /// Pins feature `i` to `value`; returns the previous bounds.
    pub fn fix_input(&mut self, i: usize, value: f64) -> Result<(f64, f64), EncodingError> {
        Ok(self.model.set_bounds(self.inputs[i], value, value)?)
    }

    pub fn set_input_bounds(
        &mut self,
        i: usize,
        lower: f64,
        upper: f64,
    ) -> Result<(f64, f64), EncodingError> {
        Ok(self.model.set_bounds(self.inputs[i], lower, upper)?)
    }

    /// Copy of this encoding with `¬E` for `class` attached.
    pub fn with_negation(&self, class: usize) -> Result<EncodedNetwork, EncodingError> {
        let mut enc = self.clone();
        attach_negation(&mut enc, class)?;
        Ok(enc)
    }

    /// Assignment of all MILP variables induced by the exact forward pass at
    /// `point`. `s = max(0, −pre)`; `z` selects the ReLU branch actually taken;
    /// `q` (if attached) marks the first rival with `o_i ≤ o_j`, if any.
    pub fn assignment_from_forward(&self, ann: &Ann, point: &[f64]) -> Vec<f64> {
        let act = ann.forward(point);
        let mut values = vec![0.0; self.model.num_variables()];
        for (v, &p) in self.inputs.iter().zip(point) {
            values[v.0] = p;
        }
        for (l, layer) in self.hidden.iter().enumerate() {
            for (i, nv) in layer.iter().enumerate() {
                let pre = act.pre[l][i];
                values[nv.x.0] = pre.max(0.0);
                if let Some(s) = nv.s {
                    values[s.0] = (-pre).max(0.0);
                }
                let z = self.model.variable(nv.z);
                values[nv.z.0] = if z.lower == z.upper {
                    z.lower
                } else {
                    match self.kind {
                        EncodingKind::Indicator => f64::from(pre <= 0.0),
                        EncodingKind::BigM => f64::from(pre > 0.0),
                    }
                };
            }
        }
        for (v, &o) in self.outputs.iter().zip(&act.logits) {
            values[v.0] = o;
        }
        if let Some(neg) = &self.negation {
            let oi = act.logits[neg.class];
            if let Some(&(_, q)) = neg.q.iter().find(|&&(j, _)| oi <= act.logits[j]) {
                values[q.0] = 1.0;
            }
        }
        values
    }
}

/// Emits `F` with the indicator encoding.
pub fn encode_indicator(
    ann: &Ann,
    bounds: &NetworkBounds,
) -> Result<EncodedNetwork, EncodingError> {
    encode(ann, bounds, EncodingKind::Indicator)
}

/// Emits `F` with the big-M encoding.
pub fn encode_bigm(ann: &Ann, bounds: &NetworkBounds) -> Result<EncodedNetwork, EncodingError> {
    encode(ann, bounds, EncodingKind::BigM)
}

pub fn encode(
    ann: &Ann,
    bounds: &NetworkBounds,
    kind: EncodingKind,
) -> Result<EncodedNetwork, EncodingError> {
    bounds.check_shape(ann)?;
    let start = Instant::now();
    let mut model = MilpModel::new(format!("{}_{}", ann.name(), kind.name()));
    let inputs = layers::add_inputs(&mut model, ann)?;
    let mut prev = inputs.clone();
    let mut hidden = Vec::with_capacity(ann.hidden_layers().len());
    for (l, layer) in ann.hidden_layers().iter().enumerate() {
        let vars = layers::add_hidden_layer(&mut model, kind, l, layer, &prev, bounds)?;
        prev = vars.iter().map(|v| v.x).collect();
        hidden.push(vars);
    }
    let outputs = layers::add_outputs(&mut model, ann.output_layer(), &prev)?;
    Ok(EncodedNetwork {
        kind,
        model,
        inputs,
        hidden,
        outputs,
        bounds: bounds.clone(),
        negation: None,
        encode_time: start.elapsed(),
    })
}

/// Tightens bounds for `kind` and emits the encoding.
pub fn build(
    ann: &Ann,
    kind: EncodingKind,
    solver: &SolverConfig,
) -> Result<EncodedNetwork, EncodingError> {
    let bounds = tighten_bounds(ann, kind, solver)?;
    encode(ann, &bounds, kind)
}

/// Attaches `¬E` for `class` using the encoding's own style.
pub fn attach_negation(enc: &mut EncodedNetwork, class: usize) -> Result<(), EncodingError> {
    match enc.kind {
        EncodingKind::Indicator => attach_negation_indicator(enc, class),
        EncodingKind::BigM => attach_negation_bigm(enc, class),
    }
}

fn negation_preamble(
    enc: &mut EncodedNetwork,
    class: usize,
) -> Result<Vec<(usize, VarId)>, EncodingError> {
    if enc.negation.is_some() {
        return Err(EncodingError::AlreadyNegated);
    }
    let classes = enc.outputs.len();
    if class >= classes {
        return Err(EncodingError::ClassOutOfRange { class, classes });
    }
    let mut q = Vec::with_capacity(classes - 1);
    for j in (0..classes).filter(|&j| j != class) {
        q.push((
            j,
            enc.model
                .add_variable(VarKind::Binary, 0.0, 1.0, format!("q_{j}"))?,
        ));
    }
    Ok(q)
}

fn add_at_least_one(enc: &mut EncodedNetwork, q: &[(usize, VarId)]) -> Result<(), EncodingError> {
    let terms = q.iter().map(|&(_, v)| (1.0, v)).collect();
    enc.model
        .add_named_constraint("neg_any", LinearConstraint::ge(terms, 1.0))?;
    Ok(())
}

/// `q_j = 1 → o_i ≤ o_j` for every rival `j`, plus `Σ q_j ≥ 1`.
pub fn attach_negation_indicator(
    enc: &mut EncodedNetwork,
    class: usize,
) -> Result<(), EncodingError> {
    if enc.kind != EncodingKind::Indicator {
        return Err(EncodingError::BoundsMismatch(
            "indicator negation on a big-M encoding".into(),
        ));
    }
    let q = negation_preamble(enc, class)?;
    let oi = enc.outputs[class];
    for &(j, qj) in &q {
        let oj = enc.outputs[j];
        enc.model.add_named_indicator(
            format!("neg_{j}"),
            qj,
            true,
            LinearConstraint::le(vec![(1.0, oi), (-1.0, oj)], 0.0),
        )?;
    }
    add_at_least_one(enc, &q)?;
    enc.negation = Some(Negation { class, q });
    Ok(())
}

/// `o_i − o_j ≤ (ub_i − lb_j)(1 − q_j)` for every rival `j`, plus `Σ q_j ≥ 1`.
pub fn attach_negation_bigm(enc: &mut EncodedNetwork, class: usize) -> Result<(), EncodingError> {
    if enc.kind != EncodingKind::BigM {
        return Err(EncodingError::BoundsMismatch(
            "big-M negation on an indicator encoding".into(),
        ));
    }
    let q = negation_preamble(enc, class)?;
    let oi = enc.outputs[class];
    let ub_i = enc.bounds.out_ub(class);
    for &(j, qj) in &q {
        let oj = enc.outputs[j];
        let big_m = ub_i - enc.bounds.out_lb(j);
        enc.model.add_named_constraint(
            format!("neg_{j}"),
            LinearConstraint::le(vec![(1.0, oi), (-1.0, oj), (big_m, qj)], big_m),
        )?;
    }
    add_at_least_one(enc, &q)?;
    enc.negation = Some(Negation { class, q });
    Ok(())
}

/// Counts per the convention documented on [`EncodingStats`].
pub fn count_stats(enc: &EncodedNetwork) -> EncodingStats {
    let model = &enc.model;
    let mut stats = EncodingStats {
        real_vars: 0,
        binary_vars: 0,
        constraints: model.num_constraints() + model.num_indicators(),
    };
    for v in model.variables() {
        if v.kind == VarKind::Binary {
            stats.binary_vars += 1;
        } else {
            stats.real_vars += 1;
            if v.lower.is_finite() || v.upper.is_finite() {
                stats.constraints += 1;
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests;
