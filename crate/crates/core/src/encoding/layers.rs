use super::{EncodingKind, NetworkBounds, NeuronVars};
use crate::error::EncodingError;
use crate::milp::{LinearConstraint, MilpModel, VarId, VarKind};
use crate::model::{Ann, FeatureKind, Layer};

/// `l_i ≤ x_i ≤ u_i`; integer and binary features become integer columns.
pub(super) fn add_inputs(model: &mut MilpModel, ann: &Ann) -> Result<Vec<VarId>, EncodingError> {
    ann.features()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let kind = match f.kind {
                FeatureKind::Continuous => VarKind::Continuous,
                FeatureKind::Integer | FeatureKind::Binary => VarKind::Integer,
            };
            Ok(model.add_variable(kind, f.lower, f.upper, format!("x_{i}"))?)
        })
        .collect()
}

/// `Σ_j w_ij·prev_j` with zero weights dropped.
pub(super) fn affine_terms(layer: &Layer, i: usize, prev: &[VarId]) -> Vec<(f64, VarId)> {
    layer.weights[i]
        .iter()
        .zip(prev)
        .filter(|(w, _)| **w != 0.0)
        .map(|(&w, &v)| (w, v))
        .collect()
}

/// Emits hidden layer `l` (0-based) with the constraints of `kind`.
pub(super) fn add_hidden_layer(
    model: &mut MilpModel,
    kind: EncodingKind,
    l: usize,
    layer: &Layer,
    prev: &[VarId],
    bounds: &NetworkBounds,
) -> Result<Vec<NeuronVars>, EncodingError> {
    let tag = l + 1;
    let mut out = Vec::with_capacity(layer.size());
    for i in 0..layer.size() {
        let b = layer.bias[i];
        let pre = affine_terms(layer, i, prev);
        let lb = bounds.pre_lb(l, i);
        let ub = bounds.pre_ub(l, i);
        let vars = match kind {
            EncodingKind::Indicator => {
                let x = model.add_variable(
                    VarKind::Continuous,
                    0.0,
                    bounds.relu_ub(l, i),
                    format!("h{tag}_{i}"),
                )?;
                let s = model.add_variable(
                    VarKind::Continuous,
                    0.0,
                    bounds.slack_ub(l, i),
                    format!("s{tag}_{i}"),
                )?;
                let z = model.add_variable(VarKind::Binary, 0.0, 1.0, format!("z{tag}_{i}"))?;
                // pre = x − s
                let mut terms: Vec<(f64, VarId)> = pre.iter().map(|&(w, v)| (w, v)).collect();
                terms.push((-1.0, x));
                terms.push((1.0, s));
                model.add_named_constraint(
                    format!("relu{tag}_{i}"),
                    LinearConstraint::eq(terms, -b),
                )?;
                model.add_named_indicator(
                    format!("off{tag}_{i}"),
                    z,
                    true,
                    LinearConstraint::le(vec![(1.0, x)], 0.0),
                )?;
                model.add_named_indicator(
                    format!("on{tag}_{i}"),
                    z,
                    false,
                    LinearConstraint::le(vec![(1.0, s)], 0.0),
                )?;
                NeuronVars { x, s: Some(s), z }
            }
            EncodingKind::BigM => {
                let x = model.add_variable(
                    VarKind::Continuous,
                    0.0,
                    f64::INFINITY,
                    format!("h{tag}_{i}"),
                )?;
                let stable_on = lb >= 0.0;
                let stable_off = ub <= 0.0;
                let (zl, zu) = if stable_on {
                    (1.0, 1.0)
                } else if stable_off {
                    (0.0, 0.0)
                } else {
                    (0.0, 1.0)
                };
                let z = model.add_variable(VarKind::Binary, zl, zu, format!("z{tag}_{i}"))?;
                let mut x_minus_pre: Vec<(f64, VarId)> = vec![(1.0, x)];
                x_minus_pre.extend(pre.iter().map(|&(w, v)| (-w, v)));

                // x ≤ pre − lb·(1 − z)
                let upper = if stable_on {
                    LinearConstraint::le(x_minus_pre.clone(), b)
                } else {
                    let mut t = x_minus_pre.clone();
                    t.push((-lb, z));
                    LinearConstraint::le(t, b - lb)
                };
                model.add_named_constraint(format!("up{tag}_{i}"), upper)?;
                // x ≥ pre
                model.add_named_constraint(
                    format!("lo{tag}_{i}"),
                    LinearConstraint::ge(x_minus_pre, b),
                )?;
                // x ≤ ub·z
                let gate = if stable_off {
                    LinearConstraint::le(vec![(1.0, x)], 0.0)
                } else {
                    LinearConstraint::le(vec![(1.0, x), (-ub, z)], 0.0)
                };
                model.add_named_constraint(format!("gate{tag}_{i}"), gate)?;
                NeuronVars { x, s: None, z }
            }
        };
        out.push(vars);
    }
    Ok(out)
}

/// `o_i = Σ_j w_ij·prev_j + b_i` with free `o_i`.
pub(super) fn add_outputs(
    model: &mut MilpModel,
    layer: &Layer,
    prev: &[VarId],
) -> Result<Vec<VarId>, EncodingError> {
    let mut out = Vec::with_capacity(layer.size());
    for i in 0..layer.size() {
        let o = model.add_variable(
            VarKind::Continuous,
            f64::NEG_INFINITY,
            f64::INFINITY,
            format!("o_{i}"),
        )?;
        let mut terms = vec![(1.0, o)];
        terms.extend(
            affine_terms(layer, i, prev)
                .into_iter()
                .map(|(w, v)| (-w, v)),
        );
        model.add_named_constraint(
            format!("out_{i}"),
            LinearConstraint::eq(terms, layer.bias[i]),
        )?;
        out.push(o);
    }
    Ok(out)
}
