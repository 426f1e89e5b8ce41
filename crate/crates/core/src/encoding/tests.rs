use super::*;
use crate::model::fixtures::{gate_net, tiny_net};
use crate::model::{FeatureSpec, Layer};
use crate::solver::{check_feasible, Feasibility};

fn solver() -> SolverConfig {
    SolverConfig::default()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn tiny_net_pre_bounds() {
    for kind in EncodingKind::ALL {
        let b = tighten_bounds(&tiny_net(), kind, &solver()).unwrap();
        for i in 0..2 {
            assert!(close(b.hidden[0][i].lower, -1.0) && close(b.hidden[0][i].upper, 1.0));
            assert!(close(b.relu_ub(0, i), 1.0 + BOUND_PADDING));
            assert!(close(b.slack_ub(0, i), 1.0 + BOUND_PADDING));
        }
        assert!(close(b.outputs[0].lower, 0.0) && close(b.outputs[0].upper, 1.0));
        assert!(close(b.outputs[1].lower, -1.0) && close(b.outputs[1].upper, 0.0));
    }
}

#[test]
fn gate_net_bounds() {
    for kind in EncodingKind::ALL {
        let b = tighten_bounds(&gate_net(), kind, &solver()).unwrap();
        assert!(close(b.hidden[0][0].lower, -0.5) && close(b.hidden[0][0].upper, 0.5));
        assert!(close(b.outputs[0].lower, 0.0) && close(b.outputs[0].upper, 0.5));
        assert!(close(b.outputs[1].lower, -0.3) && close(b.outputs[1].upper, 0.2));
        // Interval propagation is exact for this single-neuron chain.
        let ia = NetworkBounds::interval_arithmetic(&gate_net(), kind);
        for (a, e) in ia
            .outputs
            .iter()
            .chain(&ia.hidden[0])
            .zip(b.outputs.iter().chain(&b.hidden[0]))
        {
            assert!(close(a.lower, e.lower) && close(a.upper, e.upper));
        }
    }
}

#[test]
fn tiny_net_counts_before_and_after_negation() {
    let ann = tiny_net();
    let bounds = NetworkBounds::interval_arithmetic(&ann, EncodingKind::Indicator);
    let ind = encode_indicator(&ann, &bounds).unwrap();
    assert_eq!(
        count_stats(&ind),
        EncodingStats {
            real_vars: 8,
            binary_vars: 2,
            constraints: 14
        }
    );
    let big = encode_bigm(&ann, &bounds).unwrap();
    assert_eq!(
        count_stats(&big),
        EncodingStats {
            real_vars: 6,
            binary_vars: 2,
            constraints: 12
        }
    );
    assert_eq!(
        count_stats(&ind.with_negation(0).unwrap()),
        EncodingStats::indicator_formula(2, &[2], 2)
    );
    assert_eq!(
        count_stats(&big.with_negation(0).unwrap()),
        EncodingStats::bigm_formula(2, &[2], 2)
    );
}

#[test]
fn voting_shaped_counts() {
    assert_eq!(
        EncodingStats::indicator_formula(16, &[20, 20], 2),
        EncodingStats {
            real_vars: 98,
            binary_vars: 41,
            constraints: 220
        }
    );
    assert_eq!(
        EncodingStats::bigm_formula(16, &[20, 20], 2),
        EncodingStats {
            real_vars: 58,
            binary_vars: 41,
            constraints: 180
        }
    );
}

#[test]
fn negation_of_three_classes_adds_two_binaries_three_rows() {
    let ann = Ann::new(
        "three",
        vec![FeatureSpec::continuous("x", 0.0, 1.0)],
        vec![
            Layer::new(vec![vec![1.0]], vec![0.0]),
            Layer::new(vec![vec![1.0], vec![-1.0], vec![0.5]], vec![0.0, 0.0, 0.0]),
        ],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap();
    let bounds = NetworkBounds::interval_arithmetic(&ann, EncodingKind::Indicator);
    let enc = encode_indicator(&ann, &bounds).unwrap();
    let before = count_stats(&enc);
    let neg = enc.with_negation(1).unwrap();
    let after = count_stats(&neg);
    assert_eq!(after.binary_vars - before.binary_vars, 2);
    assert_eq!(after.constraints - before.constraints, 3);
    let q: Vec<usize> = neg
        .negation
        .as_ref()
        .unwrap()
        .q
        .iter()
        .map(|&(j, _)| j)
        .collect();
    assert_eq!(q, vec![0, 2]);
}

#[test]
fn double_negation_and_bad_class_rejected() {
    let ann = gate_net();
    let bounds = NetworkBounds::interval_arithmetic(&ann, EncodingKind::BigM);
    let mut enc = encode_bigm(&ann, &bounds).unwrap();
    assert!(matches!(
        attach_negation(&mut enc, 5),
        Err(EncodingError::ClassOutOfRange {
            class: 5,
            classes: 2
        })
    ));
    attach_negation(&mut enc, 0).unwrap();
    assert!(matches!(
        attach_negation(&mut enc, 0),
        Err(EncodingError::AlreadyNegated)
    ));
    assert!(attach_negation_indicator(&mut enc.clone(), 0).is_err());
}

#[test]
fn gate_bigm_negation_coefficient() {
    let ann = gate_net();
    let enc = build(&ann, EncodingKind::BigM, &solver())
        .unwrap()
        .with_negation(0)
        .unwrap();
    let row = enc.model.constraint_by_name("neg_1").unwrap();
    let q = enc.negation.as_ref().unwrap().q[0].1;
    let coef = row.terms.iter().find(|&&(_, v)| v == q).unwrap().0;
    assert!((coef - (0.8 + 2.0 * BOUND_PADDING)).abs() < 1e-12);
    assert!((row.rhs - coef).abs() < 1e-15);
}

#[test]
fn bigm_gate_semantics_with_fixed_input() {
    let ann = gate_net();
    let enc = build(&ann, EncodingKind::BigM, &solver()).unwrap();
    let z = enc.hidden[0][0].z;
    let x = enc.hidden[0][0].x;
    for (x1, active) in [(0.9, true), (0.2, false)] {
        let mut e = enc.clone();
        e.fix_input(0, x1).unwrap();
        e.fix_input(1, 0.3).unwrap();
        match check_feasible(&e.model, &solver()).unwrap() {
            Feasibility::Sat(w) => {
                assert_eq!(w[z.0] > 0.5, active);
                assert!((w[x.0] - (x1 - 0.5f64).max(0.0)).abs() < 1e-6);
            }
            Feasibility::Unsat => panic!("forward point must be feasible"),
        }
    }
}

#[test]
fn forward_assignment_satisfies_both_encodings() {
    for ann in [tiny_net(), gate_net()] {
        for kind in EncodingKind::ALL {
            let enc = build(&ann, kind, &solver()).unwrap();
            for p in [[0.0, 0.0], [1.0, 0.0], [0.3, 0.7], [0.9, 0.3], [0.5, 0.5]] {
                let values = enc.assignment_from_forward(&ann, &p);
                assert!(enc.model.max_violation(&values) <= 1e-9, "{kind} at {p:?}");
            }
        }
    }
}

#[test]
fn fully_fixed_gate_is_unsat_and_tiny_tie_is_sat() {
    for kind in EncodingKind::ALL {
        let mut gate = build(&gate_net(), kind, &solver())
            .unwrap()
            .with_negation(0)
            .unwrap();
        gate.fix_input(0, 0.9).unwrap();
        gate.fix_input(1, 0.3).unwrap();
        assert_eq!(
            check_feasible(&gate.model, &solver()).unwrap(),
            Feasibility::Unsat
        );

        let mut tiny = build(&tiny_net(), kind, &solver())
            .unwrap()
            .with_negation(0)
            .unwrap();
        tiny.fix_input(0, 1.0).unwrap();
        match check_feasible(&tiny.model, &solver()).unwrap() {
            Feasibility::Sat(w) => {
                let x2 = w[tiny.inputs[1].0];
                assert!((x2 - 1.0).abs() < 1e-6, "tie only at x2 = 1, got {x2}");
            }
            Feasibility::Unsat => panic!("tie point should be reachable"),
        }
    }
}

#[test]
fn stable_neurons_keep_row_counts() {
    let ann = Ann::new(
        "stable",
        vec![FeatureSpec::continuous("x", 0.0, 1.0)],
        vec![
            Layer::new(vec![vec![1.0], vec![-1.0]], vec![1.0, -2.0]),
            Layer::new(vec![vec![1.0, 1.0], vec![-1.0, 0.5]], vec![0.0, 0.0]),
        ],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let bounds = tighten_bounds(&ann, EncodingKind::BigM, &solver()).unwrap();
    let enc = encode_bigm(&ann, &bounds)
        .unwrap()
        .with_negation(0)
        .unwrap();
    assert_eq!(count_stats(&enc), EncodingStats::bigm_formula(1, &[2], 2));
    let z_on = enc.model.variable(enc.hidden[0][0].z);
    let z_off = enc.model.variable(enc.hidden[0][1].z);
    assert_eq!((z_on.lower, z_on.upper), (1.0, 1.0));
    assert_eq!((z_off.lower, z_off.upper), (0.0, 0.0));
    let plain = encode_bigm(&ann, &bounds).unwrap();
    for p in [0.0, 0.4, 1.0] {
        let values = plain.assignment_from_forward(&ann, &[p]);
        assert!(plain.model.max_violation(&values) <= 1e-9);
    }
}

#[test]
fn parallel_tightening_matches_sequential() {
    let ann = tiny_net();
    let seq = tighten_bounds(&ann, EncodingKind::Indicator, &solver()).unwrap();
    let par = tighten_bounds_with(
        &ann,
        EncodingKind::Indicator,
        &TightenOptions {
            solver: solver(),
            jobs: 2,
        },
    )
    .unwrap();
    assert_eq!(seq.hidden, par.hidden);
    assert_eq!(seq.outputs, par.outputs);
}

#[test]
fn cache_round_trip() {
    let b = tighten_bounds(&gate_net(), EncodingKind::BigM, &solver()).unwrap();
    let cache = BoundsCache::from_bounds(&b, "GateNet", "abc");
    let text = cache.to_json();
    let back = BoundsCache::from_json(&text).unwrap();
    assert_eq!(back, cache);
    let restored = back.to_bounds();
    assert_eq!(restored.hidden, b.hidden);
    assert_eq!(restored.outputs, b.outputs);
    assert!(text.contains("\"encoding\": \"bigm\""));
}

#[test]
fn bounds_shape_checked() {
    let b = NetworkBounds::interval_arithmetic(&gate_net(), EncodingKind::Indicator);
    assert!(matches!(
        encode_indicator(&tiny_net(), &b),
        Err(EncodingError::BoundsMismatch(_))
    ));
}

#[test]
fn encoding_kind_parse() {
    assert_eq!("bigm".parse::<EncodingKind>().unwrap(), EncodingKind::BigM);
    assert_eq!(
        "Indicator".parse::<EncodingKind>().unwrap(),
        EncodingKind::Indicator
    );
    assert!("sos".parse::<EncodingKind>().is_err());
}
