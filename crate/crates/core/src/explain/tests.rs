use super::*;
use crate::encoding::attach_negation;
use crate::model::fixtures::{gate_net, tiny_net};
use crate::model::{FeatureSpec, Layer};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn negated(ann: &Ann, kind: EncodingKind, class: usize) -> EncodedNetwork {
    let mut enc = build(ann, kind, &cfg()).unwrap();
    attach_negation(&mut enc, class).unwrap();
    enc
}

fn set(items: &[usize]) -> BTreeSet<usize> {
    items.iter().copied().collect()
}

fn constant_net() -> Ann {
    let t = tiny_net();
    let mut layers = t.layers().to_vec();
    layers[1].bias = vec![0.5, 0.0];
    Ann::new(
        "Constant",
        t.features().to_vec(),
        layers,
        t.classes().to_vec(),
    )
    .unwrap()
}

#[test]
fn gate_entailment_examples() {
    let ann = gate_net();
    let inst = Instance::new(vec![0.9, 0.3]);
    for kind in EncodingKind::ALL {
        let mut enc = negated(&ann, kind, 0);
        assert!(
            entails(&ann, &mut enc, &inst, &set(&[1]), &cfg())
                .unwrap()
                .holds
        );
        assert!(
            entails(&ann, &mut enc, &inst, &set(&[]), &cfg())
                .unwrap()
                .holds
        );
        let v = entails(&ann, &mut enc, &inst, &set(&[0]), &cfg()).unwrap();
        assert!(!v.holds);
        let cex = v.counterexample.unwrap();
        assert_eq!(cex.values[1], 0.3);
        assert!(cex.values[0] <= 0.6 + 1e-6, "{kind}: {cex:?}");
        assert!(margin(&ann.forward(&cex.values).logits, 0) <= TIE_TOLERANCE);
    }
}

#[test]
fn gate_explanation_keeps_x1_only() {
    let ann = gate_net();
    let inst = Instance::new(vec![0.9, 0.3]);
    for kind in EncodingKind::ALL {
        for order in [FeatureOrder::Natural, FeatureOrder::Reverse] {
            let mut enc = negated(&ann, kind, 0);
            let e =
                minimal_explanation(&ann, &mut enc, &inst, &order.permutation(2), &cfg()).unwrap();
            assert_eq!(e.kept, vec![(0, 0.9)]);
            assert_eq!(e.dropped, vec![1]);
            assert_eq!(e.checks.len(), 2);
        }
    }
}

#[test]
fn tiny_net_needs_both_features() {
    let ann = tiny_net();
    let inst = Instance::new(vec![1.0, 0.0]);
    for kind in EncodingKind::ALL {
        let mut enc = negated(&ann, kind, 0);
        let e = minimal_explanation(&ann, &mut enc, &inst, &[0, 1], &cfg()).unwrap();
        assert_eq!(e.kept, vec![(0, 1.0), (1, 0.0)]);
        assert!(e.dropped.is_empty());
    }
}

#[test]
fn constant_class_net_keeps_nothing() {
    let ann = constant_net();
    let inst = Instance::new(vec![0.2, 0.7]);
    for kind in EncodingKind::ALL {
        let mut enc = negated(&ann, kind, 0);
        let e = minimal_explanation(&ann, &mut enc, &inst, &[0, 1], &cfg()).unwrap();
        assert!(e.kept.is_empty());
    }
}

#[test]
fn bounds_restored_after_explanation() {
    let ann = gate_net();
    let inst = Instance::new(vec![0.9, 0.3]);
    for kind in EncodingKind::ALL {
        let mut enc = negated(&ann, kind, 0);
        let before = enc.model.export_lp();
        minimal_explanation(&ann, &mut enc, &inst, &[0, 1], &cfg()).unwrap();
        assert_eq!(enc.model.export_lp(), before);
    }
}

#[test]
fn tie_and_class_mismatch_rejected() {
    let ann = tiny_net();
    let mut enc = negated(&ann, EncodingKind::BigM, 0);
    let tie = Instance::new(vec![0.4, 0.4]);
    assert!(matches!(
        minimal_explanation(&ann, &mut enc, &tie, &[0, 1], &cfg()),
        Err(ExplainError::TieMargin { .. })
    ));
    let gate = gate_net();
    let mut enc = negated(&gate, EncodingKind::BigM, 1);
    assert!(matches!(
        minimal_explanation(
            &gate,
            &mut enc,
            &Instance::new(vec![0.9, 0.3]),
            &[0, 1],
            &cfg()
        ),
        Err(ExplainError::ClassMismatch {
            encoded: 1,
            predicted: 0
        })
    ));
    let mut plain = build(&gate, EncodingKind::BigM, &cfg()).unwrap();
    assert!(entails(
        &gate,
        &mut plain,
        &Instance::new(vec![0.9, 0.3]),
        &set(&[]),
        &cfg()
    )
    .is_err());
}

#[test]
fn verification_passes_and_catches_tampering() {
    let ann = gate_net();
    let inst = Instance::new(vec![0.9, 0.3]);
    for kind in EncodingKind::ALL {
        let mut enc = negated(&ann, kind, 0);
        let good = minimal_explanation(&ann, &mut enc, &inst, &[0, 1], &cfg()).unwrap();
        assert!(verify_explanation(&ann, kind, &inst, &good, &cfg())
            .unwrap()
            .passed());

        let mut wrong = good.clone();
        wrong.kept = vec![(1, 0.3)];
        wrong.dropped = vec![0];
        let r = verify_explanation(&ann, kind, &inst, &wrong, &cfg()).unwrap();
        assert!(r.failures.contains(&VerificationFailure::Insufficient));

        let mut bloated = good.clone();
        bloated.kept = vec![(0, 0.9), (1, 0.3)];
        bloated.dropped = vec![];
        let r = verify_explanation(&ann, kind, &inst, &bloated, &cfg()).unwrap();
        assert_eq!(
            r.failures,
            vec![VerificationFailure::NotMinimal { feature: 1 }]
        );
        assert_eq!(
            r.failures[0].describe(&ann),
            "x2 is kept but the prediction holds without it"
        );
    }
}

#[test]
fn oracle_examples() {
    let gate = gate_net();
    let inst = Instance::new(vec![0.9, 0.3]);
    assert!(
        brute_force_entails(&gate, &inst, &set(&[1]), 0)
            .unwrap()
            .holds
    );
    let v = brute_force_entails(&gate, &inst, &set(&[0]), 0).unwrap();
    assert!(!v.holds);
    assert!(margin(&gate.forward(&v.counterexample.unwrap().values).logits, 0) <= TIE_TOLERANCE);
    let tiny = tiny_net();
    assert!(
        !brute_force_entails(&tiny, &Instance::new(vec![1.0, 0.0]), &set(&[1]), 0)
            .unwrap()
            .holds
    );
    assert!(
        brute_force_entails(&tiny, &Instance::new(vec![1.0, 0.0]), &set(&[]), 0)
            .unwrap()
            .holds
    );
}

#[test]
fn oracle_size_guard() {
    let wide = Ann::new(
        "wide",
        vec![FeatureSpec::continuous("x", 0.0, 1.0)],
        vec![
            Layer::new(vec![vec![1.0]; 11], vec![0.0; 11]),
            Layer::new(vec![vec![1.0; 11], vec![0.0; 11]], vec![0.0, 0.0]),
        ],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    assert!(matches!(
        brute_force_entails(&wide, &Instance::new(vec![0.5]), &set(&[]), 0),
        Err(ExplainError::TooLarge {
            limit: 10,
            found: 11
        })
    ));
}

#[test]
fn integer_features_enumerated_by_oracle_and_solver() {
    // class 0 iff k + x > 2.5 with k ∈ {0..3} integer
    let mut k = FeatureSpec::continuous("k", 0.0, 3.0);
    k.kind = crate::model::FeatureKind::Integer;
    let ann = Ann::new(
        "int",
        vec![k, FeatureSpec::continuous("x", 0.0, 1.0)],
        vec![
            Layer::new(vec![vec![1.0, 1.0]], vec![0.0]),
            Layer::new(vec![vec![1.0], vec![0.0]], vec![0.0, 2.5]),
        ],
        vec!["hi".into(), "lo".into()],
    )
    .unwrap();
    let inst = Instance::new(vec![3.0, 0.2]);
    for kind in EncodingKind::ALL {
        let mut enc = negated(&ann, kind, 0);
        for free in [set(&[0]), set(&[1]), set(&[0, 1]), set(&[])] {
            let solver = entails(&ann, &mut enc, &inst, &free, &cfg()).unwrap();
            let oracle = brute_force_entails(&ann, &inst, &free, 0).unwrap();
            assert_eq!(solver.holds, oracle.holds, "{kind} {free:?}");
        }
        let e = minimal_explanation(&ann, &mut enc, &inst, &[0, 1], &cfg()).unwrap();
        assert_eq!(e.kept, vec![(0, 3.0)]);
    }
}

#[test]
fn orders() {
    assert_eq!(FeatureOrder::Natural.permutation(3), vec![0, 1, 2]);
    assert_eq!(FeatureOrder::Reverse.permutation(3), vec![2, 1, 0]);
    let mut p = FeatureOrder::Seeded(7).permutation(10);
    assert_eq!(p, FeatureOrder::Seeded(7).permutation(10));
    p.sort();
    assert_eq!(p, (0..10).collect::<Vec<_>>());
    assert_eq!(
        "seed:42".parse::<FeatureOrder>().unwrap(),
        FeatureOrder::Seeded(42)
    );
    assert_eq!(
        "reverse".parse::<FeatureOrder>().unwrap().to_string(),
        "reverse"
    );
    assert!("seed:x".parse::<FeatureOrder>().is_err());
}

#[test]
fn explainer_reuses_per_class_encodings() {
    let ann = gate_net();
    let mut ex = Explainer::build(&ann, EncodingKind::Indicator, cfg()).unwrap();
    let a = ex.explain(&Instance::new(vec![0.9, 0.3]), &[0, 1]).unwrap();
    let b = ex.explain(&Instance::new(vec![0.1, 0.3]), &[0, 1]).unwrap();
    assert_eq!((a.class, b.class), (0, 1));
    assert_eq!(a.kept, vec![(0, 0.9)]);
    assert_eq!(b.kept, vec![(0, 0.1)]);
}

#[test]
fn report_round_trip() {
    let ann = gate_net();
    let inst = Instance::new(vec![0.9, 0.3]);
    let mut ex = Explainer::build(&ann, EncodingKind::BigM, cfg()).unwrap();
    let e = ex.explain(&inst, &[0, 1]).unwrap();
    let entry = report::ReportEntry::explained(&ann, 0, &inst, &e);
    let back = entry.explanation().unwrap();
    assert_eq!(back.kept, e.kept);
    assert_eq!(back.dropped, e.dropped);
    assert_eq!(entry.kept[0].name, "x1");
    assert_eq!(
        report::MeanStd::of(&[1.0, 3.0]),
        report::MeanStd {
            mean: 2.0,
            std: 1.0
        }
    );
}
