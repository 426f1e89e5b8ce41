//! End-to-end checks on the checked-in fixtures: LP golden files, caches,
//! reports and integer features.

mod common;

use milpexplain::encoding::{
    attach_negation, build, encode, tighten_bounds, BoundsCache, EncodingKind,
};
use milpexplain::explain::report::{ExplanationReport, MeanStd, ReportEntry};
use milpexplain::explain::{checked_prediction, Explainer, FeatureOrder};
use milpexplain::milp::{LinearConstraint, MilpModel, Sense, VarKind};
use milpexplain::model::{content_hash, FeatureKind};
use milpexplain::solver::SolverConfig;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// Compares against a golden file; `UPDATE_GOLDEN=1` rewrites it instead.
fn assert_golden(rel: &str, actual: &str) {
    let path = common::fixture(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{rel} differs from the golden file");
}

fn example_milp() -> MilpModel {
    let mut m = MilpModel::new("example");
    let x1 = m.add_variable(VarKind::Continuous, 1.0, 3.0, "x1").unwrap();
    let y1 = m
        .add_variable(VarKind::Continuous, 0.0, f64::INFINITY, "y1")
        .unwrap();
    let s1 = m
        .add_variable(VarKind::Continuous, 0.0, f64::INFINITY, "s1")
        .unwrap();
    let z1 = m.add_variable(VarKind::Binary, 0.0, 1.0, "z1").unwrap();
    m.add_named_constraint(
        "relu",
        LinearConstraint::eq(vec![(3.0, x1), (1.0, s1), (-1.0, y1)], 2.0),
    )
    .unwrap();
    m.add_named_constraint(
        "y_cap",
        LinearConstraint::le(vec![(1.0, y1), (-3.0, x1)], -2.0),
    )
    .unwrap();
    m.add_named_constraint(
        "s_cap",
        LinearConstraint::le(vec![(1.0, s1), (-3.0, x1)], -2.0),
    )
    .unwrap();
    m.add_named_indicator("off", z1, true, LinearConstraint::le(vec![(1.0, y1)], 0.0))
        .unwrap();
    m.add_named_indicator("on", z1, false, LinearConstraint::le(vec![(1.0, s1)], 0.0))
        .unwrap();
    m.set_objective(Sense::Minimize, vec![(1.0, y1)], 0.0)
        .unwrap();
    m
}

#[test]
fn example_milp_lp_golden() {
    assert_golden("golden/example_milp.lp", &example_milp().export_lp());
}

#[test]
fn gate_lp_golden_both_encodings() {
    let ann = common::model("gate_net");
    let inst = &common::instances(&ann, "gate")[0];
    for (kind, file) in [
        (EncodingKind::BigM, "golden/gate_bigm_negated.lp"),
        (EncodingKind::Indicator, "golden/gate_indicator_negated.lp"),
    ] {
        let mut enc = build(&ann, kind, &cfg()).unwrap();
        for (k, &v) in inst.values.iter().enumerate() {
            enc.fix_input(k, v).unwrap();
        }
        attach_negation(&mut enc, checked_prediction(&ann, inst).unwrap()).unwrap();
        assert_golden(file, &enc.model.export_lp());
    }
}

#[test]
fn bounds_cache_round_trip_on_fixtures() {
    for (name, _) in &common::FIXTURES[..3] {
        let text = common::read(&format!("models/{name}.json"));
        let ann = common::model(name);
        for kind in EncodingKind::ALL {
            let bounds = tighten_bounds(&ann, kind, &cfg()).unwrap();
            let cache =
                BoundsCache::from_bounds(&bounds, ann.name(), &content_hash(text.as_bytes()));
            let back = BoundsCache::from_json(&cache.to_json())
                .unwrap()
                .to_bounds();
            assert_eq!(back.hidden, bounds.hidden);
            assert_eq!(back.outputs, bounds.outputs);
            // Encodings from cached bounds are identical to fresh ones.
            assert_eq!(
                encode(&ann, &back, kind).unwrap().model.export_lp(),
                encode(&ann, &bounds, kind).unwrap().model.export_lp()
            );
        }
    }
}

#[test]
fn reports_are_deterministic_without_timings() {
    let ann = common::model("mixed_net");
    let instances = common::instances(&ann, "mixed");
    let order = FeatureOrder::Seeded(9).permutation(ann.num_inputs());
    let run = || {
        let mut ex = Explainer::build(&ann, EncodingKind::BigM, cfg()).unwrap();
        let entries: Vec<ReportEntry> = instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                ReportEntry::explained(&ann, i, inst, &ex.explain(inst, &order).unwrap())
            })
            .collect();
        ExplanationReport {
            model: ann.name().into(),
            model_hash: "h".into(),
            dataset: "mixed.csv".into(),
            encoding: EncodingKind::BigM,
            order: "seed:9".into(),
            build_seconds: 0.5,
            explain_seconds: MeanStd::of(&[0.1, 0.2]),
            entries,
        }
        .zero_timings()
        .to_json()
    };
    let first = run();
    assert_eq!(first, run());
    let parsed = ExplanationReport::from_json(&first).unwrap();
    assert_eq!(parsed.to_json(), first);
}

#[test]
fn integer_features_keep_integral_values() {
    let ann = common::model("mixed_net");
    let integral: Vec<usize> = ann
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind != FeatureKind::Continuous)
        .map(|(k, _)| k)
        .collect();
    assert_eq!(integral, vec![2, 3]);
    let mut ex = Explainer::build(&ann, EncodingKind::Indicator, cfg()).unwrap();
    let mut integral_kept = 0;
    for inst in common::instances(&ann, "mixed") {
        let e = ex.explain(&inst, &[3, 2, 1, 0]).unwrap();
        for &(k, v) in &e.kept {
            assert_eq!(v, inst.values[k]);
            if integral.contains(&k) {
                assert_eq!(v.fract(), 0.0);
                integral_kept += 1;
            }
        }
    }
    assert!(integral_kept > 0, "no integer feature was ever kept");
}
