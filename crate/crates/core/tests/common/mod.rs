//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use milpexplain::dataset::read_instances;
use milpexplain::model::{load_model, margin, Ann, FeatureKind, FeatureSpec, Instance, Layer};
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn model(name: &str) -> Ann {
    load_model(&read(&format!("models/{name}.json"))).expect("fixture model")
}

pub fn instances(ann: &Ann, dataset: &str) -> Vec<Instance> {
    read_instances(&read(&format!("data/{dataset}.csv")), ann).expect("fixture dataset")
}

/// Fixture nets paired with their datasets.
pub const FIXTURES: [(&str, &str); 4] = [
    ("gate_net", "gate"),
    ("tiny_net", "tiny"),
    ("mixed_net", "mixed"),
    ("wide_net", "wide"),
];

/// Dense net with weights in [-1, 1] and biases in [-0.5, 0.5]. With
/// `integral`, roughly a third of the features are integer or binary.
pub fn random_net(
    rng: &mut impl Rng,
    n_inputs: usize,
    hidden: &[usize],
    n_outputs: usize,
    integral: bool,
) -> Ann {
    let features = (0..n_inputs)
        .map(|k| {
            let name = format!("f{k}");
            match (integral, rng.gen_range(0..3)) {
                (true, 0) => FeatureSpec {
                    name,
                    kind: FeatureKind::Integer,
                    lower: 0.0,
                    upper: f64::from(rng.gen_range(1..4)),
                },
                (true, 1) => FeatureSpec {
                    name,
                    kind: FeatureKind::Binary,
                    lower: 0.0,
                    upper: 1.0,
                },
                _ => {
                    let lower = rng.gen_range(-1.0..0.5);
                    FeatureSpec::continuous(name, lower, lower + rng.gen_range(0.2..1.5))
                }
            }
        })
        .collect();
    let mut widths = vec![n_inputs];
    widths.extend_from_slice(hidden);
    widths.push(n_outputs);
    let layers = widths
        .windows(2)
        .map(|w| {
            Layer::new(
                (0..w[1])
                    .map(|_| (0..w[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect(),
                (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            )
        })
        .collect();
    let classes = (0..n_outputs).map(|k| format!("c{k}")).collect();
    Ann::new("random", features, layers, classes).expect("valid random net")
}

pub fn random_point(rng: &mut impl Rng, ann: &Ann) -> Vec<f64> {
    ann.features()
        .iter()
        .map(|f| {
            if f.kind.is_integral() {
                f64::from(rng.gen_range(f.lower as i32..=f.upper as i32))
            } else {
                rng.gen_range(f.lower..=f.upper)
            }
        })
        .collect()
}

/// Random point whose prediction margin is at least `min_margin`.
pub fn decisive_point(rng: &mut impl Rng, ann: &Ann, min_margin: f64) -> Option<Instance> {
    (0..200).find_map(|_| {
        let p = random_point(rng, ann);
        let logits = ann.forward(&p).logits;
        let class = milpexplain::model::argmax(&logits);
        (margin(&logits, class) >= min_margin).then(|| Instance::new(p))
    })
}
