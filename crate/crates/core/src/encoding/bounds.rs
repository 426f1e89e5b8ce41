use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{layers, EncodingKind};
use crate::error::EncodingError;
use crate::milp::{MilpModel, Sense, VarId};
use crate::model::{Ann, Layer};
use crate::solver::{solve_milp, MilpStatus, Mode, SolverConfig};

/// Widening applied to every computed bound before it is used in an encoding.
pub const BOUND_PADDING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lower - slack && v <= self.upper + slack
    }
}

/// Pre-activation bounds of every hidden neuron and bounds of every logit.
///
/// Stored values are the exact optima; accessors return them widened by
/// `padding`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkBounds {
    pub kind: EncodingKind,
    pub hidden: Vec<Vec<Interval>>,
    pub outputs: Vec<Interval>,
    pub padding: f64,
    pub elapsed: Duration,
}

impl NetworkBounds {
    pub fn pre_lb(&self, l: usize, i: usize) -> f64 {
        self.hidden[l][i].lower - self.padding
    }

    pub fn pre_ub(&self, l: usize, i: usize) -> f64 {
        self.hidden[l][i].upper + self.padding
    }

    /// Upper bound of the ReLU output, `max(0, pre_ub)`.
    pub fn relu_ub(&self, l: usize, i: usize) -> f64 {
        self.pre_ub(l, i).max(0.0)
    }

    /// Upper bound of the negative part, `max(0, −pre_lb)`.
    pub fn slack_ub(&self, l: usize, i: usize) -> f64 {
        (-self.pre_lb(l, i)).max(0.0)
    }

    pub fn out_lb(&self, j: usize) -> f64 {
        self.outputs[j].lower - self.padding
    }

    pub fn out_ub(&self, j: usize) -> f64 {
        self.outputs[j].upper + self.padding
    }

    pub(crate) fn check_shape(&self, ann: &Ann) -> Result<(), EncodingError> {
        let sizes: Vec<usize> = self.hidden.iter().map(Vec::len).collect();
        if sizes != ann.hidden_sizes() || self.outputs.len() != ann.num_classes() {
            return Err(EncodingError::BoundsMismatch(format!(
                "bounds cover hidden {:?} / {} outputs, network has {:?} / {}",
                sizes,
                self.outputs.len(),
                ann.hidden_sizes(),
                ann.num_classes()
            )));
        }
        Ok(())
    }

    /// Interval-arithmetic bounds: sound but generally looser than
    /// [`tighten_bounds`]. Cheap; used where bound quality is irrelevant.
    pub fn interval_arithmetic(ann: &Ann, kind: EncodingKind) -> NetworkBounds {
        let mut boxes: Vec<Interval> = ann
            .features()
            .iter()
            .map(|f| Interval {
                lower: f.lower,
                upper: f.upper,
            })
            .collect();
        let mut hidden = Vec::new();
        for layer in ann.hidden_layers() {
            let pre = propagate(layer, &boxes);
            boxes = pre
                .iter()
                .map(|iv| Interval {
                    lower: iv.lower.max(0.0),
                    upper: iv.upper.max(0.0),
                })
                .collect();
            hidden.push(pre);
        }
        let outputs = propagate(ann.output_layer(), &boxes);
        NetworkBounds {
            kind,
            hidden,
            outputs,
            padding: BOUND_PADDING,
            elapsed: Duration::ZERO,
        }
    }
}

fn propagate(layer: &Layer, inputs: &[Interval]) -> Vec<Interval> {
    (0..layer.size())
        .map(|i| {
            let mut lo = layer.bias[i];
            let mut hi = layer.bias[i];
            for (&w, iv) in layer.weights[i].iter().zip(inputs) {
                if w >= 0.0 {
                    lo += w * iv.lower;
                    hi += w * iv.upper;
                } else {
                    lo += w * iv.upper;
                    hi += w * iv.lower;
                }
            }
            Interval {
                lower: lo,
                upper: hi,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightenOptions {
    pub solver: SolverConfig,
    /// Worker threads solving neurons of one layer concurrently.
    pub jobs: usize,
}

impl Default for TightenOptions {
    fn default() -> Self {
        TightenOptions {
            solver: SolverConfig::default(),
            jobs: 1,
        }
    }
}

/// Computes bounds layer by layer; single-threaded.
pub fn tighten_bounds(
    ann: &Ann,
    kind: EncodingKind,
    solver: &SolverConfig,
) -> Result<NetworkBounds, EncodingError> {
    tighten_bounds_with(
        ann,
        kind,
        &TightenOptions {
            solver: solver.clone(),
            jobs: 1,
        },
    )
}

/// Computes bounds layer by layer.
///
/// For hidden neuron `(l, i)` the affine pre-activation is minimized and
/// maximized subject to the `kind` encoding of layers `1..l` (built with the
/// bounds found so far). Logit bounds are optimized over all hidden layers.
pub fn tighten_bounds_with(
    ann: &Ann,
    kind: EncodingKind,
    opts: &TightenOptions,
) -> Result<NetworkBounds, EncodingError> {
    let start = Instant::now();
    let mut bounds = NetworkBounds {
        kind,
        hidden: Vec::with_capacity(ann.hidden_layers().len()),
        outputs: Vec::new(),
        padding: BOUND_PADDING,
        elapsed: Duration::ZERO,
    };
    let mut model = MilpModel::new(format!("{}_{}_bounds", ann.name(), kind.name()));
    let mut prev = layers::add_inputs(&mut model, ann)?;
    for (l, layer) in ann.hidden_layers().iter().enumerate() {
        let intervals = layer_extrema(&model, layer, &prev, opts, &|i| {
            format!("layer {} neuron {}", l + 1, i)
        })?;
        bounds.hidden.push(intervals);
        let vars = layers::add_hidden_layer(&mut model, kind, l, layer, &prev, &bounds)?;
        prev = vars.iter().map(|v| v.x).collect();
    }
    bounds.outputs = layer_extrema(&model, ann.output_layer(), &prev, opts, &|j| {
        format!("output {j}")
    })?;
    bounds.elapsed = start.elapsed();
    Ok(bounds)
}

fn layer_extrema(
    model: &MilpModel,
    layer: &Layer,
    prev: &[VarId],
    opts: &TightenOptions,
    what: &(dyn Fn(usize) -> String + Sync),
) -> Result<Vec<Interval>, EncodingError> {
    let n = layer.size();
    let jobs = opts.jobs.max(1).min(n);
    if jobs <= 1 {
        let mut work = model.clone();
        return (0..n)
            .map(|i| neuron_extrema(&mut work, layer, i, prev, &opts.solver, what))
            .collect();
    }
    let chunk = n.div_ceil(jobs);
    let mut results: Vec<Option<Result<Interval, EncodingError>>> = vec![None; n];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|t| {
                let range = (t * chunk)..((t + 1) * chunk).min(n);
                scope.spawn(move || {
                    let mut work = model.clone();
                    range
                        .map(|i| {
                            (
                                i,
                                neuron_extrema(&mut work, layer, i, prev, &opts.solver, what),
                            )
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("bound worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every neuron solved"))
        .collect()
}

fn neuron_extrema(
    model: &mut MilpModel,
    layer: &Layer,
    i: usize,
    prev: &[VarId],
    solver: &SolverConfig,
    what: &(dyn Fn(usize) -> String + Sync),
) -> Result<Interval, EncodingError> {
    let terms = layers::affine_terms(layer, i, prev);
    model.set_objective(Sense::Minimize, terms, layer.bias[i])?;
    let mut ends = [0.0; 2];
    for (k, mode) in [Mode::Minimize, Mode::Maximize].into_iter().enumerate() {
        let out = solve_milp(model, mode, solver)?;
        match (out.status, out.objective) {
            (MilpStatus::Optimal, Some(v)) => ends[k] = v,
            (status, _) => {
                return Err(EncodingError::Tightening {
                    what: what(i),
                    status: format!("{status:?}"),
                })
            }
        }
    }
    model.clear_objective();
    Ok(Interval {
        lower: ends[0],
        upper: ends[1],
    })
}

/// On-disk form of [`NetworkBounds`], bound to a model by name and hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCache {
    pub model: String,
    pub model_hash: String,
    pub encoding: EncodingKind,
    pub padding: f64,
    pub tightening_seconds: f64,
    pub hidden: Vec<Vec<CachedNeuron>>,
    pub outputs: Vec<CachedOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedNeuron {
    pub pre_lb: f64,
    pub pre_ub: f64,
    /// Derived from the padded pre-activation bounds.
    pub relu_ub: f64,
    pub slack_ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedOutput {
    pub lb: f64,
    pub ub: f64,
}

impl BoundsCache {
    pub fn from_bounds(bounds: &NetworkBounds, model: &str, model_hash: &str) -> Self {
        BoundsCache {
            model: model.to_string(),
            model_hash: model_hash.to_string(),
            encoding: bounds.kind,
            padding: bounds.padding,
            tightening_seconds: bounds.elapsed.as_secs_f64(),
            hidden: bounds
                .hidden
                .iter()
                .enumerate()
                .map(|(l, layer)| {
                    layer
                        .iter()
                        .enumerate()
                        .map(|(i, iv)| CachedNeuron {
                            pre_lb: iv.lower,
                            pre_ub: iv.upper,
                            relu_ub: bounds.relu_ub(l, i),
                            slack_ub: bounds.slack_ub(l, i),
                        })
                        .collect()
                })
                .collect(),
            outputs: bounds
                .outputs
                .iter()
                .map(|iv| CachedOutput {
                    lb: iv.lower,
                    ub: iv.upper,
                })
                .collect(),
        }
    }

    pub fn to_bounds(&self) -> NetworkBounds {
        NetworkBounds {
            kind: self.encoding,
            hidden: self
                .hidden
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|n| Interval {
                            lower: n.pre_lb,
                            upper: n.pre_ub,
                        })
                        .collect()
                })
                .collect(),
            outputs: self
                .outputs
                .iter()
                .map(|o| Interval {
                    lower: o.lb,
                    upper: o.ub,
                })
                .collect(),
            padding: self.padding,
            elapsed: Duration::from_secs_f64(self.tightening_seconds.max(0.0)),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bounds serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
