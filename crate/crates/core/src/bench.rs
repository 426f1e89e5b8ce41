//! Build/explanation timing comparison of the two encodings.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoding::{build, count_stats, EncodedNetwork, EncodingKind, EncodingStats};
use crate::error::ExplainError;
use crate::explain::report::MeanStd;
use crate::explain::{explain_batch, Explanation};
use crate::model::{Ann, Instance};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingBench {
    pub encoding: EncodingKind,
    /// Counts with `¬E` attached.
    pub counts: EncodingStats,
    /// Bound tightening plus constraint emission, over the rebuilds.
    pub build_seconds: MeanStd,
    /// Bound tightening alone, over the rebuilds.
    pub bounds_seconds: MeanStd,
    /// Explanation wall time, over the explained instances.
    pub explain_seconds: MeanStd,
    /// Mean build time plus the sum of explanation times.
    pub overall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub model_hash: String,
    pub architecture: Vec<usize>,
    pub dataset: String,
    pub instances: usize,
    pub explained: usize,
    /// Instances rejected because their prediction margin is a tie.
    pub rejected: usize,
    pub rebuilds: usize,
    pub order: String,
    pub std_kind: String,
    pub results: Vec<EncodingBench>,
    /// `(bigm − indicator) / indicator · 100`; negative means big-M is faster.
    pub build_delta_percent: Option<f64>,
    pub overall_delta_percent: Option<f64>,
    pub verdicts_agree: bool,
    /// Set when the run was aborted by an instance failure.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub rebuilds: usize,
    pub order: Vec<usize>,
    pub order_label: String,
    pub jobs: usize,
    pub solver: SolverConfig,
}

/// Rebuilds each encoding `rebuilds` times, explains every instance with the
/// last build, and compares. The returned report is always populated as far
/// as the run got; `Err` carries it together with the aborting error.
pub fn run_bench(
    ann: &Ann,
    model_hash: &str,
    dataset: &str,
    instances: &[Instance],
    opts: &BenchOptions,
) -> Result<BenchReport, (Box<BenchReport>, ExplainError)> {
    let mut report = BenchReport {
        model: ann.name().to_string(),
        model_hash: model_hash.to_string(),
        architecture: ann.architecture(),
        dataset: dataset.to_string(),
        instances: instances.len(),
        explained: 0,
        rejected: 0,
        rebuilds: opts.rebuilds,
        order: opts.order_label.clone(),
        std_kind: "population".into(),
        results: Vec::new(),
        build_delta_percent: None,
        overall_delta_percent: None,
        verdicts_agree: true,
        partial: false,
        failure: None,
    };
    let mut kept_sets: Vec<Vec<Option<Vec<usize>>>> = Vec::new();
    for kind in EncodingKind::ALL {
        match bench_one(ann, kind, instances, opts) {
            Ok((bench, outcomes)) => {
                report.results.push(bench);
                report.rejected = outcomes.iter().filter(|o| o.is_none()).count();
                report.explained = instances.len() - report.rejected;
                kept_sets.push(
                    outcomes
                        .into_iter()
                        .map(|o| o.map(|e| e.kept_features()))
                        .collect(),
                );
            }
            Err(e) => {
                report.partial = true;
                report.failure = Some(format!("{kind}: {e}"));
                return Err((Box::new(report), e));
            }
        }
    }
    report.verdicts_agree = kept_sets.windows(2).all(|w| w[0] == w[1]);
    let by = |k: EncodingKind| report.results.iter().find(|r| r.encoding == k);
    if let (Some(ind), Some(big)) = (by(EncodingKind::Indicator), by(EncodingKind::BigM)) {
        report.build_delta_percent = percent(big.build_seconds.mean, ind.build_seconds.mean);
        report.overall_delta_percent = percent(big.overall_seconds, ind.overall_seconds);
    }
    Ok(report)
}

fn percent(new: f64, base: f64) -> Option<f64> {
    (base > 0.0).then(|| (new - base) / base * 100.0)
}

type Outcomes = Vec<Option<Explanation>>;

fn bench_one(
    ann: &Ann,
    kind: EncodingKind,
    instances: &[Instance],
    opts: &BenchOptions,
) -> Result<(EncodingBench, Outcomes), ExplainError> {
    let mut builds = Vec::with_capacity(opts.rebuilds);
    let mut bounds = Vec::with_capacity(opts.rebuilds);
    let mut last: Option<EncodedNetwork> = None;
    for _ in 0..opts.rebuilds.max(1) {
        let start = Instant::now();
        let enc = build(ann, kind, &opts.solver)?;
        builds.push(start.elapsed().as_secs_f64());
        bounds.push(enc.bounds.elapsed.as_secs_f64());
        last = Some(enc);
    }
    let base = last.expect("at least one build");
    let counts = count_stats(&base.with_negation(0)?);

    let mut times = Vec::new();
    let mut outcomes = Vec::with_capacity(instances.len());
    for result in explain_batch(ann, &base, instances, &opts.order, &opts.solver, opts.jobs) {
        match result {
            Ok(e) => {
                times.push(e.total_time.as_secs_f64());
                outcomes.push(Some(e));
            }
            Err(ExplainError::TieMargin { .. }) => outcomes.push(None),
            Err(e) => return Err(e),
        }
    }
    let build_seconds = MeanStd::of(&builds);
    Ok((
        EncodingBench {
            encoding: kind,
            counts,
            build_seconds,
            bounds_seconds: MeanStd::of(&bounds),
            explain_seconds: MeanStd::of(&times),
            overall_seconds: build_seconds.mean + times.iter().sum::<f64>(),
        },
        outcomes,
    ))
}

/// Aligned text table: one row per encoding with counts, explanation and
/// build time (mean ± population std), and overall time; then the deltas.
pub fn format_table(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "model {} ({}), dataset {}, {} instances ({} explained, {} rejected), R = {}",
        report.model,
        report
            .architecture
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" → "),
        report.dataset,
        report.instances,
        report.explained,
        report.rejected,
        report.rebuilds
    );
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>6} {:>6}  {:>22}  {:>22}  {:>11}",
        "Encoding", "Vars", "Bin", "Cons", "Exp (s)", "Build (s)", "Overall (s)"
    );
    for r in &report.results {
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>6} {:>6}  {:>22}  {:>22}  {:>11.6}",
            r.encoding.name(),
            r.counts.real_vars,
            r.counts.binary_vars,
            r.counts.constraints,
            format!(
                "{:.6} ± {:.6}",
                r.explain_seconds.mean, r.explain_seconds.std
            ),
            format!("{:.6} ± {:.6}", r.build_seconds.mean, r.build_seconds.std),
            r.overall_seconds
        );
    }
    let pct = |p: Option<f64>| p.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.2}%"));
    let _ = writeln!(
        out,
        "build time delta (big-M vs indicator): {}",
        pct(report.build_delta_percent)
    );
    let _ = writeln!(
        out,
        "overall time delta (big-M vs indicator): {}",
        pct(report.overall_delta_percent)
    );
    let _ = writeln!(
        out,
        "verdicts agree across encodings: {}{}",
        if report.verdicts_agree { "yes" } else { "NO" },
        if report.partial { " (partial run)" } else { "" }
    );
    out
}
