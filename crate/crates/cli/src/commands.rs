use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use milpexplain::bench::{format_table, run_bench, BenchOptions, BenchReport};
use milpexplain::dataset::read_instances;
use milpexplain::encoding::{
    self, attach_negation, count_stats, tighten_bounds_with, BoundsCache, EncodingKind,
    NetworkBounds, TightenOptions,
};
use milpexplain::error::{EncodingError, ExplainError, ModelError, SolveError};
use milpexplain::explain::report::{ExplanationReport, MeanStd, ReportEntry};
use milpexplain::explain::{checked_prediction, explain_batch, verify_explanation, FeatureOrder};
use milpexplain::model::{content_hash, load_model, Ann, Instance};
use milpexplain::solver::SolverConfig;

pub const SEED_ENV: &str = "MILPEXPLAIN_SEED";

static SOLVER: OnceLock<SolverConfig> = OnceLock::new();

/// Sets the solver limits used by every command; call once before running one.
pub fn configure_solver(config: SolverConfig) {
    let _ = SOLVER.set(config);
}

fn solver_config() -> SolverConfig {
    SOLVER.get().cloned().unwrap_or_default()
}

#[derive(Debug)]
pub enum CliError {
    Verification(String),
    Input(String),
    Io(String),
    Inconclusive(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
            CliError::Inconclusive(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verification(m)
            | CliError::Input(m)
            | CliError::Io(m)
            | CliError::Inconclusive(m) => f.write_str(m),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EncodingError> for CliError {
    fn from(e: EncodingError) -> Self {
        match e {
            EncodingError::Solve(_) | EncodingError::Tightening { .. } => {
                CliError::Inconclusive(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Encoding(e) => e.into(),
            ExplainError::Solve(SolveError::Inconclusive(_) | SolveError::Numerical(_)) => {
                CliError::Inconclusive(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Model plus the hash of its file bytes. An unparseable document is an I/O
/// problem when it is not even valid structured text (e.g. truncated).
fn load(path: &Path) -> Result<(Ann, String), CliError> {
    let text = read_text(path)?;
    if serde_json::from_str::<serde_json::Value>(&text).is_err() {
        return Err(CliError::Io(format!(
            "{}: not a readable model document",
            path.display()
        )));
    }
    let ann = load_model(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((ann, content_hash(text.as_bytes())))
}

fn load_instances(path: &Path, ann: &Ann) -> Result<Vec<Instance>, CliError> {
    let text = read_text(path)?;
    read_instances(&text, ann).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn resolve_order(arg: Option<&str>, n: usize) -> Result<(FeatureOrder, Vec<usize>), CliError> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let order = match (arg, env_seed) {
        (Some("seed"), seed) => FeatureOrder::Seeded(parse_seed(seed.as_deref().unwrap_or("0"))?),
        (Some(s), _) => s.parse().map_err(CliError::Input)?,
        (None, Some(seed)) => FeatureOrder::Seeded(parse_seed(&seed)?),
        (None, None) => FeatureOrder::Natural,
    };
    Ok((order, order.permutation(n)))
}

fn parse_seed(s: &str) -> Result<u64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("{SEED_ENV} must be an unsigned integer, got {s:?}")))
}

fn cached_bounds(path: &Path, hash: &str, kind: EncodingKind) -> Result<NetworkBounds, CliError> {
    let cache = BoundsCache::from_json(&read_text(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if cache.model_hash != hash || cache.encoding != kind {
        return Err(CliError::Input(format!(
            "{}: bounds were computed for another model or encoding",
            path.display()
        )));
    }
    Ok(cache.to_bounds())
}

fn tighten(ann: &Ann, kind: EncodingKind, jobs: usize) -> Result<NetworkBounds, CliError> {
    Ok(tighten_bounds_with(
        ann,
        kind,
        &TightenOptions {
            solver: solver_config(),
            jobs,
        },
    )?)
}

pub fn validate(model: &Path) -> Result<(), CliError> {
    let (ann, hash) = load(model)?;
    let arch: Vec<String> = ann.architecture().iter().map(usize::to_string).collect();
    println!("model {} ok", ann.name());
    println!("architecture: {}", arch.join(" → "));
    for f in ann.features() {
        println!(
            "  feature {:<12} {:?} [{}, {}]",
            f.name, f.kind, f.lower, f.upper
        );
    }
    println!("classes: {}", ann.classes().join(", "));
    println!("sha256: {hash}");
    Ok(())
}

pub fn bounds(
    model: &Path,
    kind: EncodingKind,
    out: &Path,
    force: bool,
    jobs: usize,
) -> Result<(), CliError> {
    let (ann, hash) = load(model)?;
    let reusable = (!force && out.exists())
        .then(|| {
            fs::read_to_string(out)
                .ok()
                .and_then(|t| BoundsCache::from_json(&t).ok())
        })
        .flatten()
        .filter(|c| c.model_hash == hash && c.encoding == kind);
    let cache = match reusable {
        Some(c) => {
            println!("reusing bounds cached in {}", out.display());
            c
        }
        None => BoundsCache::from_bounds(&tighten(&ann, kind, jobs)?, ann.name(), &hash),
    };
    write_text(out, &cache.to_json())?;
    for (l, layer) in cache.hidden.iter().enumerate() {
        let lo = layer.iter().map(|n| n.pre_lb).fold(f64::INFINITY, f64::min);
        let hi = layer
            .iter()
            .map(|n| n.pre_ub)
            .fold(f64::NEG_INFINITY, f64::max);
        let stable = layer
            .iter()
            .filter(|n| n.pre_lb >= 0.0 || n.pre_ub <= 0.0)
            .count();
        println!(
            "layer {}: {} neurons, pre-activation range [{lo}, {hi}], {stable} stable",
            l + 1,
            layer.len()
        );
    }
    for (j, o) in cache.outputs.iter().enumerate() {
        println!("output {} ({}): [{}, {}]", j, ann.classes()[j], o.lb, o.ub);
    }
    println!("tightening time: {:.6} s", cache.tightening_seconds);
    Ok(())
}

pub fn encode(
    model: &Path,
    kind: EncodingKind,
    dataset: &Path,
    index: usize,
    negate: bool,
    out: &Path,
    bounds_path: Option<&Path>,
) -> Result<(), CliError> {
    let (ann, hash) = load(model)?;
    let instances = load_instances(dataset, &ann)?;
    let instance = instances.get(index).ok_or_else(|| {
        CliError::Input(format!(
            "instance index {index} out of range ({} instances)",
            instances.len()
        ))
    })?;
    let bounds = match bounds_path {
        Some(p) => cached_bounds(p, &hash, kind)?,
        None => tighten(&ann, kind, 1)?,
    };
    let mut enc = encoding::encode(&ann, &bounds, kind)?;
    for (k, &v) in instance.values.iter().enumerate() {
        enc.fix_input(k, v)?;
    }
    if negate {
        let class = checked_prediction(&ann, instance)?;
        attach_negation(&mut enc, class)?;
        println!(
            "negated prediction: class {} ({})",
            class,
            ann.classes()[class]
        );
    }
    write_text(out, &enc.model.export_lp())?;
    let stats = count_stats(&enc);
    println!(
        "{} encoding: {} real variables, {} binary variables, {} constraints",
        kind, stats.real_vars, stats.binary_vars, stats.constraints
    );
    Ok(())
}

pub struct ExplainArgs {
    pub model: std::path::PathBuf,
    pub dataset: std::path::PathBuf,
    pub encoding: EncodingKind,
    pub order: Option<String>,
    pub out: std::path::PathBuf,
    pub index: Vec<usize>,
    pub jobs: usize,
    pub bounds: Option<std::path::PathBuf>,
}

pub fn explain(args: &ExplainArgs) -> Result<(), CliError> {
    let (ann, hash) = load(&args.model)?;
    let instances = load_instances(&args.dataset, &ann)?;
    let indices: Vec<usize> = if args.index.is_empty() {
        (0..instances.len()).collect()
    } else {
        args.index.clone()
    };
    if let Some(&bad) = indices.iter().find(|&&i| i >= instances.len()) {
        return Err(CliError::Input(format!(
            "instance index {bad} out of range ({} instances)",
            instances.len()
        )));
    }
    let (order, perm) = resolve_order(args.order.as_deref(), ann.num_inputs())?;
    let config = solver_config();

    let start = std::time::Instant::now();
    let bounds = match &args.bounds {
        Some(p) => cached_bounds(p, &hash, args.encoding)?,
        None => tighten(&ann, args.encoding, 1)?,
    };
    let base = encoding::encode(&ann, &bounds, args.encoding)?;
    // With cached bounds, the recorded tightening time stands in for the solve.
    let mut build_seconds = start.elapsed().as_secs_f64();
    if args.bounds.is_some() {
        build_seconds += bounds.elapsed.as_secs_f64();
    }

    let selected: Vec<Instance> = indices.iter().map(|&i| instances[i].clone()).collect();
    let results = explain_batch(&ann, &base, &selected, &perm, &config, args.jobs);
    let mut entries = Vec::with_capacity(results.len());
    let mut times = Vec::new();
    for ((&i, inst), result) in indices.iter().zip(&selected).zip(results) {
        match result {
            Ok(e) => {
                times.push(e.total_time.as_secs_f64());
                let kept: Vec<String> = e
                    .kept
                    .iter()
                    .map(|&(k, v)| format!("{}={}", ann.features()[k].name, v))
                    .collect();
                println!(
                    "instance {i}: class {} ({}), kept {{{}}}, {:.6} s",
                    e.class,
                    ann.classes()[e.class],
                    kept.join(", "),
                    e.total_time.as_secs_f64()
                );
                entries.push(ReportEntry::explained(&ann, i, inst, &e));
            }
            Err(err @ ExplainError::TieMargin { .. }) => {
                println!("instance {i}: rejected: {err}");
                entries.push(ReportEntry::rejected(i, inst, err.to_string()));
            }
            Err(err) => return Err(err.into()),
        }
    }
    let stats = MeanStd::of(&times);
    let report = ExplanationReport {
        model: ann.name().to_string(),
        model_hash: hash,
        dataset: args.dataset.display().to_string(),
        encoding: args.encoding,
        order: order.to_string(),
        build_seconds,
        explain_seconds: stats,
        entries,
    };
    write_text(&args.out, &report.to_json())?;
    println!(
        "explanation time: {:.6} ± {:.6} s over {} instances (population std)",
        stats.mean,
        stats.std,
        times.len()
    );
    Ok(())
}

pub fn verify(
    model: &Path,
    dataset: &Path,
    report_path: &Path,
    kind: Option<EncodingKind>,
) -> Result<(), CliError> {
    let (ann, hash) = load(model)?;
    let instances = load_instances(dataset, &ann)?;
    let report = ExplanationReport::from_json(&read_text(report_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", report_path.display())))?;
    if report.model_hash != hash {
        return Err(CliError::Input(format!(
            "report was produced for a different model file (hash {} ≠ {hash})",
            report.model_hash
        )));
    }
    let kind = kind.unwrap_or(report.encoding);
    let config = solver_config();
    let mut failed = Vec::new();
    let mut checked = 0;
    for entry in &report.entries {
        let Some(explanation) = entry.explanation() else {
            continue;
        };
        let instance = instances.get(entry.index).ok_or_else(|| {
            CliError::Input(format!(
                "report entry {} is not in the dataset",
                entry.index
            ))
        })?;
        if instance.values != entry.values {
            return Err(CliError::Input(format!(
                "report entry {} does not match dataset row {}",
                entry.index, entry.index
            )));
        }
        let result = verify_explanation(&ann, kind, instance, &explanation, &config)?;
        checked += 1;
        for f in &result.failures {
            failed.push(format!("instance {}: {}", entry.index, f.describe(&ann)));
        }
    }
    if failed.is_empty() {
        println!("{checked} explanations verified ({kind})");
        Ok(())
    } else {
        for f in &failed {
            println!("FAIL {f}");
        }
        Err(CliError::Verification(format!(
            "{} check(s) failed",
            failed.len()
        )))
    }
}

pub fn bench(
    model: &Path,
    dataset: &Path,
    rebuilds: usize,
    order: Option<&str>,
    jobs: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if rebuilds == 0 {
        return Err(CliError::Input("--rebuilds must be at least 1".into()));
    }
    let (ann, hash) = load(model)?;
    let instances = load_instances(dataset, &ann)?;
    let (order, perm) = resolve_order(order, ann.num_inputs())?;
    let opts = BenchOptions {
        rebuilds,
        order: perm,
        order_label: order.to_string(),
        jobs,
        solver: solver_config(),
    };
    let outcome = run_bench(
        &ann,
        &hash,
        &dataset.display().to_string(),
        &instances,
        &opts,
    );
    let (report, err): (BenchReport, Option<ExplainError>) = match outcome {
        Ok(r) => (r, None),
        Err((r, e)) => (*r, Some(e)),
    };
    print!("{}", format_table(&report));
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&report).expect("bench report serializes");
        text.push('\n');
        write_text(path, &text)?;
    }
    if let Some(e) = err {
        return Err(e.into());
    }
    if !report.verdicts_agree {
        return Err(CliError::Verification(
            "explanations differ between encodings".into(),
        ));
    }
    Ok(())
}
