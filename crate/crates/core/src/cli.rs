//! Command-line front end.
//!
//! Every run writes a one-line JSON header (program, version, subcommand,
//! full configuration, seed and a per-command summary). The result table goes
//! to `--out` when given, with the header on stdout; otherwise the table goes
//! to stdout and the header to stderr. Errors are a single JSON line on stderr.
//!
//! Exit codes: 0 success, 1 a requested check failed, 2 invalid parameters,
//! 3 resource cap exceeded, 4 I/O failure.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gamma::GammaSpec;
use crate::matrix::{
    assemble_s, entry_covariance, ModelConfig, Sampler, DEFAULT_MAX_DIM, DEFAULT_SUBSET_CAP,
};
use crate::output::{emit, Cell, Format, Table};
use crate::partition::{
    enumerate_pair_partitions, q_gaussian_moment, MomentSpec, PairPartition,
    DEFAULT_ENUMERATION_GUARD,
};
use crate::pauli::{anticommutation_frequency, clt_fourth_moment, clt_sum_spectrum, event_dependence, DemoConfig};
use crate::rng::{tag, RngStream};
use crate::spectral::{
    convergence_sweep, density_curve, empirical_spectrum, nu_q_density, nu_q_moments,
    nu_q_moments_with_epsilon, trace_moment_mc, trace_samples, trend, variance_bound,
    SweepSettings, TrendStatus, DEFAULT_PRODUCT_EPSILON,
};
use crate::stats::{mean_and_stderr, sample_variance};
use crate::subset::Subset;
use crate::tensor::{
    brute_force_contraction_with_guard, crossing_product, theta_product, ContractionProblem,
    BRUTE_FORCE_GUARD,
};
use crate::weights::{assumption_diagnostics, c_from_q, q_from_c, z4_sum, WeightScheme};

/// Seed used when neither `--seed` nor `QGAUSS_SEED` is set.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Parser)]
#[command(name = "qgauss", version, about = "Random matrix models for q-Gaussian variables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Random seed.
    #[arg(long, global = true, env = "QGAUSS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Worker threads (does not change results).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file for the result table.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Subsets,
    Basis,
}

impl From<SamplerArg> for Sampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Subsets => Sampler::Subsets,
            SamplerArg::Basis => Sampler::ProductBasis,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Suite {
    Lemma5,
    Covariance,
    Variance,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact q-Gaussian moments from pair-partition sums.
    Moments(MomentsArgs),
    /// The ν_q density on a grid, with its moments.
    Density(DensityArgs),
    /// Monte Carlo estimate of E tr of a word in the model matrices.
    Simulate(ModelArgs),
    /// Pooled eigenvalue histogram of one model matrix.
    Spectrum(SpectrumArgs),
    /// Monte Carlo means against the q-Gaussian limit over several N.
    Sweep(SweepArgs),
    /// Exact and statistical self-checks.
    Verify(VerifyArgs),
    /// Coincidence diagnostics of a weight scheme.
    Weights(WeightsArgs),
    /// Sums of random signed Pauli words.
    Pauli(PauliArgs),
}

/// Deformation, given as q or as c.
#[derive(Debug, Clone, Args)]
pub struct Deformation {
    /// Deformation parameter q.
    #[arg(long, conflicts_with = "c")]
    pub q: Option<f64>,
    /// Weight scale c, with q = exp(-(1 - 1/d²) c²).
    #[arg(long)]
    pub c: Option<f64>,
}

impl Deformation {
    /// `(q, c)` at local dimension `d`.
    fn resolve(&self, d: usize) -> Result<(f64, f64)> {
        match (self.q, self.c) {
            (Some(q), None) => Ok((q, c_from_q(q, d)?)),
            (None, Some(c)) => Ok((q_from_c(c, d)?, c)),
            _ => Err(Error::parameter("exactly one of --q or --c is required")),
        }
    }
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub deformation: Deformation,
    /// Local dimension, used only to convert --c.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Highest order.
    #[arg(long, default_value_t = 6)]
    pub order: usize,
    /// Mixed word instead of powers of a single variable.
    #[arg(long)]
    pub word: Option<String>,
    /// Covariance: identity:K, ones:K, brownian:t1,t2,… or a CSV file.
    #[arg(long, default_value = "identity:1")]
    pub gamma: String,
    /// Override the pair-partition enumeration guard.
    #[arg(long)]
    pub enumeration_guard: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub deformation: Deformation,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Grid points across the support.
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    /// Highest moment reported.
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    /// Truncation tolerance of the infinite product.
    #[arg(long, default_value_t = DEFAULT_PRODUCT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub deformation: Deformation,
    /// Local dimension.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Number of tensor factors.
    #[arg(long = "N", default_value_t = 4)]
    pub n: usize,
    /// bernoulli, fixedsize, or a file of `hex,weight` lines.
    #[arg(long, default_value = "bernoulli")]
    pub scheme: String,
    #[arg(long, default_value = "identity:1")]
    pub gamma: String,
    /// Word of labels: one character per label, or comma separated.
    #[arg(long, default_value = "mmmm")]
    pub word: String,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Subsets)]
    pub sampler: SamplerArg,
    /// Override the limit on N for the subset sampler.
    #[arg(long)]
    pub subset_cap: Option<usize>,
    /// Override the limit on the matrix dimension d^N.
    #[arg(long)]
    pub max_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Label whose spectrum is collected.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[arg(long, default_value_t = 6)]
    pub order: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub deformation: Deformation,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Comma-separated list of N.
    #[arg(long, default_value = "4,8,12")]
    pub ns: String,
    #[arg(long, default_value = "identity:1")]
    pub gamma: String,
    #[arg(long, default_value = "mmmm")]
    pub word: String,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Basis)]
    pub sampler: SamplerArg,
    #[arg(long)]
    pub subset_cap: Option<usize>,
    #[arg(long)]
    pub max_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long = "N", default_value_t = 3)]
    pub n: usize,
    /// Random trials (lemma5) or Monte Carlo samples (covariance, variance).
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Weight scale c for the statistical suites.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Largest number of lines in random contraction problems.
    #[arg(long, default_value_t = 2)]
    pub max_lines: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Subsets)]
    pub sampler: SamplerArg,
    /// Override the brute-force term guard.
    #[arg(long)]
    pub brute_force_guard: Option<u128>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub deformation: Deformation,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long = "N", default_value_t = 2500)]
    pub n: usize,
    #[arg(long, default_value = "bernoulli")]
    pub scheme: String,
    /// Subsets per trial.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Samples for Monte Carlo coincidence sums.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct PauliArgs {
    /// Target deformation q.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Word length.
    #[arg(long = "N", default_value_t = 10)]
    pub n: usize,
    /// Words summed per sample.
    #[arg(long, default_value_t = 200)]
    pub terms: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[arg(long, default_value_t = 6)]
    pub order: usize,
    /// Factor pairs for the anticommutation frequency.
    #[arg(long, default_value_t = 100_000)]
    pub pairs: usize,
    /// Samples for the exact per-sample fourth moment.
    #[arg(long, default_value_t = 400)]
    pub moment_samples: usize,
    /// Word triples for the event-dependence estimate.
    #[arg(long, default_value_t = 20_000)]
    pub triples: usize,
}

/// A finished command: table, configuration, summary and check status.
pub struct Outcome {
    pub table: Table,
    pub config: Value,
    pub summary: Value,
    pub passed: bool,
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

fn cap_override(name: &str, value: Option<usize>, default: usize) -> usize {
    match value {
        Some(v) if v != default => {
            warn(&format!("{name} overridden from {default} to {v}; runs may exhaust time or memory"));
            v
        }
        _ => default,
    }
}

/// Letters from `m` on, so a single variable is `m` and a pair is `m`, `n`.
fn preset_labels(k: usize) -> Result<Vec<String>> {
    if k == 0 || k > 26 {
        return Err(Error::parameter("preset covariances take 1 to 26 labels"));
    }
    Ok((0..k).map(|i| (((b'm' - b'a' + i as u8) % 26 + b'a') as char).to_string()).collect())
}

pub fn parse_gamma(text: &str) -> Result<GammaSpec> {
    let preset_size = |rest: &str| -> Result<usize> {
        rest.parse().map_err(|_| Error::parameter(format!("bad label count in --gamma {text}")))
    };
    if let Some(rest) = text.strip_prefix("identity:") {
        let k = preset_size(rest)?;
        return Ok(GammaSpec::identity_with_labels(preset_labels(k)?));
    }
    if let Some(rest) = text.strip_prefix("ones:") {
        let k = preset_size(rest)?;
        return GammaSpec::new(preset_labels(k)?, vec![1.0; k * k]);
    }
    if let Some(rest) = text.strip_prefix("brownian:") {
        let times: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::parameter(format!("bad time {t:?}"))))
            .collect::<Result<_>>()?;
        return GammaSpec::brownian_min(&times);
    }
    GammaSpec::from_csv_path(std::path::Path::new(text))
}

/// Label indices of a word: comma or whitespace separated, otherwise one
/// character per label.
pub fn parse_word(text: &str, gamma: &GammaSpec) -> Result<Vec<usize>> {
    let tokens: Vec<String> = if text.contains(',') || text.contains(char::is_whitespace) {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    } else {
        text.chars().map(|c| c.to_string()).collect()
    };
    if tokens.is_empty() {
        return Err(Error::parameter("word must be non-empty"));
    }
    tokens
        .iter()
        .map(|t| {
            gamma
                .label_index(t)
                .ok_or_else(|| Error::parameter(format!("unknown label {t:?} in word")))
        })
        .collect()
}

fn build_scheme(name: &str, n: usize, d: usize, c: Option<f64>) -> Result<WeightScheme> {
    let need_c = || c.ok_or_else(|| Error::parameter("exactly one of --q or --c is required"));
    match name {
        "bernoulli" => WeightScheme::bernoulli(n, d, need_c()?),
        "fixedsize" => WeightScheme::fixed_size(n, d, need_c()?),
        path => WeightScheme::custom_from_path(std::path::Path::new(path), n, d),
    }
}

fn deformation_json(q: Option<f64>, c: Option<f64>) -> Value {
    json!({ "q": q, "c": c })
}

struct Model {
    config: ModelConfig,
    word: Vec<usize>,
    q: Option<f64>,
    json: Value,
}

fn build_model(args: &ModelArgs, seed: u64) -> Result<Model> {
    let resolved = match (args.deformation.q, args.deformation.c) {
        (None, None) => None,
        _ => Some(args.deformation.resolve(args.d)?),
    };
    let scheme = build_scheme(&args.scheme, args.n, args.d, resolved.map(|r| r.1))?;
    let gamma = parse_gamma(&args.gamma)?;
    let word = parse_word(&args.word, &gamma)?;
    let config = ModelConfig {
        d: args.d,
        n: args.n,
        scheme: scheme.clone(),
        gamma,
        seed,
        subset_cap: cap_override("subset cap", args.subset_cap, DEFAULT_SUBSET_CAP),
        max_dim: cap_override("maximum dimension", args.max_dim, DEFAULT_MAX_DIM),
        sampler: args.sampler.into(),
    };
    config.validate()?;
    let q = resolved.map(|r| r.0).or_else(|| scheme.limit_q());
    let json = json!({
        "d": args.d,
        "N": args.n,
        "deformation": deformation_json(resolved.map(|r| r.0), resolved.map(|r| r.1)),
        "scheme": args.scheme,
        "gamma": args.gamma,
        "word": args.word,
        "samples": args.samples,
        "sampler": config.sampler.name(),
        "subset_cap": config.subset_cap,
        "max_dim": config.max_dim,
    });
    Ok(Model { config, word, q, json })
}

fn moments(args: &MomentsArgs) -> Result<Outcome> {
    let (q, c) = args.deformation.resolve(args.d)?;
    let guard = cap_override("enumeration guard", args.enumeration_guard, DEFAULT_ENUMERATION_GUARD);
    let gamma = parse_gamma(&args.gamma)?;
    let words: Vec<(String, Vec<usize>)> = match &args.word {
        Some(w) => vec![(w.clone(), parse_word(w, &gamma)?)],
        None => (1..=args.order / 2).map(|m| (format!("{}", 2 * m), vec![0; 2 * m])).collect(),
    };
    let mut table = Table::new(&["order", "word", "moment"]);
    for (name, word) in &words {
        if word.len() / 2 > guard {
            return Err(Error::SizeLimit {
                what: "pair-partition lines",
                value: (word.len() / 2) as u128,
                limit: guard as u128,
            });
        }
        let value = if word.len() / 2 > DEFAULT_ENUMERATION_GUARD {
            guarded_moment(q, word, &gamma, guard)?
        } else {
            q_gaussian_moment(&MomentSpec { q, word, gamma: &gamma })?
        };
        table.push(vec![word.len().into(), name.as_str().into(), value.into()]);
    }
    let config = json!({
        "deformation": deformation_json(Some(q), Some(c)),
        "d": args.d,
        "order": args.order,
        "word": args.word,
        "gamma": args.gamma,
        "enumeration_guard": guard,
    });
    Ok(Outcome { table, config, summary: json!({}), passed: true })
}

/// Moment with a raised enumeration guard.
fn guarded_moment(q: f64, word: &[usize], gamma: &GammaSpec, guard: usize) -> Result<f64> {
    let m = word.len() / 2;
    let mut total = 0.0;
    crate::partition::for_each_pair_partition(m, guard, |lines, cr| {
        let product: f64 = lines.iter().map(|&(a, b)| gamma.get(word[a - 1], word[b - 1])).product();
        total += q.powi(cr as i32) * product;
    })?;
    Ok(total)
}

fn density(args: &DensityArgs) -> Result<Outcome> {
    let (q, c) = args.deformation.resolve(args.d)?;
    let curve = density_curve(q, args.points, args.epsilon)?;
    let mut table = Table::new(&["x", "density"]);
    for (&x, &y) in curve.x.iter().zip(&curve.density) {
        table.push(vec![x.into(), y.into()]);
    }
    let moments = nu_q_moments_with_epsilon(q, args.order, args.epsilon)?;
    let config = json!({
        "deformation": deformation_json(Some(q), Some(c)),
        "d": args.d,
        "points": args.points,
        "order": args.order,
        "epsilon": args.epsilon,
    });
    let summary = json!({ "moments": moments, "product_terms": curve.n_max });
    Ok(Outcome { table, config, summary, passed: true })
}

fn simulate(args: &ModelArgs, seed: u64) -> Result<Outcome> {
    let model = build_model(args, seed)?;
    let estimate = trace_moment_mc(&model.config, &model.word, args.samples)?;
    let target = match model.q {
        Some(q) => Some(q_gaussian_moment(&MomentSpec { q, word: &model.word, gamma: &model.config.gamma })?),
        None => None,
    };
    let mut table =
        Table::new(&["word", "samples", "mc_mean", "mc_stderr", "imag_mean", "exact_target", "gap"]);
    let target_cell = |v: Option<f64>| v.map_or(Cell::Text(String::new()), Cell::Real);
    table.push(vec![
        estimate.word.join(" ").into(),
        args.samples.into(),
        estimate.mean.into(),
        estimate.stderr.into(),
        estimate.imag_mean.into(),
        target_cell(target),
        target_cell(target.map(|t| (estimate.mean - t).abs())),
    ]);
    Ok(Outcome { table, config: model.json, summary: json!({}), passed: true })
}

fn spectrum(args: &SpectrumArgs, seed: u64) -> Result<Outcome> {
    let model = build_model(&args.model, seed)?;
    let q = model
        .q
        .ok_or_else(|| Error::parameter("spectrum needs --q or --c, or a scheme with a known limit"))?;
    let label = match &args.label {
        Some(l) => model
            .config
            .gamma
            .label_index(l)
            .ok_or_else(|| Error::parameter(format!("unknown label {l:?}")))?,
        None => 0,
    };
    let report = empirical_spectrum(&model.config, label, args.model.samples, args.bins, q, args.order)?;
    let h = &report.histogram;
    let densities = h.densities();
    let mut table = Table::new(&["bin_lo", "bin_hi", "count", "density", "nu_q_density"]);
    for (b, (edge, &density)) in h.edges.windows(2).zip(&densities).enumerate() {
        let mid = 0.5 * (edge[0] + edge[1]);
        let reference = if mid.abs() < report.support_radius {
            nu_q_density(q, mid, DEFAULT_PRODUCT_EPSILON)?
        } else {
            0.0
        };
        table.push(vec![
            edge[0].into(),
            edge[1].into(),
            h.counts[b].into(),
            density.into(),
            reference.into(),
        ]);
    }
    let mut config = model.json;
    config["label"] = json!(args.label);
    config["bins"] = json!(args.bins);
    config["order"] = json!(args.order);
    let summary = json!({
        "support_radius": report.support_radius,
        "outside_support_fraction": report.outside_support_fraction,
        "out_of_range": h.out_of_range,
        "moments": report.moments,
        "moment_stderrs": report.moment_stderrs,
        "target_moments": nu_q_moments(q, args.order)?[1..].to_vec(),
    });
    Ok(Outcome { table, config, summary, passed: true })
}

fn parse_ns(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::parameter(format!("bad N {t:?} in --ns"))))
        .collect()
}

fn trend_name(t: TrendStatus) -> &'static str {
    match t {
        TrendStatus::Decreasing => "decreasing",
        TrendStatus::FlaggedOverlap => "flagged_overlap",
        TrendStatus::Increasing => "increasing",
    }
}

fn sweep(args: &SweepArgs, seed: u64) -> Result<Outcome> {
    let (q, c) = args.deformation.resolve(args.d)?;
    let gamma = parse_gamma(&args.gamma)?;
    let word = parse_word(&args.word, &gamma)?;
    let settings = SweepSettings {
        d: args.d,
        q,
        ns: parse_ns(&args.ns)?,
        word,
        gamma,
        samples: args.samples,
        seed,
        sampler: args.sampler.into(),
        subset_cap: cap_override("subset cap", args.subset_cap, DEFAULT_SUBSET_CAP),
        max_dim: cap_override("maximum dimension", args.max_dim, DEFAULT_MAX_DIM),
    };
    let rows = convergence_sweep(&settings)?;
    let trends = trend(&rows);
    let mut table = Table::new(&[
        "N", "word", "mc_mean", "mc_stderr", "exact_target", "gap", "variance_bound", "selected", "trend",
    ]);
    for (i, row) in rows.iter().enumerate() {
        let t = if i == 0 { "" } else { trend_name(trends[i - 1]) };
        table.push(vec![
            row.n.into(),
            row.word.as_str().into(),
            row.mc_mean.into(),
            row.mc_stderr.into(),
            row.exact_target.into(),
            row.gap.into(),
            row.variance_bound.into(),
            row.selected.into(),
            t.into(),
        ]);
    }
    let config = json!({
        "deformation": deformation_json(Some(q), Some(c)),
        "d": args.d,
        "ns": settings.ns,
        "gamma": args.gamma,
        "word": args.word,
        "samples": args.samples,
        "sampler": settings.sampler.name(),
        "subset_cap": settings.subset_cap,
        "max_dim": settings.max_dim,
    });
    let summary = json!({
        "selection": "greedy heuristic: keep a row when its variance bound is at most half the last kept bound",
        "trend": "gap compared between consecutive N; a rise within overlapping 1-SE bands is flagged, not failed",
    });
    Ok(Outcome { table, config, summary, passed: true })
}

fn random_partition(m: usize, stream: &mut RngStream) -> Result<PairPartition> {
    let all = enumerate_pair_partitions(m)?;
    Ok(all[stream.below(all.len() as u64) as usize].clone())
}

fn random_subset(n: usize, stream: &mut RngStream) -> Subset {
    let mut s = Subset::empty(n);
    for r in 1..=n {
        if stream.bernoulli(0.5) {
            s.insert(r);
        }
    }
    s
}

fn verify_lemma5(args: &VerifyArgs, seed: u64) -> Result<(Table, bool)> {
    let guard = match args.brute_force_guard {
        Some(g) if g != BRUTE_FORCE_GUARD => {
            warn(&format!("brute-force guard overridden from {BRUTE_FORCE_GUARD} to {g}"));
            g
        }
        _ => BRUTE_FORCE_GUARD,
    };
    if args.max_lines == 0 {
        return Err(Error::parameter("--max-lines must be at least 1"));
    }
    let mut table = Table::new(&[
        "trial", "lines", "sets", "brute_force", "theta_product", "in_unit_interval", "crossing_applies", "crossing_product", "pass",
    ]);
    let mut all = true;
    for t in 0..args.trials as u64 {
        let mut stream = RngStream::new(seed, &[tag::STANDALONE, 0x1e5, t]);
        let m = 1 + stream.below(args.max_lines as u64) as usize;
        let partition = random_partition(m, &mut stream)?;
        let line_sets: Vec<Subset> = (0..m).map(|_| random_subset(args.n, &mut stream)).collect();
        let problem = ContractionProblem::from_line_sets(args.d, args.n, partition, line_sets.clone())?;
        let exact = brute_force_contraction_with_guard(&problem, guard)?;
        let theta = theta_product(&problem).exact(args.d);
        let unit = exact > num_rational::Ratio::from_integer(0) && exact <= num_rational::Ratio::from_integer(1);
        let applies = problem.triple_intersections_empty();
        let crossing = crossing_product(&problem).exact(args.d);
        let pass = exact == theta && unit && (!applies || crossing == exact);
        all &= pass;
        let sets = line_sets.iter().map(Subset::to_hex).collect::<Vec<_>>().join(" ");
        table.push(vec![
            t.into(),
            m.into(),
            sets.into(),
            exact.to_string().into(),
            theta.to_string().into(),
            unit.into(),
            applies.into(),
            crossing.to_string().into(),
            pass.into(),
        ]);
    }
    Ok((table, all))
}

fn verify_covariance(args: &VerifyArgs, seed: u64) -> Result<(Table, bool)> {
    let scheme = WeightScheme::bernoulli(args.n, args.d, args.c)?;
    let config = ModelConfig {
        sampler: args.sampler.into(),
        ..ModelConfig::new(scheme.clone(), GammaSpec::identity_with_labels(preset_labels(1)?), seed)?
    };
    let dim = config.dim();
    let draws: Vec<Vec<Complex64>> = (0..args.trials as u64)
        .map(|s| assemble_s(&config, s).map(|f| f.matrices[0].data().to_vec()))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["i", "j", "k", "l", "empirical", "stderr", "exact", "pass"]);
    let mut all = true;
    // E[S_ij S_kl]: all (i,j) against the transposed entry (j,i) and a fixed diagonal entry.
    for i in 0..dim {
        for j in 0..dim {
            for (k, l) in [(j, i), (0, 0)] {
                let xs: Vec<f64> = draws.iter().map(|m| (m[i * dim + j] * m[k * dim + l]).re).collect();
                let (mean, se) = mean_and_stderr(&xs);
                let exact = entry_covariance(&scheme, 1.0, (i, j), (k, l))?;
                let pass = (mean - exact).abs() <= 4.0 * se + 1e-12;
                all &= pass;
                table.push(vec![i.into(), j.into(), k.into(), l.into(), mean.into(), se.into(), exact.into(), pass.into()]);
            }
        }
    }
    Ok((table, all))
}

fn verify_variance(args: &VerifyArgs, seed: u64) -> Result<(Table, bool)> {
    let scheme = WeightScheme::bernoulli(args.n, args.d, args.c)?;
    let gamma = GammaSpec::identity_with_labels(preset_labels(1)?);
    let config = ModelConfig { sampler: args.sampler.into(), ..ModelConfig::new(scheme.clone(), gamma.clone(), seed)? };
    let traces: Vec<f64> = trace_samples(&config, &[0, 0], args.trials)?.iter().map(|t| t.re).collect();
    let empirical = sample_variance(&traces);
    let bound = variance_bound(&scheme, &gamma, 2, 0, seed)?;
    let pass = empirical <= 1.2 * bound.value;
    let mut table = Table::new(&["N", "samples", "empirical_variance", "variance_bound", "pass"]);
    table.push(vec![args.n.into(), args.trials.into(), empirical.into(), bound.value.into(), pass.into()]);
    Ok((table, pass))
}

fn verify(args: &VerifyArgs, seed: u64) -> Result<Outcome> {
    let (table, passed) = match args.suite {
        Suite::Lemma5 => verify_lemma5(args, seed)?,
        Suite::Covariance => verify_covariance(args, seed)?,
        Suite::Variance => verify_variance(args, seed)?,
    };
    let suite = match args.suite {
        Suite::Lemma5 => "lemma5",
        Suite::Covariance => "covariance",
        Suite::Variance => "variance",
    };
    let config = json!({
        "suite": suite,
        "d": args.d,
        "N": args.n,
        "trials": args.trials,
        "c": args.c,
        "max_lines": args.max_lines,
        "sampler": Sampler::from(args.sampler).name(),
    });
    let failures = table.rows.iter().filter(|r| r.last() == Some(&Cell::Bool(false))).count();
    let summary = json!({ "passed": passed, "checks": table.rows.len(), "failures": failures });
    Ok(Outcome { table, config, summary, passed })
}

fn weights(args: &WeightsArgs, seed: u64) -> Result<Outcome> {
    let resolved = match (args.deformation.q, args.deformation.c) {
        (None, None) => None,
        _ => Some(args.deformation.resolve(args.d)?),
    };
    let scheme = build_scheme(&args.scheme, args.n, args.d, resolved.map(|r| r.1))?;
    let stats = assumption_diagnostics(&scheme, args.k, args.trials, seed)?;
    let mut table = Table::new(&["metric", "value"]);
    let mut push = |name: String, value: f64| table.push(vec![name.into(), value.into()]);
    push("poisson_lambda".into(), stats.poisson_lambda);
    for (idx, &(i, j)) in stats.pairs.iter().enumerate() {
        push(format!("mean_overlap_{i}_{j}"), stats.pair_mean(idx));
        push(format!("tv_to_poisson_{i}_{j}"), stats.tv_to_poisson[idx]);
    }
    push("triple_overlap_frequency".into(), stats.triple_overlap_frequency);
    if let Some(c) = scheme.c() {
        push("triple_overlap_scale".into(), args.n as f64 * (c / (args.n as f64).sqrt()).powi(3));
    }
    push("tv_joint_to_product".into(), stats.tv_joint_to_product);
    if let Some(r) = stats.shared_set_correlation {
        push("shared_set_correlation".into(), r);
    }
    let mut stuck = false;
    for m in 2..=4 {
        let z = z4_sum(&scheme, m, args.samples, seed)?;
        stuck |= z.is_stuck_at_one();
        push(format!("coincidence_sum_{m}"), z.value);
        push(format!("coincidence_sum_{m}_stderr"), z.stderr);
    }
    let config = json!({
        "deformation": deformation_json(resolved.map(|r| r.0), resolved.map(|r| r.1)),
        "d": args.d,
        "N": args.n,
        "scheme": args.scheme,
        "k": args.k,
        "trials": args.trials,
        "samples": args.samples,
    });
    let summary = json!({
        "limit_q": scheme.limit_q(),
        "coincidence_sum_stuck_at_one": stuck,
        "joint_limit_note": "the joint Poisson limit is checked in tests for k <= 4 only",
    });
    Ok(Outcome { table, config, summary, passed: true })
}

fn pauli(args: &PauliArgs, seed: u64) -> Result<Outcome> {
    let demo = DemoConfig { n: args.n, q_target: args.q, terms: args.terms, samples: args.samples, seed };
    let report = clt_sum_spectrum(&demo, args.bins, args.order)?;
    let freq = anticommutation_frequency(report.r, args.pairs, seed)?;
    let dependence = event_dependence(args.n, report.r, args.triples, seed)?;
    let (fourth, fourth_se) = clt_fourth_moment(&DemoConfig { samples: args.moment_samples, ..demo.clone() })?;
    let mut table = Table::new(&["order", "empirical", "stderr", "target"]);
    for k in 1..=args.order {
        table.push(vec![
            k.into(),
            report.spectrum.moments[k - 1].into(),
            report.spectrum.moment_stderrs[k - 1].into(),
            report.target_moments[k].into(),
        ]);
    }
    let config = serde_json::to_value(&demo)?;
    let summary = json!({
        "r": report.r,
        "q_approx": report.q_approx,
        "relative_gap": report.relative_gap,
        "finite_fourth_moment": report.finite_fourth_moment,
        "fourth_moment": fourth,
        "fourth_moment_stderr": fourth_se,
        "moment_samples": args.moment_samples,
        "outside_support_fraction": report.spectrum.outside_support_fraction,
        "anticommutation_frequency": freq,
        "event_dependence": dependence,
        "tolerances": "engineering choices; the word sums only approximate the target law",
    });
    Ok(Outcome { table, config, summary, passed: true })
}

/// Runs a parsed command without touching the thread pool.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Moments(a) => moments(a),
        Command::Density(a) => density(a),
        Command::Simulate(a) => simulate(a, cli.seed),
        Command::Spectrum(a) => spectrum(a, cli.seed),
        Command::Sweep(a) => sweep(a, cli.seed),
        Command::Verify(a) => verify(a, cli.seed),
        Command::Weights(a) => weights(a, cli.seed),
        Command::Pauli(a) => pauli(a, cli.seed),
    }
}

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Moments(_) => "moments",
        Command::Density(_) => "density",
        Command::Simulate(_) => "simulate",
        Command::Spectrum(_) => "spectrum",
        Command::Sweep(_) => "sweep",
        Command::Verify(_) => "verify",
        Command::Weights(_) => "weights",
        Command::Pauli(_) => "pauli",
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::SizeLimit { .. } => 3,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
        Error::Eigen => 1,
        _ => 2,
    }
}

fn error_kind(error: &Error) -> &'static str {
    match error {
        Error::Parameter(_) | Error::DimensionMismatch { .. } | Error::Parse(_) => "invalid_parameter",
        Error::Domain(_) => "domain",
        Error::SizeLimit { .. } => "resource_cap",
        Error::NotHermitian { .. } | Error::NotPsd { .. } => "invalid_input",
        Error::Eigen => "eigensolver",
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
    }
}

fn report_error(kind: &str, message: &str, code: i32) -> i32 {
    let line = json!({ "error": kind, "message": message.replace('\n', " ").trim(), "exit_code": code });
    eprintln!("{line}");
    code
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            return report_error("usage", &e.to_string(), 2);
        }
    };
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => return report_error("invalid_parameter", &e.to_string(), 2),
    };
    let outcome = match pool.install(|| execute(&cli)) {
        Ok(o) => o,
        Err(e) => {
            let code = exit_code(&e);
            return report_error(error_kind(&e), &e.to_string(), code);
        }
    };
    let header = json!({
        "program": "qgauss",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand_name(&cli.command),
        "seed": cli.seed,
        "config": outcome.config,
        "summary": outcome.summary,
        "passed": outcome.passed,
    });
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let header_line = header.to_string();
    if cli.out.is_some() {
        println!("{header_line}");
    } else {
        eprintln!("{header_line}");
    }
    if let Err(e) = emit(&outcome.table, &header, format, cli.out.as_deref()) {
        let code = exit_code(&e);
        return report_error(error_kind(&e), &e.to_string(), code);
    }
    let _ = std::io::stdout().flush();
    if outcome.passed {
        0
    } else {
        1
    }
}
