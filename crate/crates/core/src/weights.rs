//! Weight schemes `σ^(N)` on subsets of `{1, …, N}` and diagnostics for the
//! four conditions the large-N limit needs: normalization, rare triple
//! coincidences, asymptotically independent Poisson pairwise coincidences,
//! and decay of the `d^{-2|A_1 ∖ (A_2 ∪ ⋯)|}` sum.
//!
//! Only `σ_A²` ever matters, so schemes store and return squared weights.
//! `σ²` defines a probability measure `ρ` on subsets.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{tag, RngStream};
use crate::subset::Subset;

/// Tolerance for `Σ σ_A² = 1` on in-memory custom tables.
pub const CUSTOM_NORMALIZATION_TOLERANCE: f64 = 1e-12;
/// Tolerance for `Σ σ_A² = 1` on custom tables read from a file.
pub const CUSTOM_FILE_NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    /// Each element joins independently with probability `c/√N`.
    Bernoulli { c: f64 },
    /// Uniform over subsets of size `⌊c√N⌋`.
    FixedSize { c: f64 },
    /// Explicit `(subset, σ²)` entries; absent subsets have weight 0.
    Custom { table: Vec<(Subset, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    kind: SchemeKind,
    n: usize,
    d: usize,
}

fn check_dims(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::parameter("N must be at least 1"));
    }
    if d < 2 {
        return Err(Error::parameter(format!("local dimension d = {d} must be at least 2")));
    }
    Ok(())
}

impl WeightScheme {
    pub fn bernoulli(n: usize, d: usize, c: f64) -> Result<Self> {
        check_dims(n, d)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::parameter(format!("c = {c} must be positive")));
        }
        let p = c / (n as f64).sqrt();
        if p >= 1.0 {
            return Err(Error::parameter(format!(
                "Bernoulli inclusion probability c/sqrt(N) = {p} must be below 1"
            )));
        }
        Ok(WeightScheme { kind: SchemeKind::Bernoulli { c }, n, d })
    }

    pub fn fixed_size(n: usize, d: usize, c: f64) -> Result<Self> {
        check_dims(n, d)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::parameter(format!("c = {c} must be positive")));
        }
        let k = (c * (n as f64).sqrt()).floor();
        if k > n as f64 {
            return Err(Error::parameter(format!(
                "floor(c sqrt(N)) = {k} exceeds N = {n}; N is too small for this c"
            )));
        }
        Ok(WeightScheme { kind: SchemeKind::FixedSize { c }, n, d })
    }

    pub fn custom(n: usize, d: usize, table: Vec<(Subset, f64)>) -> Result<Self> {
        Self::custom_with_tolerance(n, d, table, CUSTOM_NORMALIZATION_TOLERANCE)
    }

    pub fn custom_with_tolerance(
        n: usize,
        d: usize,
        table: Vec<(Subset, f64)>,
        tolerance: f64,
    ) -> Result<Self> {
        check_dims(n, d)?;
        let mut merged: BTreeMap<Subset, f64> = BTreeMap::new();
        for (a, w) in table {
            if a.ambient() != n {
                return Err(Error::parameter(format!(
                    "custom subset has ambient size {}, expected {n}",
                    a.ambient()
                )));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::parameter(format!("custom weight {w} must be nonnegative")));
            }
            *merged.entry(a).or_insert(0.0) += w;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::parameter(format!(
                "custom weights sum to {total}, expected 1 within {tolerance:e}"
            )));
        }
        let table = merged.into_iter().filter(|(_, w)| *w > 0.0).collect();
        Ok(WeightScheme { kind: SchemeKind::Custom { table }, n, d })
    }

    /// All weight on a single subset.
    pub fn concentrated(n: usize, d: usize, a: Subset) -> Result<Self> {
        Self::custom(n, d, vec![(a, 1.0)])
    }

    /// Reads `bitmask_hex,weight` lines (blank lines and `#` comments skipped).
    pub fn custom_from_path(path: &Path, n: usize, d: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::custom_from_str(&text, n, d)
    }

    pub fn custom_from_str(text: &str, n: usize, d: usize) -> Result<Self> {
        let mut table = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (mask, weight) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `bitmask_hex,weight`", lineno + 1)))?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: bad weight: {e}", lineno + 1)))?;
            table.push((Subset::from_hex(n, mask)?, weight));
        }
        Self::custom_with_tolerance(n, d, table, CUSTOM_FILE_NORMALIZATION_TOLERANCE)
    }

    pub fn kind(&self) -> &SchemeKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn c(&self) -> Option<f64> {
        match self.kind {
            SchemeKind::Bernoulli { c } | SchemeKind::FixedSize { c } => Some(c),
            SchemeKind::Custom { .. } => None,
        }
    }

    /// Inclusion probability `c/√N` of the Bernoulli scheme.
    pub fn bernoulli_p(&self) -> Option<f64> {
        match self.kind {
            SchemeKind::Bernoulli { c } => Some(c / (self.n as f64).sqrt()),
            _ => None,
        }
    }

    /// Subset size `⌊c√N⌋` of the fixed-size scheme.
    pub fn fixed_size_k(&self) -> Option<usize> {
        match self.kind {
            SchemeKind::FixedSize { c } => Some((c * (self.n as f64).sqrt()).floor() as usize),
            _ => None,
        }
    }

    /// Limit deformation `exp(-(1 - 1/d²) c²)` for the Poisson-type schemes.
    pub fn limit_q(&self) -> Option<f64> {
        self.c().map(|c| q_from_c(c, self.d).expect("c > 0 by construction"))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Bernoulli { .. } => "bernoulli",
            SchemeKind::FixedSize { .. } => "fixedsize",
            SchemeKind::Custom { .. } => "custom",
        }
    }

    /// `σ²` shared by every subset of size `k`, for the schemes that depend
    /// on size only.
    pub fn size_class_weight(&self, k: usize) -> Option<f64> {
        match &self.kind {
            SchemeKind::Bernoulli { .. } => {
                let p = self.bernoulli_p().unwrap();
                Some(p.powi(k as i32) * (1.0 - p).powi((self.n - k) as i32))
            }
            SchemeKind::FixedSize { .. } => {
                let size = self.fixed_size_k().unwrap();
                Some(if k == size { 1.0 / binomial(self.n, size) } else { 0.0 })
            }
            SchemeKind::Custom { .. } => None,
        }
    }

    pub fn sigma_squared(&self, a: &Subset) -> Result<f64> {
        if a.ambient() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: a.ambient() });
        }
        Ok(match &self.kind {
            SchemeKind::Custom { table } => table
                .iter()
                .find(|(s, _)| s == a)
                .map_or(0.0, |(_, w)| *w),
            _ => self.size_class_weight(a.len()).unwrap(),
        })
    }

    /// Draws `A ~ ρ`.
    pub fn sample_subset(&self, stream: &mut RngStream) -> Subset {
        match &self.kind {
            SchemeKind::Bernoulli { .. } => {
                let p = self.bernoulli_p().unwrap();
                let mut a = Subset::empty(self.n);
                for r in 1..=self.n {
                    if stream.bernoulli(p) {
                        a.insert(r);
                    }
                }
                a
            }
            SchemeKind::FixedSize { .. } => {
                let k = self.fixed_size_k().unwrap();
                let mut pool: Vec<usize> = (1..=self.n).collect();
                let mut a = Subset::empty(self.n);
                for i in 0..k {
                    let j = i + stream.below((self.n - i) as u64) as usize;
                    pool.swap(i, j);
                    a.insert(pool[i]);
                }
                a
            }
            SchemeKind::Custom { table } => {
                let u = stream.uniform_open();
                let mut acc = 0.0;
                for (a, w) in table {
                    acc += w;
                    if u < acc {
                        return a.clone();
                    }
                }
                table.last().expect("custom table non-empty").0.clone()
            }
        }
    }

    /// Every subset with `σ² > 0` as `(mask, σ²)`, ascending by mask.
    /// Requires `N ≤ 63`; callers apply their own subset cap first.
    pub fn weighted_masks(&self) -> Result<Vec<(u64, f64)>> {
        if self.n > 63 {
            return Err(Error::SizeLimit {
                what: "N for subset enumeration",
                value: self.n as u128,
                limit: 63,
            });
        }
        Ok(match &self.kind {
            SchemeKind::Custom { table } => {
                let mut out: Vec<(u64, f64)> =
                    table.iter().map(|(a, w)| (a.mask().unwrap(), *w)).collect();
                out.sort_by_key(|e| e.0);
                out
            }
            _ => {
                let weights: Vec<f64> =
                    (0..=self.n).map(|k| self.size_class_weight(k).unwrap()).collect();
                (0..1u64 << self.n)
                    .map(|mask| (mask, weights[mask.count_ones() as usize]))
                    .filter(|(_, w)| *w > 0.0)
                    .collect()
            }
        })
    }

    /// Chooses which subsets to keep so the retained `σ²` mass is at least
    /// `1 - mass_tolerance`, taking the heaviest weights first. Size-class
    /// schemes keep or drop whole size classes.
    pub fn truncation_plan(&self, mass_tolerance: f64) -> Result<TruncationPlan> {
        if !(mass_tolerance > 0.0 && mass_tolerance < 1.0) {
            return Err(Error::parameter(format!(
                "mass tolerance {mass_tolerance} must lie in (0, 1)"
            )));
        }
        let target = 1.0 - mass_tolerance;
        match &self.kind {
            SchemeKind::Custom { table } => {
                let mut entries: Vec<(Subset, f64)> = table.clone();
                entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                let mut retained = 0.0;
                let mut keep = Vec::new();
                for (a, w) in entries {
                    if retained >= target {
                        break;
                    }
                    retained += w;
                    keep.push(a);
                }
                let total: f64 = table.iter().map(|e| e.1).sum();
                Ok(TruncationPlan {
                    retained_subsets: keep.len() as u128,
                    retained_mass: retained,
                    dropped_mass: total - retained,
                    selection: Selection::Subsets(keep),
                })
            }
            _ => {
                let mut classes: Vec<(usize, f64)> = (0..=self.n)
                    .map(|k| (k, self.size_class_weight(k).unwrap()))
                    .filter(|(_, w)| *w > 0.0)
                    .collect();
                classes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let mut retained = 0.0;
                let mut count: u128 = 0;
                let mut sizes = Vec::new();
                let mut dropped = 0.0;
                for (k, w) in classes {
                    let class_mass = binomial(self.n, k) * w;
                    if retained >= target {
                        dropped += class_mass;
                        continue;
                    }
                    retained += class_mass;
                    count += binomial_u128(self.n, k);
                    sizes.push(k);
                }
                sizes.sort_unstable();
                Ok(TruncationPlan {
                    retained_subsets: count,
                    retained_mass: retained,
                    dropped_mass: dropped,
                    selection: Selection::Sizes(sizes),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// Keep every subset whose size is listed.
    Sizes(Vec<usize>),
    /// Keep exactly these subsets.
    Subsets(Vec<Subset>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationPlan {
    pub selection: Selection,
    pub retained_subsets: u128,
    pub retained_mass: f64,
    pub dropped_mass: f64,
}

impl TruncationPlan {
    pub fn keeps(&self, a: &Subset) -> bool {
        match &self.selection {
            Selection::Sizes(sizes) => sizes.contains(&a.len()),
            Selection::Subsets(list) => list.contains(a),
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `q = exp(-(1 - 1/d²) c²)`.
pub fn q_from_c(c: f64, d: usize) -> Result<f64> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("c = {c} must be nonnegative")));
    }
    if d < 2 {
        return Err(Error::parameter(format!("d = {d} must be at least 2")));
    }
    let d2 = (d * d) as f64;
    Ok((-(1.0 - 1.0 / d2) * c * c).exp())
}

/// Inverse of [`q_from_c`] on `q ∈ (0, 1)`.
pub fn c_from_q(q: f64, d: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q = {q} must lie in (0, 1)")));
    }
    if d < 2 {
        return Err(Error::parameter(format!("d = {d} must be at least 2")));
    }
    let d2 = (d * d) as f64;
    Ok((-q.ln() / (1.0 - 1.0 / d2)).sqrt())
}

pub fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    let log = -lambda + k as f64 * lambda.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0);
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    log.exp()
}

/// Poisson(λ) masses on `0..=cutoff` with the upper tail folded into the
/// last bin, `cutoff = ⌈λ + 4√λ⌉`.
pub fn folded_poisson(lambda: f64) -> Vec<f64> {
    let cutoff = (lambda + 4.0 * lambda.sqrt()).ceil() as usize;
    let mut masses: Vec<f64> = (0..cutoff).map(|k| poisson_pmf(lambda, k)).collect();
    let head: f64 = masses.iter().sum();
    masses.push((1.0 - head).max(0.0));
    masses
}

/// Total-variation distance between an empirical histogram (counts indexed
/// by value) and a folded distribution of the same support length.
pub fn tv_from_counts(counts: &[u64], folded: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let last = folded.len() - 1;
    let mut empirical = vec![0.0; folded.len()];
    for (k, &c) in counts.iter().enumerate() {
        empirical[k.min(last)] += c as f64 / total as f64;
    }
    0.5 * empirical.iter().zip(folded).map(|(e, p)| (e - p).abs()).sum::<f64>()
}

/// Sampled coincidence statistics of `k` independent `ρ`-distributed subsets.
#[derive(Debug, Clone)]
pub struct CoincidenceStats {
    pub k: usize,
    pub trials: usize,
    /// Pair order `(0,1), (0,2), …, (k-2,k-1)`.
    pub pairs: Vec<(usize, usize)>,
    /// Histogram of `|A_i ∩ A_j|` per pair.
    pub pair_histograms: Vec<Vec<u64>>,
    /// Joint counts of the full pairwise-intersection vector.
    pub joint: BTreeMap<Vec<u32>, u64>,
    /// Fraction of trials where some three of the subsets share an element.
    pub triple_overlap_frequency: f64,
    /// Poisson parameter compared against: `c²`, or the empirical mean
    /// pairwise overlap for custom schemes.
    pub poisson_lambda: f64,
    /// TV distance of each pairwise marginal from the folded Poisson law.
    pub tv_to_poisson: Vec<f64>,
    /// TV distance of the joint law from the product of its marginals.
    pub tv_joint_to_product: f64,
    /// Pearson correlation of `|A_1∩A_2|` and `|A_1∩A_3|` (needs `k ≥ 3`).
    pub shared_set_correlation: Option<f64>,
}

impl CoincidenceStats {
    pub fn max_tv_to_poisson(&self) -> f64 {
        self.tv_to_poisson.iter().cloned().fold(0.0, f64::max)
    }

    /// Mean overlap of pair `idx`.
    pub fn pair_mean(&self, idx: usize) -> f64 {
        let h = &self.pair_histograms[idx];
        let total: u64 = h.iter().sum();
        h.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum::<f64>() / total as f64
    }
}

struct TrialOutcome {
    overlaps: Vec<u32>,
    triple: bool,
}

fn run_trial(scheme: &WeightScheme, k: usize, seed: u64, trial: usize) -> TrialOutcome {
    let mut stream = RngStream::new(seed, &[tag::DIAGNOSTICS, trial as u64]);
    let sets: Vec<Subset> = (0..k).map(|_| scheme.sample_subset(&mut stream)).collect();
    let mut overlaps = Vec::with_capacity(k * (k - 1) / 2);
    let mut pair_sets = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let both = sets[i].intersection(&sets[j]);
            overlaps.push(both.len() as u32);
            pair_sets.push((i, j, both));
        }
    }
    let triple = pair_sets
        .iter()
        .any(|(_, j, both)| sets[j + 1..].iter().any(|s| both.intersection_len(s) > 0));
    TrialOutcome { overlaps, triple }
}

/// Samples `k` independent subsets per trial and tabulates their pairwise
/// overlaps and triple coincidences. Trial `t` uses its own stream keyed by
/// `(seed, t)`, so the result does not depend on the worker count.
pub fn assumption_diagnostics(
    scheme: &WeightScheme,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<CoincidenceStats> {
    if k < 2 {
        return Err(Error::parameter("tuple size k must be at least 2"));
    }
    if trials == 0 {
        return Err(Error::parameter("trials must be at least 1"));
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(scheme, k, seed, t))
        .collect();

    let pairs: Vec<(usize, usize)> =
        (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let mut pair_histograms = vec![Vec::<u64>::new(); pairs.len()];
    let mut joint: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut triples = 0usize;
    for o in &outcomes {
        for (h, &v) in pair_histograms.iter_mut().zip(&o.overlaps) {
            if h.len() <= v as usize {
                h.resize(v as usize + 1, 0);
            }
            h[v as usize] += 1;
        }
        *joint.entry(o.overlaps.clone()).or_insert(0) += 1;
        triples += o.triple as usize;
    }

    let poisson_lambda = match scheme.c() {
        Some(c) => c * c,
        None => {
            let sum: f64 = outcomes.iter().map(|o| o.overlaps[0] as f64).sum();
            sum / trials as f64
        }
    };
    let folded = folded_poisson(poisson_lambda);
    let tv_to_poisson = pair_histograms.iter().map(|h| tv_from_counts(h, &folded)).collect();

    let n = trials as f64;
    let marginal = |idx: usize, v: u32| -> f64 {
        pair_histograms[idx].get(v as usize).copied().unwrap_or(0) as f64 / n
    };
    // Atoms outside the joint support contribute product mass only.
    let mut covered_product = 0.0;
    let mut tv_joint = 0.0;
    for (key, &count) in &joint {
        let product: f64 = key.iter().enumerate().map(|(i, &v)| marginal(i, v)).product();
        covered_product += product;
        tv_joint += (count as f64 / n - product).abs();
    }
    let tv_joint_to_product = 0.5 * (tv_joint + (1.0 - covered_product).max(0.0));

    let shared_set_correlation = (k >= 3).then(|| {
        // pairs[0] = (0,1), pairs[1] = (0,2)
        let xs: Vec<f64> = outcomes.iter().map(|o| o.overlaps[0] as f64).collect();
        let ys: Vec<f64> = outcomes.iter().map(|o| o.overlaps[1] as f64).collect();
        pearson(&xs, &ys)
    });

    Ok(CoincidenceStats {
        k,
        trials,
        pairs,
        pair_histograms,
        joint,
        triple_overlap_frequency: triples as f64 / n,
        poisson_lambda,
        tv_to_poisson,
        tv_joint_to_product,
        shared_set_correlation,
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Z4Method {
    ClosedForm,
    MonteCarlo,
}

/// Value of `Σ σ²_{A_1}⋯σ²_{A_n} d^{-2|A_1 ∖ (A_2 ∪ ⋯ ∪ A_n)|}`.
#[derive(Debug, Clone, Copy)]
pub struct Z4Estimate {
    pub value: f64,
    /// Zero for the closed form.
    pub stderr: f64,
    pub method: Z4Method,
}

impl Z4Estimate {
    /// The sum cannot decay when it already equals 1: no draw of `A_1` ever
    /// has elements outside the other sets.
    pub fn is_stuck_at_one(&self) -> bool {
        self.value >= 1.0 - 1e-12 && self.stderr <= 1e-12
    }
}

/// Closed form for Bernoulli schemes, Monte Carlo otherwise.
pub fn z4_sum(scheme: &WeightScheme, n: usize, samples: usize, seed: u64) -> Result<Z4Estimate> {
    if n == 0 {
        return Err(Error::parameter("n must be at least 1"));
    }
    match scheme.bernoulli_p() {
        Some(p) => {
            let d2 = (scheme.d() * scheme.d()) as f64;
            let per_coordinate = 1.0 - p * (1.0 - p).powi(n as i32 - 1) * (1.0 - 1.0 / d2);
            Ok(Z4Estimate {
                value: per_coordinate.powi(scheme.n() as i32),
                stderr: 0.0,
                method: Z4Method::ClosedForm,
            })
        }
        None => z4_monte_carlo(scheme, n, samples, seed),
    }
}

pub fn z4_monte_carlo(
    scheme: &WeightScheme,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Z4Estimate> {
    if n == 0 {
        return Err(Error::parameter("n must be at least 1"));
    }
    if samples < 2 {
        return Err(Error::parameter("Monte Carlo needs at least 2 samples"));
    }
    let d2 = (scheme.d() * scheme.d()) as f64;
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut stream = RngStream::new(seed, &[tag::Z4, n as u64, s as u64]);
            let first = scheme.sample_subset(&mut stream);
            let mut rest = Subset::empty(scheme.n());
            for _ in 1..n {
                rest = rest.union(&scheme.sample_subset(&mut stream));
            }
            d2.powi(-(first.difference_len(&rest) as i32))
        })
        .collect();
    let (mean, stderr) = crate::stats::mean_and_stderr(&values);
    Ok(Z4Estimate { value: mean, stderr, method: Z4Method::MonteCarlo })
}
