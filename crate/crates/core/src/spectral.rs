//! Trace moments and spectra of the model, the limit density `ν_q`, the
//! variance bound, and convergence sweeps against the pair-partition oracle.

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaSpec;
use crate::matrix::{assemble_s, HermitianMatrix, ModelConfig, Sampler, HERMITIAN_TOLERANCE};
use crate::partition::{q_gaussian_moment, MomentSpec};
use crate::stats::{mean_and_stderr, tree_sum};
use crate::weights::{c_from_q, z4_sum, WeightScheme, Z4Method};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default truncation threshold for the infinite product in `ν_q`.
pub const DEFAULT_PRODUCT_EPSILON: f64 = 1e-14;
/// Largest product length accepted before `ν_q` evaluation gives up.
pub const MAX_PRODUCT_TERMS: usize = 1_000_000;
/// Simpson refinement stops once successive estimates agree this closely.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// `a · b`, sequential so results never depend on the worker count.
pub fn dense_product(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let mut out = Mat::<Complex64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, Par::Seq);
    out
}

/// `S̄²` for Hermitian `S`, computing only the lower triangle and mirroring it.
fn conj_square(s: &HermitianMatrix) -> Mat<Complex64> {
    let n = s.dim();
    let mut out = Mat::<Complex64>::zeros(n, n);
    triangular::matmul(
        out.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        s.conj_faer(),
        BlockStructure::Rectangular,
        s.conj_faer(),
        BlockStructure::Rectangular,
        ONE,
        Par::Seq,
    );
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in j + 1..n {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

/// `S²` for Hermitian `S`.
pub fn hermitian_square(s: &HermitianMatrix) -> Mat<Complex64> {
    let mut out = conj_square(s);
    let n = out.nrows();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = out[(i, j)].conj();
        }
    }
    out
}

/// Conjugate of the product of `segment`, built from column-major views.
fn segment_conj_product(family: &[HermitianMatrix], segment: &[usize]) -> Mat<Complex64> {
    if segment.len() == 2 && segment[0] == segment[1] {
        return conj_square(&family[segment[0]]);
    }
    let mut acc = family[segment[0]].conj_faer().to_owned();
    for &mu in &segment[1..] {
        acc = dense_product(acc.as_ref(), family[mu].conj_faer());
    }
    acc
}

/// `tr(S^{μ_1} ⋯ S^{μ_n}) / dim`.
///
/// Splits the word into two halves, multiplies each out (reusing the product
/// when the halves coincide) and contracts them, at most `n - 2` products.
/// The products are taken on conjugated column-major views and the trace is
/// conjugated back.
pub fn trace_word(family: &[HermitianMatrix], word: &[usize]) -> Result<Complex64> {
    if word.is_empty() {
        return Err(Error::parameter("word must be non-empty"));
    }
    if let Some(&bad) = word.iter().find(|&&mu| mu >= family.len()) {
        return Err(Error::parameter(format!("label index {bad} outside the family")));
    }
    let dim = family[0].dim();
    let scale = 1.0 / dim as f64;
    match word.len() {
        1 => {
            let m = &family[word[0]];
            Ok(Complex64::new(m.normalized_trace(), 0.0))
        }
        2 => {
            let (a, b) = (&family[word[0]], &family[word[1]]);
            let sum: Complex64 =
                a.data().iter().zip(b.data()).map(|(x, y)| x * y.conj()).sum();
            Ok(sum * scale)
        }
        n => {
            let h = n / 2;
            let left = segment_conj_product(family, &word[..h]);
            if word[..h] == word[h..] {
                if h == 2 && word[0] == word[1] {
                    // Hermitian half: tr(P²) = Σ |P_ij|².
                    let mut columns = Vec::with_capacity(dim);
                    for j in 0..dim {
                        columns.push(
                            (0..dim).map(|i| left[(i, j)].norm_sqr()).sum::<f64>(),
                        );
                    }
                    return Ok(Complex64::new(tree_sum(&columns) * scale, 0.0));
                }
                return Ok(contract(&left, &left).conj() * scale);
            }
            let right = segment_conj_product(family, &word[h..]);
            Ok(contract(&left, &right).conj() * scale)
        }
    }
}

/// `Σ_ij L_ij R_ji`.
fn contract(left: &Mat<Complex64>, right: &Mat<Complex64>) -> Complex64 {
    let n = left.nrows();
    let mut total = ZERO;
    for j in 0..n {
        let mut column = ZERO;
        for i in 0..n {
            column += left[(i, j)] * right[(j, i)];
        }
        total += column;
    }
    total
}

/// Monte Carlo estimate of `E tr(S^{μ_1} ⋯ S^{μ_n})`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MomentEstimate {
    pub word: Vec<String>,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Mean imaginary part of the sampled traces.
    pub imag_mean: f64,
}

/// Per-sample normalized traces, in sample order.
pub fn trace_samples(config: &ModelConfig, word: &[usize], samples: usize) -> Result<Vec<Complex64>> {
    if word.is_empty() {
        return Err(Error::parameter("word must be non-empty"));
    }
    (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let family = assemble_s(config, s)?;
            trace_word(&family.matrices, word)
        })
        .collect()
}

pub fn trace_moment_mc(config: &ModelConfig, word: &[usize], samples: usize) -> Result<MomentEstimate> {
    if samples < 2 {
        return Err(Error::parameter("need at least 2 samples"));
    }
    let traces = trace_samples(config, word, samples)?;
    let re: Vec<f64> = traces.iter().map(|t| t.re).collect();
    let im: Vec<f64> = traces.iter().map(|t| t.im).collect();
    let (mean, stderr) = mean_and_stderr(&re);
    Ok(MomentEstimate {
        word: word.iter().map(|&mu| config.gamma.labels()[mu].clone()).collect(),
        mean,
        stderr,
        samples,
        imag_mean: tree_sum(&im) / samples as f64,
    })
}

/// Ascending eigenvalues of a Hermitian matrix, with trace and Frobenius
/// postconditions checked.
pub fn eigenvalues(m: &HermitianMatrix) -> Result<Vec<f64>> {
    let scale = m.data().iter().fold(1.0f64, |acc, x| acc.max(x.norm()));
    let deviation = m.hermitian_deviation();
    if deviation > HERMITIAN_TOLERANCE * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let mut values = m.as_faer().self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
    values.sort_by(f64::total_cmp);
    let dim = m.dim() as f64;
    let trace: f64 = (0..m.dim()).map(|i| m.get(i, i).re).sum();
    let frobenius = m.frobenius_squared();
    let sum: f64 = values.iter().sum();
    let squares: f64 = values.iter().map(|x| x * x).sum();
    if (sum - trace).abs() > 1e-8 * dim * scale
        || (squares - frobenius).abs() > 1e-8 * frobenius.max(f64::MIN_POSITIVE)
    {
        return Err(Error::Eigen);
    }
    Ok(values)
}

/// Pooled eigenvalue histogram over uniform bins.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub samples: usize,
    pub dim: usize,
    /// Eigenvalues below the first or above the last edge.
    pub out_of_range: u64,
}

impl SpectrumHistogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || lo.is_nan() || hi.is_nan() || hi <= lo {
            return Err(Error::parameter("histogram needs bins ≥ 1 and hi > lo"));
        }
        let edges = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
        Ok(SpectrumHistogram { edges, counts: vec![0; bins], total: 0, samples: 0, dim: 0, out_of_range: 0 })
    }

    pub fn add_sample(&mut self, eigenvalues: &[f64]) {
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        for &x in eigenvalues {
            self.total += 1;
            if x < lo || x > hi {
                self.out_of_range += 1;
                continue;
            }
            let k = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
            self.counts[k.min(bins - 1)] += 1;
        }
        self.samples += 1;
        self.dim = eigenvalues.len();
    }

    /// Count divided by `total · width`.
    pub fn densities(&self) -> Vec<f64> {
        let width = self.edges[1] - self.edges[0];
        self.counts.iter().map(|&c| c as f64 / (self.total as f64 * width)).collect()
    }
}

/// Histogram plus pooled moments of a set of sampled spectra.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumReport {
    pub histogram: SpectrumHistogram,
    /// Half-width `2/√(1-q)` of the support compared against.
    pub support_radius: f64,
    pub outside_support_fraction: f64,
    /// `moments[k-1]` is the mean over samples of `(1/dim) Σ λ^k`.
    pub moments: Vec<f64>,
    pub moment_stderrs: Vec<f64>,
}

pub fn support_radius(q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::domain(format!("q = {q} must lie in [0, 1)")));
    }
    Ok(2.0 / (1.0 - q).sqrt())
}

/// Summarizes spectra against `ν_q`: histogram over the support padded by
/// 0.5 on both sides, fraction outside the support, moments up to `max_order`.
pub fn summarize_spectra(spectra: &[Vec<f64>], q: f64, bins: usize, max_order: usize) -> Result<SpectrumReport> {
    let radius = support_radius(q)?;
    let mut histogram = SpectrumHistogram::new(-radius - 0.5, radius + 0.5, bins)?;
    let mut outside = 0u64;
    for spectrum in spectra {
        histogram.add_sample(spectrum);
        outside += spectrum.iter().filter(|x| x.abs() > radius).count() as u64;
    }
    let mut moments = Vec::with_capacity(max_order);
    let mut moment_stderrs = Vec::with_capacity(max_order);
    for k in 1..=max_order {
        let per_sample: Vec<f64> = spectra
            .iter()
            .map(|s| s.iter().map(|x| x.powi(k as i32)).sum::<f64>() / s.len() as f64)
            .collect();
        let (m, se) = mean_and_stderr(&per_sample);
        moments.push(m);
        moment_stderrs.push(se);
    }
    Ok(SpectrumReport {
        outside_support_fraction: outside as f64 / histogram.total.max(1) as f64,
        histogram,
        support_radius: radius,
        moments,
        moment_stderrs,
    })
}

/// Eigenvalues of `S^μ` for `samples` draws, pooled and summarized. `q`
/// sets the support compared against.
pub fn empirical_spectrum(
    config: &ModelConfig,
    label: usize,
    samples: usize,
    bins: usize,
    q: f64,
    max_order: usize,
) -> Result<SpectrumReport> {
    if label >= config.gamma.len() {
        return Err(Error::parameter(format!("label index {label} outside the family")));
    }
    if samples == 0 {
        return Err(Error::parameter("need at least 1 sample"));
    }
    let spectra: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let family = assemble_s(config, s)?;
            eigenvalues(&family.matrices[label])
        })
        .collect::<Result<_>>()?;
    summarize_spectra(&spectra, q, bins, max_order)
}

/// `ν_q` sampled on a grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DensityCurve {
    pub q: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub n_max: usize,
}

/// Number of product factors kept: the first `n` with `q^n < epsilon`.
pub fn product_terms(q: f64, epsilon: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::domain(format!("q = {q} must lie in [0, 1)")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::parameter(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if q == 0.0 {
        return Ok(0);
    }
    let n = (epsilon.ln() / q.ln()).floor() as usize + 1;
    if n > MAX_PRODUCT_TERMS {
        return Err(Error::SizeLimit {
            what: "product terms for the q-Gaussian density",
            value: n as u128,
            limit: MAX_PRODUCT_TERMS as u128,
        });
    }
    Ok(n)
}

/// `Π_{n=1}^{n_max} (1 - qⁿ) |1 - qⁿ e^{2iθ}|²`.
fn theta_product(q: f64, theta: f64, n_max: usize) -> f64 {
    let c2 = (2.0 * theta).cos();
    let mut qn = 1.0;
    let mut product = 1.0;
    for _ in 0..n_max {
        qn *= q;
        product *= (1.0 - qn) * (1.0 - 2.0 * qn * c2 + qn * qn);
    }
    product
}

/// Density of `ν_q` at `x`; zero outside `[-2/√(1-q), 2/√(1-q)]`.
pub fn nu_q_density(q: f64, x: f64, epsilon: f64) -> Result<f64> {
    let radius = support_radius(q)?;
    let n_max = product_terms(q, epsilon)?;
    if x.abs() > radius {
        return Ok(0.0);
    }
    let theta = (x / radius).clamp(-1.0, 1.0).acos();
    Ok((1.0 - q).sqrt() / std::f64::consts::PI * theta.sin() * theta_product(q, theta, n_max))
}

/// `points` equally spaced abscissae spanning the support, endpoints included.
pub fn density_curve(q: f64, points: usize, epsilon: f64) -> Result<DensityCurve> {
    if points < 2 {
        return Err(Error::parameter("need at least 2 points"));
    }
    let radius = support_radius(q)?;
    let n_max = product_terms(q, epsilon)?;
    let x: Vec<f64> = (0..points)
        .map(|k| -radius + 2.0 * radius * k as f64 / (points - 1) as f64)
        .collect();
    let density = x.iter().map(|&x| nu_q_density(q, x, epsilon)).collect::<Result<_>>()?;
    Ok(DensityCurve { q, x, density, n_max })
}

/// Composite Simpson on `[0, π]`, panels doubled until two estimates agree.
fn simpson_in_theta(f: impl Fn(f64) -> f64) -> f64 {
    let pi = std::f64::consts::PI;
    let estimate = |panels: usize| {
        let h = pi / panels as f64;
        let mut total = f(0.0) + f(pi);
        for k in 1..panels {
            total += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        total * h / 3.0
    };
    let mut panels = 16;
    let mut previous = estimate(panels);
    loop {
        panels *= 2;
        let current = estimate(panels);
        if (current - previous).abs() < QUADRATURE_TOLERANCE || panels >= 1 << 22 {
            return current;
        }
        previous = current;
    }
}

/// `∫ xᵏ dν_q` for `k = 0..=max_order`; odd orders exactly 0.
pub fn nu_q_moments(q: f64, max_order: usize) -> Result<Vec<f64>> {
    nu_q_moments_with_epsilon(q, max_order, DEFAULT_PRODUCT_EPSILON)
}

pub fn nu_q_moments_with_epsilon(q: f64, max_order: usize, epsilon: f64) -> Result<Vec<f64>> {
    let radius = support_radius(q)?;
    let n_max = product_terms(q, epsilon)?;
    // dν = (1/π)√(1-q) sinθ P(θ) dx and dx = radius sinθ dθ.
    let weight = |theta: f64| {
        2.0 / std::f64::consts::PI * theta.sin().powi(2) * theta_product(q, theta, n_max)
    };
    Ok((0..=max_order)
        .map(|k| {
            if k % 2 == 1 {
                0.0
            } else {
                simpson_in_theta(|t| (radius * t.cos()).powi(k as i32) * weight(t))
            }
        })
        .collect())
}

/// Upper bound on `Var[tr S^{μ_1} ⋯ S^{μ_m}]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct VarianceBound {
    pub value: f64,
    /// Zero when the coincidence sum has a closed form.
    pub stderr: f64,
    pub constant: f64,
}

/// `(2m)!! · max|Γ| · Σ σ²_{A_1}⋯σ²_{A_m} d^{-2|A_1 ∖ (A_2 ∪ ⋯ ∪ A_m)|}`.
pub fn variance_bound(
    scheme: &WeightScheme,
    gamma: &GammaSpec,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<VarianceBound> {
    if m == 0 {
        return Err(Error::parameter("m must be at least 1"));
    }
    let double_factorial: f64 = (1..=m).map(|k| 2.0 * k as f64).product();
    let constant = double_factorial * gamma.max_abs();
    let z = z4_sum(scheme, m, samples, seed)?;
    let stderr = if z.method == Z4Method::ClosedForm { 0.0 } else { constant * z.stderr };
    Ok(VarianceBound { value: constant * z.value, stderr, constant })
}

/// `E tr S⁴` for one label with `Γ ≡ 1`, exact at finite `N`:
/// `2 + Σ σ_A² σ_B² d^{-2|A∩B|}`.
pub fn finite_n_fourth_moment(scheme: &WeightScheme) -> Result<f64> {
    let d2 = (scheme.d() * scheme.d()) as f64;
    if let Some(p) = scheme.bernoulli_p() {
        return Ok(2.0 + (1.0 - p * p * (1.0 - 1.0 / d2)).powi(scheme.n() as i32));
    }
    let masks = scheme.weighted_masks()?;
    let mut total = 0.0;
    for &(a, wa) in &masks {
        for &(b, wb) in &masks {
            total += wa * wb * d2.powi(-((a & b).count_ones() as i32));
        }
    }
    Ok(2.0 + total)
}

/// One row of a convergence sweep.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub word: String,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub exact_target: f64,
    pub gap: f64,
    pub variance_bound: f64,
    /// Kept by the greedy summable-subsequence heuristic.
    pub selected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendStatus {
    Decreasing,
    /// The gap did not decrease but the 1-SE bands of the two gaps overlap.
    FlaggedOverlap,
    Increasing,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub d: usize,
    pub q: f64,
    pub ns: Vec<usize>,
    pub word: Vec<usize>,
    pub gamma: GammaSpec,
    pub samples: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub subset_cap: usize,
    pub max_dim: usize,
}

/// Bernoulli scheme with `c = c_from_q(q, d)` at each `N`; Monte Carlo mean
/// against the partition oracle, plus the variance bound.
pub fn convergence_sweep(settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    let SweepSettings { d, q, ref ns, ref word, ref gamma, samples, seed, sampler, subset_cap, max_dim } = *settings;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q = {q} must lie in (0, 1)")));
    }
    let c = c_from_q(q, d)?;
    let target = q_gaussian_moment(&MomentSpec { q, word, gamma })?;
    let word_name = word.iter().map(|&mu| gamma.labels()[mu].as_str()).collect::<Vec<_>>().join(" ");
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let scheme = WeightScheme::bernoulli(n, d, c)?;
        let mut config = ModelConfig {
            d,
            n,
            scheme: scheme.clone(),
            gamma: gamma.clone(),
            seed: seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            subset_cap,
            max_dim,
            sampler,
        };
        config.validate()?;
        config.sampler = sampler;
        let estimate = trace_moment_mc(&config, word, samples)?;
        let bound = variance_bound(&scheme, gamma, word.len(), 0, seed)?;
        rows.push(SweepRow {
            n,
            word: word_name.clone(),
            mc_mean: estimate.mean,
            mc_stderr: estimate.stderr,
            exact_target: target,
            gap: (estimate.mean - target).abs(),
            variance_bound: bound.value,
            selected: false,
        });
    }
    select_summable(&mut rows);
    Ok(rows)
}

/// Greedy heuristic for the almost-sure subsequence: keep the first row,
/// then any row whose bound is at most half the last kept one, so the kept
/// bounds are dominated by a geometric series.
pub fn select_summable(rows: &mut [SweepRow]) {
    let mut last: Option<f64> = None;
    for row in rows.iter_mut() {
        let keep = match last {
            None => true,
            Some(prev) => row.variance_bound <= 0.5 * prev,
        };
        row.selected = keep;
        if keep {
            last = Some(row.variance_bound);
        }
    }
}

/// Classifies each consecutive pair of rows by how the gap moved.
pub fn trend(rows: &[SweepRow]) -> Vec<TrendStatus> {
    rows.windows(2)
        .map(|w| {
            if w[1].gap < w[0].gap {
                TrendStatus::Decreasing
            } else if w[1].gap - w[0].gap <= w[0].mc_stderr + w[1].mc_stderr {
                TrendStatus::FlaggedOverlap
            } else {
                TrendStatus::Increasing
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_standard_hermitian;
    use crate::partition::CrossingPolynomial;
    use crate::rng::RngStream;
    use crate::subset::Subset;

    fn config(scheme: WeightScheme, gamma: GammaSpec, sampler: Sampler) -> ModelConfig {
        ModelConfig::new(scheme, gamma, 5).unwrap().with_sampler(sampler)
    }

    fn naive_trace(family: &[HermitianMatrix], word: &[usize]) -> Complex64 {
        let dim = family[0].dim();
        let mut acc = family[word[0]].to_faer();
        for &mu in &word[1..] {
            acc = dense_product(acc.as_ref(), family[mu].as_faer());
        }
        (0..dim).map(|i| acc[(i, i)]).sum::<Complex64>() / dim as f64
    }

    #[test]
    fn trace_word_matches_naive_products() {
        let mut s = RngStream::new(1, &[]);
        let family: Vec<HermitianMatrix> = (0..3).map(|_| sample_standard_hermitian(7, &mut s)).collect();
        for word in [vec![0], vec![0, 1], vec![1, 1], vec![0, 0, 0], vec![0, 0, 0, 0], vec![0, 1, 0, 1], vec![0, 0, 1, 1], vec![2, 1, 0, 2, 1], vec![1, 2, 1, 2, 1, 2]] {
            let fast = trace_word(&family, &word).unwrap();
            let slow = naive_trace(&family, &word);
            assert!((fast - slow).norm() < 1e-12, "{word:?}: {fast} vs {slow}");
        }
        assert!(trace_word(&family, &[]).is_err());
        assert!(trace_word(&family, &[3]).is_err());
    }

    #[test]
    fn eigenvalue_postconditions() {
        assert_eq!(eigenvalues(&HermitianMatrix::identity(5)).unwrap(), vec![1.0; 5]);
        let diag: Vec<f64> = (1..=6).map(f64::from).collect();
        let values = eigenvalues(&HermitianMatrix::from_real_diagonal(&diag)).unwrap();
        for (a, b) in values.iter().zip(&diag) {
            assert!((a - b).abs() < 1e-12);
        }
        let m = sample_standard_hermitian(12, &mut RngStream::new(2, &[]));
        let values = eigenvalues(&m).unwrap();
        let mut power = m.clone();
        for k in 1..=4 {
            if k > 1 {
                power = HermitianMatrix::from_row_major(12, power.matmul(&m), 1e-9).unwrap();
            }
            let spectral = values.iter().map(|x| x.powi(k)).sum::<f64>() / 12.0;
            assert!((spectral - power.normalized_trace()).abs() < 1e-8);
        }
    }

    #[test]
    fn simple_moment_estimates() {
        let scheme = WeightScheme::bernoulli(4, 2, 1.0).unwrap();
        let cfg = config(scheme, GammaSpec::ones(1), Sampler::Subsets);
        for (word, target) in [(vec![0], 0.0), (vec![0, 0], 1.0), (vec![0, 0, 0], 0.0)] {
            let est = trace_moment_mc(&cfg, &word, 2000).unwrap();
            assert!((est.mean - target).abs() < 3.0 * est.stderr, "{word:?}: {est:?}");
            assert!(est.imag_mean.abs() < 1e-9);
        }
    }

    #[test]
    fn fourth_moment_matches_finite_n_formula() {
        for sampler in [Sampler::Subsets, Sampler::ProductBasis] {
            let scheme = WeightScheme::bernoulli(5, 2, 1.0).unwrap();
            let exact = finite_n_fourth_moment(&scheme).unwrap();
            let cfg = config(scheme, GammaSpec::identity(1), sampler);
            let est = trace_moment_mc(&cfg, &[0, 0, 0, 0], 4000).unwrap();
            assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{sampler:?}: {est:?} vs {exact}");
        }
        let f = WeightScheme::fixed_size(9, 2, 1.0).unwrap();
        let exact = finite_n_fourth_moment(&f).unwrap();
        // Pairs of 3-subsets of 9 elements: hypergeometric overlap.
        let c = |n: usize, k: usize| crate::weights::binomial(n, k);
        let expected: f64 = 2.0 + (0..=3).map(|k| c(3, k) * c(6, 3 - k) / c(9, 3) * 4f64.powi(-(k as i32))).sum::<f64>();
        assert!((exact - expected).abs() < 1e-12, "{exact} vs {expected}");
    }

    #[test]
    fn density_is_normalized_semicircle_at_zero() {
        let x: f64 = 0.7;
        let v = nu_q_density(0.0, x, DEFAULT_PRODUCT_EPSILON).unwrap();
        assert!((v - (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)).abs() < 1e-14);
        assert_eq!(nu_q_density(0.5, 3.0, DEFAULT_PRODUCT_EPSILON).unwrap(), 0.0);
        assert!(nu_q_density(1.0, 0.0, DEFAULT_PRODUCT_EPSILON).is_err());
        let m = nu_q_moments(0.0, 4).unwrap();
        assert!((m[4] - 2.0).abs() < 1e-6);
        for q in [0.0, 0.3, 0.6, 0.9] {
            let m = nu_q_moments(q, 2).unwrap();
            assert!((m[0] - 1.0).abs() < 1e-6 && (m[2] - 1.0).abs() < 1e-6);
            let curve = density_curve(q, 101, DEFAULT_PRODUCT_EPSILON).unwrap();
            assert!(curve.density.iter().all(|&v| v >= 0.0));
            assert!(curve.x.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn density_moments_match_partitions() {
        for step in 0..10 {
            let q = step as f64 / 10.0;
            let moments = nu_q_moments(q, 10).unwrap();
            for m in 1..=5 {
                let exact = CrossingPolynomial::for_lines(m).unwrap().eval(q);
                assert!((moments[2 * m] - exact).abs() < 1e-6, "q={q} order {}", 2 * m);
            }
        }
    }

    #[test]
    fn variance_bound_closed_forms() {
        let g = GammaSpec::identity(1);
        let b = WeightScheme::bernoulli(64, 2, 1.0).unwrap();
        let bound = variance_bound(&b, &g, 1, 0, 0).unwrap();
        let p: f64 = 1.0 / 8.0;
        assert!((bound.value - 2.0 * (1.0 - p * 0.75).powi(64)).abs() < 1e-14);
        let along: Vec<f64> = [25, 100, 400]
            .iter()
            .map(|&n| variance_bound(&WeightScheme::bernoulli(n, 2, 1.0).unwrap(), &g, 2, 0, 0).unwrap().value)
            .collect();
        assert!(along[0] > along[1] && along[1] > along[2]);
    }

    #[test]
    fn spectrum_of_scalar_scheme_is_degenerate() {
        let scheme = WeightScheme::concentrated(3, 2, Subset::empty(3)).unwrap();
        let cfg = config(scheme, GammaSpec::identity(1), Sampler::Subsets);
        let family = assemble_s(&cfg, 0).unwrap();
        let values = eigenvalues(&family.matrices[0]).unwrap();
        assert!(values.iter().all(|v| (v - values[0]).abs() < 1e-12));
        let report = empirical_spectrum(&cfg, 0, 20, 10, 0.0, 2).unwrap();
        assert_eq!(report.histogram.total, 160);
        assert_eq!(report.histogram.counts.iter().sum::<u64>() + report.histogram.out_of_range, 160);
    }

    #[test]
    fn sweep_second_moment_and_two_label_target() {
        let settings = SweepSettings {
            d: 2,
            q: 0.5,
            ns: vec![2, 4],
            word: vec![0, 0],
            gamma: GammaSpec::identity(1),
            samples: 400,
            seed: 3,
            sampler: Sampler::Subsets,
            subset_cap: 14,
            max_dim: 8192,
        };
        let rows = convergence_sweep(&settings).unwrap();
        for row in &rows {
            assert_eq!(row.exact_target, 1.0);
            assert!(row.gap < 3.0 * row.mc_stderr);
        }
        assert!(rows[0].selected);
        let two = SweepSettings { gamma: GammaSpec::identity(2), word: vec![0, 1, 0, 1], ns: vec![3], samples: 50, ..settings };
        let rows = convergence_sweep(&two).unwrap();
        assert!((rows[0].exact_target - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trend_classification() {
        let row = |mean: f64, se: f64| SweepRow { n: 1, word: "m".into(), mc_mean: mean, mc_stderr: se, exact_target: 2.5, gap: (mean - 2.5f64).abs(), variance_bound: 1.0, selected: false };
        let rows = [row(2.0, 0.01), row(2.3, 0.01), row(2.25, 0.05), row(2.0, 0.01)];
        assert_eq!(trend(&rows), vec![TrendStatus::Decreasing, TrendStatus::FlaggedOverlap, TrendStatus::Increasing]);
        // means on opposite sides of the target with equal gaps
        let across = [row(2.3, 0.01), row(2.71, 0.01)];
        assert_eq!(trend(&across), vec![TrendStatus::FlaggedOverlap]);
        let mut bounds: Vec<SweepRow> = [1.0, 0.8, 0.4, 0.3, 0.1].iter().map(|&b| SweepRow { variance_bound: b, ..row(2.0, 0.1) }).collect();
        select_summable(&mut bounds);
        assert_eq!(bounds.iter().map(|r| r.selected).collect::<Vec<_>>(), vec![true, false, true, false, true]);
    }
}
