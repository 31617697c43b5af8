//! Random matrix construction: standard Hermitian blocks, the Kronecker
//! embedding `ĵ_A`, correlated families driven by a covariance `Γ`, and the
//! weighted sums `S^μ = Σ_A σ_A R^{A,μ}`.
//!
//! Basis index `I = i_1 + d i_2 + ⋯ + d^{N-1} i_N`, so coordinate `r` is digit
//! `r - 1`. The block index of an embedded matrix reads the digits at the
//! positions of `A` in ascending order, first position least significant.

use std::io::Write;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::{GammaFactor, GammaSpec};
use crate::rng::{tag, RngStream};
use crate::subset::Subset;
use crate::weights::{SchemeKind, Selection, TruncationPlan, WeightScheme};

pub const DEFAULT_SUBSET_CAP: usize = 14;
pub const DEFAULT_MAX_DIM: usize = 8192;

/// Tolerance on `|M_ij - conj(M_ji)|` accepted as Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Dense complex Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Validates Hermitian symmetry within `tolerance`, then copies the lower
    /// triangle onto the upper one so the stored matrix is exactly Hermitian.
    pub fn from_row_major(dim: usize, mut data: Vec<Complex64>, tolerance: f64) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        let deviation = hermitian_deviation(dim, &data);
        if deviation.is_nan() || deviation > tolerance {
            return Err(Error::NotHermitian { deviation });
        }
        symmetrize_from_lower(dim, &mut data);
        Ok(HermitianMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(self.dim, &self.data)
    }

    /// `tr(M)/dim`.
    pub fn normalized_trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum::<f64>() / self.dim as f64
    }

    pub fn frobenius_squared(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn as_faer(&self) -> MatRef<'_, Complex64> {
        MatRef::from_row_major_slice(&self.data, self.dim, self.dim)
    }

    /// Column-major view of the same buffer, which is the entrywise
    /// conjugate `S̄ = Sᵀ`. Products on this layout use the fast kernels.
    pub fn conj_faer(&self) -> MatRef<'_, Complex64> {
        MatRef::from_column_major_slice(&self.data, self.dim, self.dim)
    }

    pub fn to_faer(&self) -> Mat<Complex64> {
        self.as_faer().to_owned()
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &HermitianMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> HermitianMatrix {
        HermitianMatrix { dim: self.dim, data: self.data.iter().map(|x| x * alpha).collect() }
    }

    /// Dense product `self · other`, row-major.
    pub fn matmul(&self, other: &HermitianMatrix) -> Vec<Complex64> {
        // conj(S)·conj(T) on column-major views is conj(S·T)
        let product = crate::spectral::dense_product(self.conj_faer(), other.conj_faer());
        (0..self.dim * self.dim).map(|k| product[(k / self.dim, k % self.dim)].conj()).collect()
    }

    /// Writes one CSV row per matrix row; entries as `re+imi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.dim {
            let row: Vec<String> =
                (0..self.dim).map(|j| crate::output::format_complex(self.get(i, j))).collect();
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn hermitian_deviation(dim: usize, data: &[Complex64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..=i {
            worst = worst.max((data[i * dim + j] - data[j * dim + i].conj()).norm());
        }
    }
    worst
}

fn symmetrize_from_lower(dim: usize, data: &mut [Complex64]) {
    for i in 0..dim {
        data[i * dim + i].im = 0.0;
        for j in 0..i {
            data[j * dim + i] = data[i * dim + j].conj();
        }
    }
}

fn fill_standard_hermitian_row(
    dim: usize,
    i: usize,
    stream: &mut RngStream,
    scale: f64,
    data: &mut [Complex64],
) {
    let diagonal_sd = (1.0 / dim as f64).sqrt() * scale;
    let off_sd = (0.5 / dim as f64).sqrt() * scale;
    data[i * dim + i] = Complex64::new(diagonal_sd * stream.gaussian(), 0.0);
    for j in 0..i {
        let z = Complex64::new(off_sd * stream.gaussian(), off_sd * stream.gaussian());
        data[i * dim + j] = z;
        data[j * dim + i] = z.conj();
    }
}

/// Standard Hermitian matrix: real diagonal of variance `1/dim`, independent
/// real and imaginary off-diagonal parts of variance `1/(2 dim)`.
pub fn sample_standard_hermitian(dim: usize, stream: &mut RngStream) -> HermitianMatrix {
    let mut m = HermitianMatrix::zeros(dim);
    for i in 0..dim {
        fill_standard_hermitian_row(dim, i, stream, 1.0, &mut m.data);
    }
    m
}

/// As [`sample_standard_hermitian`], with row `i` drawn from the stream keyed
/// by `key ++ [i]`.
pub fn sample_standard_hermitian_keyed(dim: usize, seed: u64, key: &[u64]) -> HermitianMatrix {
    let mut m = HermitianMatrix::zeros(dim);
    let mut full_key = key.to_vec();
    full_key.push(0);
    for i in 0..dim {
        *full_key.last_mut().unwrap() = i as u64;
        let mut stream = RngStream::new(seed, &full_key);
        fill_standard_hermitian_row(dim, i, &mut stream, 1.0, &mut m.data);
    }
    m
}

/// Correlated family `R^μ = Σ_κ L_{μκ} H^κ` with `H^κ` iid standard
/// Hermitian and `Γ = L Lᵀ`, so `E[R^μ_ij R^ν_kl] = Γ_{μν} [i=l][j=k] / dim`.
pub fn sample_gamma_family(
    dim: usize,
    gamma: &GammaSpec,
    stream: &mut RngStream,
) -> Vec<HermitianMatrix> {
    let factor = gamma.factor();
    let blocks: Vec<HermitianMatrix> =
        (0..factor.rank).map(|_| sample_standard_hermitian(dim, stream)).collect();
    mix_family(&factor, &blocks, dim)
}

fn mix_family(factor: &GammaFactor, blocks: &[HermitianMatrix], dim: usize) -> Vec<HermitianMatrix> {
    (0..factor.labels)
        .map(|mu| {
            let mut r = HermitianMatrix::zeros(dim);
            for (kappa, h) in blocks.iter().enumerate() {
                let l = factor.get(mu, kappa);
                if l != 0.0 {
                    r.add_scaled(l, h);
                }
            }
            r
        })
        .collect()
}

/// Index bookkeeping for `ĵ_A` on `(ℂ^d)^{⊗N}`.
#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    d: usize,
    n: usize,
    /// 0-based digit positions of `A`, ascending.
    positions: Vec<usize>,
    /// Offset in the big index contributed by each small index.
    scatter: Vec<usize>,
}

impl EmbeddingMap {
    pub fn new(a: &Subset, d: usize, n: usize) -> Result<Self> {
        if a.ambient() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ambient() });
        }
        let positions: Vec<usize> = a.elements().into_iter().map(|r| r - 1).collect();
        let small = d.pow(positions.len() as u32);
        let scatter = (0..small)
            .map(|s| {
                let mut rest = s;
                positions.iter().fold(0, |acc, &p| {
                    let digit = rest % d;
                    rest /= d;
                    acc + digit * d.pow(p as u32)
                })
            })
            .collect();
        Ok(EmbeddingMap { d, n, positions, scatter })
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    pub fn small_dim(&self) -> usize {
        self.scatter.len()
    }

    /// Base-`d` digits `(i_1, …, i_N)`.
    pub fn digits(&self, index: usize) -> Vec<usize> {
        let mut rest = index;
        (0..self.n)
            .map(|_| {
                let digit = rest % self.d;
                rest /= self.d;
                digit
            })
            .collect()
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().rev().fold(0, |acc, &x| acc * self.d + x)
    }

    /// `i_A`: digits at the positions of `A`.
    pub fn small_index(&self, index: usize) -> usize {
        self.positions
            .iter()
            .rev()
            .fold(0, |acc, &p| acc * self.d + index / self.d.pow(p as u32) % self.d)
    }

    /// `index` with the digits at the positions of `A` zeroed.
    pub fn base(&self, index: usize) -> usize {
        index - self.scatter[self.small_index(index)]
    }

    /// Adds `coefficient · ĵ_A(small ⊗ 1)` into a row-major `d^N × d^N` buffer.
    pub fn accumulate(&self, coefficient: f64, small: &HermitianMatrix, target: &mut [Complex64]) {
        let dim = self.dim();
        let sd = self.small_dim();
        target.par_chunks_mut(dim).enumerate().for_each(|(row, out)| {
            let i_small = self.small_index(row);
            let base = row - self.scatter[i_small];
            let block = &small.data[i_small * sd..(i_small + 1) * sd];
            for (j_small, &value) in block.iter().enumerate() {
                out[base + self.scatter[j_small]] += value * coefficient;
            }
        });
    }
}

/// `ĵ_A(M ⊗ 1)`: `result[I][J] = M[i_A][j_A] · Π_{r∉A} [i_r = j_r]`.
pub fn embed(a: &Subset, small: &HermitianMatrix, d: usize, n: usize) -> Result<HermitianMatrix> {
    let map = EmbeddingMap::new(a, d, n)?;
    if small.dim() != map.small_dim() {
        return Err(Error::DimensionMismatch { expected: map.small_dim(), got: small.dim() });
    }
    let mut out = HermitianMatrix::zeros(map.dim());
    map.accumulate(1.0, small, &mut out.data);
    Ok(out)
}

/// How `S` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// One Γ-family per subset with `σ_A ≠ 0`, embedded and summed.
    Subsets,
    /// Coefficients of `S` in the product Hermitian basis, drawn directly.
    /// Same law as [`Sampler::Subsets`], cost independent of the subset count.
    ProductBasis,
}

impl Sampler {
    pub fn name(self) -> &'static str {
        match self {
            Sampler::Subsets => "subsets",
            Sampler::ProductBasis => "basis",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub d: usize,
    pub n: usize,
    pub scheme: WeightScheme,
    pub gamma: GammaSpec,
    pub seed: u64,
    pub subset_cap: usize,
    pub max_dim: usize,
    pub sampler: Sampler,
}

impl ModelConfig {
    pub fn new(scheme: WeightScheme, gamma: GammaSpec, seed: u64) -> Result<Self> {
        let config = ModelConfig {
            d: scheme.d(),
            n: scheme.n(),
            scheme,
            gamma,
            seed,
            subset_cap: DEFAULT_SUBSET_CAP,
            max_dim: DEFAULT_MAX_DIM,
            sampler: Sampler::Subsets,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.n == 0 {
            return Err(Error::parameter("need d ≥ 2 and N ≥ 1"));
        }
        if self.scheme.n() != self.n || self.scheme.d() != self.d {
            return Err(Error::parameter("weight scheme was built for a different (N, d)"));
        }
        let dim = (self.d as u128).checked_pow(self.n as u32).unwrap_or(u128::MAX);
        if dim > self.max_dim as u128 {
            return Err(Error::SizeLimit {
                what: "matrix dimension d^N",
                value: dim,
                limit: self.max_dim as u128,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }
}

/// Assembled `{S^μ}` with bookkeeping.
#[derive(Debug, Clone)]
pub struct AssembledFamily {
    pub matrices: Vec<HermitianMatrix>,
    /// Number of subsets whose blocks were drawn (0 for the basis sampler).
    pub subsets_used: usize,
    /// `Σ σ_A²` over subsets left out.
    pub dropped_mass: f64,
}

/// Draws `{S^μ}` for `sample_index`, using `config.sampler`.
pub fn assemble_s(config: &ModelConfig, sample_index: u64) -> Result<AssembledFamily> {
    config.validate()?;
    match config.sampler {
        Sampler::Subsets => {
            if config.n > config.subset_cap {
                return Err(Error::SizeLimit {
                    what: "N for exact subset assembly (use truncated mode or raise the subset cap)",
                    value: config.n as u128,
                    limit: config.subset_cap as u128,
                });
            }
            let masks = config.scheme.weighted_masks()?;
            assemble_from_masks(config, sample_index, &masks, 0.0)
        }
        Sampler::ProductBasis => assemble_product_basis(config, sample_index),
    }
}

/// Sums only the subsets kept by [`WeightScheme::truncation_plan`]. Dropped
/// terms are independent summands, so the result is Gaussian with covariance
/// short by exactly the reported dropped mass.
pub fn assemble_s_truncated(
    config: &ModelConfig,
    sample_index: u64,
    mass_tolerance: f64,
) -> Result<(AssembledFamily, TruncationPlan)> {
    config.validate()?;
    let plan = config.scheme.truncation_plan(mass_tolerance)?;
    let masks: Vec<(u64, f64)> = match &plan.selection {
        Selection::Subsets(list) => {
            let mut out: Vec<(u64, f64)> = list
                .iter()
                .map(|a| Ok((a.mask().expect("N ≤ 63"), config.scheme.sigma_squared(a)?)))
                .collect::<Result<_>>()?;
            out.sort_by_key(|e| e.0);
            out
        }
        Selection::Sizes(sizes) => (0..1u64 << config.n)
            .filter(|mask| sizes.contains(&(mask.count_ones() as usize)))
            .map(|mask| (mask, config.scheme.size_class_weight(mask.count_ones() as usize).unwrap()))
            .collect(),
    };
    let family = assemble_from_masks(config, sample_index, &masks, plan.dropped_mass)?;
    Ok((family, plan))
}

fn assemble_from_masks(
    config: &ModelConfig,
    sample_index: u64,
    masks: &[(u64, f64)],
    dropped_mass: f64,
) -> Result<AssembledFamily> {
    let dim = config.dim();
    let factor = config.gamma.factor();
    let mut acc: Vec<Vec<Complex64>> =
        vec![vec![Complex64::new(0.0, 0.0); dim * dim]; config.gamma.len()];
    for &(mask, weight) in masks {
        let a = Subset::from_mask(config.n, mask)?;
        let map = EmbeddingMap::new(&a, config.d, config.n)?;
        let sigma = weight.sqrt();
        for kappa in 0..factor.rank {
            let h = sample_standard_hermitian_keyed(
                map.small_dim(),
                config.seed,
                &[tag::SUBSET_ASSEMBLY, sample_index, mask, kappa as u64],
            );
            for (mu, target) in acc.iter_mut().enumerate() {
                let l = factor.get(mu, kappa);
                if l != 0.0 {
                    map.accumulate(sigma * l, &h, target);
                }
            }
        }
    }
    let matrices = acc
        .into_iter()
        .map(|mut data| {
            symmetrize_from_lower(dim, &mut data);
            HermitianMatrix { dim, data }
        })
        .collect();
    Ok(AssembledFamily { matrices, subsets_used: masks.len(), dropped_mass })
}

/// Orthonormal Hermitian basis of `M_d` under `tr(XY)`, with `e_0 = I/√d`
/// followed by symmetric, antisymmetric and traceless diagonal elements.
/// Each element is row-major `d × d`.
pub fn hermitian_basis(d: usize) -> Vec<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut basis = Vec::with_capacity(d * d);
    let mut identity = vec![zero; d * d];
    for i in 0..d {
        identity[i * d + i] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    basis.push(identity);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            let mut sym = vec![zero; d * d];
            sym[j * d + k] = Complex64::new(h, 0.0);
            sym[k * d + j] = Complex64::new(h, 0.0);
            basis.push(sym);
            let mut anti = vec![zero; d * d];
            anti[j * d + k] = Complex64::new(0.0, -h);
            anti[k * d + j] = Complex64::new(0.0, h);
            basis.push(anti);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = vec![zero; d * d];
        for t in 0..l {
            diag[t * d + t] = Complex64::new(norm, 0.0);
        }
        diag[l * d + l] = Complex64::new(-(l as f64) * norm, 0.0);
        basis.push(diag);
    }
    basis
}

/// Variance of the coefficient of `⊗_r e_{β_r}` in `S^μ` for an iid label,
/// as a function of the support `B = {r : β_r ≠ 0}`:
/// `v(B) = Σ_{A ⊇ B} σ_A² d^{N - 2|A|}`.
pub enum CoefficientVariance {
    /// Depends on `|B|` only.
    BySize(Vec<f64>),
    /// Indexed by the support mask.
    ByMask(Vec<f64>),
}

impl CoefficientVariance {
    pub fn for_scheme(scheme: &WeightScheme) -> Result<Self> {
        let (n, d) = (scheme.n(), scheme.d() as f64);
        match scheme.kind() {
            SchemeKind::Bernoulli { .. } => {
                let p = scheme.bernoulli_p().unwrap();
                let inside = p / (d * d);
                let outside = p / (d * d) + 1.0 - p;
                Ok(CoefficientVariance::BySize(
                    (0..=n)
                        .map(|b| {
                            d.powi(n as i32) * inside.powi(b as i32) * outside.powi((n - b) as i32)
                        })
                        .collect(),
                ))
            }
            SchemeKind::FixedSize { .. } => {
                let k = scheme.fixed_size_k().unwrap();
                let w = scheme.size_class_weight(k).unwrap() * d.powi(n as i32 - 2 * k as i32);
                Ok(CoefficientVariance::BySize(
                    (0..=n)
                        .map(|b| if b <= k { crate::weights::binomial(n - b, k - b) * w } else { 0.0 })
                        .collect(),
                ))
            }
            SchemeKind::Custom { .. } => {
                if n > 30 {
                    return Err(Error::SizeLimit {
                        what: "N for custom coefficient variances",
                        value: n as u128,
                        limit: 30,
                    });
                }
                let mut v = vec![0.0; 1 << n];
                for (mask, weight) in scheme.weighted_masks()? {
                    v[mask as usize] = weight * d.powi(n as i32 - 2 * mask.count_ones() as i32);
                }
                // Superset sums, one coordinate at a time.
                for r in 0..n {
                    for mask in 0..v.len() {
                        if mask >> r & 1 == 0 {
                            v[mask] += v[mask | 1 << r];
                        }
                    }
                }
                Ok(CoefficientVariance::ByMask(v))
            }
        }
    }

    pub fn get(&self, support: u64) -> f64 {
        match self {
            CoefficientVariance::BySize(v) => v[support.count_ones() as usize],
            CoefficientVariance::ByMask(v) => v[support as usize],
        }
    }
}

const BASIS_BLOCK: usize = 4096;

fn assemble_product_basis(config: &ModelConfig, sample_index: u64) -> Result<AssembledFamily> {
    let (d, n) = (config.d, config.n);
    let d2 = d * d;
    let len = d2.pow(n as u32);
    let variance = CoefficientVariance::for_scheme(&config.scheme)?;
    let factor = config.gamma.factor();
    let labels = config.gamma.len();

    // Standard deviation per flat coefficient index, support read from base-d² digits.
    let sd: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut support = 0u64;
            for r in 0..n {
                if rest % d2 != 0 {
                    support |= 1 << r;
                }
                rest /= d2;
            }
            variance.get(support).sqrt()
        })
        .collect();

    let mut coefficients = vec![vec![0.0f64; len]; labels];
    for kappa in 0..factor.rank {
        let z: Vec<f64> = (0..len.div_ceil(BASIS_BLOCK))
            .into_par_iter()
            .flat_map_iter(|block| {
                let mut stream = RngStream::new(
                    config.seed,
                    &[tag::BASIS_ASSEMBLY, sample_index, kappa as u64, block as u64],
                );
                let count = BASIS_BLOCK.min(len - block * BASIS_BLOCK);
                (0..count).map(move |_| stream.gaussian())
            })
            .collect();
        for (mu, coeff) in coefficients.iter_mut().enumerate() {
            let l = factor.get(mu, kappa);
            if l != 0.0 {
                coeff.par_iter_mut().zip(&z).zip(&sd).for_each(|((c, z), s)| *c += l * s * z);
            }
        }
    }

    let basis = hermitian_basis(d);
    let matrices = coefficients
        .into_iter()
        .map(|coeff| realize_product_basis(d, n, &basis, coeff))
        .collect();
    Ok(AssembledFamily { matrices, subsets_used: 0, dropped_mass: 0.0 })
}

/// `Σ_β X_β ⊗_r e_{β_r}` by one `d² × d²` transform per coordinate.
fn realize_product_basis(
    d: usize,
    n: usize,
    basis: &[Vec<Complex64>],
    coefficients: Vec<f64>,
) -> HermitianMatrix {
    let d2 = d * d;
    let mut tensor: Vec<Complex64> =
        coefficients.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    for r in 0..n {
        let stride = d2.pow(r as u32);
        let chunk = stride * d2;
        let transform = |block: &mut [Complex64]| {
            let mut fiber = vec![Complex64::new(0.0, 0.0); d2];
            for inner in 0..stride {
                for (t, f) in fiber.iter_mut().enumerate() {
                    *f = block[inner + t * stride];
                }
                for pair in 0..d2 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (beta, f) in fiber.iter().enumerate() {
                        acc += basis[beta][pair] * f;
                    }
                    block[inner + pair * stride] = acc;
                }
            }
        };
        if tensor.len() / chunk > 1 {
            tensor.par_chunks_mut(chunk).for_each(transform);
        } else {
            tensor.chunks_mut(chunk).for_each(transform);
        }
    }
    // Coordinate r now carries the pair i_r·d + j_r at stride d^{2r}.
    let dim = d.pow(n as u32);
    let spread = |x: usize, shift: usize| -> usize {
        let mut rest = x;
        let mut out = 0;
        let mut place = d.pow(shift as u32);
        for _ in 0..n {
            out += rest % d * place;
            rest /= d;
            place *= d2;
        }
        out
    };
    let spread_row: Vec<usize> = (0..dim).map(|i| spread(i, 1)).collect();
    let spread_col: Vec<usize> = (0..dim).map(|j| spread(j, 0)).collect();
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    data.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate().take(i + 1) {
            *out = tensor[spread_row[i] + spread_col[j]];
        }
    });
    drop(tensor);
    symmetrize_from_lower(dim, &mut data);
    HermitianMatrix { dim, data }
}

/// `E[S^μ_{ij} S^ν_{kl}] = Γ_{μν} Σ_A σ_A² T^A_{ij,kl}`.
pub fn entry_covariance(
    scheme: &WeightScheme,
    gamma_mu_nu: f64,
    (i, j): (usize, usize),
    (k, l): (usize, usize),
) -> Result<f64> {
    let (n, d) = (scheme.n(), scheme.d());
    let digit = |x: usize, r: usize| x / d.pow(r as u32) % d;
    let inside = |r: usize| digit(i, r) == digit(l, r) && digit(j, r) == digit(k, r);
    let outside = |r: usize| digit(i, r) == digit(j, r) && digit(k, r) == digit(l, r);
    if let Some(p) = scheme.bernoulli_p() {
        let value: f64 = (0..n)
            .map(|r| {
                p * inside(r) as u8 as f64 / d as f64 + (1.0 - p) * outside(r) as u8 as f64
            })
            .product();
        return Ok(gamma_mu_nu * value);
    }
    let mut total = 0.0;
    for (mask, weight) in scheme.weighted_masks()? {
        let t: f64 = (0..n)
            .map(|r| {
                if mask >> r & 1 == 1 {
                    inside(r) as u8 as f64 / d as f64
                } else {
                    outside(r) as u8 as f64
                }
            })
            .product();
        total += weight * t;
    }
    Ok(gamma_mu_nu * total)
}
