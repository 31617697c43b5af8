//! Random signed Pauli words `K = ±σ_{i_1} ⊗ ⋯ ⊗ ±σ_{i_N}`: any two either
//! commute or anticommute, and normalized sums of many of them approach `ν_q`.
//!
//! Each factor is `±σ_0` with probability `(1-3r)/2` each and `±σ_a`,
//! `a ∈ {1,2,3}`, with probability `r/2` each.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::rng::{tag, RngStream};
use crate::spectral::{eigenvalues, nu_q_moments, summarize_spectra, SpectrumReport};
use crate::stats::mean_and_stderr;

/// Dense realization is limited to `2^N × 2^N` with `N` at most this.
pub const MAX_DENSE_POSITIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliWord {
    /// `(index ∈ 0..4, sign ∈ {+1,-1})` per position.
    factors: Vec<(u8, i8)>,
}

impl PauliWord {
    pub fn new(factors: Vec<(u8, i8)>) -> Result<Self> {
        if factors.iter().any(|&(a, s)| a > 3 || (s != 1 && s != -1)) {
            return Err(Error::parameter("Pauli factors need index 0..=3 and sign ±1"));
        }
        Ok(PauliWord { factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(u8, i8)] {
        &self.factors
    }

    pub fn sign(&self) -> i8 {
        self.factors.iter().map(|f| f.1).product()
    }

    /// Dense `2^N × 2^N` matrix; position `n` acts on bit `n - 1` of the index.
    pub fn to_matrix(&self) -> Result<HermitianMatrix> {
        let n = self.len();
        if n > MAX_DENSE_POSITIONS {
            return Err(Error::SizeLimit {
                what: "Pauli word length for dense realization",
                value: n as u128,
                limit: MAX_DENSE_POSITIONS as u128,
            });
        }
        let dim = 1usize << n;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (row, col, value) in self.entries() {
            data[row * dim + col] = value;
        }
        HermitianMatrix::from_row_major(dim, data, 0.0)
    }

    /// The single nonzero `(row, column, value)` of each row.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let flip: usize = self
            .factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.0 == 1 || f.0 == 2)
            .map(|(pos, _)| 1 << pos)
            .sum();
        let sign = self.sign() as f64;
        (0..1usize << self.len()).map(move |row| {
            let mut value = Complex64::new(sign, 0.0);
            for (pos, &(a, _)) in self.factors.iter().enumerate() {
                let bit = row >> pos & 1;
                value *= match (a, bit) {
                    (2, 0) => Complex64::new(0.0, 1.0),
                    (2, _) => Complex64::new(0.0, -1.0),
                    (3, 1) => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(1.0, 0.0),
                };
            }
            // Row i holds column i ⊕ flip; σ_2 has -i above and +i below the diagonal.
            (row, row ^ flip, value.conj())
        })
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(0.0..=1.0 / 3.0).contains(&r) {
        return Err(Error::parameter(format!("r = {r} must lie in [0, 1/3]")));
    }
    Ok(())
}

/// One factor drawn from the table.
pub fn sample_factor(r: f64, stream: &mut RngStream) -> (u8, i8) {
    let u = stream.uniform_open();
    let identity = (1.0 - 3.0 * r) / 2.0;
    let cumulative = [identity, 2.0 * identity];
    let (index, sign) = if u < cumulative[0] {
        (0, 1)
    } else if u < cumulative[1] {
        (0, -1)
    } else {
        let k = (((u - cumulative[1]) / (r / 2.0)) as usize).min(5);
        (1 + (k / 2) as u8, if k.is_multiple_of(2) { 1 } else { -1 })
    };
    (index, sign)
}

pub fn sample_pauli_word(n: usize, r: f64, stream: &mut RngStream) -> Result<PauliWord> {
    check_r(r)?;
    Ok(PauliWord { factors: (0..n).map(|_| sample_factor(r, stream)).collect() })
}

/// `σ_a` and `σ_b` anticommute iff both are non-identity and distinct.
pub fn factors_anticommute(a: u8, b: u8) -> bool {
    a != 0 && b != 0 && a != b
}

/// `+1` if `K` and `L` commute, `-1` if they anticommute.
pub fn commutation_sign(k: &PauliWord, l: &PauliWord) -> Result<i8> {
    if k.len() != l.len() {
        return Err(Error::DimensionMismatch { expected: k.len(), got: l.len() });
    }
    let odd = k
        .factors
        .iter()
        .zip(&l.factors)
        .filter(|(x, y)| factors_anticommute(x.0, y.0))
        .count()
        % 2
        == 1;
    Ok(if odd { -1 } else { 1 })
}

/// `r_N = √(-ln q / (12 N))`.
pub fn r_for_target(q: f64, n: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q = {q} must lie in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::parameter("N must be at least 1"));
    }
    let r = (-q.ln() / (12.0 * n as f64)).sqrt();
    check_r(r)?;
    Ok(r)
}

/// `E[K_ij K_kl]` for a random word: `Π_n [(1-4r)[i=j][k=l] + 2r [i=l][j=k]]`
/// over the bits of the indices.
pub fn entry_covariance(r: f64, n: usize, (i, j): (usize, usize), (k, l): (usize, usize)) -> f64 {
    (0..n)
        .map(|pos| {
            let bit = |x: usize| x >> pos & 1;
            let direct = (bit(i) == bit(j) && bit(k) == bit(l)) as u8 as f64;
            let crossed = (bit(i) == bit(l) && bit(j) == bit(k)) as u8 as f64;
            (1.0 - 4.0 * r) * direct + 2.0 * r * crossed
        })
        .product()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DemoConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub q_target: f64,
    pub terms: usize,
    pub samples: usize,
    pub seed: u64,
}

impl DemoConfig {
    pub fn r(&self) -> Result<f64> {
        r_for_target(self.q_target, self.n)
    }
}

/// Frequency of anticommuting single factors over `pairs` independent pairs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AnticommutationFrequency {
    pub frequency: f64,
    pub stderr: f64,
    pub expected: f64,
    pub pairs: usize,
}

pub fn anticommutation_frequency(r: f64, pairs: usize, seed: u64) -> Result<AnticommutationFrequency> {
    check_r(r)?;
    if pairs < 2 {
        return Err(Error::parameter("need at least 2 pairs"));
    }
    let mut stream = RngStream::new(seed, &[tag::PAULI, 0xa11]);
    let hits: Vec<f64> = (0..pairs)
        .map(|_| {
            let (a, b) = (sample_factor(r, &mut stream), sample_factor(r, &mut stream));
            factors_anticommute(a.0, b.0) as u8 as f64
        })
        .collect();
    let (frequency, stderr) = mean_and_stderr(&hits);
    Ok(AnticommutationFrequency { frequency, stderr, expected: 6.0 * r * r, pairs })
}

/// Dependence between commutation events of words sharing a member.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EventDependence {
    /// Mean of `ε_{12}`, expected `(1-12r²)^N`.
    pub mean_sign: f64,
    /// Pearson correlation of `ε_{12}` and `ε_{13}`.
    pub shared_member_correlation: f64,
    /// Mean of `ε_{12} ε_{13} ε_{23}`; independent events would give `mean_sign³`.
    pub triangle_mean: f64,
    pub triples: usize,
}

pub fn event_dependence(n: usize, r: f64, triples: usize, seed: u64) -> Result<EventDependence> {
    check_r(r)?;
    if triples < 2 {
        return Err(Error::parameter("need at least 2 triples"));
    }
    let signs: Vec<(f64, f64, f64)> = (0..triples as u64)
        .into_par_iter()
        .map(|t| {
            let mut s = RngStream::new(seed, &[tag::PAULI, 0xdef, t]);
            let w: Vec<PauliWord> =
                (0..3).map(|_| sample_pauli_word(n, r, &mut s)).collect::<Result<_>>()?;
            Ok((
                commutation_sign(&w[0], &w[1])? as f64,
                commutation_sign(&w[0], &w[2])? as f64,
                commutation_sign(&w[1], &w[2])? as f64,
            ))
        })
        .collect::<Result<_>>()?;
    let e12: Vec<f64> = signs.iter().map(|s| s.0).collect();
    let e13: Vec<f64> = signs.iter().map(|s| s.1).collect();
    let triangle: Vec<f64> = signs.iter().map(|s| s.0 * s.1 * s.2).collect();
    let (m12, _) = mean_and_stderr(&e12);
    let (m13, _) = mean_and_stderr(&e13);
    let cov: f64 = e12.iter().zip(&e13).map(|(a, b)| (a - m12) * (b - m13)).sum::<f64>();
    let v12: f64 = e12.iter().map(|a| (a - m12).powi(2)).sum();
    let v13: f64 = e13.iter().map(|b| (b - m13).powi(2)).sum();
    let correlation = if v12 > 0.0 && v13 > 0.0 { cov / (v12 * v13).sqrt() } else { 0.0 };
    Ok(EventDependence {
        mean_sign: m12,
        shared_member_correlation: correlation,
        triangle_mean: mean_and_stderr(&triangle).0,
        triples,
    })
}

fn check_dense(config: &DemoConfig) -> Result<f64> {
    let r = config.r()?;
    if config.n > MAX_DENSE_POSITIONS {
        return Err(Error::SizeLimit {
            what: "Pauli word length for dense realization",
            value: config.n as u128,
            limit: MAX_DENSE_POSITIONS as u128,
        });
    }
    if config.terms == 0 {
        return Err(Error::parameter("need at least 1 term"));
    }
    Ok(r)
}

/// A word as `(flip, values)`: row `i` holds `values[i]` in column `i ⊕ flip`.
fn monomial(word: &PauliWord) -> (usize, Vec<Complex64>) {
    let mut flip = 0;
    let values = word
        .entries()
        .map(|(row, col, v)| {
            flip = row ^ col;
            v
        })
        .collect();
    (flip, values)
}

fn sample_monomials(config: &DemoConfig, r: f64, sample: u64) -> Result<Vec<(usize, Vec<Complex64>)>> {
    (0..config.terms as u64)
        .map(|s| {
            let mut stream = RngStream::new(config.seed, &[tag::PAULI, sample, s]);
            Ok(monomial(&sample_pauli_word(config.n, r, &mut stream)?))
        })
        .collect()
}

/// `(K_1 + ⋯ + K_n)/√n` for sample `sample`.
pub fn clt_sum(config: &DemoConfig, sample: u64) -> Result<HermitianMatrix> {
    let r = check_dense(config)?;
    let dim = 1usize << config.n;
    let scale = 1.0 / (config.terms as f64).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (flip, values) in sample_monomials(config, r, sample)? {
        for (row, value) in values.iter().enumerate() {
            data[row * dim + (row ^ flip)] += value * scale;
        }
    }
    HermitianMatrix::from_row_major(dim, data, 1e-12)
}

/// `tr K⁴ / 2^N` of sample `sample`, as `‖K²‖_F² / 2^N` with each row of
/// `K²` summed from the products of word pairs.
pub fn clt_fourth_moment_sample(config: &DemoConfig, sample: u64) -> Result<f64> {
    let r = check_dense(config)?;
    let dim = 1usize << config.n;
    let words = sample_monomials(config, r, sample)?;
    let flips: Vec<usize> = words.iter().map(|w| w.0).collect();
    // values[row * terms + s] = entry of word s in `row`
    let terms = words.len();
    let mut values = vec![Complex64::new(0.0, 0.0); dim * terms];
    for (s, (_, v)) in words.iter().enumerate() {
        for (row, &x) in v.iter().enumerate() {
            values[row * terms + s] = x;
        }
    }
    let mut row_buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut total = 0.0;
    for row in 0..dim {
        row_buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (s, &fs) in flips.iter().enumerate() {
            let a = values[row * terms + s];
            let mid = row ^ fs;
            let next = &values[mid * terms..(mid + 1) * terms];
            for (&ft, &b) in flips.iter().zip(next) {
                row_buf[mid ^ ft] += a * b;
            }
        }
        total += row_buf.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let n = config.terms as f64;
    Ok(total / (n * n * dim as f64))
}

/// Mean and standard error of `tr K⁴` over `config.samples` samples.
pub fn clt_fourth_moment(config: &DemoConfig) -> Result<(f64, f64)> {
    if config.samples < 2 {
        return Err(Error::parameter("need at least 2 samples"));
    }
    let values: Vec<f64> = (0..config.samples as u64)
        .into_par_iter()
        .map(|s| clt_fourth_moment_sample(config, s))
        .collect::<Result<_>>()?;
    Ok(mean_and_stderr(&values))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PauliReport {
    pub r: f64,
    /// `(1 - 12 r²)^N`.
    pub q_approx: f64,
    pub relative_gap: f64,
    pub spectrum: SpectrumReport,
    /// `ν_q` moments of the target, index = order.
    pub target_moments: Vec<f64>,
    /// Exact `E tr K⁴` at this `n` and `r`: `(1 + (n-1)(2 + q_approx))/n`.
    pub finite_fourth_moment: f64,
}

/// Pooled spectra of the normalized sum compared against `ν_{q_target}`.
pub fn clt_sum_spectrum(config: &DemoConfig, bins: usize, max_order: usize) -> Result<PauliReport> {
    let r = config.r()?;
    if config.samples == 0 {
        return Err(Error::parameter("need at least 1 sample"));
    }
    let spectra: Vec<Vec<f64>> = (0..config.samples as u64)
        .into_par_iter()
        .map(|s| eigenvalues(&clt_sum(config, s)?))
        .collect::<Result<_>>()?;
    let spectrum = summarize_spectra(&spectra, config.q_target, bins, max_order)?;
    let q_approx = (1.0 - 12.0 * r * r).powi(config.n as i32);
    let n = config.terms as f64;
    Ok(PauliReport {
        r,
        q_approx,
        relative_gap: (q_approx - config.q_target).abs() / config.q_target,
        spectrum,
        target_moments: nu_q_moments(config.q_target, max_order)?,
        finite_fourth_moment: (1.0 + (n - 1.0) * (2.0 + q_approx)) / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(factors: &[(u8, i8)]) -> PauliWord {
        PauliWord::new(factors.to_vec()).unwrap()
    }

    #[test]
    fn single_factor_matrices() {
        let y = word(&[(2, 1)]).to_matrix().unwrap();
        assert_eq!(y.get(0, 1), Complex64::new(0.0, -1.0));
        assert_eq!(y.get(1, 0), Complex64::new(0.0, 1.0));
        let z = word(&[(3, -1)]).to_matrix().unwrap();
        assert_eq!(z.get(0, 0), Complex64::new(-1.0, 0.0));
        assert_eq!(z.get(1, 1), Complex64::new(1.0, 0.0));
        let x = word(&[(1, 1)]).to_matrix().unwrap();
        assert_eq!(x.get(0, 1), Complex64::new(1.0, 0.0));
        assert!(PauliWord::new(vec![(4, 1)]).is_err());
    }

    #[test]
    fn degenerate_tables() {
        let mut s = RngStream::new(1, &[]);
        for _ in 0..100 {
            let w = sample_pauli_word(5, 0.0, &mut s).unwrap();
            assert!(w.factors().iter().all(|f| f.0 == 0));
            let w = sample_pauli_word(5, 1.0 / 3.0, &mut s).unwrap();
            assert!(w.factors().iter().all(|f| f.0 != 0));
        }
        assert!(sample_pauli_word(3, 0.4, &mut s).is_err());
    }

    #[test]
    fn factor_frequencies_match_table() {
        let r = 0.2;
        let draws = 100_000;
        let mut s = RngStream::new(2, &[]);
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            let (a, sign) = sample_factor(r, &mut s);
            counts[2 * a as usize + (sign < 0) as usize] += 1;
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = if k < 2 { (1.0 - 3.0 * r) / 2.0 } else { r / 2.0 };
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((c as f64 / draws as f64 - p).abs() < 3.0 * se, "slot {k}");
        }
    }

    #[test]
    fn commutation_signs_match_matrices() {
        assert_eq!(commutation_sign(&word(&[(1, 1)]), &word(&[(2, 1)])).unwrap(), -1);
        assert!(commutation_sign(&word(&[(1, 1)]), &word(&[(2, 1), (0, 1)])).is_err());
        let mut s = RngStream::new(3, &[]);
        for _ in 0..200 {
            let k = sample_pauli_word(4, 0.3, &mut s).unwrap();
            let l = sample_pauli_word(4, 0.3, &mut s).unwrap();
            let sign = commutation_sign(&k, &l).unwrap();
            assert_eq!(sign, commutation_sign(&l, &k).unwrap());
            assert_eq!(commutation_sign(&k, &k).unwrap(), 1);
            let (km, lm) = (k.to_matrix().unwrap(), l.to_matrix().unwrap());
            let kl = km.matmul(&lm);
            let lk = lm.matmul(&km);
            assert!(kl.iter().zip(&lk).all(|(a, b)| *a == b * sign as f64));
        }
    }

    #[test]
    fn words_are_hermitian_involutions() {
        let mut s = RngStream::new(4, &[]);
        for _ in 0..20 {
            let m = sample_pauli_word(3, 0.25, &mut s).unwrap().to_matrix().unwrap();
            assert_eq!(m.hermitian_deviation(), 0.0);
            let sq = m.matmul(&m);
            for i in 0..8 {
                for j in 0..8 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((sq[i * 8 + j] - expected).norm() < 1e-15);
                }
            }
            let values = eigenvalues(&m).unwrap();
            assert!(values.iter().all(|v| (v.abs() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn anticommutation_probability() {
        let r = r_for_target(0.5, 10).unwrap();
        let f = anticommutation_frequency(r, 100_000, 7).unwrap();
        assert!((f.frequency - f.expected).abs() < 3.0 * f.stderr);
    }

    #[test]
    fn entry_covariance_matches_samples() {
        let (n, r, draws) = (2, 0.2, 40_000);
        let mut s = RngStream::new(8, &[]);
        let mats: Vec<HermitianMatrix> =
            (0..draws).map(|_| sample_pauli_word(n, r, &mut s).unwrap().to_matrix().unwrap()).collect();
        for i in 0..4 {
            for j in 0..4 {
                for (k, l) in [(j, i), (0, 0), (3, 3), (1, 2)] {
                    let prods: Vec<f64> = mats.iter().map(|m| (m.get(i, j) * m.get(k, l)).re).collect();
                    let (mean, se) = mean_and_stderr(&prods);
                    let exact = entry_covariance(r, n, (i, j), (k, l));
                    assert!((mean - exact).abs() <= 4.0 * se + 1e-12, "({i},{j}),({k},{l}): {mean} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn fourth_moment_matches_exact_expectation() {
        // E tr K⁴ = (1 + (n-1)(2 + (1-12r²)^N)) / n
        let config = DemoConfig { n: 6, q_target: 0.5, terms: 20, samples: 4000, seed: 9 };
        let r = config.r().unwrap();
        let qt = (1.0 - 12.0 * r * r).powi(6);
        let exact = (1.0 + 19.0 * (2.0 + qt)) / 20.0;
        let (mean, se) = clt_fourth_moment(&config).unwrap();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} ± {se} vs {exact}");
    }

    #[test]
    fn approximate_r_is_close() {
        let r = r_for_target(0.5, 10).unwrap();
        let q = (1.0 - 12.0 * r * r).powi(10);
        assert!((q - 0.5).abs() / 0.5 < 0.05);
        assert!(r_for_target(1.0, 10).is_err());
    }

    #[test]
    fn clt_second_moment() {
        let config = DemoConfig { n: 4, q_target: 0.5, terms: 30, samples: 40, seed: 1 };
        let report = clt_sum_spectrum(&config, 20, 4).unwrap();
        let m2 = report.spectrum.moments[1];
        assert!((m2 - 1.0).abs() < 3.0 * report.spectrum.moment_stderrs[1] + 1e-12);
        let values = eigenvalues(&clt_sum(&config, 3).unwrap()).unwrap();
        let from_spectrum = values.iter().map(|x| x.powi(4)).sum::<f64>() / values.len() as f64;
        assert!((clt_fourth_moment_sample(&config, 3).unwrap() - from_spectrum).abs() < 1e-10);
        let dep = event_dependence(4, config.r().unwrap(), 2000, 2).unwrap();
        assert!(dep.shared_member_correlation.abs() <= 1.0);
    }
}
