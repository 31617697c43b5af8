//! Pair partitions of `{1, …, 2m}`, their crossing numbers, and the exact
//! mixed moments of q-deformed Gaussian variables built from them.
//!
//! A q-Gaussian moment is the sum over all pair partitions π of the word
//! positions of `q^{cr(π)} · Π Γ[μ_c, μ_d]`. Everything here is exact
//! enumeration; the sums are small enough (`(2m-1)!!` terms) that nothing
//! cleverer is needed for the orders this crate works with.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::gamma::GammaSpec;

/// Largest `m` (number of lines) enumerated unless the caller raises it.
pub const DEFAULT_ENUMERATION_GUARD: usize = 10;

/// A perfect matching of `{1, …, 2m}`.
///
/// Stored in canonical form: each line `(c, d)` has `c < d`, and lines are
/// sorted by their smaller element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairPartition {
    lines: Vec<(usize, usize)>,
}

/// Number of crossing line pairs of a pair partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrossingCount(pub u32);

impl PairPartition {
    /// Builds a partition from arbitrary 1-based lines, checking that they
    /// cover `{1, …, 2m}` exactly once, and canonicalizes them.
    pub fn new(lines: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut lines: Vec<(usize, usize)> = lines
            .into_iter()
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        if lines.is_empty() {
            return Err(Error::parameter("a pair partition needs at least one line"));
        }
        let size = 2 * lines.len();
        let mut seen = vec![false; size + 1];
        for &(a, b) in &lines {
            if a == b {
                return Err(Error::parameter(format!("degenerate line {{{a},{b}}}")));
            }
            for x in [a, b] {
                if x == 0 || x > size {
                    return Err(Error::parameter(format!("element {x} outside 1..={size}")));
                }
                if seen[x] {
                    return Err(Error::parameter(format!("element {x} appears twice")));
                }
                seen[x] = true;
            }
        }
        lines.sort_unstable();
        Ok(PairPartition { lines })
    }

    pub(crate) fn from_canonical(lines: Vec<(usize, usize)>) -> Self {
        debug_assert!(lines.windows(2).all(|w| w[0].0 < w[1].0));
        PairPartition { lines }
    }

    /// Number of lines.
    pub fn m(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self) -> &[(usize, usize)] {
        &self.lines
    }

    pub fn crossing_number(&self) -> CrossingCount {
        crossing_number(self)
    }

    /// True if lines `i` and `j` (0-based line indices) cross.
    pub fn lines_cross(&self, i: usize, j: usize) -> bool {
        lines_cross(self.lines[i], self.lines[j])
    }
}

impl std::fmt::Display for PairPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, (a, b)) in self.lines.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{{a},{b}}}")?;
        }
        write!(f, "}}")
    }
}

/// Two lines `{a,b}`, `{u,v}` (with `a<b`, `u<v`) cross iff `a<u<b<v` or `u<a<v<b`.
pub fn lines_cross((a, b): (usize, usize), (u, v): (usize, usize)) -> bool {
    (a < u && u < b && b < v) || (u < a && a < v && v < b)
}

pub fn crossing_number(pi: &PairPartition) -> CrossingCount {
    let lines = pi.lines();
    let mut count = 0;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            if lines_cross(lines[i], lines[j]) {
                count += 1;
            }
        }
    }
    CrossingCount(count)
}

fn check_guard(m: usize, guard: usize) -> Result<()> {
    if m > guard {
        return Err(Error::SizeLimit {
            what: "pair partition lines m",
            value: m as u128,
            limit: guard as u128,
        });
    }
    Ok(())
}

/// Visits every pair partition of `{1, …, 2m}` in lexicographic canonical
/// order, passing the lines and the crossing number.
///
/// Matches the smallest unmatched element with each larger unmatched element
/// in turn; the crossing number is maintained incrementally.
pub fn for_each_pair_partition<F>(m: usize, guard: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[(usize, usize)], u32),
{
    if m == 0 {
        return Err(Error::parameter("m must be at least 1"));
    }
    check_guard(m, guard)?;
    let mut used = vec![false; 2 * m + 1];
    let mut lines = Vec::with_capacity(m);
    recurse(m, &mut used, &mut lines, 0, &mut visit);
    Ok(())
}

fn recurse<F>(
    m: usize,
    used: &mut [bool],
    lines: &mut Vec<(usize, usize)>,
    crossings: u32,
    visit: &mut F,
) where
    F: FnMut(&[(usize, usize)], u32),
{
    if lines.len() == m {
        visit(lines, crossings);
        return;
    }
    let first = (1..=2 * m).find(|&x| !used[x]).expect("an unmatched element exists");
    used[first] = true;
    for partner in first + 1..=2 * m {
        if used[partner] {
            continue;
        }
        // Earlier lines all start before `first`, so they cross the new line
        // exactly when their right end lies strictly between first and partner.
        let added = lines
            .iter()
            .filter(|&&(_, b)| first < b && b < partner)
            .count() as u32;
        used[partner] = true;
        lines.push((first, partner));
        recurse(m, used, lines, crossings + added, visit);
        lines.pop();
        used[partner] = false;
    }
    used[first] = false;
}

/// All `(2m-1)!!` pair partitions of `{1, …, 2m}`, lexicographically ordered.
pub fn enumerate_pair_partitions(m: usize) -> Result<Vec<PairPartition>> {
    enumerate_pair_partitions_with_guard(m, DEFAULT_ENUMERATION_GUARD)
}

pub fn enumerate_pair_partitions_with_guard(m: usize, guard: usize) -> Result<Vec<PairPartition>> {
    let mut out = Vec::new();
    for_each_pair_partition(m, guard, |lines, _| {
        out.push(PairPartition::from_canonical(lines.to_vec()));
    })?;
    Ok(out)
}

/// `(2m-1)!! = 1·3·5⋯(2m-1)`, the number of pair partitions of `2m` points.
pub fn double_factorial_odd(m: usize) -> u128 {
    (1..=m as u128).map(|k| 2 * k - 1).product()
}

/// Crossing-number generating polynomial: coefficient `k` counts the pair
/// partitions of `{1, …, 2m}` with exactly `k` crossings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingPolynomial {
    pub coefficients: Vec<u64>,
}

impl CrossingPolynomial {
    pub fn for_lines(m: usize) -> Result<Self> {
        let max = m * (m.saturating_sub(1)) / 2;
        let mut coefficients = vec![0u64; max + 1];
        for_each_pair_partition(m, DEFAULT_ENUMERATION_GUARD, |_, cr| {
            coefficients[cr as usize] += 1;
        })?;
        Ok(CrossingPolynomial { coefficients })
    }

    pub fn total(&self) -> u64 {
        self.coefficients.iter().sum()
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * q + c as f64)
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, q: Ratio<i128>) -> Ratio<i128> {
        self.coefficients
            .iter()
            .rev()
            .fold(Ratio::from_integer(0), |acc, &c| acc * q + Ratio::from_integer(c as i128))
    }
}

/// Exact `τ(G^n)` for a single q-Gaussian of unit variance, as a rational.
/// Odd orders are zero.
pub fn q_gaussian_moment_exact(q: Ratio<i128>, order: usize) -> Result<Ratio<i128>> {
    if order == 0 {
        return Ok(Ratio::from_integer(1));
    }
    if order % 2 == 1 {
        return Ok(Ratio::from_integer(0));
    }
    Ok(CrossingPolynomial::for_lines(order / 2)?.eval_exact(q))
}

/// A mixed moment request: `τ(G_{μ_1} ⋯ G_{μ_n})` at deformation `q` with
/// covariance `gamma`. `word` holds label indices into `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct MomentSpec<'a> {
    pub q: f64,
    pub word: &'a [usize],
    pub gamma: &'a GammaSpec,
}

impl MomentSpec<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::domain(format!("q = {} outside [0, 1]", self.q)));
        }
        if self.word.is_empty() {
            return Err(Error::parameter("moment word must be non-empty"));
        }
        if let Some(&bad) = self.word.iter().find(|&&mu| mu >= self.gamma.len()) {
            return Err(Error::parameter(format!(
                "word label index {bad} outside covariance with {} labels",
                self.gamma.len()
            )));
        }
        Ok(())
    }
}

/// `Σ_π q^{cr(π)} Π_v Γ[μ_{c_v}, μ_{d_v}]`, zero for odd word length.
pub fn q_gaussian_moment(spec: &MomentSpec<'_>) -> Result<f64> {
    spec.validate()?;
    let n = spec.word.len();
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let m = n / 2;
    // weights[k] = Σ over partitions with k crossings of the Γ-product
    let mut weights = vec![0.0f64; m * (m - 1) / 2 + 1];
    for_each_pair_partition(m, DEFAULT_ENUMERATION_GUARD, |lines, cr| {
        let product: f64 = lines
            .iter()
            .map(|&(c, d)| spec.gamma.get(spec.word[c - 1], spec.word[d - 1]))
            .product();
        weights[cr as usize] += product;
    })?;
    Ok(weights.iter().rev().fold(0.0, |acc, &w| acc * spec.q + w))
}

/// Wick/Isserlis sum `Σ_π Π_v cov[c_v][d_v]` for a zero-mean Gaussian vector
/// of even length with covariance `cov`.
pub fn wick_sum(cov: &[Vec<f64>]) -> Result<f64> {
    let n = cov.len();
    if n == 0 || n % 2 == 1 {
        return Err(Error::parameter(format!(
            "Wick sum needs a non-empty even dimension, got {n}"
        )));
    }
    for (i, row) in cov.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        for j in 0..i {
            let scale = 1.0f64.max(row[j].abs());
            if (row[j] - cov[j][i]).abs() > 1e-12 * scale {
                return Err(Error::parameter(format!("covariance not symmetric at ({i},{j})")));
            }
        }
    }
    let mut total = 0.0;
    for_each_pair_partition(n / 2, DEFAULT_ENUMERATION_GUARD, |lines, _| {
        total += lines.iter().map(|&(c, d)| cov[c - 1][d - 1]).product::<f64>();
    })?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(pi: &PairPartition) -> Vec<(usize, usize)> {
        pi.lines().to_vec()
    }

    #[test]
    fn small_enumerations() {
        let one = enumerate_pair_partitions(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(lines(&one[0]), vec![(1, 2)]);

        let two = enumerate_pair_partitions(2).unwrap();
        let got: Vec<_> = two.iter().map(lines).collect();
        assert_eq!(
            got,
            vec![vec![(1, 2), (3, 4)], vec![(1, 3), (2, 4)], vec![(1, 4), (2, 3)]]
        );

        assert_eq!(enumerate_pair_partitions(3).unwrap().len(), 15);
    }

    #[test]
    fn counts_are_double_factorials_and_unique() {
        for m in 1..=7 {
            let all = enumerate_pair_partitions(m).unwrap();
            assert_eq!(all.len() as u128, double_factorial_odd(m));
            let unique: std::collections::HashSet<_> = all.iter().cloned().collect();
            assert_eq!(unique.len(), all.len());
            assert!(all.windows(2).all(|w| w[0].lines() < w[1].lines()));
        }
    }

    #[test]
    fn guard_is_enforced() {
        assert!(matches!(
            enumerate_pair_partitions(11),
            Err(Error::SizeLimit { .. })
        ));
        assert!(enumerate_pair_partitions_with_guard(3, 2).is_err());
        assert!(enumerate_pair_partitions(0).is_err());
    }

    #[test]
    fn crossing_examples() {
        let p = |l: Vec<(usize, usize)>| PairPartition::new(l).unwrap();
        assert_eq!(p(vec![(1, 2), (3, 4)]).crossing_number(), CrossingCount(0));
        assert_eq!(p(vec![(1, 3), (2, 4)]).crossing_number(), CrossingCount(1));
        assert_eq!(p(vec![(1, 4), (2, 5), (3, 6)]).crossing_number(), CrossingCount(3));
        assert_eq!(p(vec![(1, 4), (2, 3)]).crossing_number(), CrossingCount(0));
    }

    #[test]
    fn incremental_crossings_match_pairwise_count() {
        for m in 1..=6 {
            for_each_pair_partition(m, 10, |l, cr| {
                let pi = PairPartition::from_canonical(l.to_vec());
                assert_eq!(pi.crossing_number().0, cr);
                assert!(cr as usize <= m * (m - 1) / 2);
            })
            .unwrap();
        }
    }

    #[test]
    fn invalid_partitions_rejected() {
        assert!(PairPartition::new(vec![(1, 2), (2, 3)]).is_err());
        assert!(PairPartition::new(vec![(1, 5), (2, 3)]).is_err());
        assert!(PairPartition::new(vec![(1, 1)]).is_err());
        let pi = PairPartition::new(vec![(4, 2), (3, 1)]).unwrap();
        assert_eq!(pi.lines(), &[(1, 3), (2, 4)]);
    }

    #[test]
    fn crossing_polynomials() {
        assert_eq!(CrossingPolynomial::for_lines(1).unwrap().coefficients, vec![1]);
        assert_eq!(CrossingPolynomial::for_lines(2).unwrap().coefficients, vec![2, 1]);
        assert_eq!(
            CrossingPolynomial::for_lines(3).unwrap().coefficients,
            vec![5, 6, 3, 1]
        );
    }

    #[test]
    fn single_label_moments() {
        let gamma = GammaSpec::ones(1);
        let m = |q: f64, n: usize| {
            q_gaussian_moment(&MomentSpec { q, word: &vec![0; n], gamma: &gamma }).unwrap()
        };
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(m(q, 2), 1.0);
            assert!((m(q, 4) - (2.0 + q)).abs() < 1e-12);
            let six = 5.0 + 6.0 * q + 3.0 * q * q + q * q * q;
            assert!((m(q, 6) - six).abs() < 1e-12);
            assert_eq!(m(q, 3), 0.0);
            assert_eq!(m(q, 1), 0.0);
        }
    }

    #[test]
    fn moment_rejects_bad_q() {
        let gamma = GammaSpec::ones(1);
        let spec = MomentSpec { q: 1.5, word: &[0, 0], gamma: &gamma };
        assert!(matches!(q_gaussian_moment(&spec), Err(Error::Domain(_))));
        let spec = MomentSpec { q: 0.5, word: &[], gamma: &gamma };
        assert!(q_gaussian_moment(&spec).is_err());
        let spec = MomentSpec { q: 0.5, word: &[0, 1], gamma: &gamma };
        assert!(q_gaussian_moment(&spec).is_err());
    }

    #[test]
    fn two_free_labels_alternating_word() {
        // Only {{1,3},{2,4}} pairs equal labels, and it has one crossing.
        let gamma = GammaSpec::identity(2);
        let spec = MomentSpec { q: 0.37, word: &[0, 1, 0, 1], gamma: &gamma };
        assert!((q_gaussian_moment(&spec).unwrap() - 0.37).abs() < 1e-15);
    }

    #[test]
    fn wick_examples() {
        let (a, b, c) = (0.7, -0.3, 2.0);
        assert_eq!(wick_sum(&[vec![a, b], vec![b, c]]).unwrap(), b);
        let ones = vec![vec![1.0; 4]; 4];
        assert_eq!(wick_sum(&ones).unwrap(), 3.0);
        let mut cov = vec![vec![0.0; 4]; 4];
        cov[0][1] = 1.0;
        cov[1][0] = 1.0;
        cov[2][3] = 1.0;
        cov[3][2] = 1.0;
        assert_eq!(wick_sum(&cov).unwrap(), 1.0);
        assert!(wick_sum(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).is_err());
        assert!(wick_sum(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn wick_matches_classical_gaussian_moments() {
        // E X^{2m} = (2m-1)!! for a standard normal.
        for m in 1..=5 {
            let cov = vec![vec![1.0; 2 * m]; 2 * m];
            assert_eq!(wick_sum(&cov).unwrap() as u128, double_factorial_odd(m));
        }
    }
}
