//! Contraction tensors `T^{A,r}` and the per-coordinate factors `Θ_r`, `Υ_r`.
//!
//! For a coordinate `r`, `T^{A,r}_{ij,kl}` is `[i=l][j=k]/d` when `r ∈ A` and
//! `[i=j][k=l]` otherwise. A product of these deltas over the lines of a pair
//! partition is a sum over `d^{#components}` assignments of a constraint graph
//! on `2m` vertices, so every factor is an exact power of `d`.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::partition::PairPartition;
use crate::subset::Subset;

/// Default guard on the number of index tuples `d^{2mN}` visited by
/// [`brute_force_contraction`].
pub const BRUTE_FORCE_GUARD: u128 = 10_000_000;

/// The exact value `d^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PowerOfD {
    pub exponent: i64,
}

impl PowerOfD {
    pub const ONE: PowerOfD = PowerOfD { exponent: 0 };

    pub fn value(self, d: usize) -> f64 {
        (d as f64).powi(self.exponent as i32)
    }

    pub fn exact(self, d: usize) -> Ratio<i128> {
        let base = Ratio::from_integer(d as i128);
        if self.exponent >= 0 {
            base.pow(self.exponent as i32)
        } else {
            base.recip().pow((-self.exponent) as i32)
        }
    }

    pub fn times(self, other: PowerOfD) -> PowerOfD {
        PowerOfD { exponent: self.exponent + other.exponent }
    }
}

/// Sets `A_1, …, A_{2m}` and a pair partition of `{1, …, 2m}`.
///
/// Only the set at the opening point `c_v` of each line enters the kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProblem {
    d: usize,
    n: usize,
    sets: Vec<Subset>,
    partition: PairPartition,
}

impl ContractionProblem {
    pub fn new(d: usize, n: usize, sets: Vec<Subset>, partition: PairPartition) -> Result<Self> {
        if d < 2 {
            return Err(Error::parameter(format!("d = {d} must be at least 2")));
        }
        if n == 0 {
            return Err(Error::parameter("N must be at least 1"));
        }
        if sets.len() != 2 * partition.m() {
            return Err(Error::DimensionMismatch { expected: 2 * partition.m(), got: sets.len() });
        }
        if let Some(a) = sets.iter().find(|a| a.ambient() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: a.ambient() });
        }
        Ok(ContractionProblem { d, n, sets, partition })
    }

    /// One set per line, placed at both endpoints.
    pub fn from_line_sets(
        d: usize,
        n: usize,
        partition: PairPartition,
        line_sets: Vec<Subset>,
    ) -> Result<Self> {
        if line_sets.len() != partition.m() {
            return Err(Error::DimensionMismatch { expected: partition.m(), got: line_sets.len() });
        }
        let mut sets = vec![Subset::empty(n); 2 * partition.m()];
        for (&(c, e), a) in partition.lines().iter().zip(line_sets) {
            sets[c - 1] = a.clone();
            sets[e - 1] = a;
        }
        Self::new(d, n, sets, partition)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn sets(&self) -> &[Subset] {
        &self.sets
    }

    pub fn partition(&self) -> &PairPartition {
        &self.partition
    }

    /// `A_{c_v}` for line `v` (0-based).
    pub fn line_set(&self, v: usize) -> &Subset {
        &self.sets[self.partition.lines()[v].0 - 1]
    }

    /// True when no element lies in three line sets `A_{c_i}, A_{c_j}, A_{c_k}`.
    pub fn triple_intersections_empty(&self) -> bool {
        (1..=self.n).all(|r| (0..self.m()).filter(|&v| self.line_set(v).contains(r)).count() < 3)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), components: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.components -= 1;
        }
    }
}

/// Graph evaluation shared by `Θ_r` and `Υ_r`; vertices are 0-based and
/// `next` is the successor permutation.
fn delta_graph_exponent(
    problem: &ContractionProblem,
    r: usize,
    next: impl Fn(usize) -> usize,
    cycles: i64,
) -> PowerOfD {
    let mut uf = UnionFind::new(2 * problem.m());
    let mut inside = 0i64;
    for (v, &(c, e)) in problem.partition.lines().iter().enumerate() {
        let (c, e) = (c - 1, e - 1);
        if problem.line_set(v).contains(r) {
            inside += 1;
            uf.union(c, next(e));
            uf.union(next(c), e);
        } else {
            uf.union(c, next(c));
            uf.union(e, next(e));
        }
    }
    PowerOfD { exponent: uf.components as i64 - cycles - inside }
}

fn check_coordinate(problem: &ContractionProblem, r: usize) -> Result<()> {
    if r == 0 || r > problem.n {
        return Err(Error::parameter(format!("coordinate {r} outside 1..={}", problem.n)));
    }
    Ok(())
}

/// `Θ_r`, with the cyclic convention `j^{2m+1} = j^1`.
pub fn theta_r(problem: &ContractionProblem, r: usize) -> Result<PowerOfD> {
    check_coordinate(problem, r)?;
    let len = 2 * problem.m();
    Ok(delta_graph_exponent(problem, r, |k| (k + 1) % len, 1))
}

/// `Π_r Θ_r`, the normalized full contraction
/// `d^{-N} Σ_{i^1…i^{2m}} Π_v T^{A_{c_v}}`.
pub fn theta_product(problem: &ContractionProblem) -> PowerOfD {
    (1..=problem.n).fold(PowerOfD::ONE, |acc, r| {
        acc.times(theta_r(problem, r).expect("coordinate in range"))
    })
}

/// `Π d^{-2|A_{c_i} ∩ A_{c_j}|}` over crossing line pairs.
pub fn crossing_product(problem: &ContractionProblem) -> PowerOfD {
    let lines = problem.partition.lines();
    let mut exponent = 0i64;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            if problem.partition.lines_cross(i, j) {
                exponent -= 2 * problem.line_set(i).intersection_len(problem.line_set(j)) as i64;
            }
        }
    }
    PowerOfD { exponent }
}

/// The two-cycle successor: `k ↦ k+1` except `m ↦ 1` and `2m ↦ m+1`
/// (1-based), returned on 0-based vertices.
pub fn two_cycle_successor(m: usize, k: usize) -> usize {
    if k == m - 1 {
        0
    } else if k == 2 * m - 1 {
        m
    } else {
        k + 1
    }
}

/// `Υ_r`: the `Θ_r` graph with the two-cycle successor, normalized by
/// `1/d²` so that a coordinate in no set gives 1.
///
/// A coordinate lying only in the set of a line joining the two cycles
/// gives `1/d²`.
pub fn upsilon_r(problem: &ContractionProblem, r: usize) -> Result<PowerOfD> {
    check_coordinate(problem, r)?;
    let m = problem.m();
    Ok(delta_graph_exponent(problem, r, |k| two_cycle_successor(m, k), 2))
}

pub fn upsilon_product(problem: &ContractionProblem) -> PowerOfD {
    (1..=problem.n).fold(PowerOfD::ONE, |acc, r| {
        acc.times(upsilon_r(problem, r).expect("coordinate in range"))
    })
}

fn digits(mut x: usize, d: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let digit = x % d;
            x /= d;
            digit
        })
        .collect()
}

/// Literal evaluation of `d^{-N} Σ_{i^1…i^{2m}} Π_v T^{A_{c_v}}_{i^{c_v} i^{c_v+1}, i^{d_v} i^{d_v+1}}`
/// over full multi-indices `i^k ∈ {0, …, d^N − 1}`, in exact arithmetic.
pub fn brute_force_contraction(problem: &ContractionProblem) -> Result<Ratio<i128>> {
    brute_force_contraction_with_guard(problem, BRUTE_FORCE_GUARD)
}

pub fn brute_force_contraction_with_guard(
    problem: &ContractionProblem,
    guard: u128,
) -> Result<Ratio<i128>> {
    let (d, n, m) = (problem.d, problem.n, problem.m());
    let dim = (d as u128).checked_pow(n as u32);
    let tuples = dim.and_then(|dim| dim.checked_pow(2 * m as u32));
    let tuples = match tuples {
        Some(t) if t <= guard => t,
        _ => {
            return Err(Error::SizeLimit {
                what: "brute-force index tuples d^(2mN)",
                value: tuples.unwrap_or(u128::MAX),
                limit: guard,
            })
        }
    };
    let dim = dim.unwrap() as usize;
    let table: Vec<Vec<usize>> = (0..dim).map(|x| digits(x, d, n)).collect();
    let len = 2 * m;
    let lines: Vec<(usize, usize, Vec<bool>)> = problem
        .partition
        .lines()
        .iter()
        .enumerate()
        .map(|(v, &(c, e))| {
            let member = (1..=n).map(|r| problem.line_set(v).contains(r)).collect();
            (c - 1, e - 1, member)
        })
        .collect();

    let mut idx = vec![0usize; len];
    let mut count: u128 = 0;
    for _ in 0..tuples {
        let survives = lines.iter().all(|(c, e, member)| {
            let (i, j) = (&table[idx[*c]], &table[idx[(*c + 1) % len]]);
            let (k, l) = (&table[idx[*e]], &table[idx[(*e + 1) % len]]);
            (0..n).all(|r| {
                if member[r] {
                    i[r] == l[r] && j[r] == k[r]
                } else {
                    i[r] == j[r] && k[r] == l[r]
                }
            })
        });
        count += survives as u128;
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < dim {
                break;
            }
            *slot = 0;
        }
    }
    let weight: usize = (0..m).map(|v| problem.line_set(v).len()).sum();
    let denominator = Ratio::from_integer(d as i128).pow((n + weight) as i32);
    Ok(Ratio::from_integer(count as i128) / denominator)
}
