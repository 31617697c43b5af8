//! Subsets of `{1, …, N}` as packed bitsets. Element `r` is bit `r - 1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    n: usize,
    words: Vec<u64>,
}

fn word_count(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

impl Subset {
    pub fn empty(n: usize) -> Self {
        Subset { n, words: vec![0; word_count(n)] }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for r in 1..=n {
            s.insert(r);
        }
        s
    }

    /// From 1-based elements.
    pub fn from_elements(n: usize, elements: &[usize]) -> Result<Self> {
        let mut s = Self::empty(n);
        for &r in elements {
            if r == 0 || r > n {
                return Err(Error::parameter(format!("element {r} outside 1..={n}")));
            }
            s.insert(r);
        }
        Ok(s)
    }

    pub fn from_mask(n: usize, mask: u64) -> Result<Self> {
        if n < 64 && mask >> n != 0 {
            return Err(Error::parameter(format!("mask {mask:#x} has bits beyond N = {n}")));
        }
        let mut s = Self::empty(n);
        s.words[0] = mask;
        Ok(s)
    }

    /// The 64-bit mask, available when `N ≤ 64`.
    pub fn mask(&self) -> Option<u64> {
        (self.n <= 64).then(|| self.words[0])
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, r: usize) {
        debug_assert!(r >= 1 && r <= self.n);
        self.words[(r - 1) / 64] |= 1 << ((r - 1) % 64);
    }

    pub fn contains(&self, r: usize) -> bool {
        r >= 1 && r <= self.n && self.words[(r - 1) / 64] >> ((r - 1) % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Ascending 1-based elements.
    pub fn elements(&self) -> Vec<usize> {
        (1..=self.n).filter(|&r| self.contains(r)).collect()
    }

    pub fn intersection_len(&self, other: &Subset) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersection(&self, other: &Subset) -> Subset {
        Subset {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn union(&self, other: &Subset) -> Subset {
        Subset {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    /// `|self ∖ other|`.
    pub fn difference_len(&self, other: &Subset) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// Lower-case hex, most significant digit first, no prefix.
    pub fn to_hex(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate().rev() {
            if out.is_empty() {
                if *w != 0 || i == 0 {
                    out = format!("{w:x}");
                }
            } else {
                out.push_str(&format!("{w:016x}"));
            }
        }
        out
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let digits = hex.trim().trim_start_matches("0x").trim_start_matches("0X");
        if digits.is_empty() {
            return Err(Error::Parse("empty bitmask".into()));
        }
        let mut s = Self::empty(n);
        for (pos, ch) in digits.chars().rev().enumerate() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit {ch:?} in {hex:?}")))? as u64;
            for bit in 0..4 {
                if v >> bit & 1 == 1 {
                    let r = pos * 4 + bit + 1;
                    if r > n {
                        return Err(Error::Parse(format!("bitmask {hex:?} has bits beyond N = {n}")));
                    }
                    s.insert(r);
                }
            }
        }
        Ok(s)
    }
}
