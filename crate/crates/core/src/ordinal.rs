//! Ordinal patterns.
//!
//! A pattern lists window positions in ascending order of value: the window
//! `[0.2, 0.5, 0.1]` has pattern `(2, 0, 1)` because position 2 holds the
//! smallest value, then position 0, then position 1. This is the
//! "positions" convention; its inverse (the rank of each position) is not
//! used anywhere in this crate.
//!
//! A pattern is equivalently described by its comparison bits
//! `f(s, t) = [x_s ≤ x_t]` for `s < t`, stored as a packed upper triangle.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest order whose patterns can be ranked into a `u64` (20! < 2^64).
pub const MAX_ORDER: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrdinalError {
    #[error("window entries {0} and {1} are equal")]
    Tie(usize, usize),
    #[error("window discarded: entries {0} and {1} are equal")]
    TieDiscard(usize, usize),
    #[error("comparison bits are not transitive; no permutation matches")]
    InconsistentComparisons,
    #[error("rank {rank} out of range for order {n}")]
    RankOutOfRange { rank: u64, n: usize },
    #[error("order {0} unsupported (need 1 ≤ n ≤ {MAX_ORDER})")]
    BadOrder(usize),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    Strict,
    Discard,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct OrdinalPattern {
    pi: Vec<u8>,
}

impl OrdinalPattern {
    pub fn new(pi: Vec<u8>) -> Result<Self, OrdinalError> {
        let n = pi.len();
        if n == 0 || n > MAX_ORDER {
            return Err(OrdinalError::BadOrder(n));
        }
        let mut seen = [false; MAX_ORDER];
        for &p in &pi {
            if p as usize >= n || std::mem::replace(&mut seen[p as usize], true) {
                return Err(OrdinalError::NotAPermutation(n));
            }
        }
        Ok(OrdinalPattern { pi })
    }

    pub fn identity(n: usize) -> Self {
        OrdinalPattern {
            pi: (0..n as u8).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.pi.len()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.pi
    }

    /// Lehmer rank in `0..n!`; the identity has rank 0.
    pub fn rank(&self) -> u64 {
        lehmer_rank(&self.pi)
    }

    pub fn unrank(rank: u64, n: usize) -> Result<Self, OrdinalError> {
        if n == 0 || n > MAX_ORDER {
            return Err(OrdinalError::BadOrder(n));
        }
        if rank >= factorial(n) {
            return Err(OrdinalError::RankOutOfRange { rank, n });
        }
        let mut pool: Vec<u8> = (0..n as u8).collect();
        let mut pi = Vec::with_capacity(n);
        let mut r = rank;
        for i in (0..n).rev() {
            let f = factorial(i);
            let digit = (r / f) as usize;
            r %= f;
            pi.push(pool.remove(digit));
        }
        Ok(OrdinalPattern { pi })
    }

    /// Every pattern of order `n`, in rank order.
    pub fn all(n: usize) -> impl Iterator<Item = OrdinalPattern> {
        (0..factorial(n)).map(move |k| Self::unrank(k, n).expect("rank in range"))
    }

    /// Comparison bits of any window with this pattern.
    pub fn comparisons(&self) -> ComparisonMatrix {
        let n = self.order();
        let mut pos = vec![0usize; n];
        for (r, &p) in self.pi.iter().enumerate() {
            pos[p as usize] = r;
        }
        let mut c = ComparisonMatrix::zeros(n);
        for s in 0..n {
            for t in s + 1..n {
                c.set(s, t, pos[s] < pos[t]);
            }
        }
        c
    }
}

impl TryFrom<Vec<u8>> for OrdinalPattern {
    type Error = OrdinalError;

    fn try_from(pi: Vec<u8>) -> Result<Self, OrdinalError> {
        Self::new(pi)
    }
}

impl From<OrdinalPattern> for Vec<u8> {
    fn from(p: OrdinalPattern) -> Vec<u8> {
        p.pi
    }
}

impl fmt::Display for OrdinalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, p) in self.pi.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn lehmer_rank(pi: &[u8]) -> u64 {
    let n = pi.len();
    let mut rank = 0u64;
    for i in 0..n {
        let smaller = pi[i + 1..].iter().filter(|&&q| q < pi[i]).count() as u64;
        rank = rank * (n - i) as u64 + smaller;
    }
    rank
}

/// Positions sorted by value, without allocation for `n ≤ MAX_ORDER`.
fn argsort(window: &[f64], out: &mut [u8]) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = i as u8;
    }
    // insertion sort: stable and fast for short windows
    for i in 1..out.len() {
        let key = out[i];
        let mut j = i;
        while j > 0 && window[out[j - 1] as usize] > window[key as usize] {
            out[j] = out[j - 1];
            j -= 1;
        }
        out[j] = key;
    }
}

/// First pair of equal entries in a window already sorted by `idx`.
fn find_tie(window: &[f64], idx: &[u8]) -> Option<(usize, usize)> {
    idx.windows(2).find_map(|w| {
        let (a, b) = (w[0] as usize, w[1] as usize);
        (window[a] == window[b]).then_some((a.min(b), a.max(b)))
    })
}

pub fn pattern_of(window: &[f64], policy: TiePolicy) -> Result<OrdinalPattern, OrdinalError> {
    let n = window.len();
    if n == 0 || n > MAX_ORDER {
        return Err(OrdinalError::BadOrder(n));
    }
    let mut idx = [0u8; MAX_ORDER];
    argsort(window, &mut idx[..n]);
    if let Some((a, b)) = find_tie(window, &idx[..n]) {
        return Err(match policy {
            TiePolicy::Strict => OrdinalError::Tie(a, b),
            TiePolicy::Discard => OrdinalError::TieDiscard(a, b),
        });
    }
    Ok(OrdinalPattern { pi: idx[..n].to_vec() })
}

/// Lehmer rank of a window's pattern, or `None` on a tie. Hot path for the
/// estimators.
pub fn window_rank(window: &[f64]) -> Option<u64> {
    let n = window.len();
    debug_assert!((1..=MAX_ORDER).contains(&n));
    let mut idx = [0u8; MAX_ORDER];
    argsort(window, &mut idx[..n]);
    if find_tie(window, &idx[..n]).is_some() {
        return None;
    }
    Some(lehmer_rank(&idx[..n]))
}

/// Bits `f(s, t) = [x_s ≤ x_t]` for all `s < t`, packed row by row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ComparisonMatrix {
    n: usize,
    bits: Vec<u64>,
}

impl ComparisonMatrix {
    pub fn zeros(n: usize) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        ComparisonMatrix {
            n,
            bits: vec![0; pairs.div_ceil(64)],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn index(&self, s: usize, t: usize) -> usize {
        assert!(s < t && t < self.n, "pair ({s},{t}) outside E_{}", self.n);
        s * (2 * self.n - s - 1) / 2 + (t - s - 1)
    }

    pub fn get(&self, s: usize, t: usize) -> bool {
        let k = self.index(s, t);
        (self.bits[k / 64] >> (k % 64)) & 1 == 1
    }

    pub fn set(&mut self, s: usize, t: usize, value: bool) {
        let k = self.index(s, t);
        if value {
            self.bits[k / 64] |= 1 << (k % 64);
        } else {
            self.bits[k / 64] &= !(1 << (k % 64));
        }
    }

    /// Builds a matrix from `(s, t, bit)` triples; unspecified pairs are 0.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, bool)]) -> Self {
        let mut c = Self::zeros(n);
        for &(s, t, b) in pairs {
            c.set(s, t, b);
        }
        c
    }

    pub fn from_window(window: &[f64]) -> Result<Self, OrdinalError> {
        let n = window.len();
        let mut c = Self::zeros(n);
        for s in 0..n {
            for t in s + 1..n {
                if window[s] == window[t] {
                    return Err(OrdinalError::Tie(s, t));
                }
                c.set(s, t, window[s] <= window[t]);
            }
        }
        Ok(c)
    }

    /// All pairs `(s, t, bit)` in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        (0..self.n).flat_map(move |s| (s + 1..self.n).map(move |t| (s, t, self.get(s, t))))
    }

    /// The unique pattern with these comparison bits.
    pub fn to_pattern(&self) -> Result<OrdinalPattern, OrdinalError> {
        let n = self.n;
        if n == 0 || n > MAX_ORDER {
            return Err(OrdinalError::BadOrder(n));
        }
        // position p sits at place #{q : x_q < x_p}
        let mut place = vec![0usize; n];
        for (s, t, le) in self.pairs() {
            if le {
                place[t] += 1;
            } else {
                place[s] += 1;
            }
        }
        let mut pi = vec![u8::MAX; n];
        for (p, &r) in place.iter().enumerate() {
            if pi[r] != u8::MAX {
                return Err(OrdinalError::InconsistentComparisons);
            }
            pi[r] = p as u8;
        }
        let pattern = OrdinalPattern { pi };
        if pattern.comparisons() != *self {
            return Err(OrdinalError::InconsistentComparisons);
        }
        Ok(pattern)
    }
}

impl fmt::Display for ComparisonMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (s, t, b)) in self.pairs().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "({s},{t}):{}", u8::from(b))?;
        }
        write!(f, "}}")
    }
}

pub fn comparison_encoding(window: &[f64]) -> Result<ComparisonMatrix, OrdinalError> {
    ComparisonMatrix::from_window(window)
}

pub fn pattern_from_comparisons(c: &ComparisonMatrix) -> Result<OrdinalPattern, OrdinalError> {
    c.to_pattern()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn pat(v: &[u8]) -> OrdinalPattern {
        OrdinalPattern::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(
            pattern_of(&[0.2, 0.5, 0.1], TiePolicy::Strict).unwrap(),
            pat(&[2, 0, 1])
        );
        assert_eq!(
            pattern_of(&[0.1, 0.2, 0.3], TiePolicy::Strict).unwrap(),
            pat(&[0, 1, 2])
        );
        assert_eq!(pattern_of(&[0.5, 0.5], TiePolicy::Strict), Err(OrdinalError::Tie(0, 1)));
        assert_eq!(
            pattern_of(&[0.5, 0.5], TiePolicy::Discard),
            Err(OrdinalError::TieDiscard(0, 1))
        );
        assert_eq!(pat(&[2, 0, 1]).to_string(), "(2,0,1)");
    }

    #[test]
    fn encoding_examples() {
        let c = comparison_encoding(&[0.2, 0.5, 0.1]).unwrap();
        assert_eq!(
            c,
            ComparisonMatrix::from_pairs(3, &[(0, 1, true), (0, 2, false), (1, 2, false)])
        );
        assert_eq!(c.to_string(), "{(0,1):1,(0,2):0,(1,2):0}");
        assert!(comparison_encoding(&[1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .pairs()
            .all(|(_, _, b)| b));
        assert!(comparison_encoding(&[4.0, 3.0, 2.0, 1.0])
            .unwrap()
            .pairs()
            .all(|(_, _, b)| !b));
    }

    #[test]
    fn decoding_examples() {
        let c = ComparisonMatrix::from_pairs(3, &[(0, 1, true), (0, 2, false), (1, 2, false)]);
        assert_eq!(pattern_from_comparisons(&c).unwrap(), pat(&[2, 0, 1]));
        let ones = ComparisonMatrix::from_pairs(
            4,
            &[
                (0, 1, true),
                (0, 2, true),
                (0, 3, true),
                (1, 2, true),
                (1, 3, true),
                (2, 3, true),
            ],
        );
        assert_eq!(pattern_from_comparisons(&ones).unwrap(), OrdinalPattern::identity(4));
        let cyclic = ComparisonMatrix::from_pairs(3, &[(0, 1, true), (1, 2, true), (0, 2, false)]);
        assert_eq!(
            pattern_from_comparisons(&cyclic),
            Err(OrdinalError::InconsistentComparisons)
        );
    }

    #[test]
    fn rank_examples() {
        assert_eq!(OrdinalPattern::identity(3).rank(), 0);
        assert_eq!(OrdinalPattern::unrank(0, 3).unwrap(), OrdinalPattern::identity(3));
        for p in OrdinalPattern::all(4) {
            assert_eq!(OrdinalPattern::unrank(p.rank(), 4).unwrap(), p);
        }
        let ranks: HashSet<u64> = OrdinalPattern::all(5).map(|p| p.rank()).collect();
        assert_eq!(ranks.len(), 120);
        assert!(OrdinalPattern::unrank(6, 3).is_err());
    }

    #[test]
    fn enumeration_sizes() {
        for n in 1..=7 {
            let distinct: HashSet<OrdinalPattern> = OrdinalPattern::all(n).collect();
            assert_eq!(distinct.len() as u64, factorial(n));
        }
    }

    #[test]
    fn window_rank_matches_pattern() {
        let w = [0.3, 0.9, 0.1, 0.5];
        assert_eq!(window_rank(&w), Some(pattern_of(&w, TiePolicy::Strict).unwrap().rank()));
        assert_eq!(window_rank(&[0.1, 0.1]), None);
    }
}
