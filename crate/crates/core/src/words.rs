//! Words over `{1..d}`, tensor-basis indexing, compositions and the
//! symmetric subspace of `(C^d)^{⊗k}`.
//!
//! Words index the standard basis `e_α = e_{α(1)} ⊗ … ⊗ e_{α(k)}` in
//! big-endian lexicographic order, so the index of a concatenation is
//! `index(αβ) = index(α)·d^{|β|} + index(β)` and Kronecker products of
//! word-indexed matrices compose by concatenation.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, ZERO};

/// Default cap on `d^k`.
pub const DEFAULT_CAP: usize = 1_000_000;

/// `d^k`, or a cap error if it exceeds `cap`.
pub fn checked_pow(d: usize, k: usize, cap: usize) -> Result<usize> {
    let mut acc: u128 = 1;
    for _ in 0..k {
        acc *= d as u128;
        if acc > cap as u128 {
            return Err(Error::Cap {
                what: "d^k",
                needed: (d as u128).saturating_pow(k as u32),
                cap: cap as u128,
            });
        }
    }
    Ok(acc as usize)
}

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Dimension of `(C^d)^{⊛k}`.
pub fn sym_dim(d: usize, k: usize) -> usize {
    binom(d + k - 1, k)
}

/// A word with letters in `1..=d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &l| acc * d + (l - 1))
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Inverse of [`Word::index`] for words of length `k`.
    pub fn from_index(mut idx: usize, d: usize, k: usize) -> Word {
        let mut letters = vec![0; k];
        for slot in letters.iter_mut().rev() {
            *slot = idx % d + 1;
            idx /= d;
        }
        Word(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// The ordering of length-`k` words used for basis indices.
#[derive(Clone, Debug)]
pub struct WordTable {
    pub d: usize,
    pub k: usize,
    len: usize,
}

impl WordTable {
    pub fn new(d: usize, k: usize, cap: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Shape("alphabet size must be at least 1".into()));
        }
        let len = checked_pow(d, k, cap)?;
        Ok(WordTable { d, k, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self, w: &Word) -> usize {
        debug_assert_eq!(w.len(), self.k);
        w.index(self.d)
    }

    pub fn word(&self, idx: usize) -> Word {
        Word::from_index(idx, self.d, self.k)
    }
}

/// All `d^k` words of length `k` in index order.
pub fn enumerate_words(d: usize, k: usize) -> Result<Vec<Word>> {
    enumerate_words_capped(d, k, DEFAULT_CAP)
}

pub fn enumerate_words_capped(d: usize, k: usize, cap: usize) -> Result<Vec<Word>> {
    let table = WordTable::new(d, k, cap)?;
    Ok((0..table.len()).map(|i| table.word(i)).collect())
}

/// `F(k, l)` for `l = 1..k`: the compositions of `k`.
#[derive(Clone, Debug)]
pub struct CompositionSet {
    pub k: usize,
    /// `parts[l - 1]` lists the compositions with exactly `l` parts.
    pub parts: Vec<Vec<Vec<usize>>>,
}

impl CompositionSet {
    pub fn with_len(&self, l: usize) -> &[Vec<usize>] {
        &self.parts[l - 1]
    }

    pub fn total(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.parts.iter().flatten()
    }
}

pub fn compositions(k: usize) -> Result<CompositionSet> {
    if k == 0 {
        return Err(Error::Shape("compositions need k >= 1".into()));
    }
    let mut parts = vec![Vec::new(); k];
    let mut current = Vec::new();
    fn rec(rest: usize, current: &mut Vec<usize>, parts: &mut [Vec<Vec<usize>>]) {
        if rest == 0 {
            parts[current.len() - 1].push(current.clone());
            return;
        }
        for first in 1..=rest {
            current.push(first);
            rec(rest - first, current, parts);
            current.pop();
        }
    }
    rec(k, &mut current, &mut parts);
    Ok(CompositionSet { k, parts })
}

/// Compositions of `total` into exactly `n` parts, each in `1..=max_part`.
pub fn bounded_compositions(total: usize, n: usize, max_part: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(rest: usize, left: usize, max_part: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if rest < left || rest > left * max_part {
            return;
        }
        for p in 1..=max_part.min(rest) {
            cur.push(p);
            rec(rest - p, left - 1, max_part, cur, out);
            cur.pop();
        }
    }
    rec(total, n, max_part, &mut current, &mut out);
    out
}

/// Orthonormal frame of the symmetric tensors `(C^d)^{⊛k}`.
#[derive(Clone, Debug)]
pub struct SymmetricFrame {
    pub d: usize,
    pub k: usize,
    /// Non-decreasing representatives, one per column.
    pub multisets: Vec<Word>,
    /// `d^k x D_k` isometry.
    pub isometry: CMat,
}

impl SymmetricFrame {
    pub fn dim(&self) -> usize {
        self.multisets.len()
    }

    /// The symmetrizer `S S*`.
    pub fn projector(&self) -> CMat {
        &self.isometry * self.isometry.adjoint()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Number of distinct rearrangements of a word.
pub fn arrangements(w: &Word, d: usize) -> f64 {
    let mut counts = vec![0usize; d + 1];
    for &l in &w.0 {
        counts[l] += 1;
    }
    counts.iter().fold(factorial(w.len()), |acc, &c| acc / factorial(c))
}

pub fn symmetric_frame(d: usize, k: usize) -> Result<SymmetricFrame> {
    symmetric_frame_capped(d, k, DEFAULT_CAP)
}

pub fn symmetric_frame_capped(d: usize, k: usize, cap: usize) -> Result<SymmetricFrame> {
    let table = WordTable::new(d, k, cap)?;
    let mut column: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut multisets = Vec::new();
    let mut entries = Vec::with_capacity(table.len());
    for idx in 0..table.len() {
        let w = table.word(idx);
        let mut sorted = w.0.clone();
        sorted.sort_unstable();
        let col = *column.entry(sorted.clone()).or_insert_with(|| {
            multisets.push(Word(sorted.clone()));
            multisets.len() - 1
        });
        entries.push((idx, col, 1.0 / arrangements(&w, d).sqrt()));
    }
    // Columns are created in first-seen order, which is lexicographic
    // order of the sorted representatives.
    let mut isometry = CMat::from_element(table.len(), multisets.len(), ZERO);
    for (row, col, v) in entries {
        isometry[(row, col)] = c(v, 0.0);
    }
    debug_assert_eq!(multisets.len(), sym_dim(d, k));
    Ok(SymmetricFrame {
        d,
        k,
        multisets,
        isometry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, ONE};

    fn w(s: &str) -> Word {
        Word(s.chars().map(|ch| ch.to_digit(10).unwrap() as usize).collect())
    }

    /// Average of all k! permutation matrices on (C^d)^{⊗k}.
    fn permutation_average(d: usize, k: usize) -> CMat {
        let n = d.pow(k as u32);
        let mut perms: Vec<Vec<usize>> = vec![vec![]];
        for i in 0..k {
            let mut next = Vec::new();
            for p in &perms {
                for pos in 0..=i {
                    let mut q = p.clone();
                    q.insert(pos, i);
                    next.push(q);
                }
            }
            perms = next;
        }
        let mut avg = CMat::zeros(n, n);
        for p in &perms {
            for idx in 0..n {
                let word = Word::from_index(idx, d, k);
                let permuted = Word(p.iter().map(|&j| word.0[j]).collect());
                avg[(permuted.index(d), idx)] += ONE;
            }
        }
        avg / c(perms.len() as f64, 0.0)
    }

    #[test]
    fn empty_word_only() {
        let ws = enumerate_words(2, 0).unwrap();
        assert_eq!(ws, vec![Word::empty()]);
    }

    #[test]
    fn two_letter_words_in_order() {
        let ws = enumerate_words(2, 2).unwrap();
        assert_eq!(ws, vec![w("11"), w("12"), w("21"), w("22")]);
        for (j, x) in ws.iter().enumerate() {
            assert_eq!(x.index(2), j);
        }
    }

    #[test]
    fn three_letter_alphabet_index() {
        let ws = enumerate_words(3, 2).unwrap();
        assert_eq!(ws.len(), 9);
        // (2-1)*3 + (3-1)
        assert_eq!(w("23").index(3), 5);
        assert_eq!(ws[5], w("23"));
    }

    #[test]
    fn word_cap_is_enforced() {
        assert!(matches!(
            enumerate_words_capped(2, 21, 1_000_000),
            Err(Error::Cap { .. })
        ));
    }

    #[test]
    fn compositions_small_cases() {
        let one = compositions(1).unwrap();
        assert_eq!(one.parts, vec![vec![vec![1]]]);
        let three = compositions(3).unwrap();
        assert_eq!(three.with_len(2), &[vec![1, 2], vec![2, 1]]);
        let four = compositions(4).unwrap();
        assert_eq!(four.total(), 8);
        for l in 1..=4 {
            assert_eq!(four.with_len(l).len(), binom(3, l - 1));
        }
    }

    #[test]
    fn bounded_compositions_respect_bounds() {
        let c = bounded_compositions(5, 2, 3);
        assert_eq!(c, vec![vec![2, 3], vec![3, 2]]);
        assert!(bounded_compositions(7, 2, 3).is_empty());
    }

    #[test]
    fn symmetric_dimensions() {
        assert_eq!(symmetric_frame(2, 2).unwrap().dim(), 3);
        for k in 0..5 {
            let f = symmetric_frame(1, k).unwrap();
            assert_eq!(f.dim(), 1);
            assert!((f.isometry[(0, 0)] - ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn symmetrizer_on_two_qubits() {
        let f = symmetric_frame(2, 2).unwrap();
        let p = f.projector();
        // e_11 fixed; e_12 -> (e_12 + e_21)/2
        assert!((p[(0, 0)] - ONE).norm() < 1e-12);
        assert!((p[(1, 1)] - c(0.5, 0.0)).norm() < 1e-12);
        assert!((p[(2, 1)] - c(0.5, 0.0)).norm() < 1e-12);
        assert!(p[(3, 1)].norm() < 1e-12);
    }

    #[test]
    fn frame_is_isometry_and_matches_permutation_average() {
        for (d, k) in [(2, 3), (3, 2), (3, 3), (2, 4)] {
            let f = symmetric_frame(d, k).unwrap();
            let s = &f.isometry;
            assert!((s.adjoint() * s - identity(f.dim())).norm() < 1e-12);
            assert!((f.projector() - permutation_average(d, k)).norm() < 1e-12);
        }
    }
}
