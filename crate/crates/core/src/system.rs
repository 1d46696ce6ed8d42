//! The branching system interface and finite words over its branch alphabet.

use num_complex::Complex64;
use std::fmt;
use std::hash::Hash;

/// A point set together with branch maps and a seed kernel.
///
/// Implementations provide `m` total maps `φ_0, …, φ_{m-1}` on the point
/// universe, a Hermitian seed kernel, and a canonical key per point. Keys
/// are the memoization contract: points with equal keys must behave
/// identically under `seed` and `branch`, and systems whose reachable key
/// set stays small are the ones on which deep towers collapse from `m^n`
/// words to (reachable points) × depth.
pub trait KernelSystem {
    type Point: Clone;
    type Key: Eq + Hash + Clone;

    /// Number of branch maps, `m ≥ 1`.
    fn branch_count(&self) -> usize;

    /// Applies the branch map with index `i ∈ 0..m`.
    fn branch(&self, i: usize, x: &Self::Point) -> Self::Point;

    /// Seed kernel value `K(s, t)`.
    fn seed(&self, s: &Self::Point, t: &Self::Point) -> Complex64;

    /// Canonical hashable identifier of a point.
    fn key(&self, x: &Self::Point) -> Self::Key;

    /// Applies `φ_w = φ_{w_n} ∘ ⋯ ∘ φ_{w_1}`: the first letter acts first.
    fn apply_word(&self, w: &Word, x: &Self::Point) -> Self::Point {
        let mut y = x.clone();
        for &letter in w.letters() {
            y = self.branch(letter as usize, &y);
        }
        y
    }
}

/// A finite word over the branch alphabet `{0, …, m-1}` (rendered 1-based).
///
/// The empty word is the tree root. The node `w` has children `w·i`, and
/// the point it carries over a basepoint `s` is `φ_w(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn root() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from 0-based letters, checking the alphabet bound.
    pub fn from_letters(letters: &[u8], m: usize) -> Option<Self> {
        if letters.iter().all(|&l| (l as usize) < m) {
            Some(Word(letters.to_vec()))
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    /// The child `w·i`.
    pub fn child(&self, i: u8) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    /// The parent node, or `None` at the root.
    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Word(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Concatenation `wv` (this word acts first).
    pub fn concat(&self, v: &Word) -> Self {
        let mut out = self.0.clone();
        out.extend_from_slice(&v.0);
        Word(out)
    }

    /// The prefix of length `n`.
    pub fn prefix(&self, n: usize) -> Self {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// Index of this word in the lexicographic (first-letter-major)
    /// enumeration of its level: `Σ_j w_j · m^{len-1-j}`.
    pub fn level_index(&self, m: usize) -> usize {
        self.0
            .iter()
            .fold(0usize, |acc, &l| acc * m + l as usize)
    }

    /// Inverse of [`Word::level_index`] at a fixed length.
    pub fn from_level_index(mut index: usize, len: usize, m: usize) -> Self {
        let mut letters = vec![0u8; len];
        for slot in letters.iter_mut().rev() {
            *slot = (index % m) as u8;
            index /= m;
        }
        Word(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for &l in &self.0 {
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}

/// Iterator over all words of a fixed length, lexicographic order.
pub fn words_of_length(len: usize, m: usize) -> impl Iterator<Item = Word> {
    let total = m.checked_pow(len as u32).expect("word level overflow");
    (0..total).map(move |i| Word::from_level_index(i, len, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_index_round_trips() {
        let m = 3;
        for len in 0..4 {
            for (i, w) in words_of_length(len, m).enumerate() {
                assert_eq!(w.level_index(m), i);
                assert_eq!(Word::from_level_index(i, len, m), w);
            }
        }
    }

    #[test]
    fn concat_orders_first_word_first() {
        let w = Word::from_letters(&[0, 1], 2).unwrap();
        let v = Word::from_letters(&[1], 2).unwrap();
        assert_eq!(w.concat(&v).letters(), &[0, 1, 1]);
    }

    #[test]
    fn rejects_letters_outside_alphabet() {
        assert!(Word::from_letters(&[2], 2).is_none());
    }
}
