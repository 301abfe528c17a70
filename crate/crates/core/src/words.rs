//! Words (multi-indices) over the alphabet `{1, ..., d}`.
//!
//! A [`Word`] addresses one coefficient of a truncated signature. Words of a
//! fixed `(d, K)` are laid out level-major and lexicographically inside each
//! level, see [`WordLayout`]; the tensor kernels rely on level blocks being
//! contiguous in that order.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Longest word accepted anywhere in the crate.
pub const MAX_WORD_LEN: usize = 16;

/// Symbol used for the empty word in reports.
pub const EMPTY_WORD: &str = "∅";

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Word {
    dim: usize,
    letters: Vec<usize>,
}

impl Word {
    pub fn new(letters: impl Into<Vec<usize>>, dim: usize) -> Result<Self> {
        let letters = letters.into();
        if dim == 0 {
            return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
        }
        if letters.len() > MAX_WORD_LEN {
            return Err(Error::WordTooLong {
                word: format_letters(&letters),
                depth: MAX_WORD_LEN,
            });
        }
        if let Some(&letter) = letters.iter().find(|&&l| l == 0 || l > dim) {
            return Err(Error::LetterOutOfRange { letter, dim });
        }
        Ok(Self { dim, letters })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            letters: Vec::new(),
        }
    }

    pub fn letter(letter: usize, dim: usize) -> Result<Self> {
        Self::new(vec![letter], dim)
    }

    /// Parses the report notation: dot-separated letters, `∅` (or an empty
    /// string) for the empty word.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() || text == EMPTY_WORD || text == "e" {
            return Ok(Self::empty(dim));
        }
        let letters = text
            .split('.')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad letter {s:?} in word {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.letters.last().copied()
    }

    /// The word with its last `n` letters removed (`I_{-1}` for `n = 1`).
    pub fn drop_last(&self, n: usize) -> Option<Word> {
        (n <= self.len()).then(|| Word {
            dim: self.dim,
            letters: self.letters[..self.len() - n].to_vec(),
        })
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        check_dims(self.dim, other.dim)?;
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word::new(letters, self.dim)
    }

    pub fn push(&self, letter: usize) -> Result<Word> {
        let mut letters = self.letters.clone();
        letters.push(letter);
        Word::new(letters, self.dim)
    }

    /// Re-interprets the letters over a larger alphabet.
    pub fn widen(&self, dim: usize) -> Result<Word> {
        Word::new(self.letters.clone(), dim)
    }

    /// Applies `map` to every letter, landing in an alphabet of size `dim`.
    pub fn map_letters(&self, dim: usize, map: impl Fn(usize) -> usize) -> Result<Word> {
        Word::new(self.letters.iter().map(|&l| map(l)).collect::<Vec<_>>(), dim)
    }
}

fn format_letters(letters: &[usize]) -> String {
    if letters.is_empty() {
        return EMPTY_WORD.to_string();
    }
    letters
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_letters(&self.letters))
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::AlphabetMismatch { left, right });
    }
    Ok(())
}

/// Integer linear combination of words, e.g. the result of a shuffle.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WordPolynomial {
    dim: usize,
    terms: BTreeMap<Word, i64>,
}

impl WordPolynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_word(word: Word) -> Self {
        let mut p = Self::zero(word.dim());
        p.add_term(word, 1);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_term(&mut self, word: Word, coeff: i64) {
        debug_assert_eq!(word.dim(), self.dim);
        if coeff == 0 {
            return;
        }
        match self.terms.entry(word) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if *e.get() == 0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
        }
    }

    pub fn coeff(&self, word: &Word) -> i64 {
        self.terms.get(word).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, i64)> {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of all coefficients.
    pub fn mass(&self) -> i64 {
        self.terms.values().sum()
    }

    /// Longest word with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    /// Appends `suffix` to every word.
    pub fn concat_right(&self, suffix: &Word) -> Result<Self> {
        let mut out = Self::zero(self.dim);
        for (w, c) in self.terms() {
            out.add_term(w.concat(suffix)?, c);
        }
        Ok(out)
    }

    /// Bilinear extension of [`shuffle`].
    pub fn shuffle(&self, other: &WordPolynomial) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let mut out = Self::zero(self.dim);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                for (w, c) in shuffle(a, b)?.terms() {
                    out.add_term(w.clone(), ca * cb * c);
                }
            }
        }
        Ok(out)
    }
}

/// Shuffle product of two words: every interleaving of `a` and `b`, with
/// multiplicity.
///
/// Built by dynamic programming over prefixes: the shuffle of
/// `a[..i]` and `b[..j]` is `(a[..i-1] ⧢ b[..j]) · a_i + (a[..i] ⧢ b[..j-1]) · b_j`.
pub fn shuffle(a: &Word, b: &Word) -> Result<WordPolynomial> {
    check_dims(a.dim(), b.dim())?;
    if a.len() + b.len() > MAX_WORD_LEN {
        return Err(Error::WordTooLong {
            word: format!("{a} ⧢ {b}"),
            depth: MAX_WORD_LEN,
        });
    }
    let dim = a.dim();
    let (la, lb) = (a.letters(), b.letters());

    // table[j] holds a[..i] ⧢ b[..j] for the current row i.
    let mut prev: Vec<BTreeMap<Vec<usize>, i64>> = (0..=lb.len())
        .map(|j| BTreeMap::from([(lb[..j].to_vec(), 1)]))
        .collect();
    for i in 1..=la.len() {
        let mut row: Vec<BTreeMap<Vec<usize>, i64>> = Vec::with_capacity(lb.len() + 1);
        row.push(BTreeMap::from([(la[..i].to_vec(), 1)]));
        for j in 1..=lb.len() {
            let mut cell: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
            for (w, &c) in &prev[j] {
                let mut w = w.clone();
                w.push(la[i - 1]);
                *cell.entry(w).or_insert(0) += c;
            }
            for (w, &c) in &row[j - 1] {
                let mut w = w.clone();
                w.push(lb[j - 1]);
                *cell.entry(w).or_insert(0) += c;
            }
            row.push(cell);
        }
        prev = row;
    }

    let mut out = WordPolynomial::zero(dim);
    for (letters, c) in prev.pop().unwrap_or_default() {
        out.add_term(Word { dim, letters }, c);
    }
    Ok(out)
}

/// Level-major, lexicographic enumeration of all words of length `<= depth`
/// over `{1, ..., dim}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordLayout {
    dim: usize,
    depth: usize,
    offsets: Vec<usize>,
}

impl WordLayout {
    pub fn new(dim: usize, depth: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
        }
        let overflow = || Error::LayoutOverflow { dim, depth };
        let mut offsets = Vec::with_capacity(depth + 2);
        let mut offset = 0usize;
        let mut level_size = 1usize;
        for k in 0..=depth {
            offsets.push(offset);
            offset = offset.checked_add(level_size).ok_or_else(overflow)?;
            if k < depth {
                level_size = level_size.checked_mul(dim).ok_or_else(overflow)?;
            }
        }
        offsets.push(offset);
        Ok(Self {
            dim,
            depth,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of words, `(d^{K+1} - 1) / (d - 1)`.
    pub fn len(&self) -> usize {
        self.offsets[self.depth + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Start of the level-`k` block.
    pub fn level_offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    pub fn level_size(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn index(&self, word: &Word) -> Result<usize> {
        check_dims(self.dim, word.dim())?;
        if word.len() > self.depth {
            return Err(Error::WordTooLong {
                word: word.to_string(),
                depth: self.depth,
            });
        }
        Ok(self.offsets[word.len()] + level_index(word.letters(), self.dim))
    }

    pub fn word_at(&self, index: usize) -> Option<Word> {
        if index >= self.len() {
            return None;
        }
        let k = self.offsets.partition_point(|&o| o <= index) - 1;
        let mut rem = index - self.offsets[k];
        let mut letters = vec![0; k];
        for slot in letters.iter_mut().rev() {
            *slot = rem % self.dim + 1;
            rem /= self.dim;
        }
        Some(Word {
            dim: self.dim,
            letters,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.len()).filter_map(move |i| self.word_at(i))
    }

    /// Words of exactly length `k`, in layout order.
    pub fn level_words(&self, k: usize) -> impl Iterator<Item = Word> + '_ {
        (self.offsets[k]..self.offsets[k + 1]).filter_map(move |i| self.word_at(i))
    }
}

/// Position of a word inside its own level block.
pub(crate) fn level_index(letters: &[usize], dim: usize) -> usize {
    letters.iter().fold(0, |acc, &l| acc * dim + (l - 1))
}
