//! Reduced words in the free group on a finite generator set.
//!
//! A [`Word`] is always stored in reduced form, so structural equality is
//! group equality. Generator indices are plain `usize` values; the
//! [`GeneratorSet`] owns the labels and validates that indices are in range.

use std::fmt;

use crate::error::{input, Error, Result};

/// One letter `x` or `x⁻¹` of a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub const fn pos(generator: usize) -> Self {
        Self { generator, inverse: false }
    }

    pub const fn neg(generator: usize) -> Self {
        Self { generator, inverse: true }
    }

    #[must_use]
    pub const fn inv(self) -> Self {
        Self { generator: self.generator, inverse: !self.inverse }
    }

    /// `+1` or `-1`.
    pub const fn sign(self) -> i8 {
        if self.inverse {
            -1
        } else {
            1
        }
    }

    fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.inverse != other.inverse
    }
}

/// A reduced word. Ordering is by length first, then lexicographic on letters,
/// with `x` before `x⁻¹`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Word {
    /// The identity element ε.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn generator(index: usize) -> Self {
        Self { letters: vec![Letter::pos(index)] }
    }

    /// Reduce an arbitrary letter sequence by free cancellation.
    pub fn reduce<I: IntoIterator<Item = Letter>>(raw: I) -> Self {
        let mut letters: Vec<Letter> = Vec::new();
        for letter in raw {
            match letters.last() {
                Some(&last) if last.cancels(letter) => {
                    letters.pop();
                }
                _ => letters.push(letter),
            }
        }
        Self { letters }
    }

    /// The positive word with the given generator indices.
    pub fn positive(indices: &[usize]) -> Self {
        Self { letters: indices.iter().map(|&g| Letter::pos(g)).collect() }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    #[must_use]
    pub fn mul(&self, other: &Word) -> Word {
        // Both operands are reduced, so cancellation only happens at the seam.
        let mut left = self.letters.as_slice();
        let mut right = other.letters.as_slice();
        while let (Some(&a), Some(&b)) = (left.last(), right.first()) {
            if !a.cancels(b) {
                break;
            }
            left = &left[..left.len() - 1];
            right = &right[1..];
        }
        let mut letters = Vec::with_capacity(left.len() + right.len());
        letters.extend_from_slice(left);
        letters.extend_from_slice(right);
        Word { letters }
    }

    #[must_use]
    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| l.inv()).collect() }
    }

    /// True iff `|ts| = |t| + |s|`, i.e. no cancellation at the seam.
    pub fn lengths_add(&self, other: &Word) -> bool {
        match (self.letters.last(), other.letters.first()) {
            (Some(&a), Some(&b)) => !a.cancels(b),
            _ => true,
        }
    }

    /// All letters positive. The identity counts as positive.
    pub fn is_positive(&self) -> bool {
        self.letters.iter().all(|l| !l.inverse)
    }

    /// Splits `t` as `μ·ν⁻¹` with `μ`, `ν` positive when the sign pattern is
    /// `(+)*(−)*`; returns `None` otherwise.
    pub fn pos_neg_decompose(&self) -> Option<(Word, Word)> {
        let split = self.letters.iter().position(|l| l.inverse).unwrap_or(self.letters.len());
        let (head, tail) = self.letters.split_at(split);
        if tail.iter().any(|l| !l.inverse) {
            return None;
        }
        let mu = Word { letters: head.to_vec() };
        let nu = Word { letters: tail.iter().rev().map(|l| l.inv()).collect() };
        Some((mu, nu))
    }

    /// Largest generator index used, if any.
    pub fn max_generator(&self) -> Option<usize> {
        self.letters.iter().map(|l| l.generator).max()
    }

    /// Appends one letter, reducing.
    #[must_use]
    pub fn push(&self, letter: Letter) -> Word {
        let mut letters = self.letters.clone();
        if letters.last().is_some_and(|&last| last.cancels(letter)) {
            letters.pop();
        } else {
            letters.push(letter);
        }
        Word { letters }
    }
}

/// Finite set of labelled generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    labels: Vec<String>,
}

const DEFAULT_LABELS: [&str; 4] = ["x", "y", "z", "w"];

impl GeneratorSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(input("generator set must be nonempty"));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty()
                || label.contains(['.', '^', '(', ')', ',', ' '])
                || label.chars().any(char::is_whitespace)
            {
                return Err(input(format!("invalid generator label {label:?}")));
            }
            if labels[..i].contains(label) {
                return Err(input(format!("duplicate generator label {label:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// `x, y, z, w` for up to four generators, `g0, g1, …` beyond that.
    pub fn standard(m: usize) -> Self {
        let labels = if m <= DEFAULT_LABELS.len() {
            DEFAULT_LABELS[..m].iter().map(|s| s.to_string()).collect()
        } else {
            (0..m).map(|i| format!("g{i}")).collect()
        };
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check(&self, word: &Word) -> Result<()> {
        match word.max_generator() {
            Some(g) if g >= self.len() => Err(input(format!(
                "generator index {g} out of range for a set of {} generators",
                self.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn reduce(&self, raw: &[Letter]) -> Result<Word> {
        if let Some(bad) = raw.iter().find(|l| l.generator >= self.len()) {
            return Err(input(format!("generator index {} out of range", bad.generator)));
        }
        Ok(Word::reduce(raw.iter().copied()))
    }

    pub fn mul(&self, t: &Word, s: &Word) -> Result<Word> {
        self.check(t)?;
        self.check(s)?;
        Ok(t.mul(s))
    }

    /// Parses `"x.y^-1"`; the empty string is ε.
    pub fn parse(&self, text: &str) -> Result<Word> {
        let text = text.trim();
        if text.is_empty() || text == "e" && self.index_of("e").is_none() {
            return Ok(Word::identity());
        }
        let mut raw = Vec::new();
        for token in text.split('.') {
            let (label, inverse) = match token.strip_suffix("^-1") {
                Some(label) => (label, true),
                None => (token, false),
            };
            let generator = self
                .index_of(label)
                .ok_or_else(|| Error::Parse(format!("unknown generator {label:?} in word {text:?}")))?;
            raw.push(Letter { generator, inverse });
        }
        Ok(Word::reduce(raw))
    }

    /// Inverse of [`parse`](Self::parse). Indices out of range print as `g<i>`.
    pub fn format(&self, word: &Word) -> String {
        let parts: Vec<String> = word
            .letters()
            .iter()
            .map(|l| {
                let label = self
                    .label(l.generator)
                    .map_or_else(|| format!("g{}", l.generator), str::to_string);
                if l.inverse {
                    format!("{label}^-1")
                } else {
                    label
                }
            })
            .collect();
        parts.join(".")
    }

    /// All of `W_k` in lexicographic order of index sequences.
    pub fn enumerate_positive(&self, k: usize) -> Vec<Word> {
        let m = self.len();
        let count = m.checked_pow(k as u32).expect("W_k too large to enumerate");
        let mut out = Vec::with_capacity(count);
        let mut indices = vec![0usize; k];
        for _ in 0..count {
            out.push(Word::positive(&indices));
            for slot in indices.iter_mut().rev() {
                *slot += 1;
                if *slot < m {
                    break;
                }
                *slot = 0;
            }
        }
        out
    }

    /// `W_0 ∪ … ∪ W_n`, by length then lexicographically.
    pub fn positive_words_up_to(&self, n: usize) -> Vec<Word> {
        (0..=n).flat_map(|k| self.enumerate_positive(k)).collect()
    }

    /// Every reduced word of length at most `max_len`, sorted by [`Word`]'s order.
    pub fn reduced_words_up_to(&self, max_len: usize) -> Vec<Word> {
        let mut out = vec![Word::identity()];
        let mut frontier = vec![Word::identity()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for letter in self.letters() {
                    if w.letters.last().is_some_and(|&last| last.cancels(letter)) {
                        continue;
                    }
                    let mut letters = w.letters.clone();
                    letters.push(letter);
                    next.push(Word { letters });
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    /// `x₀, x₀⁻¹, x₁, x₁⁻¹, …`
    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.len()).flat_map(|g| [Letter::pos(g), Letter::neg(g)])
    }

    pub fn display<'a>(&'a self, word: &'a Word) -> DisplayWord<'a> {
        DisplayWord { gens: self, word }
    }
}

pub struct DisplayWord<'a> {
    gens: &'a GeneratorSet,
    word: &'a Word,
}

impl fmt::Display for DisplayWord<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_identity() {
            f.write_str("e")
        } else {
            f.write_str(&self.gens.format(self.word))
        }
    }
}
