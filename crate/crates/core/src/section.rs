//! Finitely supported maps from the free group into operators, with the
//! convolution algebra structure of the ℓ¹ cross-sectional algebra.

use std::collections::BTreeMap;

use crate::error::{check_dim, Result};
use crate::freegroup::Word;
use crate::linop::Operator;

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    dim: usize,
    values: BTreeMap<Word, Operator>,
}

impl Section {
    pub fn new(dim: usize) -> Self {
        Self { dim, values: BTreeMap::new() }
    }

    /// `value · δ_word`.
    pub fn delta(word: Word, value: Operator) -> Self {
        let mut s = Self::new(value.dim());
        s.values.insert(word, value);
        s.values.retain(|_, v| !v.is_zero());
        s
    }

    pub fn from_pairs<I: IntoIterator<Item = (Word, Operator)>>(dim: usize, pairs: I) -> Result<Self> {
        let mut s = Self::new(dim);
        for (w, v) in pairs {
            s.insert(w, v)?;
        }
        Ok(s)
    }

    /// Sets `self(word) = value`; zero values remove the word from the support.
    pub fn insert(&mut self, word: Word, value: Operator) -> Result<()> {
        check_dim(self.dim, value.dim())?;
        if value.is_zero() {
            self.values.remove(&word);
        } else {
            self.values.insert(word, value);
        }
        Ok(())
    }

    /// Adds `value` to `self(word)`.
    pub fn accumulate(&mut self, word: Word, value: &Operator) -> Result<()> {
        check_dim(self.dim, value.dim())?;
        let sum = match self.values.get(&word) {
            Some(current) => current + value,
            None => value.clone(),
        };
        self.insert(word, sum)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, word: &Word) -> Option<&Operator> {
        self.values.get(word)
    }

    pub fn contains(&self, word: &Word) -> bool {
        self.values.contains_key(word)
    }

    pub fn support(&self) -> impl Iterator<Item = &Word> {
        self.values.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &Operator)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(f·g)(t) = Σ_s f(s) g(s⁻¹t)`.
    pub fn convolve(&self, other: &Section) -> Result<Section> {
        check_dim(self.dim, other.dim)?;
        let mut out = Section::new(self.dim);
        for (s, a) in &self.values {
            for (r, b) in &other.values {
                out.accumulate(s.mul(r), &(a * b))?;
            }
        }
        Ok(out)
    }

    /// `f*(t) = f(t⁻¹)*`.
    pub fn star(&self) -> Section {
        Section {
            dim: self.dim,
            values: self.values.iter().map(|(w, v)| (w.inverse(), v.adjoint())).collect(),
        }
    }

    /// `Σ_t ‖f(t)‖`.
    pub fn l1_norm(&self) -> f64 {
        self.values.values().map(Operator::spectral_norm).sum()
    }

    /// The unit-fiber coefficient `f(ε)`.
    pub fn conditional_expectation(&self) -> Operator {
        self.values.get(&Word::identity()).cloned().unwrap_or_else(|| Operator::zero(self.dim))
    }

    /// `Σ_t f(t)*f(t)`.
    pub fn gram_sum(&self) -> Operator {
        self.values
            .values()
            .fold(Operator::zero(self.dim), |acc, v| &acc + &(&v.adjoint() * v))
    }

    /// `Σ_t f(t)`.
    pub fn value_sum(&self) -> Operator {
        self.values.values().fold(Operator::zero(self.dim), |acc, v| &acc + v)
    }

    /// Largest entrywise difference against `other` over the union of supports.
    pub fn max_abs_diff(&self, other: &Section) -> f64 {
        let zero = Operator::zero(self.dim);
        self.values
            .keys()
            .chain(other.values.keys())
            .map(|w| {
                let a = self.values.get(w).unwrap_or(&zero);
                let b = other.values.get(w).unwrap_or(&zero);
                (a - b).max_abs_entry()
            })
            .fold(0.0, f64::max)
    }
}
