//! Canonical representations used throughout the tests and the CLI.
//!
//! The tree and Cuntz–Krieger-style fixtures act on the span of basis
//! vectors `e_w`, one per admissible positive word `w` of length at most the
//! truncation depth, ordered by length and then lexicographically. Each
//! generator acts by prepending: `σ(x)·e_w = e_{x·w}` when the result is still
//! admissible and short enough, and `0` otherwise.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{input, Error, Result};
use crate::freegroup::{GeneratorSet, Word};
use crate::linop::{Operator, C64};
use crate::prep::GeneratorFamily;

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DIM_CAP_ENV: &str = "FELL_DIM_CAP";

/// The dimension cap, honouring `FELL_DIM_CAP` when set to a positive integer.
pub fn dim_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_DIM_CAP)
}

/// A full word → operator assignment, for assignments that are not generated
/// by products of generator images.
#[derive(Debug, Clone)]
pub struct WordTable {
    pub gens: GeneratorSet,
    pub dim: usize,
    pub table: BTreeMap<Word, Operator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Tree,
    Ck,
    Parity,
    Delta,
    Random,
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    /// Generator count (tree, random).
    pub m: usize,
    /// Truncation depth; for parity/delta the longest tabulated word.
    pub depth: usize,
    /// Transition matrix (ck only).
    pub matrix: Option<Vec<Vec<u8>>>,
    pub seed: u64,
    /// Hilbert dimension (random only).
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub enum Fixture {
    Family(GeneratorFamily),
    Table(WordTable),
}

impl FixtureSpec {
    pub fn build(&self, cap: usize) -> Result<Fixture> {
        if self.m == 0 {
            return Err(input("generator count must be at least 1"));
        }
        match self.kind {
            FixtureKind::Tree => tree_rep_capped(self.m, self.depth, cap).map(Fixture::Family),
            FixtureKind::Ck => {
                let a = self.matrix.as_ref().ok_or_else(|| input("ck fixture needs a matrix"))?;
                ck_rep_capped(a, self.depth, cap).map(Fixture::Family)
            }
            FixtureKind::Parity => Ok(Fixture::Table(parity_rep(self.depth))),
            FixtureKind::Delta => Ok(Fixture::Table(delta_rep(self.depth))),
            FixtureKind::Random => {
                if self.dim == 0 {
                    return Err(input("random fixture needs dim >= 1"));
                }
                if self.dim > cap {
                    return Err(Error::Resource(format!("dimension {} exceeds cap {cap}", self.dim)));
                }
                Ok(Fixture::Family(random_family(self.dim, self.m, self.seed)))
            }
        }
    }
}

/// Prepend-shift family on the given ordered basis of positive words.
fn shift_family(gens: GeneratorSet, basis: &[Word], admissible: impl Fn(usize, &Word) -> bool) -> GeneratorFamily {
    let dim = basis.len();
    let index: HashMap<&Word, usize> = basis.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let images = (0..gens.len())
        .map(|g| {
            let entries = basis.iter().enumerate().filter_map(|(col, w)| {
                if !admissible(g, w) {
                    return None;
                }
                let target = Word::generator(g).mul(w);
                index.get(&target).map(|&row| (row, col, C64::new(1.0, 0.0)))
            });
            Operator::from_entries(dim, entries).expect("basis indices in range")
        })
        .collect();
    GeneratorFamily::new(gens, images).expect("images share the basis dimension")
}

fn tree_dim(m: usize, depth: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..=depth {
        total = total.checked_add(level)?;
        level = level.checked_mul(m)?;
    }
    Some(total)
}

/// Truncated Fock-space shifts on `m` generators, basis `W_{≤ depth}`.
pub fn tree_rep(m: usize, depth: usize) -> Result<GeneratorFamily> {
    tree_rep_capped(m, depth, dim_cap())
}

pub fn tree_rep_capped(m: usize, depth: usize, cap: usize) -> Result<GeneratorFamily> {
    if m == 0 || depth == 0 {
        return Err(input("tree fixture needs m >= 1 and depth >= 1"));
    }
    let dim = tree_dim(m, depth).filter(|&d| d <= cap).ok_or_else(|| {
        Error::Resource(format!("tree({m}, {depth}) exceeds the dimension cap {cap}"))
    })?;
    let gens = GeneratorSet::standard(m);
    let basis = gens.positive_words_up_to(depth);
    debug_assert_eq!(basis.len(), dim);
    Ok(shift_family(gens, &basis, |_, w| w.len() < depth))
}

fn validate_transition_matrix(a: &[Vec<u8>]) -> Result<usize> {
    let m = a.len();
    if m == 0 {
        return Err(input("transition matrix is empty"));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != m {
            return Err(input("transition matrix must be square"));
        }
        if row.iter().any(|&v| v > 1) {
            return Err(input("transition matrix entries must be 0 or 1"));
        }
        if row.iter().all(|&v| v == 0) {
            return Err(input(format!("transition matrix row {i} is zero")));
        }
    }
    Ok(m)
}

/// Admissible words `x_{i₁}⋯x_{i_k}` with `A(i_j, i_{j+1}) = 1`, plus the root,
/// up to length `depth`. Prepending `x_i` to `w` is allowed when `w` is empty
/// or `A(i, head(w)) = 1`.
pub fn ck_rep(a: &[Vec<u8>], depth: usize) -> Result<GeneratorFamily> {
    ck_rep_capped(a, depth, dim_cap())
}

pub fn ck_rep_capped(a: &[Vec<u8>], depth: usize, cap: usize) -> Result<GeneratorFamily> {
    let m = validate_transition_matrix(a)?;
    if depth == 0 {
        return Err(input("ck fixture needs depth >= 1"));
    }
    let allowed = |g: usize, w: &Word| w.letters().first().is_none_or(|h| a[g][h.generator] == 1);
    let gens = GeneratorSet::standard(m);
    let mut basis = vec![Word::identity()];
    let mut frontier = vec![Word::identity()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &frontier {
            for g in 0..m {
                // Extend on the right so each level comes out in lexicographic order.
                let ok = w.letters().last().is_none_or(|t| a[t.generator][g] == 1);
                if ok {
                    next.push(w.mul(&Word::generator(g)));
                }
            }
        }
        if basis.len() + next.len() > cap {
            return Err(Error::Resource(format!("ck fixture exceeds the dimension cap {cap}")));
        }
        basis.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(shift_family(gens, &basis, |g, w| w.len() < depth && allowed(g, w)))
}

fn scalar_table(max_len: usize, value: impl Fn(&Word) -> f64) -> WordTable {
    let gens = GeneratorSet::standard(2);
    let table = gens
        .reduced_words_up_to(max_len.max(1))
        .into_iter()
        .map(|w| {
            let v = value(&w);
            (w, Operator::scalar(1, C64::new(v, 0.0)))
        })
        .collect();
    WordTable { gens, dim: 1, table }
}

/// One-dimensional assignment `σ(t) = 1` for even `|t|`, `0` for odd,
/// tabulated on all reduced words up to `max_len` over `{x, y}`.
pub fn parity_rep(max_len: usize) -> WordTable {
    scalar_table(max_len, |w| if w.len() % 2 == 0 { 1.0 } else { 0.0 })
}

/// One-dimensional assignment `σ(t) = 1` iff `t = ε`.
pub fn delta_rep(max_len: usize) -> WordTable {
    scalar_table(max_len, |w| if w.is_identity() { 1.0 } else { 0.0 })
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-like unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    random_gaussian_matrix(dim, dim, rng).qr().q()
}

/// A random matrix with its singular values snapped to `{0, 1}`: the
/// largest `rank` become 1, the rest 0.
pub fn random_partial_isometry<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> Operator {
    let g = random_gaussian_matrix(dim, dim, rng);
    let svd = g.svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut snapped = DMatrix::<C64>::zeros(dim, dim);
    for &k in order.iter().take(rank) {
        snapped += u.column(k) * v_t.row(k);
    }
    Operator::from_dense(&snapped).expect("finite entries")
}

/// `m` random partial isometries on `C^dim`, deterministic in `seed`. Each
/// image has a uniformly chosen rank in `1..=dim`.
pub fn random_family(dim: usize, m: usize, seed: u64) -> GeneratorFamily {
    let mut rng = seeded_rng(seed);
    let images = (0..m)
        .map(|_| {
            let rank = rng.gen_range(1..=dim);
            random_partial_isometry(dim, rank, &mut rng)
        })
        .collect();
    GeneratorFamily::new(GeneratorSet::standard(m), images).expect("uniform dimension")
}

/// `I_n`, `J_n` (all ones), inline rows such as `"01;10"` or `"0,1;1,0"`.
pub fn parse_transition_matrix(text: &str) -> Result<Vec<Vec<u8>>> {
    let text = text.trim();
    let named = |prefix: char| {
        text.strip_prefix(prefix)
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n > 0)
    };
    if let Some(n) = named('I') {
        return Ok((0..n).map(|i| (0..n).map(|j| u8::from(i == j)).collect()).collect());
    }
    if let Some(n) = named('J') {
        return Ok(vec![vec![1; n]; n]);
    }
    if text.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| Error::Parse(format!("transition matrix: {e}")));
    }
    text.split(';')
        .map(|row| {
            let cells: Vec<&str> = if row.contains(',') {
                row.split(',').map(str::trim).collect()
            } else {
                row.trim().split("").filter(|c| !c.is_empty()).collect()
            };
            cells
                .into_iter()
                .map(|c| match c {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::Parse(format!("bad transition matrix entry {other:?}"))),
                })
                .collect()
        })
        .collect()
}
