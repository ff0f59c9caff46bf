//! Complex square operators on `C^dim` and the partial-isometry predicates
//! built on them.
//!
//! Storage is row-compressed: each row keeps its nonzero entries sorted by
//! column. Exact zeros produced by arithmetic are dropped, so the 0/1
//! shift operators of the tree fixtures stay exactly sparse through long
//! product chains. [`Operator::spectral_norm`] splits the matrix into the
//! connected blocks of its row/column incidence graph and takes the largest
//! singular value of each block, which is exact for block-diagonal structure
//! and reduces to a single dense SVD otherwise.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_dim, input, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Absolute/relative tolerance pair. The effective bound for a residual is
/// `atol + rtol · scale`, with `scale` chosen by each predicate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { atol: 1e-10, rtol: 1e-12 }
    }
}

impl Tolerance {
    pub fn new(atol: f64, rtol: f64) -> Result<Self> {
        if !(atol >= 0.0 && rtol >= 0.0) || !atol.is_finite() || !rtol.is_finite() {
            return Err(input("tolerances must be finite and nonnegative"));
        }
        if atol == 0.0 && rtol == 0.0 {
            return Err(input("atol and rtol cannot both be zero"));
        }
        Ok(Self { atol, rtol })
    }

    pub fn absolute(atol: f64) -> Self {
        Self { atol, rtol: 0.0 }
    }

    pub fn bound(&self, scale: f64) -> f64 {
        self.atol + self.rtol * scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl Operator {
    pub fn zero(dim: usize) -> Self {
        Self { dim, rows: vec![Vec::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, ONE)
    }

    pub fn scalar(dim: usize, value: C64) -> Self {
        if value == ZERO {
            return Self::zero(dim);
        }
        Self { dim, rows: (0..dim).map(|i| vec![(i, value)]).collect() }
    }

    pub fn diagonal<I: IntoIterator<Item = C64>>(values: I) -> Self {
        let values: Vec<C64> = values.into_iter().collect();
        let dim = values.len();
        Self::from_entries(dim, values.into_iter().enumerate().map(|(i, v)| (i, i, v)))
            .expect("diagonal entries are in range")
    }

    pub fn real_diagonal(values: &[f64]) -> Self {
        Self::diagonal(values.iter().map(|&v| C64::new(v, 0.0)))
    }

    /// `E_{ij}`, the matrix unit sending basis vector `j` to basis vector `i`.
    pub fn matrix_unit(dim: usize, i: usize, j: usize) -> Self {
        Self::from_entries(dim, [(i, j, ONE)]).expect("matrix unit index in range")
    }

    /// Builds from `(row, col, value)` triples; repeated positions are summed.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (i, j, v) in entries {
            if i >= dim || j >= dim {
                return Err(input(format!("entry ({i}, {j}) outside a {dim}x{dim} operator")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(input(format!("non-finite entry at ({i}, {j})")));
            }
            rows[i].push((j, v));
        }
        for row in &mut rows {
            compress(row);
        }
        Ok(Self { dim, rows })
    }

    /// Row-major dense input.
    pub fn from_row_major(dim: usize, values: &[C64]) -> Result<Self> {
        check_dim(dim * dim, values.len())?;
        Self::from_entries(
            dim,
            values.iter().enumerate().map(|(k, &v)| (k / dim, k % dim, v)),
        )
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let entries = rows.iter().enumerate().flat_map(|(i, r)| {
            assert_eq!(r.len(), dim, "square input expected");
            r.iter().enumerate().map(move |(j, &v)| (i, j, C64::new(v, 0.0)))
        });
        Self::from_entries(dim, entries).expect("finite real entries")
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(input("operator must be square"));
        }
        let dim = m.nrows();
        Self::from_entries(
            dim,
            (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j, m[(i, j)]))),
        )
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// Dense row-major copy.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim * self.dim];
        for (i, j, v) in self.entries() {
            out[i * self.dim + j] = v;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(ZERO, |k| self.rows[i][k].1)
    }

    pub fn row(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn adjoint(&self) -> Operator {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for (i, j, v) in self.entries() {
            rows[j].push((i, v.conj()));
        }
        // Row-major traversal already yields sorted columns.
        Operator { dim: self.dim, rows }
    }

    pub fn scale(&self, factor: C64) -> Operator {
        if factor == ZERO {
            return Operator::zero(self.dim);
        }
        self.map_entries(|v| v * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Operator {
        self.scale(C64::new(factor, 0.0))
    }

    fn map_entries(&self, f: impl Fn(C64) -> C64) -> Operator {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| (j, f(v))).filter(|&(_, v)| v != ZERO).collect())
            .collect();
        Operator { dim: self.dim, rows }
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim, other.dim)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Operator) -> Operator {
        let mut rows = Vec::with_capacity(self.dim);
        let mut scratch: Vec<(usize, C64)> = Vec::new();
        for row in &self.rows {
            scratch.clear();
            for &(k, a) in row {
                scratch.extend(other.rows[k].iter().map(|&(j, b)| (j, a * b)));
            }
            let mut out = scratch.clone();
            compress(&mut out);
            rows.push(out);
        }
        Operator { dim: self.dim, rows }
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim, other.dim)?;
        Ok(self.combine(other, ONE))
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim, other.dim)?;
        Ok(self.combine(other, -ONE))
    }

    /// `self + factor · other`
    pub fn axpy(&self, factor: C64, other: &Operator) -> Operator {
        assert_eq!(self.dim, other.dim, "dimension mismatch in axpy");
        self.combine(other, factor)
    }

    fn combine(&self, other: &Operator, factor: C64) -> Operator {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| merge_rows(a, b, factor))
            .collect();
        Operator { dim: self.dim, rows }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Hilbert–Schmidt inner product `trace(self* · other)`.
    pub fn hs_inner(&self, other: &Operator) -> C64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in hs_inner");
        let mut acc = ZERO;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            let (mut p, mut q) = (0, 0);
            while p < a.len() && q < b.len() {
                match a[p].0.cmp(&b[q].0) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        acc += a[p].1.conj() * b[q].1;
                        p += 1;
                        q += 1;
                    }
                }
            }
        }
        acc
    }

    /// Frobenius (Hilbert–Schmidt) norm.
    pub fn hs_norm(&self) -> f64 {
        self.entries().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        block_spectral_norm(self.dim, self.dim, self.entries())
    }

    /// Column `j` as a dense vector.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, j)).collect()
    }

    /// Positive-semidefinite test via the smallest eigenvalue of the
    /// Hermitian part; `tol` bounds both the anti-Hermitian part and the
    /// negative spectrum.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        if self.try_sub(&self.adjoint()).map_or(f64::INFINITY, |d| d.spectral_norm()) > tol {
            return false;
        }
        if self.dim == 0 {
            return true;
        }
        let eig = nalgebra::SymmetricEigen::new(self.to_dense());
        eig.eigenvalues.iter().all(|&l| l >= -tol)
    }

    /// Quantized entries; equal keys identify operators that agree to ~1e-9.
    pub fn fingerprint(&self) -> Vec<(u32, u32, i64, i64)> {
        const GRID: f64 = 1e9;
        self.entries()
            .filter_map(|(i, j, v)| {
                let re = (v.re * GRID).round() as i64;
                let im = (v.im * GRID).round() as i64;
                (re != 0 || im != 0).then_some((i as u32, j as u32, re, im))
            })
            .collect()
    }
}

fn compress(row: &mut Vec<(usize, C64)>) {
    row.sort_unstable_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, C64)> = Vec::with_capacity(row.len());
    for &(j, v) in row.iter() {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|&(_, v)| v != ZERO);
    *row = out;
}

fn merge_rows(a: &[(usize, C64)], b: &[(usize, C64)], factor: C64) -> Vec<(usize, C64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut p, mut q) = (0, 0);
    while p < a.len() || q < b.len() {
        let take_a = q >= b.len() || (p < a.len() && a[p].0 < b[q].0);
        let take_b = p >= a.len() || (q < b.len() && b[q].0 < a[p].0);
        let (j, v) = if take_a {
            p += 1;
            a[p - 1]
        } else if take_b {
            q += 1;
            (b[q - 1].0, factor * b[q - 1].1)
        } else {
            p += 1;
            q += 1;
            (a[p - 1].0, a[p - 1].1 + factor * b[q - 1].1)
        };
        if v != ZERO {
            out.push((j, v));
        }
    }
    out
}

/// Spectral norm of an `nrows × ncols` matrix given by its nonzero entries.
///
/// Rows and columns are grouped into connected components of the bipartite
/// incidence graph; the norm is the maximum over the components.
pub fn block_spectral_norm<I>(nrows: usize, ncols: usize, entries: I) -> f64
where
    I: IntoIterator<Item = (usize, usize, C64)>,
{
    let entries: Vec<(usize, usize, C64)> =
        entries.into_iter().filter(|&(_, _, v)| v != ZERO).collect();
    if entries.is_empty() {
        return 0.0;
    }
    let mut parent: Vec<usize> = (0..nrows + ncols).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j, _) in &entries {
        let (a, b) = (find(&mut parent, i), find(&mut parent, nrows + j));
        if a != b {
            parent[a] = b;
        }
    }
    let mut blocks: HashMap<usize, Vec<(usize, usize, C64)>> = HashMap::new();
    for &(i, j, v) in &entries {
        let root = find(&mut parent, i);
        blocks.entry(root).or_default().push((i, j, v));
    }
    let mut best = 0.0f64;
    for block in blocks.values() {
        let norm = if block.len() == 1 {
            block[0].2.norm()
        } else {
            dense_block_norm(block)
        };
        best = best.max(norm);
    }
    best
}

fn dense_block_norm(block: &[(usize, usize, C64)]) -> f64 {
    let mut row_ids: Vec<usize> = block.iter().map(|e| e.0).collect();
    let mut col_ids: Vec<usize> = block.iter().map(|e| e.1).collect();
    row_ids.sort_unstable();
    row_ids.dedup();
    col_ids.sort_unstable();
    col_ids.dedup();
    let mut m = DMatrix::<C64>::zeros(row_ids.len(), col_ids.len());
    for &(i, j, v) in block {
        let r = row_ids.binary_search(&i).expect("row in block");
        let c = col_ids.binary_search(&j).expect("col in block");
        m[(r, c)] += v;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("dimension mismatch in operator addition")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.try_sub(rhs).expect("dimension mismatch in operator subtraction")
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.try_mul(rhs).expect("dimension mismatch in operator product")
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale_real(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE)
    }
}

/// `‖A² − A‖ ≤ tol` and `‖A − A*‖ ≤ tol`, with `tol = atol + rtol·‖A‖`.
pub fn is_projection(a: &Operator, tol: Tolerance) -> bool {
    projection_residual(a) <= tol.bound(a.spectral_norm())
}

/// `max(‖A² − A‖, ‖A − A*‖)`.
pub fn projection_residual(a: &Operator) -> f64 {
    let idem = (&(a * a) - a).spectral_norm();
    let herm = (a - &a.adjoint()).spectral_norm();
    idem.max(herm)
}

/// `‖AA*A − A‖`.
pub fn partial_isometry_residual(a: &Operator) -> f64 {
    (&(&(a * &a.adjoint()) * a) - a).spectral_norm()
}

/// `‖AA*A − A‖ ≤ atol + rtol·‖A‖`.
pub fn is_partial_isometry(a: &Operator, tol: Tolerance) -> bool {
    partial_isometry_residual(a) <= tol.bound(a.spectral_norm())
}

/// `‖AB − BA‖`.
pub fn commutator_norm(a: &Operator, b: &Operator) -> Result<f64> {
    let ab = a.try_mul(b)?;
    let ba = b.try_mul(a)?;
    Ok((&ab - &ba).spectral_norm())
}

/// `‖AB − BA‖ ≤ atol + rtol·‖A‖‖B‖`.
pub fn commute(a: &Operator, b: &Operator, tol: Tolerance) -> Result<bool> {
    let residual = commutator_norm(a, b)?;
    Ok(residual <= tol.bound(a.spectral_norm() * b.spectral_norm()))
}

/// Outcome of checking that a contractive idempotent is self-adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdempotentVerdict {
    SelfAdjoint,
    NotIdempotent,
    NotContraction,
    /// Both hypotheses hold but `‖p − p*‖` exceeds the tolerance.
    Counterexample,
}

/// A contractive idempotent must be self-adjoint. Returns which hypothesis
/// failed, or whether the conclusion held.
pub fn idempotent_contraction_selfadjoint_check(p: &Operator, tol: Tolerance) -> IdempotentVerdict {
    let norm = p.spectral_norm();
    let bound = tol.bound(norm);
    if (&(p * p) - p).spectral_norm() > bound {
        return IdempotentVerdict::NotIdempotent;
    }
    if norm > 1.0 + bound {
        return IdempotentVerdict::NotContraction;
    }
    if (p - &p.adjoint()).spectral_norm() <= bound {
        IdempotentVerdict::SelfAdjoint
    } else {
        IdempotentVerdict::Counterexample
    }
}

/// For partial isometries `u`, `v`: (is `uv` a partial isometry, do `u*u`
/// and `vv*` commute). The two answers coincide.
pub fn product_partial_isometry_criterion(
    u: &Operator,
    v: &Operator,
    tol: Tolerance,
) -> Result<(bool, bool)> {
    check_dim(u.dim(), v.dim())?;
    if !is_partial_isometry(u, tol) {
        return Err(input("u is not a partial isometry"));
    }
    if !is_partial_isometry(v, tol) {
        return Err(input("v is not a partial isometry"));
    }
    let lhs = is_partial_isometry(&(u * v), tol);
    let rhs = commute(&(&u.adjoint() * u), &(v * &v.adjoint()), tol)?;
    Ok((lhs, rhs))
}
