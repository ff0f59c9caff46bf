//! Fibers `B_t` of the bundle generated by a partial representation, as
//! Hilbert–Schmidt-orthonormal operator bases, plus the ternary-ring
//! predicates and the bundle axioms.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::Result;
use crate::freegroup::Word;
use crate::linop::{projection_residual, Operator, Tolerance, C64};
use crate::prep::PartialRep;
use crate::report::CheckSummary;

/// Residual HS norm above which a candidate counts as a new direction.
pub const GS_THRESHOLD: f64 = 1e-8;

/// Span of operators, kept as an HS-orthonormal basis.
#[derive(Debug, Clone)]
pub struct OperatorSpan {
    dim: usize,
    basis: Vec<Operator>,
}

impl OperatorSpan {
    pub fn new(dim: usize) -> Self {
        Self { dim, basis: Vec::new() }
    }

    pub fn from_generators<'a, I: IntoIterator<Item = &'a Operator>>(dim: usize, items: I) -> Self {
        let mut span = Self::new(dim);
        for item in items {
            span.try_add(item);
        }
        span
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Operator] {
        &self.basis
    }

    /// Component of `x` orthogonal to the span (projected twice).
    pub fn residual(&self, x: &Operator) -> Operator {
        let mut r = x.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.hs_inner(&r);
                if c != C64::new(0.0, 0.0) {
                    r = r.axpy(-c, b);
                }
            }
        }
        r
    }

    pub fn distance(&self, x: &Operator) -> f64 {
        self.residual(x).hs_norm()
    }

    /// Adds `x` if its residual exceeds [`GS_THRESHOLD`]; returns the residual norm.
    pub fn try_add(&mut self, x: &Operator) -> (bool, f64) {
        let r = self.residual(x);
        let norm = r.hs_norm();
        if norm > GS_THRESHOLD {
            self.basis.push(r.scale_real(1.0 / norm));
            (true, norm)
        } else {
            (false, norm)
        }
    }

    /// Largest distance of `other`'s basis from `self`.
    pub fn containment_residual(&self, other: &OperatorSpan) -> f64 {
        other.basis.iter().map(|b| self.distance(b)).fold(0.0, f64::max)
    }
}

/// Orthonormal basis of a fiber `B_t`.
#[derive(Debug, Clone)]
pub struct FiberBasis {
    pub word: Word,
    pub span: OperatorSpan,
    /// No product with a range projection one word longer than `r_depth`
    /// leaves the span.
    pub stabilized: bool,
    /// Largest residual among candidates judged to lie in the span.
    pub residual_max: f64,
    pub r_depth: usize,
}

impl FiberBasis {
    pub fn rank(&self) -> usize {
        self.span.rank()
    }

    pub fn basis(&self) -> &[Operator] {
        self.span.basis()
    }

    pub fn dim(&self) -> usize {
        self.span.dim
    }

    pub fn report(&self, rep: &PartialRep) -> FiberReport {
        FiberReport {
            word: rep.word_label(&self.word),
            rank: self.rank(),
            stabilized: self.stabilized,
            residual_max: self.residual_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberReport {
    pub word: String,
    pub rank: usize,
    pub stabilized: bool,
    pub residual_max: f64,
}

pub fn default_r_depth(t: &Word) -> usize {
    2 * t.len() + 2
}

/// Distinct nonzero `e(r)`, `r ≠ ε`, for reduced `r` with `min_len ≤ |r| ≤ max_len`.
fn range_projections(rep: &PartialRep, min_len: usize, max_len: usize) -> Result<Vec<Operator>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut frontier = vec![Word::identity()];
    for len in 1..=max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for letter in rep.generators().letters() {
                let r = w.push(letter);
                if r.len() != len {
                    continue;
                }
                let sigma = rep.evaluate(&r)?;
                // A generated rep multiplies along reduced words, so a zero
                // prefix kills every extension.
                if sigma.is_zero() && rep.is_generated() {
                    continue;
                }
                if len >= min_len {
                    let e = &*sigma * &sigma.adjoint();
                    if !e.is_zero() && seen.insert(e.fingerprint()) {
                        out.push(e);
                    }
                }
                next.push(r);
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// Extra levels [`fiber_auto`] may add beyond the default depth.
pub const MAX_EXTRA_DEPTH: usize = 8;

/// Fiber at the default depth `2|t| + 2`, deepened one level at a time
/// until the stabilization certificate holds or [`MAX_EXTRA_DEPTH`] levels
/// have been added. Table reps stop at the longest tabulated word.
pub fn fiber_auto(rep: &PartialRep, t: &Word) -> Result<FiberBasis> {
    let start = default_r_depth(t);
    let mut limit = start + MAX_EXTRA_DEPTH;
    if let Some(max) = rep.table_max_len() {
        // The certificate looks one level deeper than the fiber.
        limit = limit.min(max.saturating_sub(1));
    }
    let mut r_depth = start.min(limit);
    loop {
        let f = fiber(rep, t, r_depth)?;
        if f.stabilized || r_depth >= limit {
            return Ok(f);
        }
        r_depth += 1;
    }
}

/// Minimal projections of the algebra generated by commuting projections,
/// found by splitting each atom `p` into `pe` and `p − pe`. `None` when the
/// result is not a family of projections that every `e` fixes or kills,
/// which happens exactly when the projections fail to commute.
fn atoms(dim: usize, projections: &[Operator]) -> Option<Vec<Operator>> {
    let mut atoms = vec![Operator::identity(dim)];
    for e in projections {
        let mut next = Vec::with_capacity(atoms.len() + 1);
        for p in atoms {
            let pe = &p * e;
            let rest = &p - &pe;
            if pe.hs_norm() <= GS_THRESHOLD || rest.hs_norm() <= GS_THRESHOLD {
                next.push(p);
            } else if projection_residual(&pe) <= GS_THRESHOLD {
                next.push(pe);
                next.push(rest);
            } else {
                return None;
            }
        }
        // Orthogonal nonzero projections number at most `dim`.
        if next.len() > dim {
            return None;
        }
        atoms = next;
    }
    let fixed_or_killed = |p: &Operator, e: &Operator| {
        let pe = p * e;
        pe.hs_norm() <= GS_THRESHOLD || (&pe - p).hs_norm() <= GS_THRESHOLD
    };
    let certified = atoms.iter().all(|p| projection_residual(p) <= GS_THRESHOLD)
        && projections.iter().all(|e| atoms.iter().all(|p| fixed_or_killed(p, e)));
    certified.then_some(atoms)
}

/// `span{ e(r₁)⋯e(r_k) σ(t) : k ≥ 0, |r_i| ≤ r_depth }`.
///
/// When the range projections commute this is `span{ p σ(t) }` over the
/// atoms `p` of the algebra they generate; otherwise the span is closed
/// under left multiplication by Gram–Schmidt.
pub fn fiber(rep: &PartialRep, t: &Word, r_depth: usize) -> Result<FiberBasis> {
    let sigma = rep.evaluate(t)?;
    let mut span = OperatorSpan::new(rep.dim());
    let mut residual_max: f64 = 0.0;
    if sigma.is_zero() {
        return Ok(FiberBasis { word: t.clone(), span, stabilized: true, residual_max, r_depth });
    }
    let projections = range_projections(rep, 1, r_depth)?;
    match atoms(rep.dim(), &projections) {
        Some(atoms) => {
            for p in &atoms {
                let (added, r) = span.try_add(&(p * &*sigma));
                if !added {
                    residual_max = residual_max.max(r);
                }
            }
        }
        None => {
            span.try_add(&sigma);
            let mut frontier = 0;
            // The span is closed once every basis element has been
            // multiplied by every projection.
            while frontier < span.rank() {
                let b = span.basis[frontier].clone();
                frontier += 1;
                for e in &projections {
                    let (added, r) = span.try_add(&(e * &b));
                    if !added {
                        residual_max = residual_max.max(r);
                    }
                }
            }
        }
    }
    let longer = range_projections(rep, r_depth + 1, r_depth + 1)?;
    let mut stabilized = true;
    'cert: for e in &longer {
        for b in span.basis() {
            let r = span.distance(&(e * b));
            if r > GS_THRESHOLD {
                stabilized = false;
                break 'cert;
            }
            residual_max = residual_max.max(r);
        }
    }
    Ok(FiberBasis { word: t.clone(), span, stabilized, residual_max, r_depth })
}

/// Memo of fibers for one rep, with either a fixed `r_depth` or
/// [`fiber_auto`] per word.
pub struct FiberCache<'r> {
    rep: &'r PartialRep,
    r_depth: Option<usize>,
    fibers: HashMap<Word, FiberBasis>,
}

impl<'r> FiberCache<'r> {
    pub fn new(rep: &'r PartialRep, r_depth: Option<usize>) -> Self {
        Self { rep, r_depth, fibers: HashMap::new() }
    }

    pub fn get(&mut self, t: &Word) -> Result<&FiberBasis> {
        if !self.fibers.contains_key(t) {
            let f = match self.r_depth {
                Some(depth) => fiber(self.rep, t, depth)?,
                None => fiber_auto(self.rep, t)?,
            };
            self.fibers.insert(t.clone(), f);
        }
        Ok(&self.fibers[t])
    }

    /// Words whose fiber failed the stabilization certificate, if any.
    pub fn unstabilized_note(&self) -> Option<String> {
        let mut words: Vec<&Word> = self.fibers.values().filter(|f| !f.stabilized).map(|f| &f.word).collect();
        if words.is_empty() {
            return None;
        }
        words.sort();
        let labels: Vec<String> = words.iter().map(|w| self.rep.word_label(w)).collect();
        Some(format!("fibers not stabilized at r_depth {}: {}", self.r_depth.map_or("default".into(), |d| d.to_string()), labels.join(", ")))
    }
}

/// One truncation depth for every fiber a check compares, so that the
/// computed subspaces are comparable: the default for the longest word.
fn shared_r_depth<'w>(words: impl Iterator<Item = &'w Word>, r_depth: Option<usize>) -> usize {
    r_depth.unwrap_or_else(|| 2 * words.map(Word::len).max().unwrap_or(0) + 2)
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleAxiomReport {
    /// `B_t B_s ⊆ B_{ts}`
    pub products: CheckSummary,
    /// `B_t* ⊆ B_{t⁻¹}`
    pub adjoints: CheckSummary,
}

impl BundleAxiomReport {
    pub fn passed(&self) -> bool {
        self.products.passed() && self.adjoints.passed()
    }
}

fn pair_label(rep: &PartialRep, t: &Word, s: &Word) -> String {
    format!("({},{})", rep.word_label(t), rep.word_label(s))
}

pub fn check_bundle_axioms(
    rep: &PartialRep,
    words: &[Word],
    r_depth: Option<usize>,
    tol: Tolerance,
) -> Result<BundleAxiomReport> {
    let mut cache = FiberCache::new(rep, Some(shared_r_depth(words.iter(), r_depth)));
    let mut products = CheckSummary::new("bundle products");
    let mut adjoints = CheckSummary::new("bundle adjoints");
    for t in words {
        let bt = cache.get(t)?.basis().to_vec();
        let bt_inv = cache.get(&t.inverse())?.span.clone();
        for b in &bt {
            adjoints.record(bt_inv.distance(&b.adjoint()), tol.bound(1.0), || rep.word_label(t));
        }
        for s in words {
            let bs = cache.get(s)?.basis().to_vec();
            let target = cache.get(&t.mul(s))?.span.clone();
            for x in &bt {
                for y in &bs {
                    let p = x * y;
                    let bound = tol.bound(p.hs_norm());
                    products.record(target.distance(&p), bound, || pair_label(rep, t, s));
                }
            }
        }
    }
    if let Some(note) = cache.unstabilized_note() {
        products.note = Some(note.clone());
        adjoints.note = Some(note);
    }
    Ok(BundleAxiomReport { products, adjoints })
}

/// `span(B_t·B_s) = B_{ts}` for length-additive pairs.
pub fn check_bundle_semisaturated(
    rep: &PartialRep,
    pairs: &[(Word, Word)],
    r_depth: Option<usize>,
    tol: Tolerance,
) -> Result<CheckSummary> {
    let words = pairs.iter().flat_map(|(t, s)| [t, s]);
    let mut cache = FiberCache::new(rep, Some(shared_r_depth(words, r_depth)));
    let mut check = CheckSummary::new("bundle semi-saturated");
    for (t, s) in pairs {
        if !t.lengths_add(s) {
            continue;
        }
        let bt = cache.get(t)?.basis().to_vec();
        let bs = cache.get(s)?.basis().to_vec();
        let target = cache.get(&t.mul(s))?.span.clone();
        let products: Vec<Operator> = bt.iter().flat_map(|x| bs.iter().map(move |y| x * y)).collect();
        let spanned = OperatorSpan::from_generators(rep.dim(), &products);
        let forward = target.containment_residual(&spanned);
        let backward = spanned.containment_residual(&target);
        check.record(forward.max(backward), tol.bound(1.0), || pair_label(rep, t, s));
    }
    check.note = cache.unstabilized_note();
    Ok(check)
}

/// `B_x* B_y = 0` for distinct generators.
pub fn check_bundle_orthogonal(rep: &PartialRep, r_depth: Option<usize>, tol: Tolerance) -> Result<CheckSummary> {
    let mut cache = FiberCache::new(rep, Some(r_depth.unwrap_or(default_r_depth(&Word::generator(0)))));
    let mut check = CheckSummary::new("bundle orthogonal");
    let m = rep.generators().len();
    for x in 0..m {
        for y in 0..m {
            if x == y {
                continue;
            }
            let (wx, wy) = (Word::generator(x), Word::generator(y));
            let bx = cache.get(&wx)?.basis().to_vec();
            let by = cache.get(&wy)?.basis().to_vec();
            for a in &bx {
                for b in &by {
                    check.record((&a.adjoint() * b).hs_norm(), tol.bound(1.0), || pair_label(rep, &wx, &wy));
                }
            }
        }
    }
    check.note = cache.unstabilized_note();
    Ok(check)
}

/// Largest distance of a triple product `a b* c` from `span(E)`.
pub fn tro_residual(e: &FiberBasis) -> f64 {
    let basis = e.basis();
    let mut worst: f64 = 0.0;
    for a in basis {
        for b in basis {
            let ab = a * &b.adjoint();
            for c in basis {
                worst = worst.max(e.span.distance(&(&ab * c)));
            }
        }
    }
    worst
}

/// `E E* E ⊆ E`.
pub fn is_tro(e: &FiberBasis, tol: Tolerance) -> bool {
    tro_residual(e) <= tol.bound(1.0)
}

fn span_of<F: Fn(&Operator) -> Operator>(e: &FiberBasis, f: F) -> OperatorSpan {
    let items: Vec<Operator> = e.basis().iter().map(f).collect();
    OperatorSpan::from_generators(e.dim(), &items)
}

fn pair_span<F: Fn(&Operator, &Operator) -> Operator>(e: &FiberBasis, f: F) -> OperatorSpan {
    let basis = e.basis();
    let items: Vec<Operator> = basis.iter().flat_map(|a| basis.iter().map(|b| f(a, b))).collect();
    OperatorSpan::from_generators(e.dim(), &items)
}

fn span_equality_residual(a: &OperatorSpan, b: &OperatorSpan) -> f64 {
    a.containment_residual(b).max(b.containment_residual(a))
}

/// Residual of `span(u*E) = span(E*E)` and `span(uE*) = span(EE*)`.
pub fn tro_association_residual(u: &Operator, e: &FiberBasis) -> f64 {
    let u_adj = u.adjoint();
    let left = span_of(e, |b| &u_adj * b);
    let e_star_e = pair_span(e, |a, b| &a.adjoint() * b);
    let right = span_of(e, |b| u * &b.adjoint());
    let e_e_star = pair_span(e, |a, b| a * &b.adjoint());
    span_equality_residual(&left, &e_star_e).max(span_equality_residual(&right, &e_e_star))
}

pub fn tro_associated(u: &Operator, e: &FiberBasis, tol: Tolerance) -> bool {
    tro_association_residual(u, e) <= tol.bound(1.0)
}

/// Column space of a set of operators, as an orthonormal set of vectors.
fn column_space<'a, I: IntoIterator<Item = &'a Operator>>(dim: usize, ops: I) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for op in ops {
        for j in 0..dim {
            let mut v = op.column(j);
            for _ in 0..2 {
                for b in &basis {
                    let c: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= c * bi;
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > GS_THRESHOLD {
                basis.push(v.into_iter().map(|z| z / norm).collect());
            }
        }
    }
    basis
}

fn vector_containment(space: &[Vec<C64>], vectors: &[Vec<C64>]) -> f64 {
    vectors
        .iter()
        .map(|v| {
            let mut r = v.clone();
            for _ in 0..2 {
                for b in space {
                    let c: C64 = b.iter().zip(&r).map(|(x, y)| x.conj() * y).sum();
                    for (ri, bi) in r.iter_mut().zip(b) {
                        *ri -= c * bi;
                    }
                }
            }
            r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// Association plus `range(uu*) = E·H`.
pub fn tro_strict_association_residual(u: &Operator, e: &FiberBasis) -> f64 {
    let dim = u.dim();
    let uu = u * &u.adjoint();
    let range_u = column_space(dim, [&uu]);
    let range_e = column_space(dim, e.basis());
    let strict = vector_containment(&range_u, &range_e).max(vector_containment(&range_e, &range_u));
    tro_association_residual(u, e).max(strict)
}

pub fn tro_strictly_associated(u: &Operator, e: &FiberBasis, tol: Tolerance) -> bool {
    tro_strict_association_residual(u, e) <= tol.bound(1.0)
}
