//! Range-projection families and the approximation maps.
//!
//! For an orthogonal semi-saturated partial representation `σ` this module
//! builds
//!
//! * `e(t) = σ(t)σ(t)*` and `f(t) = σ(t) Q₀ σ(t)*`,
//! * `P_k = Σ_{α∈W_k} e(α)`, `Q₀ = 1 − P₁`, `Q_k = Σ_{α∈W_k} f(α)`,
//! * the finitely supported maps `b_n` and `a_n` on the positive cone, and
//! * the averaging map `b ↦ Σ_r a(tr)* b a(r)` whose convergence to the
//!   identity on `σ(t)` is measured by [`convergence_study`].

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, input, Result};
use crate::freegroup::Word;
use crate::linop::{block_spectral_norm, projection_residual, Operator, Tolerance};
use crate::prep::PartialRep;
use crate::report::CheckSummary;
use crate::section::Section;

/// Memoized `e`, `f`, `P_k`, `Q_k` over a partial representation. `P_k` is
/// available for `k ≤ depth + 1` and `Q_k` for `k ≤ depth`.
pub struct ProjectionFamily<'r> {
    rep: &'r PartialRep,
    depth: usize,
    e_memo: RwLock<HashMap<Word, Arc<Operator>>>,
    f_memo: RwLock<HashMap<Word, Arc<Operator>>>,
    p_memo: Vec<OnceLock<Arc<Operator>>>,
    q_memo: Vec<OnceLock<Arc<Operator>>>,
}

impl<'r> ProjectionFamily<'r> {
    pub fn new(rep: &'r PartialRep, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(input("projection family depth must be at least 1"));
        }
        Ok(Self {
            rep,
            depth,
            e_memo: RwLock::new(HashMap::new()),
            f_memo: RwLock::new(HashMap::new()),
            p_memo: (0..=depth + 1).map(|_| OnceLock::new()).collect(),
            q_memo: (0..=depth).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn rep(&self) -> &'r PartialRep {
        self.rep
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.rep.dim()
    }

    fn memoized(
        memo: &RwLock<HashMap<Word, Arc<Operator>>>,
        t: &Word,
        compute: impl FnOnce() -> Result<Operator>,
    ) -> Result<Arc<Operator>> {
        if let Some(hit) = memo.read().expect("memo lock").get(t) {
            return Ok(Arc::clone(hit));
        }
        let value = compute()?;
        let mut guard = memo.write().expect("memo lock");
        Ok(Arc::clone(guard.entry(t.clone()).or_insert_with(|| Arc::new(value))))
    }

    /// `σ(t)`.
    pub fn sigma(&self, t: &Word) -> Result<Arc<Operator>> {
        self.rep.evaluate(t)
    }

    /// `e(t) = σ(t)σ(t)*`.
    pub fn e(&self, t: &Word) -> Result<Arc<Operator>> {
        Self::memoized(&self.e_memo, t, || self.rep.range_projection(t))
    }

    /// `f(t) = σ(t) Q₀ σ(t)*`.
    pub fn f(&self, t: &Word) -> Result<Arc<Operator>> {
        Self::memoized(&self.f_memo, t, || {
            let s = self.rep.evaluate(t)?;
            let q0 = self.q(0)?;
            Ok(&(&*s * &*q0) * &s.adjoint())
        })
    }

    /// `P_k = Σ_{α∈W_k} e(α)`; `P_0 = 1`.
    pub fn p(&self, k: usize) -> Result<Arc<Operator>> {
        let slot = self
            .p_memo
            .get(k)
            .ok_or_else(|| input(format!("P_{k} requested beyond depth {} + 1", self.depth)))?;
        if let Some(v) = slot.get() {
            return Ok(Arc::clone(v));
        }
        let mut acc = Operator::zero(self.dim());
        for alpha in self.rep.generators().enumerate_positive(k) {
            acc = &acc + &*self.e(&alpha)?;
        }
        Ok(Arc::clone(slot.get_or_init(|| Arc::new(acc))))
    }

    /// `Q₀ = 1 − P₁`, and `Q_k = Σ_{α∈W_k} f(α)` for `k ≥ 1`.
    pub fn q(&self, k: usize) -> Result<Arc<Operator>> {
        let slot = self
            .q_memo
            .get(k)
            .ok_or_else(|| input(format!("Q_{k} requested beyond depth {}", self.depth)))?;
        if let Some(v) = slot.get() {
            return Ok(Arc::clone(v));
        }
        let value = if k == 0 {
            &Operator::identity(self.dim()) - &*self.p(1)?
        } else {
            let mut acc = Operator::zero(self.dim());
            for alpha in self.rep.generators().enumerate_positive(k) {
                acc = &acc + &*self.f(&alpha)?;
            }
            acc
        };
        Ok(Arc::clone(slot.get_or_init(|| Arc::new(value))))
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.depth {
            return Err(input(format!("n = {n} outside 1..={}", self.depth)));
        }
        Ok(())
    }

    /// `b_n(α) = f(α)` for `|α| < n`, `e(α)` for `|α| = n`, absent beyond.
    pub fn b_map(&self, n: usize) -> Result<Section> {
        self.check_level(n)?;
        let mut out = Section::new(self.dim());
        for alpha in self.rep.generators().positive_words_up_to(n) {
            let value = if alpha.len() < n { self.f(&alpha)? } else { self.e(&alpha)? };
            out.insert(alpha, (*value).clone())?;
        }
        Ok(out)
    }

    /// `a_n(α) = ((1/n) Σ_{k=1}^n b_k(α))^{1/2}`, evaluated through the
    /// spectral decomposition into the orthogonal projections `f(α)` and
    /// `e(α) − f(α)`:
    ///
    /// `a_n(α) = ((n − |α| + 1)/n)^{1/2} f(α) + (1/n)^{1/2} (e(α) − f(α))`
    /// for `1 ≤ |α| ≤ n`, and `a_n(ε) = f(ε) = Q₀` since every `b_k(ε)` is
    /// `f(ε)`.
    pub fn a_map(&self, n: usize) -> Result<Section> {
        self.check_level(n)?;
        let mut out = Section::new(self.dim());
        let nf = n as f64;
        for alpha in self.rep.generators().positive_words_up_to(n) {
            let f = self.f(&alpha)?;
            let value = if alpha.is_identity() {
                (*f).clone()
            } else {
                let e = self.e(&alpha)?;
                let c_f = ((nf - alpha.len() as f64 + 1.0) / nf).sqrt();
                let c_rest = (1.0 / nf).sqrt();
                let rest = &*e - &*f;
                &(&*f * c_f) + &(&rest * c_rest)
            };
            out.insert(alpha, value)?;
        }
        Ok(out)
    }
}

/// `Ψ_a(b) = Σ_r a(t·r)* b a(r)` over the `r` with `r` and `t·r` both in
/// the support of `a`.
pub fn averaging_map(a: &Section, t: &Word, b: &Operator) -> Result<Operator> {
    check_dim(a.dim(), b.dim())?;
    let mut acc = Operator::zero(b.dim());
    for (_, term) in averaging_terms(a, t, b)? {
        acc = &acc + &term;
    }
    Ok(acc)
}

/// The individual summands of [`averaging_map`], keyed by `r`, in support order.
pub fn averaging_terms(a: &Section, t: &Word, b: &Operator) -> Result<Vec<(Word, Operator)>> {
    check_dim(a.dim(), b.dim())?;
    let mut out = Vec::new();
    for (r, a_r) in a.iter() {
        let tr = t.mul(r);
        if let Some(a_tr) = a.get(&tr) {
            out.push((r.clone(), &(&a_tr.adjoint() * b) * a_r));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub error: f64,
}

/// `error(n) = ‖σ(t) − Ψ_{a_n}(σ(t))‖` for each `n`.
///
/// Requires `t = μν⁻¹` with `μ`, `ν` positive and
/// `max(n) + max(|μ|, |ν|) ≤ depth`, so that every projection entering the
/// sums is represented without truncation artifacts.
pub fn convergence_study(
    pf: &ProjectionFamily<'_>,
    t: &Word,
    ns: &[usize],
) -> Result<Vec<ConvergencePoint>> {
    let (mu, nu) = t.pos_neg_decompose().ok_or_else(|| {
        input(format!(
            "sigma(t) = 0: t = {} is not of the form mu nu^-1 with mu, nu positive",
            pf.rep().word_label(t)
        ))
    })?;
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let offset = mu.len().max(nu.len());
    if n_max + offset > pf.depth() {
        return Err(input(format!(
            "n = {n_max} with max(|mu|, |nu|) = {offset} exceeds depth {}",
            pf.depth()
        )));
    }
    if ns.contains(&0) {
        return Err(input("n must be at least 1"));
    }
    let sigma = pf.sigma(t)?;
    ns.par_iter()
        .map(|&n| {
            let a = pf.a_map(n)?;
            let approx = averaging_map(&a, t, &sigma)?;
            Ok(ConvergencePoint { n, error: (&*sigma - &approx).spectral_norm() })
        })
        .collect()
}

/// `n,error` with 17 significant digits per error.
pub fn convergence_csv(points: &[ConvergencePoint]) -> String {
    let mut out = String::from("n,error\n");
    for p in points {
        out.push_str(&format!("{},{:.16e}\n", p.n, p.error));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnIsometry {
    /// `‖V‖` for the block column `V = [a(t₁); a(t₂); …]`.
    pub colnorm: f64,
    /// `‖Σ_t a(t)* a(t)‖^{1/2}`.
    pub sumnorm: f64,
}

impl ColumnIsometry {
    pub fn agrees(&self, tol: f64) -> bool {
        (self.colnorm - self.sumnorm).abs() <= tol
    }
}

/// Builds the block column with one block `a(t)` per support word and
/// compares its norm with `‖Σ a(t)*a(t)‖^{1/2}`.
pub fn column_isometry_check(a: &Section) -> Result<ColumnIsometry> {
    if a.is_empty() {
        return Err(input("column isometry needs a nonempty support"));
    }
    let dim = a.dim();
    let entries = a
        .iter()
        .enumerate()
        .flat_map(|(block, (_, op))| op.entries().map(move |(i, j, v)| (block * dim + i, j, v)))
        .collect::<Vec<_>>();
    let colnorm = block_spectral_norm(a.len() * dim, dim, entries);
    let sumnorm = a.gram_sum().spectral_norm().sqrt();
    Ok(ColumnIsometry { colnorm, sumnorm })
}

/// The eight relations among `e`, `f`, `P_k`, `Q_k`, one summary per clause.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionRelations {
    pub clauses: Vec<CheckSummary>,
}

impl ProjectionRelations {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(CheckSummary::passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.clauses.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

/// Checks the eight relations among `e`, `f`, `P_k` and `Q_k`.
///
/// `words` drives the clauses quantified over arbitrary group elements
/// ((ii)–(iv)); the positive-word clauses use `W_{≤ depth}` and the level
/// clauses use `k, n ≤ depth`.
pub fn check_projection_relations(
    pf: &ProjectionFamily<'_>,
    words: &[Word],
    tol: Tolerance,
) -> Result<ProjectionRelations> {
    let bound = tol.bound(1.0);
    let rep = pf.rep();
    let label = |w: &Word| rep.word_label(w);
    let pair = |a: &Word, b: &Word| format!("({},{})", label(a), label(b));

    let mut c1 = CheckSummary::new("(i) P_1 and Q_0 are projections");
    let (p1, q0) = (pf.p(1)?, pf.q(0)?);
    c1.record(projection_residual(&p1), bound, || "P_1".into());
    c1.record(projection_residual(&q0), bound, || "Q_0".into());

    let mut c2 = CheckSummary::new("(ii) f(t) is a projection");
    let mut c3 = CheckSummary::new("(iii) sigma(t) f(s) = f(ts) sigma(t)");
    let mut c4 = CheckSummary::new("(iv) e(t) f(t) = f(t)");
    for t in words {
        let f = pf.f(t)?;
        c2.record(projection_residual(&f), bound, || label(t));
        let e = pf.e(t)?;
        c4.record((&(&*e * &*f) - &*f).spectral_norm(), bound, || label(t));
        let st = pf.sigma(t)?;
        for s in words {
            let lhs = &*st * &*pf.f(s)?;
            let rhs = &*pf.f(&t.mul(s))? * &*st;
            c3.record((&lhs - &rhs).spectral_norm(), bound, || pair(t, s));
        }
    }

    let gens = rep.generators();
    let depth = pf.depth();
    let mut c5 = CheckSummary::new("(v) e, f orthogonal on distinct equal-length positive words");
    for k in 1..=depth {
        let level = gens.enumerate_positive(k);
        for a in &level {
            let (ea, fa) = (pf.e(a)?, pf.f(a)?);
            for b in &level {
                if a == b {
                    continue;
                }
                let (eb, fb) = (pf.e(b)?, pf.f(b)?);
                let r = (&*ea * &*eb)
                    .spectral_norm()
                    .max((&*fa * &*fb).spectral_norm())
                    .max((&*ea * &*fb).spectral_norm());
                c5.record(r, bound, || pair(a, b));
            }
        }
    }

    let mut c6 = CheckSummary::new("(vi) P_k, Q_k projections and Q_k = P_k - P_{k+1}");
    for k in 1..=depth {
        let (p, q, p_next) = (pf.p(k)?, pf.q(k)?, pf.p(k + 1)?);
        let diff = (&*q - &(&*p - &*p_next)).spectral_norm();
        let r = diff.max(projection_residual(&p)).max(projection_residual(&q));
        c6.record(r, bound, || format!("k={k}"));
    }

    let mut c7 = CheckSummary::new("(vii) Q_0 + ... + Q_{n-1} + P_n = 1");
    let identity = Operator::identity(pf.dim());
    for n in 1..=depth {
        let mut acc = (*pf.p(n)?).clone();
        for k in 0..n {
            acc = &acc + &*pf.q(k)?;
        }
        c7.record((&acc - &identity).spectral_norm(), bound, || format!("n={n}"));
    }

    let mut c8 = CheckSummary::new("(viii) f orthogonal on distinct positive words");
    let positives = gens.positive_words_up_to(depth);
    let fs: Vec<Arc<Operator>> = positives.iter().map(|a| pf.f(a)).collect::<Result<_>>()?;
    for (i, a) in positives.iter().enumerate() {
        for (j, b) in positives.iter().enumerate() {
            if i != j {
                c8.record((&*fs[i] * &*fs[j]).spectral_norm(), bound, || pair(a, b));
            }
        }
    }

    Ok(ProjectionRelations { clauses: vec![c1, c2, c3, c4, c5, c6, c7, c8] })
}

/// `‖Σ_α b_n(α) − 1‖` for `n = 1..=n_max`.
pub fn check_sum_b(pf: &ProjectionFamily<'_>, n_max: usize, tol: Tolerance) -> Result<CheckSummary> {
    let identity = Operator::identity(pf.dim());
    let mut check = CheckSummary::new("sum of b_n is 1");
    for n in 1..=n_max {
        let residual = (&pf.b_map(n)?.value_sum() - &identity).spectral_norm();
        check.record(residual, tol.bound(1.0), || format!("n={n}"));
    }
    Ok(check)
}

/// `‖Σ_t a_n(t)* a_n(t) − 1‖` for `n = 1..=n_max`.
pub fn check_sum_a(pf: &ProjectionFamily<'_>, n_max: usize, tol: Tolerance) -> Result<CheckSummary> {
    let identity = Operator::identity(pf.dim());
    let mut check = CheckSummary::new("sum of a_n* a_n is 1");
    for n in 1..=n_max {
        let residual = (&pf.a_map(n)?.gram_sum() - &identity).spectral_norm();
        check.record(residual, tol.bound(1.0), || format!("n={n}"));
    }
    Ok(check)
}
