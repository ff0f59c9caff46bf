//! Partial representations of a free group built from generator images.
//!
//! A [`PartialRep`] is normally generated from a [`GeneratorFamily`]: the
//! value on a reduced word `x₁⋯x_n` is the ordered product of the generator
//! images, with `σ(x⁻¹) = σ(x)*`. Explicit word tables are also accepted so
//! that assignments which are *not* of this form (and fail semi-saturation)
//! can be fed through the same checks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{check_dim, input, Result};
use crate::fixtures::WordTable;
use crate::freegroup::{GeneratorSet, Letter, Word};
use crate::linop::{commutator_norm, partial_isometry_residual, Operator, Tolerance};
use crate::report::CheckSummary;

/// Cap on the number of distinct products examined by [`validate_family`].
pub const MAX_VALIDATION_PRODUCTS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct GeneratorFamily {
    gens: GeneratorSet,
    dim: usize,
    images: Vec<Operator>,
}

impl GeneratorFamily {
    pub fn new(gens: GeneratorSet, images: Vec<Operator>) -> Result<Self> {
        if images.len() != gens.len() {
            return Err(input(format!(
                "{} generator images supplied for {} generators",
                images.len(),
                gens.len()
            )));
        }
        let dim = images[0].dim();
        for img in &images {
            check_dim(dim, img.dim())?;
        }
        Ok(Self { gens, dim, images })
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn images(&self) -> &[Operator] {
        &self.images
    }

    pub fn image(&self, generator: usize) -> &Operator {
        &self.images[generator]
    }
}

/// Result of checking that the products of `U ∪ U*` are partial isometries
/// with commuting range projections, up to a fixed product length.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub max_product_length: usize,
    /// Distinct nonzero products examined.
    pub products: usize,
    /// Distinct range projections compared pairwise.
    pub range_projections: usize,
    /// The product cap was hit before `max_product_length` was exhausted.
    pub truncated: bool,
    pub partial_isometries: CheckSummary,
    pub commuting_ranges: CheckSummary,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.partial_isometries.passed() && self.commuting_ranges.passed()
    }
}

fn letter_label(gens: &GeneratorSet, letter: Letter) -> String {
    let label = gens.label(letter.generator).unwrap_or("?");
    if letter.inverse {
        format!("{label}*")
    } else {
        label.to_string()
    }
}

/// Checks every product of at most `max_product_length` factors from
/// `U ∪ U*` for being a partial isometry, and that all range projections of
/// those products commute. Products are deduplicated as operators, so each
/// distinct element of the generated semigroup is examined once.
pub fn validate_family(
    family: &GeneratorFamily,
    max_product_length: usize,
    tol: Tolerance,
) -> Result<ValidationReport> {
    if max_product_length == 0 {
        return Err(input("max_product_length must be at least 1"));
    }
    let gens = family.generators();
    let letters: Vec<(Letter, Operator)> = gens
        .letters()
        .map(|l| {
            let img = family.image(l.generator);
            (l, if l.inverse { img.adjoint() } else { img.clone() })
        })
        .collect();

    let mut seen = HashSet::new();
    let mut elements: Vec<(String, Operator)> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    let mut truncated = false;
    for (l, op) in &letters {
        if !op.is_zero() && seen.insert(op.fingerprint()) {
            frontier.push(elements.len());
            elements.push((letter_label(gens, *l), op.clone()));
        }
    }
    'grow: for _ in 1..max_product_length {
        let mut next = Vec::new();
        for &idx in &frontier {
            for (l, op) in &letters {
                let prod = &elements[idx].1 * op;
                if prod.is_zero() || !seen.insert(prod.fingerprint()) {
                    continue;
                }
                if elements.len() >= MAX_VALIDATION_PRODUCTS {
                    truncated = true;
                    break 'grow;
                }
                let label = format!("{}.{}", elements[idx].0, letter_label(gens, *l));
                next.push(elements.len());
                elements.push((label, prod));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }

    let mut partial_isometries = CheckSummary::new("partial isometries");
    let mut ranges: Vec<(String, Operator)> = Vec::new();
    let mut seen_ranges = HashSet::new();
    for (label, w) in &elements {
        let residual = partial_isometry_residual(w);
        partial_isometries.record(residual, tol.bound(w.spectral_norm()), || label.clone());
        let range = w * &w.adjoint();
        if seen_ranges.insert(range.fingerprint()) {
            ranges.push((label.clone(), range));
        }
    }
    let mut commuting_ranges = CheckSummary::new("commuting range projections");
    for i in 0..ranges.len() {
        for j in (i + 1)..ranges.len() {
            let (a, b) = (&ranges[i].1, &ranges[j].1);
            let residual = commutator_norm(a, b)?;
            commuting_ranges.record(residual, tol.bound(a.spectral_norm() * b.spectral_norm()), || {
                format!("({},{})", ranges[i].0, ranges[j].0)
            });
        }
    }
    let note = format!("products of length <= {max_product_length}");
    Ok(ValidationReport {
        max_product_length,
        products: elements.len(),
        range_projections: ranges.len(),
        truncated,
        partial_isometries: partial_isometries.with_note(note.clone()),
        commuting_ranges: commuting_ranges.with_note(note),
    })
}

#[derive(Debug)]
enum Source {
    Generated { images: Vec<Operator>, adjoints: Vec<Operator> },
    Table(BTreeMap<Word, Operator>),
}

/// A partial representation evaluated on reduced words, with a memo cache.
#[derive(Debug)]
pub struct PartialRep {
    gens: GeneratorSet,
    dim: usize,
    source: Source,
    cache: RwLock<HashMap<Word, Arc<Operator>>>,
    validation: Option<ValidationReport>,
}

impl PartialRep {
    /// Wraps a family without validating it.
    pub fn from_family(family: GeneratorFamily) -> Self {
        let GeneratorFamily { gens, dim, images } = family;
        let adjoints = images.iter().map(Operator::adjoint).collect();
        Self {
            gens,
            dim,
            source: Source::Generated { images, adjoints },
            cache: RwLock::new(HashMap::new()),
            validation: None,
        }
    }

    /// Runs [`validate_family`] and keeps the report. The rep is returned
    /// even when validation rejects the family; inspect [`validation`](Self::validation).
    pub fn validated(family: GeneratorFamily, max_product_length: usize, tol: Tolerance) -> Result<Self> {
        let report = validate_family(&family, max_product_length, tol)?;
        let mut rep = Self::from_family(family);
        rep.validation = Some(report);
        Ok(rep)
    }

    /// An explicit word-to-operator table. Every generator must be present;
    /// evaluation outside the table is an input error.
    pub fn from_table(gens: GeneratorSet, dim: usize, table: BTreeMap<Word, Operator>) -> Result<Self> {
        for (w, op) in &table {
            gens.check(w)?;
            check_dim(dim, op.dim())?;
        }
        for g in 0..gens.len() {
            if !table.contains_key(&Word::generator(g)) {
                return Err(input(format!(
                    "table is missing generator {}",
                    gens.label(g).unwrap_or("?")
                )));
            }
        }
        Ok(Self {
            gens,
            dim,
            source: Source::Table(table),
            cache: RwLock::new(HashMap::new()),
            validation: None,
        })
    }

    pub fn from_word_table(table: WordTable) -> Result<Self> {
        Self::from_table(table.gens, table.dim, table.table)
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True for reps built from generator images.
    pub fn is_generated(&self) -> bool {
        matches!(self.source, Source::Generated { .. })
    }

    pub fn validation(&self) -> Option<&ValidationReport> {
        self.validation.as_ref()
    }

    pub fn set_validation(&mut self, report: ValidationReport) {
        self.validation = Some(report);
    }

    /// The generator images (taken from the table in table mode).
    pub fn family(&self) -> GeneratorFamily {
        let images = match &self.source {
            Source::Generated { images, .. } => images.clone(),
            Source::Table(table) => (0..self.gens.len())
                .map(|g| table[&Word::generator(g)].clone())
                .collect(),
        };
        GeneratorFamily { gens: self.gens.clone(), dim: self.dim, images }
    }

    /// Longest word stored in a table rep; `None` for generated reps.
    pub fn table_max_len(&self) -> Option<usize> {
        match &self.source {
            Source::Generated { .. } => None,
            Source::Table(table) => table.keys().map(Word::len).max(),
        }
    }

    pub fn table(&self) -> Option<&BTreeMap<Word, Operator>> {
        match &self.source {
            Source::Table(t) => Some(t),
            Source::Generated { .. } => None,
        }
    }

    /// `σ(t)`.
    pub fn evaluate(&self, t: &Word) -> Result<Arc<Operator>> {
        self.gens.check(t)?;
        if let Some(hit) = self.cache.read().expect("cache lock").get(t) {
            return Ok(Arc::clone(hit));
        }
        let value = match &self.source {
            Source::Table(table) => table.get(t).cloned().ok_or_else(|| {
                input(format!("word {} is not in the representation table", self.gens.display(t)))
            })?,
            Source::Generated { images, adjoints } => match t.letters().split_last() {
                None => Operator::identity(self.dim),
                Some((&last, _)) => {
                    let prefix = t.mul(&Word::reduce([last.inv()]));
                    let head = self.evaluate(&prefix)?;
                    let factor = if last.inverse { &adjoints[last.generator] } else { &images[last.generator] };
                    &*head * factor
                }
            },
        };
        let mut cache = self.cache.write().expect("cache lock");
        Ok(Arc::clone(cache.entry(t.clone()).or_insert_with(|| Arc::new(value))))
    }

    /// `e(t) = σ(t)σ(t)*`.
    pub fn range_projection(&self, t: &Word) -> Result<Operator> {
        let s = self.evaluate(t)?;
        Ok(&*s * &s.adjoint())
    }

    pub fn word_label(&self, t: &Word) -> String {
        self.gens.display(t).to_string()
    }

    fn pair_label(&self, t: &Word, s: &Word) -> String {
        format!("({},{})", self.word_label(t), self.word_label(s))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    /// `σ(t)σ(s)σ(s⁻¹) = σ(ts)σ(s⁻¹)`
    pub multiplicativity: CheckSummary,
    /// `σ(t⁻¹) = σ(t)*`
    pub adjoint: CheckSummary,
    /// `σ(t)e(s) = e(ts)σ(t)`
    pub commutation: CheckSummary,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.multiplicativity.passed() && self.adjoint.passed() && self.commutation.passed()
    }

    pub fn max_residual(&self) -> f64 {
        self.multiplicativity.residual.max(self.adjoint.residual).max(self.commutation.residual)
    }
}

/// Verifies the partial-representation identities on all pairs drawn from
/// `words`, including `σ(ε) = 1`.
pub fn check_axioms(rep: &PartialRep, words: &[Word], tol: Tolerance) -> Result<AxiomReport> {
    let mut multiplicativity = CheckSummary::new("multiplicativity");
    let mut adjoint = CheckSummary::new("adjoint");
    let mut commutation = CheckSummary::new("commutation");

    let identity = rep.evaluate(&Word::identity())?;
    adjoint.record(
        (&*identity - &Operator::identity(rep.dim())).spectral_norm(),
        tol.bound(1.0),
        || "sigma(e) != 1".into(),
    );

    let mut norms = HashMap::new();
    for t in words {
        let s = rep.evaluate(t)?;
        let s_inv = rep.evaluate(&t.inverse())?;
        let residual = (&*s_inv - &s.adjoint()).spectral_norm();
        let n = s.spectral_norm();
        norms.insert(t.clone(), n);
        adjoint.record(residual, tol.bound(n), || rep.word_label(t));
    }
    for t in words {
        let st = rep.evaluate(t)?;
        for s in words {
            let ts = t.mul(s);
            let ss = rep.evaluate(s)?;
            let s_inv = rep.evaluate(&s.inverse())?;
            let sts = rep.evaluate(&ts)?;
            let scale = norms[t] * norms[s] * norms[s];
            let lhs = &(&*st * &*ss) * &*s_inv;
            let rhs = &*sts * &*s_inv;
            multiplicativity.record((&lhs - &rhs).spectral_norm(), tol.bound(scale), || rep.pair_label(t, s));

            let e_s = &*ss * &ss.adjoint();
            let e_ts = &*sts * &sts.adjoint();
            let lhs = &*st * &e_s;
            let rhs = &e_ts * &*st;
            commutation.record((&lhs - &rhs).spectral_norm(), tol.bound(scale), || rep.pair_label(t, s));
        }
    }
    Ok(AxiomReport { multiplicativity, adjoint, commutation })
}

/// `‖σ(x)*σ(y)‖` over distinct generator pairs.
pub fn orthogonality(rep: &PartialRep, tol: Tolerance) -> Result<CheckSummary> {
    let mut check = CheckSummary::new("orthogonal");
    let m = rep.generators().len();
    for x in 0..m {
        for y in 0..m {
            if x == y {
                continue;
            }
            let (wx, wy) = (Word::generator(x), Word::generator(y));
            let sx = rep.evaluate(&wx)?;
            let sy = rep.evaluate(&wy)?;
            let residual = (&sx.adjoint() * &*sy).spectral_norm();
            check.record(residual, tol.bound(sx.spectral_norm() * sy.spectral_norm()), || {
                rep.pair_label(&wx, &wy)
            });
        }
    }
    Ok(check)
}

pub fn is_orthogonal(rep: &PartialRep, tol: Tolerance) -> Result<bool> {
    Ok(orthogonality(rep, tol)?.passed())
}

/// `σ(t)σ(s) = σ(ts)` on sampled pairs whose lengths add; other pairs are skipped.
pub fn semisaturation(rep: &PartialRep, pairs: &[(Word, Word)], tol: Tolerance) -> Result<CheckSummary> {
    let mut check = CheckSummary::new("semi-saturated");
    for (t, s) in pairs {
        if !t.lengths_add(s) {
            continue;
        }
        let st = rep.evaluate(t)?;
        let ss = rep.evaluate(s)?;
        let sts = rep.evaluate(&t.mul(s))?;
        let residual = (&(&*st * &*ss) - &*sts).spectral_norm();
        check.record(residual, tol.bound(st.spectral_norm() * ss.spectral_norm()), || {
            rep.pair_label(t, s)
        });
    }
    Ok(check)
}

pub fn is_semisaturated(rep: &PartialRep, pairs: &[(Word, Word)], tol: Tolerance) -> Result<bool> {
    Ok(semisaturation(rep, pairs, tol)?.passed())
}

/// All ordered pairs from `words`.
pub fn all_pairs(words: &[Word]) -> Vec<(Word, Word)> {
    words
        .iter()
        .flat_map(|t| words.iter().map(move |s| (t.clone(), s.clone())))
        .collect()
}

fn precondition_note(rep: &PartialRep, tol: Tolerance) -> Result<Option<String>> {
    let mut issues = Vec::new();
    if !is_orthogonal(rep, tol)? {
        issues.push("rep is not orthogonal");
    }
    if !rep.is_generated() {
        issues.push("table rep: semi-saturation not guaranteed");
    }
    if rep.validation().is_some_and(|v| !v.accepted()) {
        issues.push("family failed validation");
    }
    Ok((!issues.is_empty()).then(|| format!("precondition: {}", issues.join(", "))))
}

/// On an orthogonal semi-saturated rep, `σ(t) = 0` unless `t = μν⁻¹` with
/// `μ`, `ν` positive. Decomposable words are skipped.
pub fn check_posneg_vanishing(rep: &PartialRep, words: &[Word], tol: Tolerance) -> Result<CheckSummary> {
    let mut check = CheckSummary::new("posneg vanishing");
    for t in words {
        if t.pos_neg_decompose().is_some() {
            continue;
        }
        let norm = rep.evaluate(t)?.spectral_norm();
        check.record(norm, tol.atol, || rep.word_label(t));
    }
    check.note = precondition_note(rep, tol)?;
    Ok(check)
}

/// `σ(α)*σ(β) = 0` for distinct `α`, `β` in `W_k`.
pub fn check_positive_orthogonality(rep: &PartialRep, k: usize, tol: Tolerance) -> Result<CheckSummary> {
    if k == 0 {
        return Err(input("k must be at least 1"));
    }
    let mut check = CheckSummary::new(format!("positive orthogonality W_{k}"));
    let level = rep.generators().enumerate_positive(k);
    let values: Vec<Arc<Operator>> = level.iter().map(|a| rep.evaluate(a)).collect::<Result<_>>()?;
    for (i, a) in level.iter().enumerate() {
        let a_adj = values[i].adjoint();
        for (j, b) in level.iter().enumerate() {
            if i == j {
                continue;
            }
            let residual = (&a_adj * &*values[j]).spectral_norm();
            check.record(residual, tol.atol, || rep.pair_label(a, b));
        }
    }
    check.note = precondition_note(rep, tol)?;
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn p(rep: &PartialRep, s: &str) -> Word {
        rep.generators().parse(s).unwrap()
    }

    fn tree(m: usize, depth: usize) -> PartialRep {
        PartialRep::from_family(fixtures::tree_rep(m, depth).unwrap())
    }

    #[test]
    fn tree_family_is_accepted() {
        let family = fixtures::tree_rep(2, 2).unwrap();
        let report = validate_family(&family, 4, Tolerance::default()).unwrap();
        assert!(report.accepted(), "{report:?}");
        assert!(!report.truncated);
    }

    #[test]
    fn identity_family_is_accepted() {
        let family =
            GeneratorFamily::new(GeneratorSet::standard(2), vec![Operator::identity(1), Operator::identity(1)]).unwrap();
        assert!(validate_family(&family, 3, Tolerance::default()).unwrap().accepted());
    }

    #[test]
    fn noncommuting_ranges_rejected_with_witness() {
        let u = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let half = Operator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let family = GeneratorFamily::new(GeneratorSet::standard(2), vec![u, half]).unwrap();
        let report = validate_family(&family, 1, Tolerance::default()).unwrap();
        assert!(!report.accepted());
        assert!(report.partial_isometries.passed());
        let witnesses: Vec<&str> =
            report.commuting_ranges.failures.iter().map(|f| f.witness.as_str()).collect();
        assert!(witnesses.contains(&"(x,y)"), "{witnesses:?}");
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = GeneratorFamily::new(GeneratorSet::standard(2), vec![Operator::identity(1), Operator::identity(2)]);
        assert!(err.is_err());
        assert!(GeneratorFamily::new(GeneratorSet::standard(2), vec![Operator::identity(1)]).is_err());
        assert!(validate_family(&fixtures::tree_rep(1, 1).unwrap(), 0, Tolerance::default()).is_err());
    }

    #[test]
    fn evaluate_on_depth_one_tree() {
        // Basis order: ε, x, y.
        let rep = tree(2, 1);
        let xy = rep.evaluate(&p(&rep, "x.y^-1")).unwrap();
        assert_eq!(*xy, Operator::matrix_unit(3, 1, 2));
        assert!(rep.evaluate(&p(&rep, "x^-1.y")).unwrap().is_zero());
        assert_eq!(*rep.evaluate(&Word::identity()).unwrap(), Operator::identity(3));
        assert!(rep.evaluate(&Word::generator(7)).is_err());
    }

    #[test]
    fn evaluation_is_order_independent() {
        let words = GeneratorSet::standard(2).reduced_words_up_to(3);
        let a = tree(2, 3);
        let b = tree(2, 3);
        let forward: Vec<Operator> = words.iter().map(|w| (*a.evaluate(w).unwrap()).clone()).collect();
        let backward: Vec<Operator> = words.iter().rev().map(|w| (*b.evaluate(w).unwrap()).clone()).collect();
        assert!(forward.iter().zip(backward.iter().rev()).all(|(x, y)| x == y));
    }

    #[test]
    fn axioms_exact_on_tree() {
        let rep = tree(2, 2);
        let words = rep.generators().reduced_words_up_to(2);
        let report = check_axioms(&rep, &words, Tolerance::default()).unwrap();
        assert!(report.passed());
        assert_eq!(report.max_residual(), 0.0);
        let trivial = check_axioms(&rep, &[Word::identity()], Tolerance::default()).unwrap();
        assert_eq!(trivial.max_residual(), 0.0);
    }

    #[test]
    fn orthogonality_examples() {
        let tol = Tolerance::default();
        assert!(is_orthogonal(&tree(2, 2), tol).unwrap());
        assert!(is_orthogonal(&PartialRep::from_word_table(fixtures::delta_rep(2)).unwrap(), tol).unwrap());
        let ids = GeneratorFamily::new(GeneratorSet::standard(2), vec![Operator::identity(1), Operator::identity(1)])
            .unwrap();
        assert!(!is_orthogonal(&PartialRep::from_family(ids), tol).unwrap());
        assert!(is_orthogonal(&tree(1, 3), tol).unwrap());
    }

    #[test]
    fn semisaturation_examples() {
        let tol = Tolerance::default();
        let rep = tree(2, 2);
        let positives = rep.generators().positive_words_up_to(2);
        assert!(is_semisaturated(&rep, &all_pairs(&positives), tol).unwrap());

        let parity = PartialRep::from_word_table(fixtures::parity_rep(2)).unwrap();
        let x = p(&parity, "x");
        let y = p(&parity, "y");
        let check = semisaturation(&parity, &[(x.clone(), y.clone())], tol).unwrap();
        assert!(!check.passed());
        assert_eq!(check.failures[0].witness, "(x,y)");
        // Non-additive pairs are skipped.
        let skipped = semisaturation(&parity, &[(x.clone(), x.inverse())], tol).unwrap();
        assert_eq!(skipped.checked, 0);
        assert!(skipped.passed());
    }

    #[test]
    fn vanishing_examples() {
        let tol = Tolerance::default();
        let rep = tree(2, 3);
        let words = vec![p(&rep, "x^-1.y"), p(&rep, "y^-1.x.y"), p(&rep, "x.y^-1")];
        let check = check_posneg_vanishing(&rep, &words, tol).unwrap();
        assert!(check.passed());
        assert_eq!(check.checked, 2);
        assert_eq!(check.residual, 0.0);
        assert!(check.note.is_none());
    }

    #[test]
    fn positive_orthogonality_examples() {
        let tol = Tolerance::default();
        let rep = tree(2, 3);
        let check = check_positive_orthogonality(&rep, 2, tol).unwrap();
        assert!(check.passed());
        assert_eq!(check.checked, 12);
        assert_eq!(check_positive_orthogonality(&rep, 1, tol).unwrap().passed(), is_orthogonal(&rep, tol).unwrap());
        assert_eq!(check_positive_orthogonality(&tree(1, 3), 2, tol).unwrap().checked, 0);
        assert!(check_positive_orthogonality(&rep, 0, tol).is_err());
    }

    #[test]
    fn range_projections_of_tree_are_projections_and_commute() {
        let tol = Tolerance::default();
        let rep = tree(2, 3);
        let words = rep.generators().reduced_words_up_to(3);
        let es: Vec<Operator> = words.iter().map(|w| rep.range_projection(w).unwrap()).collect();
        for e in &es {
            assert!(crate::linop::is_projection(e, tol));
        }
        for a in &es {
            for b in &es {
                assert!(crate::linop::commute(a, b, tol).unwrap());
            }
        }
    }

    #[test]
    fn table_rep_rejects_missing_words() {
        let parity = PartialRep::from_word_table(fixtures::parity_rep(2)).unwrap();
        let long = parity.generators().parse("x.y.x").unwrap();
        assert!(parity.evaluate(&long).is_err());
    }
}
