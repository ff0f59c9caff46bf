//! Aggregated residual checks.

use serde::Serialize;

/// One failing instance of a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub witness: String,
    pub residual: f64,
    pub tolerance: f64,
}

/// A named check evaluated over many instances.
///
/// `residual` and `tolerance` are taken from the instance with the largest
/// excess `residual − tolerance`, so `passed() ⇔ residual ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub checked: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub failures: Vec<Failure>,
    /// Free-form qualifier (e.g. the product length a validation reached).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckSummary {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checked: 0,
            residual: 0.0,
            tolerance: f64::INFINITY,
            failures: Vec::new(),
            note: None,
        }
    }

    /// Records one instance; `witness` is only rendered on failure.
    pub fn record(&mut self, residual: f64, tolerance: f64, witness: impl FnOnce() -> String) {
        self.checked += 1;
        let excess = residual - tolerance;
        if self.checked == 1 || excess > self.residual - self.tolerance {
            self.residual = residual;
            self.tolerance = tolerance;
        }
        if residual.is_nan() || residual > tolerance {
            self.failures.push(Failure { witness: witness(), residual, tolerance });
        }
    }

    /// Records a boolean instance with no natural residual.
    pub fn record_flag(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.5, witness);
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Up to `limit` witnesses joined with `"; "`.
    pub fn witness_summary(&self, limit: usize) -> Option<String> {
        if self.failures.is_empty() {
            return None;
        }
        let parts: Vec<&str> = self.failures.iter().take(limit).map(|f| f.witness.as_str()).collect();
        let extra = self.failures.len().saturating_sub(limit);
        let mut out = parts.join("; ");
        if extra > 0 {
            out.push_str(&format!("; … {extra} more"));
        }
        Some(out)
    }

    /// Folds another summary's instances into this one.
    pub fn absorb(&mut self, other: CheckSummary) {
        if other.checked == 0 {
            return;
        }
        if self.checked == 0 || other.residual - other.tolerance > self.residual - self.tolerance {
            self.residual = other.residual;
            self.tolerance = other.tolerance;
        }
        self.checked += other.checked;
        self.failures.extend(other.failures);
        if self.note.is_none() {
            self.note = other.note;
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}
