//! Check reports: the shared result shape of every verification suite.
//!
//! A suite produces one [`CheckEntry`] per named check; failures carry the
//! offending residuals in normal form (as display strings) and, where a
//! sample was drawn, the seed that produced it. Reports merge and sort by
//! check id so concurrent or chunked runs serialize identically.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual_terms: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Report {
    checks: Vec<CheckEntry>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.checks.push(entry);
    }

    pub fn pass(&mut self, check: impl Into<String>) {
        self.push(CheckEntry {
            check: check.into(),
            status: Status::Pass,
            residual_terms: None,
            seed: None,
            note: None,
        });
    }

    pub fn fail(&mut self, check: impl Into<String>, residual_terms: Vec<String>) {
        self.push(CheckEntry {
            check: check.into(),
            status: Status::Fail,
            residual_terms: if residual_terms.is_empty() {
                None
            } else {
                Some(residual_terms)
            },
            seed: None,
            note: None,
        });
    }

    pub fn fail_note(&mut self, check: impl Into<String>, note: impl Into<String>) {
        self.push(CheckEntry {
            check: check.into(),
            status: Status::Fail,
            residual_terms: None,
            seed: None,
            note: Some(note.into()),
        });
    }

    /// Record a reduce-to-zero check: empty residuals pass, anything else
    /// fails and is kept for the report.
    pub fn residual(&mut self, check: impl Into<String>, residual_terms: Vec<String>) {
        if residual_terms.is_empty() {
            self.pass(check);
        } else {
            self.fail(check, residual_terms);
        }
    }

    pub fn merge(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn checks(&self) -> &[CheckEntry] {
        &self.checks
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    /// Deterministic order: by check id, stable within equal ids.
    pub fn sorted(mut self) -> Report {
        self.checks.sort_by(|a, b| a.check.cmp(&b.check));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_sorts_and_serializes() {
        let mut r = Report::new();
        r.pass("b.second");
        r.residual("a.first", vec!["q a c".to_string()]);
        let r = r.sorted();
        assert!(!r.passed());
        assert_eq!(r.checks()[0].check, "a.first");
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.starts_with('['), "{json}");
        assert!(json.contains("\"residual_terms\""));
        assert!(!json.contains("\"seed\""));
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_residual_passes() {
        let mut r = Report::new();
        r.residual("x", vec![]);
        assert!(r.passed());
        assert_eq!(r.failures().count(), 0);
    }
}
