//! Residual bookkeeping shared by the verification suites.

use serde::Serialize;

/// One checked identity.
#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub suite: String,
    pub name: String,
    /// Particle number of the sector, or spin label, the check ran on.
    pub sector: String,
    pub residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckEntry {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

/// Ordered list of checks; failures are entries, never panics.
#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub entries: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `residual <= tolerance * scale`.
    pub fn record(
        &mut self,
        suite: &str,
        name: impl Into<String>,
        sector: impl Into<String>,
        residual: f64,
        scale: f64,
        tolerance: f64,
    ) -> bool {
        let passed = residual.is_finite() && residual <= tolerance * scale;
        self.entries.push(CheckEntry {
            suite: suite.into(),
            name: name.into(),
            sector: sector.into(),
            residual,
            scale,
            tolerance,
            passed,
        });
        passed
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest `residual / scale` over all entries.
    pub fn max_relative(&self) -> f64 {
        self.entries.iter().map(CheckEntry::relative).fold(0.0, f64::max)
    }

    pub fn suite(&self, suite: &str) -> impl Iterator<Item = &CheckEntry> {
        let suite = suite.to_string();
        self.entries.iter().filter(move |e| e.suite == suite)
    }
}

/// A place where the printed formulas and the verified implementation part ways.
#[derive(Clone, Debug, Serialize)]
pub struct Discrepancy {
    pub item: String,
    pub printed: String,
    pub implemented: String,
    /// Numerical evidence, e.g. the residual of the printed form.
    pub evidence: f64,
    pub note: String,
}
