use std::fmt::Write;
use std::time::Duration;

use serde::Serialize;

/// Failures beyond this many are counted but not stored.
pub const KEPT_FAILURES: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub input: Vec<String>,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub population: String,
    pub cases: u64,
    pub failed: u64,
    pub failures: Vec<Failure>,
    /// Set when the check could not run at all, e.g. a compile error.
    pub error: Option<String>,
    pub wall_ms: f64,
    pub seed: Option<u64>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, population: impl Into<String>) -> CheckReport {
        CheckReport {
            name: name.into(),
            population: population.into(),
            cases: 0,
            failed: 0,
            failures: vec![],
            error: None,
            wall_ms: 0.0,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> CheckReport {
        self.seed = Some(seed);
        self
    }

    pub fn passed(&self) -> bool {
        self.failed == 0 && self.error.is_none()
    }

    /// Records one case; `got` differing from `expected` is a failure.
    pub fn case(&mut self, input: impl FnOnce() -> Vec<String>, expected: &str, got: &str) {
        self.cases += 1;
        if expected != got {
            self.fail(input(), expected, got);
        }
    }

    pub fn fail(&mut self, input: Vec<String>, expected: &str, got: &str) {
        self.failed += 1;
        if self.failures.len() < KEPT_FAILURES {
            self.failures.push(Failure { input, expected: expected.into(), got: got.into() });
        }
    }

    pub fn set_error(&mut self, e: impl ToString) {
        self.error = Some(e.to_string());
    }

    pub fn set_time(&mut self, d: Duration) {
        self.wall_ms = d.as_secs_f64() * 1e3;
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{} {}: {} cases, {} failed, {:.1} ms",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.failed,
            self.wall_ms
        );
        if let Some(seed) = self.seed {
            let _ = write!(s, ", seed {seed}");
        }
        let _ = write!(s, "\n  population: {}", self.population);
        if let Some(e) = &self.error {
            let _ = write!(s, "\n  error: {e}");
        }
        for f in &self.failures {
            let _ = write!(s, "\n  input ({}): expected {}, got {}", f.input.join(", "), f.expected, f.got);
        }
        if self.failed as usize > self.failures.len() {
            let _ = write!(s, "\n  ... {} more", self.failed as usize - self.failures.len());
        }
        s
    }

    /// One self-delimiting JSON line.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
