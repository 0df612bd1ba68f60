//! Structured pass/fail records for every verification suite.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "==")]
    Equal,
    #[serde(rename = "~=")]
    Within,
    /// Recorded measurement without an assertion.
    #[serde(rename = "info")]
    Info,
}

/// One asserted (or recorded) quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub target: f64,
    /// Only meaningful for `Relation::Within`.
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub lemma: String,
    pub status: Status,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub wall_time_s: f64,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>, lemma: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            lemma: lemma.into(),
            status: Status::Pass,
            seed: None,
            checks: Vec::new(),
            notes: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn push(&mut self, name: &str, measured: f64, relation: Relation, target: f64, tolerance: f64) -> bool {
        let passed = match relation {
            Relation::Less => measured < target,
            Relation::LessEq => measured <= target,
            Relation::Greater => measured > target,
            Relation::Equal => measured == target,
            Relation::Within => (measured - target).abs() <= tolerance,
            Relation::Info => true,
        };
        if !passed && self.status == Status::Pass {
            self.status = Status::Fail;
        }
        self.checks.push(Check { name: name.into(), measured, relation, target, tolerance, passed });
        passed
    }

    pub fn less(&mut self, name: &str, measured: f64, bound: f64) -> bool {
        self.push(name, measured, Relation::Less, bound, 0.0)
    }

    pub fn less_eq(&mut self, name: &str, measured: f64, bound: f64) -> bool {
        self.push(name, measured, Relation::LessEq, bound, 0.0)
    }

    pub fn greater(&mut self, name: &str, measured: f64, bound: f64) -> bool {
        self.push(name, measured, Relation::Greater, bound, 0.0)
    }

    pub fn equal(&mut self, name: &str, measured: usize, expected: usize) -> bool {
        self.push(name, measured as f64, Relation::Equal, expected as f64, 0.0)
    }

    pub fn within(&mut self, name: &str, measured: f64, target: f64, tolerance: f64) -> bool {
        self.push(name, measured, Relation::Within, target, tolerance)
    }

    pub fn info(&mut self, name: &str, measured: f64) {
        self.push(name, measured, Relation::Info, 0.0, 0.0);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn mark_inconclusive(&mut self, why: impl Into<String>) {
        self.status = Status::Inconclusive;
        self.notes.push(why.into());
    }

    /// Records a failure that has no natural measured value.
    pub fn fail(&mut self, why: impl Into<String>) {
        if self.status == Status::Pass {
            self.status = Status::Fail;
        }
        self.notes.push(why.into());
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Value of a named check; panics when absent (test helper).
    pub fn value(&self, name: &str) -> f64 {
        self.check(name).unwrap_or_else(|| panic!("no check named {name} in {}", self.suite)).measured
    }

    /// One line per check, for terminal output.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = vec![format!("[{:?}] {} ({})", self.status, self.suite, self.lemma).to_uppercase()];
        for c in &self.checks {
            let rel = match c.relation {
                Relation::Less => format!("< {:e}", c.target),
                Relation::LessEq => format!("<= {:e}", c.target),
                Relation::Greater => format!("> {:e}", c.target),
                Relation::Equal => format!("== {}", c.target),
                Relation::Within => format!("= {:.12} +- {:e}", c.target, c.tolerance),
                Relation::Info => String::new(),
            };
            let mark = if c.relation == Relation::Info { "   " } else if c.passed { "ok " } else { "BAD" };
            out.push(format!("  {mark} {:<48} {:>22.15e} {rel}", c.name, c.measured));
        }
        for n in &self.notes {
            out.push(format!("  note: {n}"));
        }
        out
    }
}

/// Times a suite body and stamps the wall time into its report.
pub fn timed<F>(f: F) -> VerificationReport
where
    F: FnOnce() -> VerificationReport,
{
    let start = Instant::now();
    let mut r = f();
    r.wall_time_s = start.elapsed().as_secs_f64();
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_checks() {
        let mut r = VerificationReport::new("toy", "Lemma 0");
        assert!(r.less("a", 1.0, 2.0));
        r.info("b", 3.0);
        assert!(r.passed());
        assert!(!r.within("c", 1.0, 1.1, 0.05));
        assert_eq!(r.status, Status::Fail);
        r.less("d", 0.0, 1.0);
        assert_eq!(r.status, Status::Fail);
    }

    #[test]
    fn inconclusive_is_not_pass() {
        let mut r = VerificationReport::new("toy", "Lemma 0");
        r.mark_inconclusive("too few samples");
        assert!(!r.passed());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inconclusive\""));
    }
}
