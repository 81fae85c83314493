//! Machine-readable verification reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_defect: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    /// `passed` is `max_defect <= tolerance`; a NaN defect fails.
    pub fn new(name: impl Into<String>, max_defect: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            max_defect,
            tolerance,
            samples,
            passed: max_defect <= tolerance,
        }
    }

    /// A check that passes when the value is at least `threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            max_defect: value,
            tolerance: threshold,
            samples,
            passed: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(suite: impl Into<String>, seed: u64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            suite: suite.into(),
            seed,
            checks,
            passed,
        }
    }

    pub fn max_defect(&self) -> f64 {
        self.checks.iter().map(|c| c.max_defect).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Running maximum that propagates NaN, so a NaN defect is never hidden.
pub fn fold_max(acc: f64, x: f64) -> f64 {
    if acc.is_nan() || x.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_and_propagates() {
        assert!(!Check::new("x", f64::NAN, 1.0, 1).passed);
        assert!(fold_max(0.0, f64::NAN).is_nan());
        let r = Report::new(
            "s",
            1,
            vec![Check::new("a", 0.1, 1.0, 1), Check::new("b", 2.0, 1.0, 1)],
        );
        assert!(!r.passed);
        assert_eq!(r.max_defect(), 2.0);
    }
}
