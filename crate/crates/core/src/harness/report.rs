// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pass/fail records shared by every harness report.

use serde::Serialize;

/// A Monte Carlo check passes when `|z| <= Z_PASS`.
pub const Z_PASS: f64 = 3.0;
/// Beyond this `|z|` a failure is flagged as hard.
pub const Z_HARD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    pub stderr: Option<f64>,
    pub z: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub hard_fail: bool,
    /// Checks whose premise does not hold are reported but not counted.
    pub applicable: bool,
}

impl CheckResult {
    fn base(name: impl Into<String>, estimate: f64, target: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            estimate,
            target,
            stderr: None,
            z: None,
            tolerance: None,
            pass,
            hard_fail: false,
            applicable: true,
        }
    }

    /// `z = (estimate - target) / stderr`; passes iff `|z| <= 3`.
    pub fn z_test(name: impl Into<String>, estimate: f64, target: f64, stderr: f64) -> Self {
        let diff = estimate - target;
        let z = if stderr > 0.0 {
            diff / stderr
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        let pass = z.abs() <= Z_PASS;
        Self {
            stderr: Some(stderr),
            z: Some(z),
            hard_fail: !(z.abs() <= Z_HARD),
            ..Self::base(name, estimate, target, pass)
        }
    }

    /// Passes iff `|estimate - target| <= tolerance`.
    pub fn within(name: impl Into<String>, estimate: f64, target: f64, tolerance: f64) -> Self {
        let pass = (estimate - target).abs() <= tolerance;
        Self {
            tolerance: Some(tolerance),
            hard_fail: !pass,
            ..Self::base(name, estimate, target, pass)
        }
    }

    /// Passes iff `estimate <= limit`.
    pub fn at_most(name: impl Into<String>, estimate: f64, limit: f64) -> Self {
        let pass = estimate <= limit;
        Self {
            hard_fail: !pass,
            ..Self::base(name, estimate, limit, pass)
        }
    }

    /// Passes iff `estimate >= limit`.
    pub fn at_least(name: impl Into<String>, estimate: f64, limit: f64) -> Self {
        let pass = estimate >= limit;
        Self {
            hard_fail: !pass,
            ..Self::base(name, estimate, limit, pass)
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            hard_fail: !ok,
            ..Self::base(name, f64::from(u8::from(ok)), 1.0, ok)
        }
    }

    /// Marks the check as informational.
    pub fn not_applicable(mut self) -> Self {
        self.applicable = false;
        self
    }

    /// One aligned line: `PASS name  estimate=... target=...`.
    pub fn line(&self) -> String {
        let verdict = match (self.applicable, self.pass) {
            (false, _) => "N/A ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let mut s = format!(
            "{verdict} {:<48} estimate={:<14.8e} target={:<14.8e}",
            self.name, self.estimate, self.target
        );
        if let Some(z) = self.z {
            s.push_str(&format!(" z={z:+.3}"));
        }
        if let Some(tol) = self.tolerance {
            s.push_str(&format!(" tol={tol:.1e}"));
        }
        s
    }
}

/// True when every applicable check passes.
pub fn all_pass(checks: &[CheckResult]) -> bool {
    checks.iter().filter(|c| c.applicable).all(|c| c.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_test_thresholds() {
        assert!(CheckResult::z_test("a", 1.29, 1.0, 0.1).pass);
        let c = CheckResult::z_test("a", 1.31, 1.0, 0.1);
        assert!(!c.pass && !c.hard_fail);
        assert!(CheckResult::z_test("a", 1.6, 1.0, 0.1).hard_fail);
        assert!(CheckResult::z_test("a", 1.0, 1.0, 0.0).pass);
        assert!(!CheckResult::z_test("a", 1.1, 1.0, 0.0).pass);
    }

    #[test]
    fn inapplicable_checks_do_not_count() {
        let checks = [
            CheckResult::at_most("ok", 1.0, 2.0),
            CheckResult::at_most("bad", 3.0, 2.0).not_applicable(),
        ];
        assert!(all_pass(&checks));
        assert!(checks[1].line().starts_with("N/A"));
    }
}
