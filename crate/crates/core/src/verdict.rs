use serde::{Deserialize, Serialize};

/// Outcome of a ledger-aware inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Approximation slack too large to confirm or refute.
    Inconclusive,
}

/// Slack above this fraction of the bound makes a check inconclusive.
pub const SLACK_FRACTION: f64 = 0.1;

impl Verdict {
    /// `measured <= bound + slack`, inconclusive when the slack exceeds a
    /// tenth of the bound.
    pub fn for_inequality(measured: f64, bound: f64, slack: f64) -> Self {
        if !(measured <= bound + slack) {
            Verdict::Fail
        } else if slack > SLACK_FRACTION * bound {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inequality_verdicts() {
        assert_eq!(Verdict::for_inequality(1.0, 2.0, 0.1), Verdict::Pass);
        assert_eq!(Verdict::for_inequality(2.05, 2.0, 0.1), Verdict::Pass);
        assert_eq!(Verdict::for_inequality(2.2, 2.0, 0.1), Verdict::Fail);
        assert_eq!(Verdict::for_inequality(1.0, 2.0, 0.5), Verdict::Inconclusive);
        assert_eq!(Verdict::for_inequality(f64::NAN, 2.0, 0.1), Verdict::Fail);
    }

    #[test]
    fn combination_is_pessimistic() {
        assert_eq!(Verdict::Pass.combine(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconclusive.combine(Verdict::Fail), Verdict::Fail);
    }
}
