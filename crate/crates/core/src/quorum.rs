//! Quorum arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Strict majority of `n_total` participants: `floor(n/2) + 1`.
pub fn quorum(n_total: u32) -> Result<u32, GeometryError> {
    if n_total == 0 {
        return Err(GeometryError::InvalidInput("quorum of zero vehicles"));
    }
    Ok(n_total / 2 + 1)
}

/// How many participants must agree in each voting phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuorumRule {
    #[default]
    Majority,
    /// N of N, in both phases.
    Full,
}

impl QuorumRule {
    pub fn threshold(self, n_total: u32) -> Result<Quorum, GeometryError> {
        let required = match self {
            QuorumRule::Majority => quorum(n_total)?,
            QuorumRule::Full if n_total == 0 => {
                return Err(GeometryError::InvalidInput("quorum of zero vehicles"))
            }
            QuorumRule::Full => n_total,
        };
        Ok(Quorum {
            required,
            total: n_total,
        })
    }
}

/// Resolved threshold for one voting cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quorum {
    pub required: u32,
    pub total: u32,
}

impl Quorum {
    pub fn majority(n_total: u32) -> Result<Self, GeometryError> {
        QuorumRule::Majority.threshold(n_total)
    }

    pub fn is_met(&self, votes: u32) -> bool {
        votes >= self.required
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strict_majority_values() {
        assert_eq!(quorum(3), Ok(2));
        assert_eq!(quorum(4), Ok(3));
        assert_eq!(quorum(5), Ok(3));
        assert_eq!(quorum(1), Ok(1));
        assert!(quorum(0).is_err());
    }

    #[test]
    fn full_rule_needs_everyone() {
        assert_eq!(QuorumRule::Full.threshold(4).unwrap().required, 4);
        assert!(QuorumRule::Full.threshold(0).is_err());
    }

    proptest! {
        #[test]
        fn two_quorums_always_intersect(n in 1u32..10_000) {
            let q = quorum(n).unwrap();
            prop_assert!(q + q > n);
            prop_assert!(q <= n);
        }

        #[test]
        fn quorum_is_monotone(n in 1u32..10_000) {
            prop_assert!(quorum(n + 1).unwrap() >= quorum(n).unwrap());
        }
    }
}
