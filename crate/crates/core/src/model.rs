//! Two-state, two-action arm dynamics.
//!
//! State 1 is "engaging", state 0 "non-engaging". Action 1 is an active
//! intervention (a service call), action 0 is passive. A [`TransitionModel`]
//! stores only the probability of moving *to* state 1 for each
//! `(state, action)` pair; the complement is always derived.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a single arm (beneficiary).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub u64);

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for ArmId {
    fn from(v: u64) -> Self {
        ArmId(v)
    }
}

pub const STATES: [u8; 2] = [0, 1];
pub const ACTIONS: [u8; 2] = [0, 1];

/// Transition probabilities of one arm, `p(s, a) = P(s, a, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    /// Indexed `[state][action]`.
    p: [[f64; 2]; 2],
}

impl TransitionModel {
    /// Builds a model from the four "to engaging" probabilities, named
    /// `p<state><action>` as in the CSV formats.
    pub fn new(p00: f64, p10: f64, p01: f64, p11: f64) -> Result<Self> {
        Self::from_array([[p00, p01], [p10, p11]])
    }

    /// `p[state][action]`.
    pub fn from_array(p: [[f64; 2]; 2]) -> Result<Self> {
        for s in STATES {
            for a in ACTIONS {
                let v = p[s as usize][a as usize];
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(format!("p({s},{a}) = {v} is not a probability")));
                }
            }
        }
        Ok(Self { p })
    }

    /// Probability of moving to state 1 from `state` under `action`.
    #[inline]
    pub fn p(&self, state: u8, action: u8) -> f64 {
        self.p[state as usize][action as usize]
    }

    /// Full transition probability `P(s, a, s')`.
    #[inline]
    pub fn prob(&self, state: u8, action: u8, next: u8) -> f64 {
        let up = self.p(state, action);
        if next == 1 {
            up
        } else {
            1.0 - up
        }
    }

    /// Self-transition probability `P(s, a, s)`.
    #[inline]
    pub fn self_transition(&self, state: u8, action: u8) -> f64 {
        self.prob(state, action, state)
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        self.p
    }

    /// `(p00, p10, p01, p11)`, the CSV column order.
    pub fn to_tuple(&self) -> (f64, f64, f64, f64) {
        (self.p[0][0], self.p[1][0], self.p[0][1], self.p[1][1])
    }

    /// True when every probability is exactly 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.p.iter().flatten().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Discount factor in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DiscountFactor(f64);

impl DiscountFactor {
    pub const DEFAULT: DiscountFactor = DiscountFactor(0.5);

    pub fn new(beta: f64) -> Result<Self> {
        if (0.0..1.0).contains(&beta) {
            Ok(Self(beta))
        } else {
            Err(invalid(format!("discount factor {beta} is not in [0, 1)")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `1 / (1 - beta)`, the largest possible discounted return of a reward in `[0, 1]`.
    #[inline]
    pub fn horizon(self) -> f64 {
        1.0 / (1.0 - self.0)
    }
}

impl Default for DiscountFactor {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for DiscountFactor {
    type Error = crate::error::Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiscountFactor> for f64 {
    fn from(d: DiscountFactor) -> f64 {
        d.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_probabilities() {
        assert!(TransitionModel::new(0.0, 1.0, 0.5, 0.5).is_ok());
        assert!(TransitionModel::new(-0.1, 0.0, 0.0, 0.0).is_err());
        assert!(TransitionModel::new(0.0, 0.0, 0.0, 1.1).is_err());
        assert!(TransitionModel::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn complement_is_derived() {
        let m = TransitionModel::new(0.1, 0.7, 0.4, 0.9).unwrap();
        assert_eq!(m.prob(0, 0, 1), 0.1);
        assert!((m.prob(0, 0, 0) - 0.9).abs() < 1e-15);
        assert_eq!(m.self_transition(1, 0), 0.7);
        assert_eq!(m.p(0, 1), 0.4);
        assert_eq!(m.to_tuple(), (0.1, 0.7, 0.4, 0.9));
    }

    #[test]
    fn discount_bounds() {
        assert!(DiscountFactor::new(0.0).is_ok());
        assert!(DiscountFactor::new(0.999).is_ok());
        assert!(DiscountFactor::new(1.0).is_err());
        assert!(DiscountFactor::new(-0.1).is_err());
        assert_eq!(DiscountFactor::new(0.5).unwrap().horizon(), 2.0);
    }
}
