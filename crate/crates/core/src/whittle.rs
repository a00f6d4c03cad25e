//! Subsidised Q-values and the Whittle index of a two-state arm.
//!
//! For a passive subsidy `lambda` the Q-function is the fixed point of
//!
//! ```text
//! Q(s,a) = r(s,a) + lambda * [a = 0] + beta * sum_{s'} P(s,a,s') * max_{a'} Q(s',a')
//! ```
//!
//! and the Whittle index of state `s` is the smallest subsidy at which the
//! passive and active actions are equally attractive. Rewards lie in
//! `[0, 1]`, so the index always lies in `[-1/(1-beta), 1/(1-beta)]`; the
//! search is a bisection on that bracket.

use crate::error::{invalid, Error, Result};
use crate::model::{ArmId, DiscountFactor, TransitionModel, ACTIONS, STATES};
use serde::{Deserialize, Serialize};

/// Which state is rewarded at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardConvention {
    /// `R = s_t`, the state the action is taken in.
    #[default]
    CurrentState,
    /// `R = s_{t+1}`, taken in expectation over the transition.
    NextState,
}

/// The reward convention used by the free functions in this module.
pub const REWARD_CONVENTION: RewardConvention = RewardConvention::CurrentState;

pub const DEFAULT_VI_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;
pub const DEFAULT_INDEX_TOL: f64 = 1e-4;
const MAX_BISECTIONS: usize = 200;

/// Q-values of one arm under a fixed passive subsidy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    /// Indexed `[state][action]`.
    pub q: [[f64; 2]; 2],
    pub lambda: f64,
    /// Number of value-iteration sweeps performed.
    pub sweeps: usize,
}

impl QTable {
    #[inline]
    pub fn get(&self, state: u8, action: u8) -> f64 {
        self.q[state as usize][action as usize]
    }

    /// `Q(s,0) - Q(s,1)`: positive when the subsidised passive action is preferred.
    #[inline]
    pub fn passive_advantage(&self, state: u8) -> f64 {
        self.get(state, 0) - self.get(state, 1)
    }

    pub fn value(&self, state: u8) -> f64 {
        self.get(state, 0).max(self.get(state, 1))
    }
}

/// Whittle index of one arm in its current state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhittleEntry {
    pub arm_id: ArmId,
    pub state: u8,
    pub index: f64,
}

/// Numerical settings for Q-value and index computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSolver {
    pub beta: DiscountFactor,
    pub reward: RewardConvention,
    /// Max-norm tolerance between successive value-iteration sweeps.
    pub vi_tol: f64,
    pub max_sweeps: usize,
    /// Bisection tolerance on the subsidy.
    pub index_tol: f64,
}

impl Default for IndexSolver {
    fn default() -> Self {
        Self::new(DiscountFactor::DEFAULT)
    }
}

impl IndexSolver {
    pub fn new(beta: DiscountFactor) -> Self {
        Self {
            beta,
            reward: REWARD_CONVENTION,
            vi_tol: DEFAULT_VI_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            index_tol: DEFAULT_INDEX_TOL,
        }
    }

    pub fn with_index_tol(mut self, tol: f64) -> Self {
        self.index_tol = tol;
        // keep value-iteration noise well below the bisection resolution
        self.vi_tol = self.vi_tol.min(tol * 1e-2);
        self
    }

    pub fn with_reward(mut self, reward: RewardConvention) -> Self {
        self.reward = reward;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.vi_tol.is_nan()
            || self.vi_tol <= 0.0
            || self.index_tol.is_nan()
            || self.index_tol <= 0.0
        {
            return Err(invalid("tolerances must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps must be at least 1"));
        }
        Ok(())
    }

    fn reward(&self, model: &TransitionModel, state: u8, action: u8) -> f64 {
        match self.reward {
            RewardConvention::CurrentState => f64::from(state),
            RewardConvention::NextState => model.p(state, action),
        }
    }

    /// Value iteration from `Q = 0` until successive sweeps agree within `vi_tol`.
    pub fn q_values(&self, model: &TransitionModel, lambda: f64) -> Result<QTable> {
        self.validate()?;
        if !lambda.is_finite() {
            return Err(invalid(format!("subsidy {lambda} is not finite")));
        }
        let beta = self.beta.get();
        let mut base = [[0.0; 2]; 2];
        for s in STATES {
            for a in ACTIONS {
                let subsidy = if a == 0 { lambda } else { 0.0 };
                base[s as usize][a as usize] = self.reward(model, s, a) + subsidy;
            }
        }

        let mut q = [[0.0f64; 2]; 2];
        let mut residual = f64::INFINITY;
        for sweep in 1..=self.max_sweeps {
            let v0 = q[0][0].max(q[0][1]);
            let v1 = q[1][0].max(q[1][1]);
            let mut next = [[0.0; 2]; 2];
            residual = 0.0;
            for s in STATES {
                for a in ACTIONS {
                    let up = model.p(s, a);
                    let cell = base[s as usize][a as usize] + beta * ((1.0 - up) * v0 + up * v1);
                    residual = f64::max(residual, (cell - q[s as usize][a as usize]).abs());
                    next[s as usize][a as usize] = cell;
                }
            }
            q = next;
            if residual < self.vi_tol {
                return Ok(QTable {
                    q,
                    lambda,
                    sweeps: sweep,
                });
            }
        }
        Err(Error::NotConverged {
            sweeps: self.max_sweeps,
            residual,
        })
    }

    /// Smallest subsidy at which the passive and active actions tie in `state`.
    pub fn index(&self, model: &TransitionModel, state: u8) -> Result<f64> {
        self.validate()?;
        if state > 1 {
            return Err(invalid(format!("state {state} is not 0 or 1")));
        }
        let bound = self.beta.horizon();
        let gap = |lambda: f64| -> Result<f64> {
            Ok(self.q_values(model, lambda)?.passive_advantage(state))
        };

        let (mut lo, mut hi) = (-bound, bound);
        let (at_lo, at_hi) = (gap(lo)?, gap(hi)?);
        if at_lo == 0.0 {
            return Ok(lo);
        }
        if !(at_lo < 0.0 && at_hi >= 0.0) {
            return Err(Error::BracketFailure {
                state,
                low: lo,
                high: hi,
                at_low: at_lo,
                at_high: at_hi,
            });
        }

        // Invariant: gap(lo) < 0 <= gap(hi).
        let mut at_hi = at_hi;
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= self.index_tol && at_hi <= self.index_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = gap(mid)?;
            if g >= 0.0 {
                hi = mid;
                at_hi = g;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub fn entry(&self, arm_id: ArmId, model: &TransitionModel, state: u8) -> Result<WhittleEntry> {
        let index = self.index(model, state).map_err(|e| Error::Arm {
            arm: arm_id,
            source: Box::new(e),
        })?;
        Ok(WhittleEntry {
            arm_id,
            state,
            index,
        })
    }

    /// Indices for both states, `[W(0), W(1)]`.
    pub fn index_pair(&self, model: &TransitionModel) -> Result<[f64; 2]> {
        Ok([self.index(model, 0)?, self.index(model, 1)?])
    }
}

/// Fixed point of the subsidised Bellman equation, iterated to `tol`.
pub fn q_values_with_subsidy(
    model: &TransitionModel,
    lambda: f64,
    beta: DiscountFactor,
    tol: f64,
) -> Result<QTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    let solver = IndexSolver {
        vi_tol: tol,
        ..IndexSolver::new(beta)
    };
    solver.q_values(model, lambda)
}

/// Whittle index of `state`, resolved by bisection to within `tol`.
pub fn whittle_index(
    model: &TransitionModel,
    state: u8,
    beta: DiscountFactor,
    tol: f64,
) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    IndexSolver::new(beta)
        .with_index_tol(tol)
        .index(model, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn beta(b: f64) -> DiscountFactor {
        DiscountFactor::new(b).unwrap()
    }

    fn switch_model() -> TransitionModel {
        // passive always drops to 0, active always lifts to 1
        TransitionModel::new(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn myopic_q_difference_is_the_subsidy() {
        let m = TransitionModel::new(0.2, 0.6, 0.7, 0.9).unwrap();
        let q = q_values_with_subsidy(&m, 0.3, beta(0.0), 1e-9).unwrap();
        for s in STATES {
            assert_abs_diff_eq!(q.passive_advantage(s), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_actions_give_equal_q() {
        let m = TransitionModel::new(0.3, 0.8, 0.3, 0.8).unwrap();
        let q = q_values_with_subsidy(&m, 0.0, beta(0.5), 1e-9).unwrap();
        for s in STATES {
            assert_eq!(q.get(s, 0), q.get(s, 1));
        }
    }

    #[test]
    fn switch_model_q_matches_golden_values() {
        // golden values from an independent 10^4-sweep value iteration
        let q = q_values_with_subsidy(&switch_model(), 0.0, beta(0.5), 1e-12).unwrap();
        assert_abs_diff_eq!(q.get(0, 0), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(q.get(0, 1), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.get(1, 0), 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(q.get(1, 1), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn q_rejects_bad_arguments() {
        let m = switch_model();
        assert!(q_values_with_subsidy(&m, f64::NAN, beta(0.5), 1e-6).is_err());
        assert!(q_values_with_subsidy(&m, f64::INFINITY, beta(0.5), 1e-6).is_err());
        assert!(q_values_with_subsidy(&m, 0.0, beta(0.5), 0.0).is_err());
        assert!(whittle_index(&m, 0, beta(0.5), -1.0).is_err());
        assert!(whittle_index(&m, 2, beta(0.5), 1e-4).is_err());
    }

    #[test]
    fn q_respects_magnitude_bound() {
        let m = TransitionModel::new(0.9, 0.95, 0.99, 1.0).unwrap();
        for &lambda in &[-3.0, 0.0, 2.5] {
            let b = beta(0.9);
            let q = q_values_with_subsidy(&m, lambda, b, 1e-9).unwrap();
            let cap = (1.0 + f64::abs(lambda)) * b.horizon();
            assert!(q.q.iter().flatten().all(|v| v.abs() <= cap));
        }
    }

    #[test]
    fn myopic_index_is_exactly_zero() {
        let m = TransitionModel::new(0.2, 0.6, 0.7, 0.9).unwrap();
        for s in STATES {
            assert_eq!(whittle_index(&m, s, beta(0.0), 1e-4).unwrap(), 0.0);
        }
    }

    #[test]
    fn identical_actions_index_is_zero() {
        let m = TransitionModel::new(0.35, 0.75, 0.35, 0.75).unwrap();
        for s in STATES {
            assert_eq!(whittle_index(&m, s, beta(0.9), 1e-4).unwrap(), 0.0);
        }
    }

    #[test]
    fn switch_model_index_matches_grid_search() {
        // grid search over [-2, 2] with step 1e-4 puts the tie at 0.5 for both states
        for s in STATES {
            let w = whittle_index(&switch_model(), s, beta(0.5), 1e-4).unwrap();
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-4);
            let q = q_values_with_subsidy(&switch_model(), w, beta(0.5), 1e-9).unwrap();
            assert!(q.passive_advantage(s).abs() <= 1e-4);
        }
    }

    #[test]
    fn next_state_reward_is_supported() {
        let m = TransitionModel::new(0.2, 0.6, 0.7, 0.9).unwrap();
        let solver = IndexSolver::new(beta(0.0)).with_reward(RewardConvention::NextState);
        // myopic: passive gains p(s,0) + lambda, active gains p(s,1)
        let w0 = solver.index(&m, 0).unwrap();
        assert_abs_diff_eq!(w0, 0.5, epsilon = 1e-4);
        let w1 = solver.index(&m, 1).unwrap();
        assert_abs_diff_eq!(w1, 0.3, epsilon = 1e-4);
    }

    #[test]
    fn non_convergence_is_reported() {
        let solver = IndexSolver {
            max_sweeps: 3,
            ..IndexSolver::new(beta(0.99))
        };
        let m = TransitionModel::new(0.5, 0.5, 0.5, 0.5).unwrap();
        assert!(matches!(
            solver.q_values(&m, 0.0),
            Err(Error::NotConverged { sweeps: 3, .. })
        ));
    }

    #[test]
    fn arm_errors_carry_the_arm_id() {
        let solver = IndexSolver {
            max_sweeps: 1,
            ..IndexSolver::new(beta(0.9))
        };
        let m = TransitionModel::new(0.5, 0.5, 0.5, 0.5).unwrap();
        match solver.entry(ArmId(42), &m, 0) {
            Err(Error::Arm { arm, .. }) => assert_eq!(arm, ArmId(42)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
