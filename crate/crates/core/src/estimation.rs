//! Observed transition probabilities from trajectories.
//!
//! Per-arm empirical estimates are reliable for passive transitions but
//! active ones are usually missing: most arms receive few or no
//! interventions. Missing active cells are filled in three steps:
//!
//! 1. cluster arms on their passive point `(p(0,0), p(1,0))`,
//! 2. pool the transition counts of every arm in a cluster,
//! 3. give each arm's missing active cells the pooled cluster estimate.
//!
//! Cells an arm can estimate from its own data are never overwritten.

use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeans, DEFAULT_MAX_ITERS};
use crate::model::{ArmId, TransitionModel, ACTIONS, STATES};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign};

pub const DEFAULT_NUM_CLUSTERS: usize = 20;

/// One observed week: `(state, action, next_state)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: u8,
    pub action: u8,
    pub next_state: u8,
}

impl Transition {
    pub fn new(state: u8, action: u8, next_state: u8) -> Self {
        Self {
            state,
            action,
            next_state,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub arm_id: ArmId,
    pub steps: Vec<Transition>,
}

/// Counts of `(s, a, s')` triples, indexed `[s][a][s']`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub counts: [[[u64; 2]; 2]; 2],
}

impl TransitionCounts {
    #[inline]
    pub fn get(&self, state: u8, action: u8, next: u8) -> u64 {
        self.counts[state as usize][action as usize][next as usize]
    }

    /// Observations of `(state, action)`.
    #[inline]
    pub fn support(&self, state: u8, action: u8) -> u64 {
        self.get(state, action, 0) + self.get(state, action, 1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    pub fn record(&mut self, t: Transition) {
        self.counts[t.state as usize][t.action as usize][t.next_state as usize] += 1;
    }
}

impl AddAssign for TransitionCounts {
    fn add_assign(&mut self, rhs: Self) {
        for s in 0..2 {
            for a in 0..2 {
                for n in 0..2 {
                    self.counts[s][a][n] += rhs.counts[s][a][n];
                }
            }
        }
    }
}

impl Add for TransitionCounts {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

/// Tallies a trajectory; states and actions must be 0 or 1.
pub fn count_transitions(log: &TrajectoryLog) -> Result<TransitionCounts> {
    let mut counts = TransitionCounts::default();
    for (row, &t) in log.steps.iter().enumerate() {
        if t.state > 1 || t.action > 1 || t.next_state > 1 {
            return Err(Error::InvalidTransition {
                row,
                message: format!(
                    "arm {}: ({}, {}, {}) is outside {{0,1}}",
                    log.arm_id, t.state, t.action, t.next_state
                ),
            });
        }
        counts.record(t);
    }
    Ok(counts)
}

/// Per-cell estimates; a cell is `None` when its support is below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialModel {
    /// Indexed `[state][action]`.
    pub p: [[Option<f64>; 2]; 2],
    pub support: [[u64; 2]; 2],
    /// Source counts, kept for cluster pooling.
    pub counts: TransitionCounts,
}

impl PartialModel {
    pub fn get(&self, state: u8, action: u8) -> Option<f64> {
        self.p[state as usize][action as usize]
    }

    pub fn has_passive(&self) -> bool {
        self.p[0][0].is_some() && self.p[1][0].is_some()
    }

    /// `(p(0,0), p(1,0))`.
    pub fn passive_point(&self) -> Option<[f64; 2]> {
        Some([self.p[0][0]?, self.p[1][0]?])
    }

    pub fn to_model(&self) -> Option<TransitionModel> {
        let p = self.p;
        TransitionModel::from_array([[p[0][0]?, p[0][1]?], [p[1][0]?, p[1][1]?]]).ok()
    }
}

/// Support thresholds and smoothing for the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    /// Minimum per-arm observations for a passive cell.
    pub passive_min_support: u64,
    /// Minimum per-arm observations for an active cell.
    pub active_min_support: u64,
    /// Minimum pooled cluster observations for an imputed active cell.
    pub pooled_min_support: u64,
    pub num_clusters: usize,
    pub max_iters: usize,
    /// Laplace pseudo-count added to both outcomes of every present cell.
    pub smoothing: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            passive_min_support: 1,
            active_min_support: 1,
            pooled_min_support: 1,
            num_clusters: DEFAULT_NUM_CLUSTERS,
            max_iters: DEFAULT_MAX_ITERS,
            smoothing: 0.0,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passive_min_support == 0
            || self.active_min_support == 0
            || self.pooled_min_support == 0
        {
            return Err(invalid("support thresholds must be at least 1"));
        }
        if self.num_clusters == 0 {
            return Err(invalid("num_clusters must be at least 1"));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(invalid("smoothing must be finite and >= 0"));
        }
        Ok(())
    }
}

fn estimate(c1: u64, support: u64, smoothing: f64) -> f64 {
    (c1 as f64 + smoothing) / (support as f64 + 2.0 * smoothing)
}

/// `p(s,a) = count(s,a,1) / support(s,a)` where `support >= min_support`.
///
/// A `min_support` of 0 is treated as 1.
pub fn empirical_model(counts: &TransitionCounts, min_support: u64) -> PartialModel {
    empirical_model_with(
        counts,
        &EstimationConfig {
            passive_min_support: min_support.max(1),
            active_min_support: min_support.max(1),
            ..EstimationConfig::default()
        },
    )
}

/// As [`empirical_model`], with separate passive/active thresholds and smoothing.
pub fn empirical_model_with(counts: &TransitionCounts, config: &EstimationConfig) -> PartialModel {
    let mut p = [[None; 2]; 2];
    let mut support = [[0; 2]; 2];
    for s in STATES {
        for a in ACTIONS {
            let n = counts.support(s, a);
            support[s as usize][a as usize] = n;
            let threshold = if a == 0 {
                config.passive_min_support
            } else {
                config.active_min_support
            };
            if n >= threshold.max(1) {
                p[s as usize][a as usize] =
                    Some(estimate(counts.get(s, a, 1), n, config.smoothing));
            }
        }
    }
    PartialModel {
        p,
        support,
        counts: *counts,
    }
}

/// An arm's partial estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedArm {
    pub arm_id: ArmId,
    pub model: PartialModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub requested_clusters: usize,
    /// Clusters actually formed (at most the number of distinct passive points).
    pub num_clusters: usize,
    pub arm_ids: Vec<ArmId>,
    /// Cluster of each arm, aligned with `arm_ids`.
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub pooled: Vec<TransitionCounts>,
    /// Pooled `[p(0,1), p(1,1)]` per cluster, `None` without observations.
    pub active: Vec<[Option<f64>; 2]>,
    pub inertia_history: Vec<f64>,
    pub seed: u64,
}

impl ClusterAssignment {
    pub fn cluster_of(&self, arm: ArmId) -> Option<usize> {
        self.arm_ids
            .iter()
            .position(|&a| a == arm)
            .map(|i| self.labels[i])
    }
}

/// k-means on the passive points of `arms`; every arm needs both passive cells.
pub fn cluster_passive(
    arms: &[ObservedArm],
    num_clusters: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterAssignment> {
    if num_clusters == 0 {
        return Err(invalid("num_clusters must be at least 1"));
    }
    let missing: Vec<ArmId> = arms
        .iter()
        .filter(|a| !a.model.has_passive())
        .map(|a| a.arm_id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPassive(missing));
    }
    let points: Vec<[f64; 2]> = arms
        .iter()
        .map(|a| a.model.passive_point().expect("checked"))
        .collect();
    let km = kmeans(&points, num_clusters, seed, max_iters)?;

    let mut pooled = vec![TransitionCounts::default(); km.k()];
    for (arm, &label) in arms.iter().zip(&km.labels) {
        pooled[label] += arm.model.counts;
    }
    let active = pooled
        .iter()
        .map(|c| {
            let cell = |s: u8| {
                let n = c.support(s, 1);
                (n > 0).then(|| c.get(s, 1, 1) as f64 / n as f64)
            };
            [cell(0), cell(1)]
        })
        .collect();

    Ok(ClusterAssignment {
        requested_clusters: num_clusters,
        num_clusters: km.k(),
        arm_ids: arms.iter().map(|a| a.arm_id).collect(),
        labels: km.labels,
        centroids: km.centroids,
        pooled,
        active,
        inertia_history: km.inertia_history,
        seed,
    })
}

/// A completed model with the cells that were imputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputedModel {
    pub arm_id: ArmId,
    pub model: TransitionModel,
    /// `[state][action]`, true where the value came from the arm's cluster.
    pub imputed: [[bool; 2]; 2],
}

/// Fills each arm's missing active cells from its cluster's pooled counts.
///
/// Fails with [`Error::UnresolvableCell`] when an arm needs a cell its
/// cluster cannot supply with at least `min_support` pooled observations.
pub fn impute_active(
    assignment: &ClusterAssignment,
    arms: &[ObservedArm],
    min_support: u64,
) -> Result<Vec<ImputedModel>> {
    if arms.len() != assignment.arm_ids.len()
        || arms
            .iter()
            .zip(&assignment.arm_ids)
            .any(|(a, id)| a.arm_id != *id)
    {
        return Err(invalid("arms do not match the cluster assignment"));
    }
    let missing: Vec<ArmId> = arms
        .iter()
        .filter(|a| !a.model.has_passive())
        .map(|a| a.arm_id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPassive(missing));
    }

    let min_support = min_support.max(1);
    arms.iter()
        .zip(&assignment.labels)
        .map(|(arm, &cluster)| {
            let mut p = [[0.0; 2]; 2];
            let mut imputed = [[false; 2]; 2];
            for s in STATES {
                p[s as usize][0] = arm.model.get(s, 0).expect("checked");
                p[s as usize][1] = match arm.model.get(s, 1) {
                    Some(v) => v,
                    None => {
                        let pool = &assignment.pooled[cluster];
                        let support = pool.support(s, 1);
                        if support < min_support {
                            return Err(Error::UnresolvableCell {
                                cluster,
                                state: s,
                                support,
                                min_support,
                            });
                        }
                        imputed[s as usize][1] = true;
                        pool.get(s, 1, 1) as f64 / support as f64
                    }
                };
            }
            Ok(ImputedModel {
                arm_id: arm.arm_id,
                model: TransitionModel::from_array(p)?,
                imputed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn log(steps: &[(u8, u8, u8)]) -> TrajectoryLog {
        TrajectoryLog {
            arm_id: ArmId(0),
            steps: steps
                .iter()
                .map(|&(s, a, n)| Transition::new(s, a, n))
                .collect(),
        }
    }

    #[test]
    fn counting() {
        assert_eq!(count_transitions(&log(&[])).unwrap().total(), 0);
        let c = count_transitions(&log(&[(1, 0, 1), (1, 0, 0), (1, 0, 1)])).unwrap();
        assert_eq!(c.get(1, 0, 1), 2);
        assert_eq!(c.get(1, 0, 0), 1);
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn counting_reports_bad_row() {
        match count_transitions(&log(&[(0, 0, 1), (0, 2, 1)])) {
            Err(Error::InvalidTransition { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empirical_estimates() {
        let c = count_transitions(&log(&[(1, 0, 1), (1, 0, 0), (1, 0, 1)])).unwrap();
        let m = empirical_model(&c, 1);
        assert_eq!(m.get(1, 0), Some(2.0 / 3.0));
        assert_eq!(m.get(0, 0), None);
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(1, 1), None);

        let m = empirical_model(&TransitionCounts::default(), 1);
        assert!(m.p.iter().flatten().all(Option::is_none));

        let mut c = TransitionCounts::default();
        c.counts[0][1] = [5, 5];
        assert_eq!(empirical_model(&c, 10).get(0, 1), Some(0.5));
        assert_eq!(empirical_model(&c, 11).get(0, 1), None);
    }

    #[test]
    fn smoothing_pulls_toward_half() {
        let mut c = TransitionCounts::default();
        c.counts[0][0] = [4, 0];
        let cfg = EstimationConfig {
            smoothing: 1.0,
            ..EstimationConfig::default()
        };
        assert_eq!(empirical_model_with(&c, &cfg).get(0, 0), Some(1.0 / 6.0));
        assert_eq!(empirical_model(&c, 1).get(0, 0), Some(0.0));
    }

    fn observed(id: u64, counts: [[[u64; 2]; 2]; 2]) -> ObservedArm {
        ObservedArm {
            arm_id: ArmId(id),
            model: empirical_model(&TransitionCounts { counts }, 1),
        }
    }

    #[test]
    fn cluster_requires_passive_cells() {
        let arms = vec![
            observed(1, [[[3, 1], [0, 0]], [[1, 3], [0, 0]]]),
            observed(2, [[[3, 1], [0, 0]], [[0, 0], [0, 0]]]),
        ];
        match cluster_passive(&arms, 1, 0, 10) {
            Err(Error::MissingPassive(ids)) => assert_eq!(ids, vec![ArmId(2)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_cluster_inherits_pooled_active() {
        // only arm 1 was ever called
        let arms = vec![
            observed(1, [[[3, 1], [1, 3]], [[1, 3], [2, 2]]]),
            observed(2, [[[2, 2], [0, 0]], [[1, 1], [0, 0]]]),
            observed(3, [[[1, 3], [0, 0]], [[3, 1], [0, 0]]]),
        ];
        let asg = cluster_passive(&arms, 1, 0, 50).unwrap();
        assert_eq!(asg.num_clusters, 1);
        assert_eq!(
            asg.pooled[0],
            arms.iter()
                .fold(TransitionCounts::default(), |a, b| a + b.model.counts)
        );
        let out = impute_active(&asg, &arms, 1).unwrap();
        assert_eq!(out[0].imputed, [[false; 2]; 2]);
        for m in &out[1..] {
            assert_eq!(m.model.p(0, 1), 0.75);
            assert_eq!(m.model.p(1, 1), 0.5);
            assert_eq!(m.imputed, [[false, true], [false, true]]);
        }
    }

    #[test]
    fn complete_models_pass_through() {
        let arms = vec![observed(4, [[[1, 3], [2, 2]], [[3, 1], [1, 4]]])];
        let asg = cluster_passive(&arms, 3, 1, 50).unwrap();
        let out = impute_active(&asg, &arms, 1).unwrap();
        assert_eq!(Some(out[0].model), arms[0].model.to_model());
    }

    #[test]
    fn unresolvable_cluster_is_named() {
        let arms = vec![
            observed(1, [[[3, 1], [0, 0]], [[1, 3], [0, 1]]]),
            observed(2, [[[3, 1], [0, 0]], [[1, 3], [0, 0]]]),
        ];
        let asg = cluster_passive(&arms, 1, 0, 50).unwrap();
        match impute_active(&asg, &arms, 1) {
            Err(Error::UnresolvableCell {
                cluster: 0,
                state: 0,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
        match impute_active(&asg, &arms, 2) {
            Err(Error::UnresolvableCell { cluster: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn estimates_converge_on_long_logs() {
        use crate::simulator::unit_uniform;
        use rand::SeedableRng;
        let truth = TransitionModel::new(0.3, 0.8, 0.6, 0.9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut state = 0u8;
        let mut steps = Vec::new();
        for _ in 0..10_000 {
            let action = u8::from(unit_uniform(&mut rng) < 0.5);
            let next = u8::from(unit_uniform(&mut rng) < truth.p(state, action));
            steps.push(Transition::new(state, action, next));
            state = next;
        }
        let est = empirical_model(
            &count_transitions(&TrajectoryLog {
                arm_id: ArmId(0),
                steps,
            })
            .unwrap(),
            1,
        )
        .to_model()
        .unwrap();
        for s in STATES {
            for a in ACTIONS {
                assert!((est.p(s, a) - truth.p(s, a)).abs() < 0.02);
            }
        }
    }

    fn arb_steps() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..50)
    }

    proptest! {
        #[test]
        fn counts_are_additive(a in arb_steps(), b in arb_steps()) {
            let joined: Vec<_> = a.iter().chain(&b).copied().collect();
            let whole = count_transitions(&log(&joined)).unwrap();
            let parts = count_transitions(&log(&a)).unwrap() + count_transitions(&log(&b)).unwrap();
            prop_assert_eq!(whole, parts);
        }

        #[test]
        fn imputation_keeps_present_cells(
            logs in proptest::collection::vec(arb_steps(), 2..12),
            k in 1usize..4,
        ) {
            // seed every arm with passive data so clustering is defined
            let arms: Vec<ObservedArm> = logs.iter().enumerate().map(|(i, steps)| {
                let mut steps = steps.clone();
                steps.extend([(0, 0, 1), (1, 0, 0), (0, 1, 1), (1, 1, 1)]);
                let c = count_transitions(&log(&steps)).unwrap();
                ObservedArm { arm_id: ArmId(i as u64), model: empirical_model(&c, 1) }
            }).collect();
            let asg = cluster_passive(&arms, k, 0, 50).unwrap();
            let pooled_sum = asg.pooled.iter().fold(TransitionCounts::default(), |a, b| a + *b);
            let member_sum = arms.iter().fold(TransitionCounts::default(), |a, b| a + b.model.counts);
            prop_assert_eq!(pooled_sum, member_sum);
            let out = impute_active(&asg, &arms, 1).unwrap();
            for (arm, m) in arms.iter().zip(&out) {
                for s in STATES {
                    for a in ACTIONS {
                        if let Some(v) = arm.model.get(s, a) {
                            prop_assert_eq!(m.model.p(s, a), v);
                        }
                    }
                }
            }
        }
    }
}
