//! Synthetic cohorts and week-by-week intervention studies.
//!
//! Each week a policy picks up to `budget_k` arms for an active
//! intervention, then every arm moves to its next state under its *true*
//! model. The Whittle policy ranks arms by the index of their *predicted*
//! model at the current state.
//!
//! Randomness: arm `id` draws its transitions from its own ChaCha8 stream
//! (key = seed, stream = id), one uniform per week whatever the action, so
//! different policies run on the same cohort and seed see the same noise.
//! The random policy has a separate key derived from the seed.

use crate::error::{invalid, Error, Result};
use crate::model::{ArmId, DiscountFactor, TransitionModel};
use crate::ranking::{compare_entries, Ranking};
use crate::whittle::{IndexSolver, WhittleEntry};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

/// Recorded in every study artifact.
pub const RNG_ALGORITHM: &str =
    "chacha8/rand_chacha-0.3/seed_from_u64; arm stream = arm_id; uniform = (next_u64 >> 11) * 2^-53";

const POLICY_KEY_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Uniform double in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub arm_id: ArmId,
    pub true_model: TransitionModel,
    pub predicted_model: TransitionModel,
    /// Order of service under the round-robin policy.
    pub registration_rank: u64,
    pub current_state: u8,
    /// Generating cluster, when the arm came from [`generate_cohort`].
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Whittle,
    Random,
    RoundRobin,
    /// Current standard of care: no interventions.
    Csoc,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Whittle => "whittle",
            Policy::Random => "random",
            Policy::RoundRobin => "round_robin",
            Policy::Csoc => "csoc",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whittle" => Ok(Policy::Whittle),
            "random" => Ok(Policy::Random),
            "round_robin" | "round-robin" => Ok(Policy::RoundRobin),
            "csoc" => Ok(Policy::Csoc),
            other => Err(invalid(format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub weeks: usize,
    pub budget_k: usize,
    pub policy: Policy,
    pub beta: DiscountFactor,
    pub seed: u64,
    /// Random policy only: draw `k` arms with replacement, acting on the
    /// distinct ones.
    #[serde(default)]
    pub with_replacement: bool,
}

impl StudyConfig {
    pub fn new(weeks: usize, budget_k: usize, policy: Policy, seed: u64) -> Self {
        Self {
            weeks,
            budget_k,
            policy,
            beta: DiscountFactor::DEFAULT,
            seed,
            with_replacement: false,
        }
    }

    /// Budget actually spent per week (zero under CSOC).
    pub fn effective_budget(&self) -> usize {
        match self.policy {
            Policy::Csoc => 0,
            _ => self.budget_k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmTransition {
    pub arm_id: ArmId,
    pub state: u8,
    pub action: u8,
    pub next_state: u8,
}

impl ArmTransition {
    /// Engaging to non-engaging.
    pub fn is_drop(&self) -> bool {
        self.state == 1 && self.next_state == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRecord {
    /// 1-based.
    pub week: usize,
    /// Arms acted on, in selection order.
    pub selected: Vec<ArmId>,
    /// One entry per arm, in cohort order.
    pub transitions: Vec<ArmTransition>,
    /// Arms in state 1 after this week's transitions.
    pub engaging_count: usize,
}

impl WeekRecord {
    pub fn drops(&self) -> usize {
        self.transitions.iter().filter(|t| t.is_drop()).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyLog {
    pub weeks: Vec<WeekRecord>,
}

/// Cumulative totals of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTotals {
    pub weeks: usize,
    pub cohort_size: usize,
    pub engaging_weeks: usize,
    pub drops: usize,
    pub service_calls: usize,
    pub weekly_engaging: Vec<usize>,
}

impl StudyLog {
    pub fn cohort_size(&self) -> usize {
        self.weeks.first().map_or(0, |w| w.transitions.len())
    }

    /// Sum over weeks of the engaging count.
    pub fn engaging_weeks(&self) -> usize {
        self.weeks.iter().map(|w| w.engaging_count).sum()
    }

    pub fn drops(&self) -> usize {
        self.weeks.iter().map(WeekRecord::drops).sum()
    }

    pub fn service_calls(&self) -> usize {
        self.weeks
            .iter()
            .flat_map(|w| &w.transitions)
            .filter(|t| t.action == 1)
            .count()
    }

    pub fn totals(&self) -> StudyTotals {
        StudyTotals {
            weeks: self.weeks.len(),
            cohort_size: self.cohort_size(),
            engaging_weeks: self.engaging_weeks(),
            drops: self.drops(),
            service_calls: self.service_calls(),
            weekly_engaging: self.weeks.iter().map(|w| w.engaging_count).collect(),
        }
    }
}

/// One mixture component of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCluster {
    pub weight: f64,
    /// `(p00, p10)`.
    pub passive_center: [f64; 2],
    /// `(p01, p11)`.
    pub active_center: [f64; 2],
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n: usize,
    pub clusters: Vec<CohortCluster>,
    /// Half-width of the uniform noise added to the true model to form the prediction.
    pub prediction_noise: f64,
    pub initial_engaging_fraction: f64,
}

impl CohortSpec {
    /// Three behaviour groups, from rarely to mostly engaging, each helped by calls.
    pub fn synthetic(n: usize) -> Self {
        Self {
            n,
            clusters: vec![
                CohortCluster {
                    weight: 0.4,
                    passive_center: [0.1, 0.4],
                    active_center: [0.35, 0.65],
                    spread: 0.05,
                },
                CohortCluster {
                    weight: 0.35,
                    passive_center: [0.3, 0.75],
                    active_center: [0.5, 0.9],
                    spread: 0.05,
                },
                CohortCluster {
                    weight: 0.25,
                    passive_center: [0.5, 0.93],
                    active_center: [0.6, 0.97],
                    spread: 0.03,
                },
            ],
            prediction_noise: 0.1,
            initial_engaging_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(invalid("cohort spec has no clusters"));
        }
        let total: f64 = self.clusters.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("cluster weights sum to {total}, not 1")));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(c.weight) {
                return Err(invalid(format!(
                    "cluster {i}: weight {} is not a probability",
                    c.weight
                )));
            }
            if !c
                .passive_center
                .iter()
                .chain(&c.active_center)
                .all(|&v| in_unit(v))
            {
                return Err(invalid(format!("cluster {i}: centers must lie in [0,1]")));
            }
            if !(c.spread >= 0.0 && c.spread.is_finite()) {
                return Err(invalid(format!(
                    "cluster {i}: spread {} must be >= 0",
                    c.spread
                )));
            }
        }
        if !(self.prediction_noise >= 0.0 && self.prediction_noise.is_finite()) {
            return Err(invalid("prediction_noise must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.initial_engaging_fraction) {
            return Err(invalid("initial_engaging_fraction must be a probability"));
        }
        Ok(())
    }
}

fn jitter(rng: &mut impl RngCore, center: f64, half_width: f64) -> f64 {
    (center + half_width * (2.0 * unit_uniform(rng) - 1.0)).clamp(0.0, 1.0)
}

/// Draws `spec.n` arms with ids `0..n` and registration order equal to the id.
pub fn generate_cohort(spec: &CohortSpec, seed: u64) -> Result<Vec<Arm>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arms = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let u = unit_uniform(&mut rng);
        let mut acc = 0.0;
        let mut cluster = spec.clusters.len() - 1;
        for (ci, c) in spec.clusters.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                cluster = ci;
                break;
            }
        }
        let c = &spec.clusters[cluster];
        let p00 = jitter(&mut rng, c.passive_center[0], c.spread);
        let p10 = jitter(&mut rng, c.passive_center[1], c.spread);
        let p01 = jitter(&mut rng, c.active_center[0], c.spread);
        let p11 = jitter(&mut rng, c.active_center[1], c.spread);
        let true_model = TransitionModel::new(p00, p10, p01, p11)?;

        let noise = spec.prediction_noise;
        let predicted_model = TransitionModel::new(
            jitter(&mut rng, p00, noise),
            jitter(&mut rng, p10, noise),
            jitter(&mut rng, p01, noise),
            jitter(&mut rng, p11, noise),
        )?;
        let current_state = u8::from(unit_uniform(&mut rng) < spec.initial_engaging_fraction);

        arms.push(Arm {
            arm_id: ArmId(i as u64),
            true_model,
            predicted_model,
            registration_rank: i as u64,
            current_state,
            cluster: Some(cluster),
        });
    }
    Ok(arms)
}

/// A study in progress.
#[derive(Debug)]
pub struct Study {
    arms: Vec<Arm>,
    config: StudyConfig,
    arm_rngs: Vec<ChaCha8Rng>,
    policy_rng: ChaCha8Rng,
    /// Cohort slots sorted by registration order, and the next slot to serve.
    round_robin: (Vec<usize>, usize),
    /// Predicted `[W(0), W(1)]` per slot, for the Whittle policy.
    indices: Vec<[f64; 2]>,
    log: StudyLog,
}

impl Study {
    pub fn new(arms: Vec<Arm>, config: StudyConfig) -> Result<Self> {
        let mut seen = HashSet::with_capacity(arms.len());
        for arm in &arms {
            if !seen.insert(arm.arm_id) {
                return Err(invalid(format!(
                    "arm {} appears twice in cohort",
                    arm.arm_id
                )));
            }
            if arm.current_state > 1 {
                return Err(invalid(format!(
                    "arm {} has state {}",
                    arm.arm_id, arm.current_state
                )));
            }
        }

        let arm_rngs = arms
            .iter()
            .map(|a| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(a.arm_id.0);
                rng
            })
            .collect();
        let policy_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(POLICY_KEY_OFFSET));

        let mut rr: Vec<usize> = (0..arms.len()).collect();
        rr.sort_by_key(|&i| (arms[i].registration_rank, arms[i].arm_id));

        let indices = if config.policy == Policy::Whittle && config.budget_k > 0 {
            let solver = IndexSolver::new(config.beta);
            arms.iter()
                .map(|a| {
                    solver
                        .index_pair(&a.predicted_model)
                        .map_err(|e| Error::Arm {
                            arm: a.arm_id,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };

        Ok(Self {
            arms,
            config,
            arm_rngs,
            policy_rng,
            round_robin: (rr, 0),
            indices,
            log: StudyLog::default(),
        })
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn log(&self) -> &StudyLog {
        &self.log
    }

    pub fn into_log(self) -> StudyLog {
        self.log
    }

    /// Slots to act on this week, in selection order.
    fn select(&mut self) -> Vec<usize> {
        let n = self.arms.len();
        let k = self.config.effective_budget().min(n);
        if k == 0 {
            return Vec::new();
        }
        match self.config.policy {
            Policy::Csoc => Vec::new(),
            Policy::Whittle => {
                let mut entries: Vec<(usize, WhittleEntry)> = self
                    .arms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let state = a.current_state;
                        let index = self.indices[i][state as usize];
                        (
                            i,
                            WhittleEntry {
                                arm_id: a.arm_id,
                                state,
                                index,
                            },
                        )
                    })
                    .collect();
                entries.sort_by(|a, b| compare_entries(&a.1, &b.1));
                entries.into_iter().take(k).map(|(i, _)| i).collect()
            }
            Policy::Random if self.config.with_replacement => {
                let mut seen = HashSet::with_capacity(k);
                let mut chosen = Vec::with_capacity(k);
                for _ in 0..k {
                    let slot = self.policy_rng.gen_range(0..n);
                    if seen.insert(slot) {
                        chosen.push(slot);
                    }
                }
                chosen
            }
            Policy::Random => {
                let mut slots: Vec<usize> = (0..n).collect();
                for i in 0..k {
                    let j = self.policy_rng.gen_range(i..n);
                    slots.swap(i, j);
                }
                slots.truncate(k);
                slots
            }
            Policy::RoundRobin => {
                let (order, cursor) = &mut self.round_robin;
                let chosen = (0..k).map(|i| order[(*cursor + i) % n]).collect();
                *cursor = (*cursor + k) % n;
                chosen
            }
        }
    }

    /// Selects, transitions every arm, and appends the week to the log.
    pub fn step_week(&mut self) -> Result<&WeekRecord> {
        let chosen = self.select();
        let mut active = vec![false; self.arms.len()];
        for &slot in &chosen {
            active[slot] = true;
        }

        let mut transitions = Vec::with_capacity(self.arms.len());
        let mut engaging = 0;
        for (slot, arm) in self.arms.iter_mut().enumerate() {
            let action = u8::from(active[slot]);
            let state = arm.current_state;
            let u = unit_uniform(&mut self.arm_rngs[slot]);
            let next_state = u8::from(u < arm.true_model.p(state, action));
            engaging += usize::from(next_state);
            arm.current_state = next_state;
            transitions.push(ArmTransition {
                arm_id: arm.arm_id,
                state,
                action,
                next_state,
            });
        }

        self.log.weeks.push(WeekRecord {
            week: self.log.weeks.len() + 1,
            selected: chosen.iter().map(|&s| self.arms[s].arm_id).collect(),
            transitions,
            engaging_count: engaging,
        });
        Ok(self.log.weeks.last().expect("just pushed"))
    }
}

/// Runs `config.weeks` weeks on a copy of `arms`.
pub fn run_study(arms: &[Arm], config: &StudyConfig) -> Result<StudyLog> {
    let mut study = Study::new(arms.to_vec(), config.clone())?;
    for _ in 0..config.weeks {
        study.step_week()?;
    }
    Ok(study.into_log())
}

/// Engaging-to-non-engaging transitions avoided relative to the control log.
///
/// With `normalize`, the difference is divided by the number of service
/// calls made in `policy_log`.
pub fn engagement_drops_prevented(
    policy_log: &StudyLog,
    csoc_log: &StudyLog,
    normalize: bool,
) -> Result<f64> {
    if policy_log.weeks.len() != csoc_log.weeks.len() {
        return Err(invalid(format!(
            "logs cover {} and {} weeks",
            policy_log.weeks.len(),
            csoc_log.weeks.len()
        )));
    }
    for (a, b) in policy_log.weeks.iter().zip(&csoc_log.weeks) {
        if a.transitions.len() != b.transitions.len() {
            return Err(invalid(format!(
                "week {}: cohorts of {} and {} arms",
                a.week,
                a.transitions.len(),
                b.transitions.len()
            )));
        }
    }
    let prevented = csoc_log.drops() as f64 - policy_log.drops() as f64;
    if normalize {
        let calls = policy_log.service_calls();
        if calls == 0 {
            return Err(invalid("cannot normalise by zero service calls"));
        }
        Ok(prevented / calls as f64)
    } else {
        Ok(prevented)
    }
}

/// Ordering implied by a week's selection: the selected arms in selection
/// order, then the rest by ascending id.
pub fn selection_ranking(week: &WeekRecord) -> Result<Ranking> {
    Ranking::with_prefix(&week.selected, week.transitions.iter().map(|t| t.arm_id))
}
