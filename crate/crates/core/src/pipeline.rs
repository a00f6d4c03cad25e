//! Predicted models plus a trajectory log in, every error metric out.
//!
//! Observed models come from the trajectories: per-arm counts, then passive
//! clustering, then cluster-pooled imputation of missing active cells. Each
//! week both models are ranked by their index at the arm's state that week,
//! and the top-k metrics compare the two orders.

use crate::error::{invalid, Error, Result};
use crate::estimation::{
    cluster_passive, empirical_model_with, impute_active, EstimationConfig, ImputedModel,
    ObservedArm, Transition, TransitionCounts,
};
use crate::io::TrajectoryRow;
use crate::metrics::{
    abs_wi_error, kendall_topk, mae_error, norm_wi_error, rmse_error, spearman_topk, summarize,
    MetricReport, DEFAULT_BINS, DEFAULT_EPSILON,
};
use crate::model::{ArmId, DiscountFactor, TransitionModel, STATES};
use crate::ranking::rank_by_index;
use crate::whittle::{IndexSolver, WhittleEntry, DEFAULT_INDEX_TOL};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_K: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub k: usize,
    pub beta: DiscountFactor,
    pub index_tol: f64,
    /// Seed for the passive-point clustering.
    pub seed: u64,
    pub estimation: EstimationConfig,
    pub bins: usize,
    pub epsilon: f64,
    /// Only the first `window` weeks enter the weekly and cumulative metrics.
    pub window: Option<usize>,
}

impl EvaluateConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            k: DEFAULT_K,
            beta: DiscountFactor::DEFAULT,
            index_tol: DEFAULT_INDEX_TOL,
            seed,
            estimation: EstimationConfig::default(),
            bins: DEFAULT_BINS,
            epsilon: DEFAULT_EPSILON,
            window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.estimation.validate()?;
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.bins == 0 {
            return Err(invalid("bins must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(self.index_tol > 0.0 && self.index_tol.is_finite()) {
            return Err(invalid("index tolerance must be positive"));
        }
        if self.window == Some(0) {
            return Err(invalid("window must be at least 1 week"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub requested_clusters: usize,
    pub num_clusters: usize,
    pub sizes: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub inertia_history: Vec<f64>,
    /// Arms whose passive cells came from the cohort-wide passive pool
    /// because their own trajectories never visited the cell.
    pub passive_filled: Vec<ArmId>,
    /// Active cells filled from cluster pools, across all arms.
    pub imputed_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekMetrics {
    pub week: u64,
    pub n: usize,
    pub k: usize,
    pub abs: MetricReport,
    pub norm: MetricReport,
    /// Top-k arms whose predicted index was below epsilon in magnitude.
    pub norm_clamped: Vec<ArmId>,
    pub kendall: f64,
    pub spearman: MetricReport,
}

/// Weekly per-arm terms pooled over the evaluated weeks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeMetrics {
    pub weeks: usize,
    pub abs: MetricReport,
    pub norm: MetricReport,
    /// One value per week.
    pub kendall: MetricReport,
    pub spearman: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub arms: usize,
    pub weeks_observed: usize,
    pub rmse: MetricReport,
    pub mae: MetricReport,
    pub clustering: ClusteringSummary,
    pub weekly: Vec<WeekMetrics>,
    pub cumulative: CumulativeMetrics,
    #[serde(skip)]
    pub observed: Vec<ImputedModel>,
}

/// Completed observed models and how they were obtained.
pub struct ObservedModels {
    pub models: Vec<ImputedModel>,
    /// Cluster of each model, aligned with `models`.
    pub labels: Vec<usize>,
    pub clustering: ClusteringSummary,
}

fn group_rows(rows: &[TrajectoryRow]) -> Result<BTreeMap<ArmId, BTreeMap<u64, TrajectoryRow>>> {
    let mut by_arm: BTreeMap<ArmId, BTreeMap<u64, TrajectoryRow>> = BTreeMap::new();
    for r in rows {
        if by_arm
            .entry(r.arm_id)
            .or_default()
            .insert(r.week, *r)
            .is_some()
        {
            return Err(invalid(format!(
                "arm {} has two rows for week {}",
                r.arm_id, r.week
            )));
        }
    }
    Ok(by_arm)
}

/// Observed models for every arm in `rows`, in ascending id order.
pub fn observed_models(
    rows: &[TrajectoryRow],
    config: &EstimationConfig,
    seed: u64,
) -> Result<ObservedModels> {
    config.validate()?;
    let by_arm = group_rows(rows)?;
    if by_arm.is_empty() {
        return Err(invalid("trajectory has no rows"));
    }

    let mut arms: Vec<ObservedArm> = by_arm
        .iter()
        .map(|(&arm_id, weeks)| {
            let mut counts = TransitionCounts::default();
            for r in weeks.values() {
                counts.record(Transition::new(r.state, r.action, r.next_state));
            }
            ObservedArm {
                arm_id,
                model: empirical_model_with(&counts, config),
            }
        })
        .collect();

    // an arm that never sat passive in some state borrows the cohort-wide rate
    let pooled = arms
        .iter()
        .fold(TransitionCounts::default(), |acc, a| acc + a.model.counts);
    let mut passive_filled = Vec::new();
    for arm in &mut arms {
        if arm.model.has_passive() {
            continue;
        }
        for s in STATES {
            if arm.model.get(s, 0).is_none() {
                let support = pooled.support(s, 0);
                if support == 0 {
                    return Err(Error::MissingPassive(vec![arm.arm_id]));
                }
                arm.model.p[s as usize][0] = Some(pooled.get(s, 0, 1) as f64 / support as f64);
            }
        }
        passive_filled.push(arm.arm_id);
    }

    let assignment = cluster_passive(&arms, config.num_clusters, seed, config.max_iters)?;
    let models = impute_active(&assignment, &arms, config.pooled_min_support)?;
    let mut sizes = vec![0; assignment.num_clusters];
    for &l in &assignment.labels {
        sizes[l] += 1;
    }
    let imputed_cells = models
        .iter()
        .map(|m| m.imputed.iter().flatten().filter(|&&f| f).count())
        .sum();
    Ok(ObservedModels {
        models,
        labels: assignment.labels,
        clustering: ClusteringSummary {
            requested_clusters: assignment.requested_clusters,
            num_clusters: assignment.num_clusters,
            sizes,
            centroids: assignment.centroids,
            inertia_history: assignment.inertia_history,
            passive_filled,
            imputed_cells,
        },
    })
}

/// Metrics comparing two models' rankings for one week's states.
///
/// `states` pairs each arm with its state; `predicted` and `observed` hold
/// `[index at state 0, index at state 1]` aligned with `states`.
pub fn week_metrics(
    week: u64,
    states: &[(ArmId, u8)],
    predicted: &[[f64; 2]],
    observed: &[[f64; 2]],
    k: usize,
    epsilon: f64,
    bins: usize,
) -> Result<WeekMetrics> {
    let n = states.len();
    if k > n {
        return Err(invalid(format!(
            "week {week}: k = {k} exceeds the {n} arms present"
        )));
    }
    let entries = |pairs: &[[f64; 2]]| -> Vec<WhittleEntry> {
        states
            .iter()
            .zip(pairs)
            .map(|(&(arm_id, state), pair)| WhittleEntry {
                arm_id,
                state,
                index: pair[state as usize],
            })
            .collect()
    };
    let p_entries = entries(predicted);
    let o_entries = entries(observed);
    let p_rank = rank_by_index(&p_entries)?;
    let o_rank = rank_by_index(&o_entries)?;

    let slot: BTreeMap<ArmId, usize> = states
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| (a, i))
        .collect();
    let top = p_rank.top_k(k);
    let wi_p: Vec<f64> = top.iter().map(|a| p_entries[slot[a]].index).collect();
    let wi_o: Vec<f64> = top.iter().map(|a| o_entries[slot[a]].index).collect();

    let abs_terms: Vec<f64> = wi_p.iter().zip(&wi_o).map(|(p, o)| (p - o).abs()).collect();
    let abs_value = abs_wi_error(&wi_p, &wi_o)?;
    let mut abs = summarize(&abs_terms, bins)?.labeled("abs", Some(k), n);
    abs.mean = abs_value;

    let norm = norm_wi_error(&wi_p, &wi_o, epsilon)?;
    let norm_clamped = norm.clamped.iter().map(|&i| top[i]).collect();
    let mut norm_report = summarize(&norm.per_arm, bins)?.labeled("norm", Some(k), n);
    norm_report.mean = norm.value;

    let kendall = kendall_topk(&p_rank, &o_rank, k)?;
    let footrule = spearman_topk(&p_rank, &o_rank, k)?;
    let mut spearman = summarize(&footrule.per_arm, bins)?.labeled("spearman", Some(k), n);
    spearman.mean = footrule.overall;

    Ok(WeekMetrics {
        week,
        n,
        k,
        abs,
        norm: norm_report,
        norm_clamped,
        kendall,
        spearman,
    })
}

/// Runs the whole evaluation.
pub fn evaluate(
    predicted: &[(ArmId, TransitionModel)],
    rows: &[TrajectoryRow],
    config: &EvaluateConfig,
) -> Result<Evaluation> {
    config.validate()?;
    let mut pred_map = BTreeMap::new();
    for (id, m) in predicted {
        if pred_map.insert(*id, *m).is_some() {
            return Err(invalid(format!("arm {id} has two predicted models")));
        }
    }
    let by_arm = group_rows(rows)?;
    if let Some(id) = by_arm.keys().find(|id| !pred_map.contains_key(id)) {
        return Err(invalid(format!(
            "arm {id} has trajectories but no predicted model"
        )));
    }
    if let Some(id) = pred_map.keys().find(|id| !by_arm.contains_key(id)) {
        return Err(invalid(format!(
            "arm {id} has a predicted model but no trajectory"
        )));
    }

    let observed = observed_models(rows, &config.estimation, config.seed)?;
    let arm_ids: Vec<ArmId> = observed.models.iter().map(|m| m.arm_id).collect();

    let mut rmse = Vec::with_capacity(arm_ids.len());
    let mut mae = Vec::with_capacity(arm_ids.len());
    for m in &observed.models {
        let p = &pred_map[&m.arm_id];
        rmse.push(rmse_error(p, &m.model));
        mae.push(mae_error(p, &m.model));
    }
    let n = arm_ids.len();
    let rmse = summarize(&rmse, config.bins)?.labeled("rmse", None, n);
    let mae = summarize(&mae, config.bins)?.labeled("mae", None, n);

    let solver = IndexSolver::new(config.beta).with_index_tol(config.index_tol);
    let mut p_idx = BTreeMap::new();
    let mut o_idx = BTreeMap::new();
    for m in &observed.models {
        let wrap = |e: Error| Error::Arm {
            arm: m.arm_id,
            source: Box::new(e),
        };
        p_idx.insert(
            m.arm_id,
            solver.index_pair(&pred_map[&m.arm_id]).map_err(wrap)?,
        );
        o_idx.insert(m.arm_id, solver.index_pair(&m.model).map_err(wrap)?);
    }

    let mut weeks: BTreeMap<u64, Vec<(ArmId, u8)>> = BTreeMap::new();
    for (&arm, rows) in &by_arm {
        for (&week, r) in rows {
            weeks.entry(week).or_default().push((arm, r.state));
        }
    }
    let weeks_observed = weeks.len();

    let mut weekly = Vec::new();
    for (&week, states) in weeks.iter().take(config.window.unwrap_or(usize::MAX)) {
        let p: Vec<[f64; 2]> = states.iter().map(|(a, _)| p_idx[a]).collect();
        let o: Vec<[f64; 2]> = states.iter().map(|(a, _)| o_idx[a]).collect();
        weekly.push(week_metrics(
            week,
            states,
            &p,
            &o,
            config.k,
            config.epsilon,
            config.bins,
        )?);
    }
    let cumulative = cumulative(&weekly, config.k, n, config.bins)?;

    Ok(Evaluation {
        arms: n,
        weeks_observed,
        rmse,
        mae,
        clustering: observed.clustering,
        weekly,
        cumulative,
        observed: observed.models,
    })
}

fn cumulative(
    weekly: &[WeekMetrics],
    k: usize,
    n: usize,
    bins: usize,
) -> Result<CumulativeMetrics> {
    let pool = |f: fn(&WeekMetrics) -> &MetricReport| -> Vec<f64> {
        weekly
            .iter()
            .flat_map(|w| f(w).per_arm.iter().copied())
            .collect()
    };
    let kendall: Vec<f64> = weekly.iter().map(|w| w.kendall).collect();
    Ok(CumulativeMetrics {
        weeks: weekly.len(),
        abs: summarize(&pool(|w| &w.abs), bins)?.labeled("abs", Some(k), n),
        norm: summarize(&pool(|w| &w.norm), bins)?.labeled("norm", Some(k), n),
        kendall: summarize(&kendall, bins)?.labeled("kendall", Some(k), n),
        spearman: summarize(&pool(|w| &w.spearman), bins)?.labeled("spearman", Some(k), n),
    })
}

pub const WEEKLY_SUMMARY_HEADER: [&str; 8] = [
    "week",
    "abs_mean",
    "abs_median",
    "norm_mean",
    "norm_median",
    "kendall",
    "spearman_mean",
    "spearman_median",
];

/// One row per evaluated week plus a final `cumulative` row.
pub fn weekly_summary_csv(eval: &Evaluation) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(WEEKLY_SUMMARY_HEADER)?;
    for m in &eval.weekly {
        w.write_record([
            m.week.to_string(),
            m.abs.mean.to_string(),
            m.abs.median.to_string(),
            m.norm.mean.to_string(),
            m.norm.median.to_string(),
            m.kendall.to_string(),
            m.spearman.mean.to_string(),
            m.spearman.median.to_string(),
        ])?;
    }
    let c = &eval.cumulative;
    w.write_record([
        "cumulative".to_string(),
        c.abs.mean.to_string(),
        c.abs.median.to_string(),
        c.norm.mean.to_string(),
        c.norm.median.to_string(),
        c.kendall.mean.to_string(),
        c.spearman.mean.to_string(),
        c.spearman.median.to_string(),
    ])?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
