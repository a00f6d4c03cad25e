//! Prediction-quality metrics.
//!
//! Two families live here:
//!
//! * per-arm transition-probability errors (RMSE and MAE over the four
//!   self-transition probabilities), and
//! * decision-focused errors on the top-k of the predicted Whittle ranking:
//!   absolute and normalised index differences, the top-k Kendall tau
//!   distance and the top-k Spearman footrule.
//!
//! Rank positions are 1-based throughout. The top-k Kendall variant counts
//! discordant pairs among the predicted top-k only, normalised by
//! `n(n-1)/2`; it is blind to where the top-k land in the observed order.
//! The footrule variant averages `|i - O(s_i)| / n` over the predicted
//! top-k and does not share that blind spot.

use crate::error::{invalid, Result};
use crate::model::{TransitionModel, ACTIONS, STATES};
pub use crate::ranking::Ranking;
use serde::{Deserialize, Serialize};

pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_EPSILON: f64 = 1e-9;

fn self_transition_diffs(predicted: &TransitionModel, observed: &TransitionModel) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut i = 0;
    for s in STATES {
        for a in ACTIONS {
            out[i] = predicted.self_transition(s, a) - observed.self_transition(s, a);
            i += 1;
        }
    }
    out
}

/// Root mean square error over the four self-transition probabilities.
pub fn rmse_error(predicted: &TransitionModel, observed: &TransitionModel) -> f64 {
    let d = self_transition_diffs(predicted, observed);
    (d.iter().map(|x| x * x).sum::<f64>() / 4.0).sqrt()
}

/// Mean absolute error over the four self-transition probabilities.
pub fn mae_error(predicted: &TransitionModel, observed: &TransitionModel) -> f64 {
    let d = self_transition_diffs(predicted, observed);
    d.iter().map(|x| x.abs()).sum::<f64>() / 4.0
}

fn check_lengths(predicted: &[f64], observed: &[f64]) -> Result<()> {
    if predicted.len() != observed.len() {
        return Err(invalid(format!(
            "index lists differ in length: {} predicted vs {} observed",
            predicted.len(),
            observed.len()
        )));
    }
    if predicted.is_empty() {
        return Err(invalid("index lists are empty"));
    }
    Ok(())
}

/// Mean absolute difference of predicted and observed indices over the top-k arms.
pub fn abs_wi_error(predicted_wi: &[f64], observed_wi: &[f64]) -> Result<f64> {
    check_lengths(predicted_wi, observed_wi)?;
    let total: f64 = predicted_wi
        .iter()
        .zip(observed_wi)
        .map(|(p, o)| (p - o).abs())
        .sum();
    Ok(total / predicted_wi.len() as f64)
}

/// Result of [`norm_wi_error`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedError {
    pub value: f64,
    pub per_arm: Vec<f64>,
    /// Positions (0-based, within the top-k) whose predicted index had
    /// magnitude below epsilon and was clamped.
    pub clamped: Vec<usize>,
}

/// Mean relative index difference, with `|WI^p|` clamped below by `epsilon`.
pub fn norm_wi_error(
    predicted_wi: &[f64],
    observed_wi: &[f64],
    epsilon: f64,
) -> Result<NormalizedError> {
    check_lengths(predicted_wi, observed_wi)?;
    if epsilon.is_nan() || epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(invalid(format!("epsilon {epsilon} must be positive")));
    }
    let mut clamped = Vec::new();
    let per_arm: Vec<f64> = predicted_wi
        .iter()
        .zip(observed_wi)
        .enumerate()
        .map(|(i, (p, o))| {
            let scale = p.abs();
            if scale < epsilon {
                clamped.push(i);
            }
            (p - o).abs() / scale.max(epsilon)
        })
        .collect();
    let value = per_arm.iter().sum::<f64>() / per_arm.len() as f64;
    Ok(NormalizedError {
        value,
        per_arm,
        clamped,
    })
}

fn check_rankings(predicted: &Ranking, observed: &Ranking, k: usize) -> Result<()> {
    if !predicted.same_arms(observed) {
        return Err(invalid(
            "predicted and observed rankings cover different arms",
        ));
    }
    if k == 0 || k > predicted.len() {
        return Err(invalid(format!(
            "k = {k} must lie in 1..={}",
            predicted.len()
        )));
    }
    Ok(())
}

/// Discordant pairs among the predicted top-k, normalised by `n(n-1)/2`.
pub fn kendall_topk(predicted: &Ranking, observed: &Ranking, k: usize) -> Result<f64> {
    check_rankings(predicted, observed, k)?;
    let n = predicted.len();
    if n < 2 {
        return Ok(0.0);
    }
    let positions: Vec<usize> = predicted
        .top_k(k)
        .iter()
        .map(|&id| observed.rank(id).expect("checked same arms"))
        .collect();
    let discordant = count_inversions(&positions);
    Ok(2.0 * discordant as f64 / (n as f64 * (n as f64 - 1.0)))
}

/// Number of pairs `i < j` with `v[i] > v[j]`, by merge sort.
fn count_inversions(v: &[usize]) -> u64 {
    fn sort(v: &mut [usize], buf: &mut Vec<usize>) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut inv = sort(&mut v[..mid], buf) + sort(&mut v[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[i] <= v[j] {
                buf.push(v[i]);
                i += 1;
            } else {
                inv += (mid - i) as u64;
                buf.push(v[j]);
                j += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..n]);
        v.copy_from_slice(buf);
        inv
    }
    let mut work = v.to_vec();
    sort(&mut work, &mut Vec::with_capacity(v.len()))
}

/// Top-k Spearman footrule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootruleError {
    pub overall: f64,
    /// `|i - O(s_i)| / n` for the i-th predicted arm.
    pub per_arm: Vec<f64>,
}

/// Footrule terms given the observed (1-based) positions of the predicted top-k.
pub fn footrule_terms(observed_positions: &[usize], n: usize) -> FootruleError {
    let nf = n as f64;
    let per_arm: Vec<f64> = observed_positions
        .iter()
        .enumerate()
        .map(|(i, &pos)| (i + 1).abs_diff(pos) as f64 / nf)
        .collect();
    // one rounding from the exact integer total
    let total: usize = observed_positions
        .iter()
        .enumerate()
        .map(|(i, &pos)| (i + 1).abs_diff(pos))
        .sum();
    let overall = if per_arm.is_empty() {
        0.0
    } else {
        total as f64 / (per_arm.len() as f64 * nf)
    };
    FootruleError { overall, per_arm }
}

/// Mean normalised rank shift of the predicted top-k within the observed order.
pub fn spearman_topk(predicted: &Ranking, observed: &Ranking, k: usize) -> Result<FootruleError> {
    check_rankings(predicted, observed, k)?;
    let positions: Vec<usize> = predicted
        .top_k(k)
        .iter()
        .map(|&id| observed.rank(id).expect("checked same arms"))
        .collect();
    Ok(footrule_terms(&positions, predicted.len()))
}

/// Equal-width histogram over `[0, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Per-arm values of one metric with their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub k: Option<usize>,
    pub n: usize,
    pub mean: f64,
    /// Lower-middle element for even counts.
    pub median: f64,
    pub per_arm: Vec<f64>,
    pub histogram: Histogram,
}

impl MetricReport {
    pub fn labeled(mut self, metric: impl Into<String>, k: Option<usize>, n: usize) -> Self {
        self.metric = metric.into();
        self.k = k;
        self.n = n;
        self
    }
}

/// Mean, lower median and histogram of non-negative values.
pub fn summarize(values: &[f64], bins: usize) -> Result<MetricReport> {
    if values.is_empty() {
        return Err(invalid("cannot summarise an empty list"));
    }
    if bins == 0 {
        return Err(invalid("histogram needs at least one bin"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(invalid(format!(
            "value {v} is not a finite non-negative error"
        )));
    }

    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];

    let max = sorted[sorted.len() - 1];
    let width = max / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| width * i as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let bin = if width > 0.0 {
            ((v / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }

    Ok(MetricReport {
        metric: String::new(),
        k: None,
        n: values.len(),
        mean,
        median,
        per_arm: values.to_vec(),
        histogram: Histogram { edges, counts },
    })
}
