//! The purely random selection baseline.
//!
//! A policy that orders arms by a uniformly random permutation and acts on
//! its first `k` has expected top-k footrule error
//!
//! ```text
//! E[E^s] = 1/2 - k/(2n) + (k^2 - 1)/(3n^2)
//! ```
//!
//! and, for `k <= 200` and `n >= 3000`, standard deviation at most
//! `1 / (2 sqrt(3k))`. [`sigma_multiples`] expresses an observed error as a
//! number of those standard deviations below the random expectation.

use crate::error::{invalid, Result};
use crate::metrics::footrule_terms;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest budget for which the standard-deviation bound is proven.
pub const BOUND_MAX_K: usize = 200;
/// Smallest cohort for which the standard-deviation bound is proven.
pub const BOUND_MIN_N: usize = 3000;

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// Closed-form expected footrule error of the random policy.
pub fn expected_random_error(n: usize, k: usize) -> Result<f64> {
    check_nk(n, k)?;
    let (n, k) = (n as f64, k as f64);
    Ok(0.5 - k / (2.0 * n) + (k * k - 1.0) / (3.0 * n * n))
}

/// Upper bound on the standard deviation, flagged by whether it is proven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdBound {
    pub bound: f64,
    pub valid: bool,
}

/// `1 / (2 sqrt(3k))`, valid only when `k <= 200` and `n >= 3000`.
pub fn random_error_std_bound(n: usize, k: usize) -> Result<StdBound> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    Ok(StdBound {
        bound: 1.0 / (2.0 * (3.0 * k as f64).sqrt()),
        valid: k <= BOUND_MAX_K && n >= BOUND_MIN_N,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub n: usize,
    pub k: usize,
    pub expected_error: f64,
    pub std_bound: f64,
    pub bound_valid: bool,
}

impl BaselineStats {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let expected_error = expected_random_error(n, k)?;
        let StdBound { bound, valid } = random_error_std_bound(n, k)?;
        Ok(Self {
            n,
            k,
            expected_error,
            std_bound: bound,
            bound_valid: valid,
        })
    }
}

/// `(expected - observed) / bound`.
pub fn sigma_multiple(expected: f64, bound: f64, observed: f64) -> Result<f64> {
    if bound.is_nan() || bound <= 0.0 || !expected.is_finite() || !observed.is_finite() {
        return Err(invalid(
            "sigma multiple needs finite errors and a positive bound",
        ));
    }
    Ok((expected - observed) / bound)
}

/// Bound-standard-deviations by which `observed_error` beats the random baseline.
pub fn sigma_multiples(observed_error: f64, n: usize, k: usize) -> Result<f64> {
    let stats = BaselineStats::new(n, k)?;
    sigma_multiple(stats.expected_error, stats.std_bound, observed_error)
}

/// Sample mean and standard deviation of simulated errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single trial.
    pub std: f64,
}

/// Draws the first `k` entries of a uniform permutation of `1..=n`.
///
/// `scratch` must hold the identity permutation on entry and holds it again
/// on return; only the touched prefix is swapped, so each draw costs O(k).
pub(crate) fn random_prefix(
    rng: &mut impl Rng,
    scratch: &mut [usize],
    k: usize,
    out: &mut Vec<usize>,
) {
    let n = scratch.len();
    out.clear();
    let mut swaps = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.gen_range(i..n);
        scratch.swap(i, j);
        swaps.push(j);
        out.push(scratch[i]);
    }
    for (i, &j) in swaps.iter().enumerate().rev() {
        scratch.swap(i, j);
    }
}

/// Simulates the random policy against a fixed observed order.
///
/// With the observed ranking taken as the identity, the observed position of
/// the i-th randomly chosen arm is its label, so each trial needs only the
/// first `k` draws of a permutation. Reduction is sequential (Welford), so
/// the result depends only on `seed`.
pub fn monte_carlo_random_error(
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_nk(n, k)?;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch: Vec<usize> = (1..=n).collect();
    let mut prefix = Vec::with_capacity(k);

    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for t in 1..=trials {
        random_prefix(&mut rng, &mut scratch, k, &mut prefix);
        let err = footrule_terms(&prefix, n).overall;
        let delta = err - mean;
        mean += delta / t as f64;
        m2 += delta * (err - mean);
    }
    let std = if trials > 1 {
        (m2 / (trials - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate { trials, mean, std })
}
