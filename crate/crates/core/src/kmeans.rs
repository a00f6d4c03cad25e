//! Seeded k-means (k-means++ initialisation, Lloyd iterations) on 2-D points.

use crate::error::{invalid, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_MAX_ITERS: usize = 300;
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    /// Requested cluster count before reduction to the number of distinct points.
    pub requested: usize,
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn distinct_count(points: &[[f64; 2]]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| (p[0].to_bits(), p[1].to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn init_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut pick = points.len() - 1;
        if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // rounding can walk off the end; fall back to the last positive weight
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
            }
        }
        let c = points[pick];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }
    centroids
}

/// Clusters `points` into `min(k, #distinct points)` groups.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    if points.is_empty() {
        return Err(invalid("cannot cluster zero points"));
    }
    if k == 0 {
        return Err(invalid("need at least one cluster"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("points must be finite"));
    }
    let effective = k.min(distinct_count(points));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(points, effective, &mut rng);

    let assign = |centroids: &[[f64; 2]], labels: &mut Vec<usize>| -> f64 {
        labels.clear();
        let mut inertia = 0.0;
        for &p in points {
            let (c, d) = nearest(p, centroids);
            labels.push(c);
            inertia += d;
        }
        inertia
    };

    let mut labels = Vec::with_capacity(points.len());
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        inertia_history.push(assign(&centroids, &mut labels));

        let mut sums = vec![[0.0f64; 2]; effective];
        let mut counts = vec![0usize; effective];
        for (&p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        let mut movement = 0.0f64;
        for c in 0..effective {
            // an emptied cluster keeps its centroid
            if counts[c] > 0 {
                let m = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
                movement = movement.max(dist2(m, centroids[c]).sqrt());
                centroids[c] = m;
            }
        }
        if movement < CONVERGENCE_TOL {
            break;
        }
    }
    inertia_history.push(assign(&centroids, &mut labels));

    Ok(KMeans {
        centroids,
        labels,
        inertia_history,
        iterations,
        requested: k,
    })
}
