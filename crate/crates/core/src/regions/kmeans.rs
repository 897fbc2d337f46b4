//! Constrained K-means: Lloyd iterations whose assignment step is the exact
//! size-constrained assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::assignment::{constrained_assignment, improve_assignment};
use crate::correspondence::distance_sq;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 50;

/// Outcome of one constrained K-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<u32>,
    pub centroids: Vec<[f64; 3]>,
    /// Objective of each assignment step, measured against the centroids
    /// that step assigned to.
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

/// k-means++ seeding.
pub fn seed_centroids(points: &[[f64; 3]], k: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut nearest: Vec<f64> = points.iter().map(|p| distance_sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(distance_sq(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

pub fn assignment_costs(points: &[[f64; 3]], centroids: &[[f64; 3]]) -> Vec<f64> {
    let mut costs = Vec::with_capacity(points.len() * centroids.len());
    for p in points {
        costs.extend(centroids.iter().map(|c| distance_sq(p, c)));
    }
    costs
}

pub fn centroids_of(points: &[[f64; 3]], labels: &[u32], k: usize) -> Vec<[f64; 3]> {
    let mut sums = vec![[0.0f64; 3]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        let s = &mut sums[l as usize];
        s[0] += p[0];
        s[1] += p[1];
        s[2] += p[2];
        counts[l as usize] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| {
            let n = n.max(1) as f64;
            [s[0] / n, s[1] / n, s[2] / n]
        })
        .collect()
}

/// Clusters `points` into `k` groups whose sizes lie in `[lower, upper]`.
pub fn constrained_kmeans(
    points: &[[f64; 3]],
    k: usize,
    lower: usize,
    upper: usize,
    seed: u64,
) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || lower == 0 || k * lower > n || n > k * upper {
        return Err(Error::Config(format!(
            "cannot split {n} points into {k} non-empty regions sized in [{lower}, {upper}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut labels: Vec<u32> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let costs = assignment_costs(points, &centroids);
        let step = if labels.is_empty() {
            constrained_assignment(&costs, k, lower, upper)?
        } else {
            // The previous labels satisfy the band, so they warm-start the solve.
            improve_assignment(&costs, k, lower, upper, labels.clone())?
        };
        history.push(step.cost);
        if step.labels == labels {
            converged = true;
            break;
        }
        labels = step.labels;
        centroids = centroids_of(points, &labels, k);
    }
    Ok(Clustering {
        labels,
        centroids,
        objective_history: history,
        converged,
    })
}
