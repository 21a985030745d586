//! Lloyd's k-means over feature vectors with seeded random-point restarts.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trend::{squared_distance, FeatureVector};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    pub centroids: Vec<FeatureVector>,
    /// Cluster index of each input point, in input order.
    pub assignment: Vec<usize>,
    /// Sum of squared distances of points to their assigned centroid.
    pub sse: f64,
    /// SSE after every assignment step, initial assignment first.
    pub sse_trace: Vec<f64>,
    /// Seed the run was initialized from.
    pub seed: u64,
}

/// Index of the nearest centroid (lowest index on ties) and the squared distance to it.
fn nearest(point: &[f64; 4], centroids: &[[f64; 4]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &[[f64; 4]], centroids: &[[f64; 4]], assignment: &mut [usize], dist: &mut [f64]) -> f64 {
    let mut sse = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, centroids);
        assignment[i] = c;
        dist[i] = d;
        sse += d;
    }
    sse
}

/// Recomputes centroids as member means. An empty cluster is moved onto the
/// point currently farthest from its own centroid.
fn update(points: &[[f64; 4]], assignment: &[usize], centroids: &mut [[f64; 4]]) {
    let k = centroids.len();
    let mut sums = vec![[0.0f64; 4]; k];
    let mut sizes = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        sizes[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p) {
            *s += x;
        }
    }
    for c in 0..k {
        if sizes[c] > 0 {
            let n = sizes[c] as f64;
            centroids[c] = sums[c].map(|s| s / n);
        }
    }
    let mut taken = vec![false; points.len()];
    for c in (0..k).filter(|&c| sizes[c] == 0) {
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(i, p)| (i, squared_distance(p, &centroids[assignment[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            taken[i] = true;
            centroids[c] = points[i];
        }
    }
}

fn run_once(points: &[[f64; 4]], k: usize, seed: u64) -> ClusterResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<[f64; 4]> = index::sample(&mut rng, points.len(), k)
        .into_iter()
        .map(|i| points[i])
        .collect();
    let mut assignment = vec![0usize; points.len()];
    let mut dist = vec![0.0; points.len()];
    let mut sse = assign(points, &centroids, &mut assignment, &mut dist);
    let mut sse_trace = vec![sse];
    let mut next = assignment.clone();
    for _ in 0..MAX_ITERATIONS {
        update(points, &assignment, &mut centroids);
        sse = assign(points, &centroids, &mut next, &mut dist);
        sse_trace.push(sse);
        if next == assignment {
            break;
        }
        core::mem::swap(&mut assignment, &mut next);
    }
    ClusterResult {
        k,
        centroids: centroids.into_iter().map(FeatureVector::from_array).collect(),
        assignment: next,
        sse,
        sse_trace,
        seed,
    }
}

fn validate(points: &[FeatureVector], k: usize, runs: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must be at least 1",
        });
    }
    if runs == 0 {
        return Err(Error::InvalidParameter {
            name: "runs",
            reason: "must be at least 1",
        });
    }
    if points.len() < k {
        return Err(Error::TooFewPoints { points: points.len(), k });
    }
    Ok(())
}

/// Every restart; run `r` is seeded with `seed + r`.
pub fn kmeans_runs(points: &[FeatureVector], k: usize, runs: usize, seed: u64) -> Result<Vec<ClusterResult>> {
    validate(points, k, runs)?;
    let raw: Vec<[f64; 4]> = points.iter().map(|p| p.to_array()).collect();
    Ok((0..runs as u64)
        .map(|r| run_once(&raw, k, seed.wrapping_add(r)))
        .collect())
}

/// The restart with the lowest SSE; the earliest one on ties.
pub fn kmeans(points: &[FeatureVector], k: usize, runs: usize, seed: u64) -> Result<ClusterResult> {
    let results = kmeans_runs(points, k, runs, seed)?;
    Ok(best_run(results))
}

pub fn best_run(results: Vec<ClusterResult>) -> ClusterResult {
    results
        .into_iter()
        .reduce(|best, r| if r.sse < best.sse { r } else { best })
        .expect("at least one run")
}

/// Non-empty clusters as `(index, size)`, largest first, ties by index.
pub fn cluster_size_distribution(result: &ClusterResult) -> Vec<(usize, usize)> {
    let mut sizes = vec![0usize; result.k.max(1)];
    for &c in &result.assignment {
        sizes[c] += 1;
    }
    let mut out: Vec<(usize, usize)> = sizes.into_iter().enumerate().filter(|&(_, n)| n > 0).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(auc: f64, peak: f64) -> FeatureVector {
        FeatureVector {
            auc,
            peak,
            slope: 0.0,
            variance: 0.0,
        }
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let pts = [fv(0.0, 0.0), fv(1.0, 0.0), fv(0.5, 0.9)];
        let r = kmeans(&pts, 1, 3, 7).unwrap();
        assert!((r.centroids[0].auc - 0.5).abs() < 1e-12);
        assert!((r.centroids[0].peak - 0.3).abs() < 1e-12);
        assert_eq!(r.assignment, [0, 0, 0]);
    }

    #[test]
    fn one_cluster_per_point_has_zero_sse() {
        let pts = [fv(0.0, 0.0), fv(1.0, 0.0), fv(0.5, 0.9), fv(0.2, 0.2)];
        let r = kmeans(&pts, 4, 1, 1).unwrap();
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn too_few_points() {
        assert_eq!(kmeans(&[fv(0.0, 0.0)], 2, 1, 0), Err(Error::TooFewPoints { points: 1, k: 2 }));
        assert!(kmeans(&[fv(0.0, 0.0)], 0, 1, 0).is_err());
        assert!(kmeans(&[fv(0.0, 0.0)], 1, 0, 0).is_err());
    }

    #[test]
    fn duplicate_points_leave_no_stuck_loop() {
        let pts = [fv(0.3, 0.3); 6];
        let r = kmeans(&pts, 3, 2, 11).unwrap();
        assert_eq!(r.sse, 0.0);
        assert!(r.sse_trace.len() <= MAX_ITERATIONS + 1);
    }

    #[test]
    fn runs_are_seeded_per_index() {
        let pts: Vec<FeatureVector> = (0..30).map(|i| fv((i % 7) as f64 / 7.0, (i % 5) as f64 / 5.0)).collect();
        let runs = kmeans_runs(&pts, 4, 3, 100).unwrap();
        let again = kmeans_runs(&pts, 4, 1, 102).unwrap();
        assert_eq!(runs[2], again[0]);
        assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [100, 101, 102]);
    }

    #[test]
    fn size_distribution() {
        let r = ClusterResult {
            k: 2,
            centroids: vec![fv(0.0, 0.0), fv(1.0, 1.0)],
            assignment: vec![0, 0, 1],
            sse: 0.0,
            sse_trace: vec![0.0],
            seed: 0,
        };
        assert_eq!(cluster_size_distribution(&r), [(0, 2), (1, 1)]);
        let one = ClusterResult {
            assignment: vec![1, 1, 1],
            ..r
        };
        assert_eq!(cluster_size_distribution(&one), [(1, 3)]);
    }
}
