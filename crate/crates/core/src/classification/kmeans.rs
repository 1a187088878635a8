//! Lloyd's k-means with seeded k-means++ initialization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, squared_distance(point, c)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn init_plus_plus<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Clusters `points` into `k` groups. Stops early once assignments are stable.
/// A cluster that loses all its points keeps its previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iters: usize, seed: u64) -> Result<KMeans> {
    if points.is_empty() {
        return Err(Error::input("k-means needs at least one point"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::Config(format!(
            "k-means with k = {k} on {} point(s)",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::input("k-means points have differing dimensions"));
    }

    let mut rng = seeded_rng(seed);
    let mut centroids = init_plus_plus(points, k, &mut rng);
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeans {
        centroids,
        assignments,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut points = Vec::new();
        for i in 0..10 {
            points.push(vec![0.0 + i as f64 * 0.01, 0.0]);
            points.push(vec![10.0 + i as f64 * 0.01, 10.0]);
        }
        let km = kmeans(&points, 2, 50, 3).unwrap();
        for pair in km.assignments.chunks(2) {
            assert_ne!(pair[0], pair[1]);
        }
        let first = km.assignments[0];
        assert!(km.assignments.iter().step_by(2).all(|&a| a == first));
    }

    #[test]
    fn deterministic_given_seed() {
        let points: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i * 7 % 11) as f64, (i % 5) as f64])
            .collect();
        assert_eq!(
            kmeans(&points, 3, 100, 9).unwrap(),
            kmeans(&points, 3, 100, 9).unwrap()
        );
    }

    #[test]
    fn rejects_bad_k() {
        let points = vec![vec![1.0], vec![2.0]];
        assert!(kmeans(&points, 0, 10, 0).is_err());
        assert!(kmeans(&points, 3, 10, 0).is_err());
        assert!(kmeans(&[], 1, 10, 0).is_err());
    }

    #[test]
    fn identical_points_one_cluster_each() {
        let points = vec![vec![1.0, 1.0]; 4];
        let km = kmeans(&points, 2, 10, 0).unwrap();
        assert_eq!(km.assignments.len(), 4);
    }
}
