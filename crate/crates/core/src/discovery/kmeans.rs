use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DiscoveryError;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster of each point; clusters are numbered by descending size.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

pub fn distinct_points(vectors: &[Vec<f64>]) -> usize {
    vectors
        .iter()
        .map(|v| v.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn plus_plus(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())].clone()];
    let mut d2: Vec<f64> = vectors.iter().map(|v| dist2(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2
            .iter()
            .rposition(|&d| d > 0.0)
            .expect("k does not exceed distinct points");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = vectors[pick].clone();
        for (v, d) in vectors.iter().zip(d2.iter_mut()) {
            *d = d.min(dist2(v, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from k-means++ seeding until assignments stop changing.
pub fn cluster_kmeans(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans, DiscoveryError> {
    if k == 0 {
        return Err(DiscoveryError::Config("k must be at least 1".into()));
    }
    let distinct = distinct_points(vectors);
    if k > distinct {
        return Err(DiscoveryError::TooFewPoints { k, distinct });
    }
    let dim = vectors[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(vectors, k, &mut rng);
    let mut assignments: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(relabel(assignments, centroids)).map(|(assignments, centroids)| KMeans {
        assignments,
        centroids,
        iterations,
    })
}

/// Renumbers clusters by descending size, ties by first member; drops empty ones.
fn relabel(assignments: Vec<usize>, centroids: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>) {
    let k = centroids.len();
    let mut size = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &a) in assignments.iter().enumerate() {
        size[a] += 1;
        first[a] = first[a].min(i);
    }
    let mut order: Vec<usize> = (0..k).filter(|&c| size[c] > 0).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(size[c]), first[c]));
    let mut map = vec![usize::MAX; k];
    for (new, &old) in order.iter().enumerate() {
        map[old] = new;
    }
    (
        assignments.into_iter().map(|a| map[a]).collect(),
        order.into_iter().map(|c| centroids[c].clone()).collect(),
    )
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&m| c2(m)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / c2(n as u64);
    let max = (rows + cols) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_centroid_is_mean() {
        let v = vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]];
        let r = cluster_kmeans(&v, 1, 0).unwrap();
        assert_eq!(r.assignments, [0, 0, 0]);
        assert_eq!(r.centroids, [vec![2.0, 2.0]]);
    }

    #[test]
    fn k_above_distinct_is_error() {
        let v = vec![vec![1.0]; 10];
        assert!(matches!(
            cluster_kmeans(&v, 2, 0),
            Err(DiscoveryError::TooFewPoints { k: 2, distinct: 1 })
        ));
    }

    #[test]
    fn duplicated_dataset_same_centroids() {
        let v: Vec<Vec<f64>> = vec![vec![0.0], vec![0.2], vec![5.0], vec![5.4], vec![9.0]];
        let mut doubled = v.clone();
        doubled.extend(v.clone());
        let a = cluster_kmeans(&v, 2, 3).unwrap();
        let b = cluster_kmeans(&doubled, 2, 3).unwrap();
        let mut ca = a.centroids.clone();
        let mut cb = b.centroids.clone();
        ca.sort_by(|x, y| x[0].total_cmp(&y[0]));
        cb.sort_by(|x, y| x[0].total_cmp(&y[0]));
        for (x, y) in ca.iter().zip(&cb) {
            assert!((x[0] - y[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 1, 0, 1], &[0, 0, 1, 1]) < 0.0);
    }
}
