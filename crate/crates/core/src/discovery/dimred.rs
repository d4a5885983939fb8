use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::DiscoveryError;

/// Reducer settings recorded on every run. `n_neighbors` and `min_dist` only
/// affect neighborhood-preserving reducers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducerParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub target_dim: usize,
}

impl Default for ReducerParams {
    fn default() -> Self {
        ReducerParams {
            n_neighbors: 10,
            min_dist: 0.0,
            target_dim: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    #[default]
    Pca,
    Identity,
}

pub fn reduce_dim(
    vectors: &[Vec<f64>],
    params: &ReducerParams,
    kind: ReducerKind,
) -> Result<Vec<Vec<f64>>, DiscoveryError> {
    if vectors.len() < params.target_dim + 1 {
        return Err(DiscoveryError::TooFewVectors {
            got: vectors.len(),
            need: params.target_dim + 1,
        });
    }
    match kind {
        ReducerKind::Identity => {
            if vectors.iter().any(|v| v.len() != params.target_dim) {
                return Err(DiscoveryError::Dimension(format!(
                    "identity reducer needs {}-dimensional input",
                    params.target_dim
                )));
            }
            Ok(vectors.to_vec())
        }
        ReducerKind::Pca => Ok(pca(vectors, params.target_dim)),
    }
}

/// Projection onto the leading principal components. Uses whichever of the
/// covariance or Gram matrix is smaller; each component's sign is fixed so its
/// largest-magnitude score is positive. Missing components are zero-padded.
pub fn pca(vectors: &[Vec<f64>], target_dim: usize) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, Vec::len);
    let mut x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
    for j in 0..d {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }

    let mut scores: Vec<Vec<f64>> = Vec::new();
    if n <= d {
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        for (lambda, col) in sorted(&eig) {
            if lambda <= 1e-12 || scores.len() == target_dim {
                break;
            }
            let u = eig.eigenvectors.column(col);
            scores.push(u.iter().map(|v| v * lambda.sqrt()).collect());
        }
    } else {
        let cov = x.transpose() * &x;
        let eig = SymmetricEigen::new(cov);
        for (lambda, col) in sorted(&eig) {
            if lambda <= 1e-12 || scores.len() == target_dim {
                break;
            }
            let v = eig.eigenvectors.column(col);
            scores.push((&x * v).iter().copied().collect());
        }
    }
    for s in &mut scores {
        let pivot = s
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() + 1e-12 { v } else { m });
        if pivot < 0.0 {
            s.iter_mut().for_each(|v| *v = -*v);
        }
    }
    (0..n)
        .map(|i| (0..target_dim).map(|c| scores.get(c).map_or(0.0, |s| s[i])).collect())
        .collect()
}

fn sorted(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = eig.eigenvalues.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_leaves_input() {
        let v: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64; 5]).collect();
        assert_eq!(
            reduce_dim(&v, &ReducerParams::default(), ReducerKind::Identity).unwrap(),
            v
        );
    }

    #[test]
    fn too_few_vectors() {
        let v = vec![vec![1.0; 8]; 5];
        assert!(matches!(
            reduce_dim(&v, &ReducerParams::default(), ReducerKind::Pca),
            Err(DiscoveryError::TooFewVectors { got: 5, need: 6 })
        ));
    }

    #[test]
    fn blobs_stay_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v = Vec::new();
        for i in 0..100 {
            let c = if i < 50 { 0.0 } else { 10.0 };
            v.push((0..20).map(|_| c + rng.random_range(-0.5..0.5)).collect::<Vec<f64>>());
        }
        let out = reduce_dim(&v, &ReducerParams::default(), ReducerKind::Pca).unwrap();
        assert!(out.iter().all(|r| r.len() == 5));
        let c0: f64 = out[..50].iter().map(|r| r[0]).sum::<f64>() / 50.0;
        let c1: f64 = out[50..].iter().map(|r| r[0]).sum::<f64>() / 50.0;
        for (i, r) in out.iter().enumerate() {
            let nearer0 = (r[0] - c0).abs() < (r[0] - c1).abs();
            assert_eq!(nearer0, i < 50);
        }
        assert_eq!(
            out,
            reduce_dim(&v, &ReducerParams::default(), ReducerKind::Pca).unwrap()
        );
    }
}
