//! Neighbor graphs, heat-kernel affinities and the scatter matrices built on them.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::kfcm::squared_distance;

/// Within-class and between-class edge sets over sample indices.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NeighborGraphs {
    pub within: Vec<(usize, usize)>,
    pub between: Vec<(usize, usize)>,
}

/// `k` nearest neighbors of every sample (self excluded), nearest first,
/// lower index on equal distance.
pub fn knn_lists(samples: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut d: Vec<(f64, usize)> = samples
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, xj)| (squared_distance(xi, xj), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k, cmp);
                d.truncate(k);
            }
            d.sort_by(cmp);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Within-class edges join mutual k-nearest neighbors with equal labels;
/// between-class edges join pairs where either is among the other's
/// k nearest and the labels differ.
pub fn build_neighbor_graphs(samples: &[Vec<f64>], labels: &[usize], affinity_k: usize) -> Result<NeighborGraphs> {
    check_len(samples.len(), labels.len())?;
    if affinity_k == 0 {
        return Err(Error::config("affinity range must be positive"));
    }
    if affinity_k >= samples.len() {
        return Err(Error::config(format!(
            "affinity range {affinity_k} needs more than {} samples",
            samples.len()
        )));
    }
    let knn = knn_lists(samples, affinity_k);
    let is_nn = |i: usize, j: usize| knn[i].contains(&j);
    let mut pairs = BTreeSet::new();
    for (i, list) in knn.iter().enumerate() {
        for &j in list {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let mut graphs = NeighborGraphs::default();
    for (i, j) in pairs {
        if labels[i] == labels[j] {
            if is_nn(i, j) && is_nn(j, i) {
                graphs.within.push((i, j));
            }
        } else {
            graphs.between.push((i, j));
        }
    }
    Ok(graphs)
}

/// Symmetric nonnegative weights on an edge list; zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAffinity {
    pub size: usize,
    /// `(i, j, w)` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl SparseAffinity {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.size, self.size);
        for &(i, j, v) in &self.edges {
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        w
    }

    /// Diagonal of the degree matrix: `d_ii = Σ_j w_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.size];
        for &(i, j, v) in &self.edges {
            d[i] += v;
            d[j] += v;
        }
        d
    }
}

/// Heat-kernel weights on both graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityPair {
    pub within: SparseAffinity,
    pub between: SparseAffinity,
    pub heat_t: f64,
}

/// Mean squared edge length over both graphs; 1.0 if there are no edges or all have zero length.
pub fn default_heat_t(graphs: &NeighborGraphs, samples: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = graphs
        .within
        .iter()
        .chain(&graphs.between)
        .map(|&(i, j)| squared_distance(&samples[i], &samples[j]))
        .collect();
    let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// `w_ij = exp(−‖x_i − x_j‖² / t)` on edges, zero elsewhere.
pub fn affinity_weights(graphs: &NeighborGraphs, samples: &[Vec<f64>], heat_t: f64) -> Result<AffinityPair> {
    if !(heat_t > 0.0 && heat_t.is_finite()) {
        return Err(Error::config(format!("heat parameter must be positive, got {heat_t}")));
    }
    let weigh = |edges: &[(usize, usize)]| SparseAffinity {
        size: samples.len(),
        edges: edges
            .iter()
            .map(|&(i, j)| (i, j, (-squared_distance(&samples[i], &samples[j]) / heat_t).exp()))
            .collect(),
    };
    Ok(AffinityPair {
        within: weigh(&graphs.within),
        between: weigh(&graphs.between),
        heat_t,
    })
}

pub fn degree_matrix(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
}

/// `X (D − W) Xᵀ` for samples stored as rows, accumulated edge by edge as
/// `Σ w_ij (x_i − x_j)(x_i − x_j)ᵀ`.
pub fn laplacian_scatter(samples: &[Vec<f64>], w: &SparseAffinity) -> DMatrix<f64> {
    let n = samples.first().map_or(0, Vec::len);
    let mut s = DMatrix::zeros(n, n);
    let mut diff = vec![0.0; n];
    for &(i, j, v) in &w.edges {
        for (d, (a, b)) in diff.iter_mut().zip(samples[i].iter().zip(&samples[j])) {
            *d = a - b;
        }
        for c in 0..n {
            let dc = v * diff[c];
            if dc == 0.0 {
                continue;
            }
            for r in c..n {
                s[(r, c)] += dc * diff[r];
            }
        }
    }
    s.fill_upper_triangle_with_lower_triangle();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_mutual_edge() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let g = build_neighbor_graphs(&x, &[0, 0, 0], 1).unwrap();
        assert_eq!(g.within, vec![(0, 1)]);
        assert!(g.between.is_empty());
    }

    #[test]
    fn single_label_has_no_between_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random(), rng.random()]).collect();
        let g = build_neighbor_graphs(&x, &[3; 20], 4).unwrap();
        assert!(g.between.is_empty());
        assert!(!g.within.is_empty());
    }

    #[test]
    fn far_blobs_have_no_between_edges() {
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for k in 0..8 {
            x.push(vec![k as f64 * 0.1, 0.0]);
            labels.push(0);
            x.push(vec![100.0 + k as f64 * 0.1, 0.0]);
            labels.push(1);
        }
        let g = build_neighbor_graphs(&x, &labels, 3).unwrap();
        assert!(g.between.is_empty());
        for &(i, j) in &g.within {
            assert_eq!(labels[i], labels[j]);
        }
    }

    #[test]
    fn affinity_range_must_be_below_sample_count() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(build_neighbor_graphs(&x, &[0, 1], 2), Err(Error::Config(_))));
    }

    #[test]
    fn heat_weights() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![3.0, 4.0]];
        let g = NeighborGraphs {
            within: vec![(0, 1)],
            between: vec![(1, 2)],
        };
        let w = affinity_weights(&g, &x, 25.0).unwrap();
        assert_eq!(w.within.edges, vec![(0, 1, 1.0)]);
        assert!((w.between.edges[0].2 - (-1f64).exp()).abs() < 1e-15);
        let dense = w.within.to_dense();
        assert_eq!(dense[(0, 2)], 0.0);
        assert_eq!(dense[(0, 0)], 0.0);
    }

    #[test]
    fn degree_hand_sums() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(degree_matrix(&w), DMatrix::from_diagonal_element(2, 2, 0.5));
        assert_eq!(degree_matrix(&DMatrix::zeros(3, 3)), DMatrix::zeros(3, 3));
    }

    #[test]
    fn sparse_degrees_match_dense_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut edges = Vec::new();
        for i in 0..15 {
            for j in i + 1..15 {
                if rng.random::<f64>() < 0.2 {
                    edges.push((i, j, rng.random::<f64>()));
                }
            }
        }
        let w = SparseAffinity { size: 15, edges };
        let dense = w.to_dense();
        let d = degree_matrix(&dense);
        for (i, v) in w.degrees().into_iter().enumerate() {
            assert!((d[(i, i)] - v).abs() < 1e-14);
        }
    }

    #[test]
    fn scatter_matches_dense_laplacian_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = 12;
        let n = 5;
        let x: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| -90.0 * rng.random::<f64>()).collect()).collect();
        let mut edges = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if rng.random::<f64>() < 0.3 {
                    edges.push((i, j, rng.random::<f64>()));
                }
            }
        }
        let w = SparseAffinity { size: m, edges };
        let xm = DMatrix::from_fn(n, m, |r, c| x[c][r]);
        let dense = w.to_dense();
        let oracle = &xm * (degree_matrix(&dense) - &dense) * xm.transpose();
        let s = laplacian_scatter(&x, &w);
        assert!((s - &oracle).norm() <= 1e-9 * oracle.norm());
    }
}
