//! Kernel fuzzy c-means over RSS fingerprints with a Gaussian kernel.
//!
//! Distances are measured in the kernel feature space against the implicit
//! centroid `Σ_j w_j Φ(x_j)` with `w_j = u_ji^m / Σ_k u_ki^m`, so only the
//! Gram matrix is ever needed. Input-space centers are tracked alongside
//! for the stopping rule and for matching new observations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Fuzzy membership, `c × M`: entry `(i, k)` is the degree sample `k` belongs to cluster `i`.
pub type Membership = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KfcmParams {
    pub n_clusters: usize,
    pub fuzzifier: f64,
    /// `None` selects the median heuristic.
    pub kernel_lambda: Option<f64>,
    pub converge_eps: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KfcmParams {
    fn default() -> Self {
        Self {
            n_clusters: 2,
            fuzzifier: 2.0,
            kernel_lambda: None,
            converge_eps: 1e-6,
            max_iter: 100,
            seed: 0,
        }
    }
}

/// Result of a KFCM fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub membership: Membership,
    pub fuzzifier: f64,
    pub kernel_lambda: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        hard_labels(&self.membership)
    }

    /// Kernel-space squared distance from `x` to explicit center `i`: `2 − 2K(x, v_i)`.
    pub fn center_distance(&self, x: &[f64], i: usize) -> Result<f64> {
        Ok(2.0 - 2.0 * gaussian_kernel(x, &self.centers[i], self.kernel_lambda)?)
    }

    /// Nearest center in kernel distance, lowest index on ties.
    pub fn nearest_center(&self, x: &[f64]) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.n_clusters() {
            let d = self.center_distance(x, i)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }

    /// Per-cluster sample counts under hard labels.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_clusters()];
        for l in self.labels() {
            h[l] += 1;
        }
        h
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(−λ‖a − b‖²)`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], lambda: f64) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok((-lambda * squared_distance(a, b)).exp())
}

pub fn gram_matrix(samples: &[Vec<f64>], lambda: f64) -> Result<DMatrix<f64>> {
    let m = samples.len();
    if let Some(first) = samples.first() {
        for s in samples {
            check_len(first.len(), s.len())?;
        }
    }
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| (-lambda * squared_distance(&samples[i], &samples[j])).exp()).collect())
        .collect();
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

/// `1 / (2 · median ‖x_i − x_j‖²)` over distinct pairs; 1.0 when every pair coincides.
pub fn median_heuristic_lambda(samples: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = (0..samples.len())
        .flat_map(|i| (i + 1..samples.len()).map(move |j| (i, j)))
        .map(|(i, j)| squared_distance(&samples[i], &samples[j]))
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, med, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *med > 0.0 {
        1.0 / (2.0 * *med)
    } else {
        1.0
    }
}

fn centroid_weights(u: &Membership, i: usize, m: f64) -> Result<DVector<f64>> {
    let w = DVector::from_iterator(u.ncols(), u.row(i).iter().map(|&x| x.powf(m)));
    let total = w.sum();
    if total <= 0.0 {
        return Err(Error::DegenerateCluster(i));
    }
    Ok(w / total)
}

/// Squared kernel-space distance from sample `k` to the implicit centroid of cluster `i`.
pub fn kernel_distance(k: usize, i: usize, u: &Membership, m: f64, gram: &DMatrix<f64>) -> Result<f64> {
    let w = centroid_weights(u, i, m)?;
    let kw = gram * &w;
    let d = gram[(k, k)] - 2.0 * kw[k] + w.dot(&kw);
    Ok(d.max(0.0))
}

/// All `c × M` kernel distances at once.
pub fn kernel_distances(u: &Membership, m: f64, gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len(gram.nrows(), u.ncols())?;
    let mut out = DMatrix::zeros(u.nrows(), u.ncols());
    for i in 0..u.nrows() {
        let w = centroid_weights(u, i, m)?;
        let kw = gram * &w;
        let wkw = w.dot(&kw);
        for k in 0..u.ncols() {
            out[(i, k)] = (gram[(k, k)] - 2.0 * kw[k] + wkw).max(0.0);
        }
    }
    Ok(out)
}

/// Fuzzy membership update. A zero distance makes the assignment crisp
/// (lowest-index zero-distance cluster).
pub fn update_membership(distances: &DMatrix<f64>, m: f64) -> Membership {
    let (c, n) = distances.shape();
    let exponent = 1.0 / (m - 1.0);
    let mut u = DMatrix::zeros(c, n);
    for k in 0..n {
        let col = distances.column(k);
        if let Some(z) = col.iter().position(|&d| d == 0.0) {
            u[(z, k)] = 1.0;
            continue;
        }
        for i in 0..c {
            let s: f64 = col.iter().map(|&dj| (col[i] / dj).powf(exponent)).sum();
            u[(i, k)] = 1.0 / s;
        }
    }
    u
}

/// `v_i = Σ_k u_ki^m x_k / Σ_k u_ki^m`.
pub fn update_centers(samples: &[Vec<f64>], u: &Membership, m: f64) -> Result<Vec<Vec<f64>>> {
    check_len(samples.len(), u.ncols())?;
    let dim = samples.first().map_or(0, Vec::len);
    (0..u.nrows())
        .map(|i| {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (k, x) in samples.iter().enumerate() {
                let w = u[(i, k)].powf(m);
                den += w;
                for (acc, &xj) in num.iter_mut().zip(x) {
                    *acc += w * xj;
                }
            }
            if den <= 0.0 {
                return Err(Error::DegenerateCluster(i));
            }
            Ok(num.into_iter().map(|v| v / den).collect())
        })
        .collect()
}

/// `Σ_k Σ_i u_ki^m D_ki`.
pub fn objective(u: &Membership, distances: &DMatrix<f64>, m: f64) -> f64 {
    u.iter().zip(distances.iter()).map(|(&uk, &d)| uk.powf(m) * d).sum()
}

/// Argmax membership per sample, lowest cluster index on ties.
pub fn hard_labels(u: &Membership) -> Vec<usize> {
    (0..u.ncols())
        .map(|k| {
            let col = u.column(k);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i] > col[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Seeded farthest-point selection of `c` distinct sample indices.
pub fn farthest_point_init(samples: &[Vec<f64>], c: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..samples.len())];
    let mut nearest: Vec<f64> = samples
        .iter()
        .map(|s| squared_distance(s, &samples[chosen[0]]))
        .collect();
    while chosen.len() < c {
        let mut best: Option<usize> = None;
        for k in 0..samples.len() {
            if chosen.contains(&k) {
                continue;
            }
            if best.is_none_or(|b| nearest[k] > nearest[b]) {
                best = Some(k);
            }
        }
        let next = best.expect("c <= M");
        chosen.push(next);
        for (k, s) in samples.iter().enumerate() {
            nearest[k] = nearest[k].min(squared_distance(s, &samples[next]));
        }
    }
    chosen
}

pub fn run_kfcm(samples: &[Vec<f64>], params: &KfcmParams) -> Result<ClusterModel> {
    let c = params.n_clusters;
    let m = params.fuzzifier;
    if c == 0 {
        return Err(Error::config("number of clusters must be positive"));
    }
    if c > samples.len() {
        return Err(Error::config(format!(
            "{c} clusters requested for {} samples",
            samples.len()
        )));
    }
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::config(format!("fuzzifier must exceed 1, got {m}")));
    }
    let lambda = match params.kernel_lambda {
        Some(l) if l > 0.0 && l.is_finite() => l,
        Some(l) => return Err(Error::config(format!("kernel lambda must be positive, got {l}"))),
        None => median_heuristic_lambda(samples),
    };
    let gram = gram_matrix(samples, lambda)?;

    let mut centers: Vec<Vec<f64>> = farthest_point_init(samples, c, params.seed)
        .into_iter()
        .map(|k| samples[k].clone())
        .collect();
    let explicit = DMatrix::from_fn(c, samples.len(), |i, k| {
        (2.0 - 2.0 * (-lambda * squared_distance(&samples[k], &centers[i])).exp()).max(0.0)
    });
    let mut u = update_membership(&explicit, m);
    let mut distances = kernel_distances(&u, m, &gram)?;
    let mut trace = vec![objective(&u, &distances, m)];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        u = update_membership(&distances, m);
        let next = update_centers(samples, &u, m)?;
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        distances = kernel_distances(&u, m, &gram)?;
        trace.push(objective(&u, &distances, m));
        if shift <= params.converge_eps {
            converged = true;
            break;
        }
    }

    Ok(ClusterModel {
        centers,
        membership: u,
        fuzzifier: m,
        kernel_lambda: lambda,
        objective_trace: trace,
        iterations,
        converged,
    })
}
