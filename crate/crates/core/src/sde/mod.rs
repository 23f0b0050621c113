//! Class-matching semi-supervised discriminant embedding.
//!
//! Offline: cluster the radio-map fingerprints with KFCM, admit unlabeled
//! observations that match a cluster, build within/between-class affinity
//! graphs over the combined set, and solve
//! `X(D′ − W′)Xᵀ v = λ (X(D − W)Xᵀ + σI) v` for the embedding. The reduced
//! database (DROLD) holds the projections of the labeled fingerprints.

pub mod eigen;
pub mod graph;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::kfcm::{run_kfcm, ClusterModel};
use crate::model::{AdmittedSample, EmbeddingModel, IntrinsicDim, Provenance, TrainParams};
use crate::radio_map::{RadioMap, RssVector};

pub use eigen::{generalized_symmetric_eigen, is_positive_definite, worst_residual_ratio, GeneralizedEigen};
pub use graph::{
    affinity_weights, build_neighbor_graphs, default_heat_t, degree_matrix, laplacian_scatter, AffinityPair,
    NeighborGraphs, SparseAffinity,
};

/// Smallest `d` whose top-`d` covariance eigenvalues hold `energy` of the total variance.
pub fn estimate_intrinsic_dim(fingerprints: &[Vec<f64>], energy: f64) -> Result<usize> {
    if fingerprints.len() < 2 {
        return Err(Error::config("dimension estimate needs at least two fingerprints"));
    }
    if !(energy > 0.0 && energy < 1.0) {
        return Err(Error::config(format!("energy threshold must lie in (0, 1), got {energy}")));
    }
    let n = fingerprints[0].len();
    let m = fingerprints.len() as f64;
    let mut mean = vec![0.0; n];
    for f in fingerprints {
        check_len(n, f.len())?;
        for (a, v) in mean.iter_mut().zip(f) {
            *a += v / m;
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    for f in fingerprints {
        for c in 0..n {
            let dc = f[c] - mean[c];
            for r in c..n {
                cov[(r, c)] += dc * (f[r] - mean[r]);
            }
        }
    }
    cov.fill_upper_triangle_with_lower_triangle();
    let mut spectrum: Vec<f64> = SymmetricEigen::new(cov / (m - 1.0))
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = spectrum.iter().sum();
    if total <= f64::EPSILON * spectrum.len() as f64 {
        return Ok(1);
    }
    let mut acc = 0.0;
    for (i, v) in spectrum.iter().enumerate() {
        acc += v;
        if acc >= energy * total {
            return Ok(i + 1);
        }
    }
    Ok(n)
}

/// First differences across the AP ordering.
pub fn curvature(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Number of AP-to-AP slopes of `x` within `eps` of the matching slope of `center`.
pub fn slope_similarity(x: &[f64], center: &[f64], eps: f64) -> usize {
    curvature(x)
        .iter()
        .zip(curvature(center))
        .filter(|(a, b)| (*a - b).abs() <= eps)
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Admission {
    /// Position in the input pool.
    pub index: usize,
    pub values: Vec<f64>,
    pub label: usize,
    pub similarity: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdmissionResult {
    pub accepted: Vec<Admission>,
    pub rejected_count: usize,
}

/// Admits each observation whose nearest cluster (kernel distance) also
/// matches it on at least `threshold` slopes. Accepted samples keep pool order.
pub fn class_match(
    unlabeled: &[RssVector],
    clusters: &ClusterModel,
    match_eps: f64,
    threshold: usize,
    fill_dbm: f64,
) -> Result<AdmissionResult> {
    let mut out = AdmissionResult::default();
    for (index, s) in unlabeled.iter().enumerate() {
        let values = s.filled(fill_dbm);
        let (label, _) = clusters.nearest_center(&values)?;
        let similarity = slope_similarity(&values, &clusters.centers[label], match_eps);
        if similarity >= threshold {
            out.accepted.push(Admission {
                index,
                values,
                label,
                similarity,
            });
        } else {
            out.rejected_count += 1;
        }
    }
    Ok(out)
}

/// Solved embedding along with the matrices it came from.
#[derive(Clone, Debug)]
pub struct EmbeddingSolution {
    pub eigen: GeneralizedEigen,
    pub between_scatter: DMatrix<f64>,
    /// Includes the `reg_sigma · I` term.
    pub within_scatter: DMatrix<f64>,
}

/// Forms both scatter matrices from rows `samples` and solves for `d` directions.
pub fn solve_embedding(
    samples: &[Vec<f64>],
    weights: &AffinityPair,
    d: usize,
    reg_sigma: f64,
) -> Result<EmbeddingSolution> {
    let n = samples.first().map_or(0, Vec::len);
    if d == 0 || d > n {
        return Err(Error::config(format!("embedding dimension {d} outside [1, {n}]")));
    }
    let a = laplacian_scatter(samples, &weights.between);
    let b = laplacian_scatter(samples, &weights.within) + DMatrix::identity(n, n) * reg_sigma;
    let eigen = generalized_symmetric_eigen(&a, &b, d)?;
    Ok(EmbeddingSolution {
        eigen,
        between_scatter: a,
        within_scatter: b,
    })
}

/// `Mᵀ x`.
pub fn project(embedding: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    check_len(embedding.nrows(), x.len())?;
    Ok(embedding
        .column_iter()
        .map(|col| col.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

/// `Mᵀ X` for samples given as rows; result is `d × count`.
pub fn project_batch(embedding: &DMatrix<f64>, samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(embedding.ncols(), samples.len());
    for (c, x) in samples.iter().enumerate() {
        let p = project(embedding, x)?;
        out.set_column(c, &nalgebra::DVector::from_vec(p));
    }
    Ok(out)
}

/// Numbers worth reporting after a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainDiagnostics {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub heat_t: f64,
    pub kernel_lambda: f64,
    pub kfcm_iterations: usize,
    pub kfcm_converged: bool,
    pub objective_trace: Vec<f64>,
    pub label_histogram: Vec<usize>,
    pub accepted: usize,
    pub rejected: usize,
    /// Accepted but over the update-ratio cap.
    pub capped: usize,
    pub admitted: usize,
    pub within_edges: usize,
    pub between_edges: usize,
    pub residual_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub clusters: ClusterModel,
    pub diagnostics: TrainDiagnostics,
}

struct Fit {
    embedding: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    heat_t: f64,
    within_edges: usize,
    between_edges: usize,
    residual_ratio: f64,
}

fn fit(samples: &[Vec<f64>], labels: &[usize], d: usize, params: &TrainParams) -> Result<Fit> {
    let graphs = build_neighbor_graphs(samples, labels, params.affinity_k)?;
    let heat_t = params.heat_t.unwrap_or_else(|| default_heat_t(&graphs, samples));
    let weights = affinity_weights(&graphs, samples, heat_t)?;
    let sol = solve_embedding(samples, &weights, d, params.reg_sigma)?;
    let residual_ratio = worst_residual_ratio(&sol.between_scatter, &sol.within_scatter, &sol.eigen);
    Ok(Fit {
        embedding: sol.eigen.vectors,
        eigenvalues: sol.eigen.values,
        heat_t,
        within_edges: graphs.within.len(),
        between_edges: graphs.between.len(),
        residual_ratio,
    })
}

fn resolve_dim(params: &TrainParams, fingerprints: &[Vec<f64>], n: usize) -> Result<usize> {
    let d = match params.intrinsic_dim {
        IntrinsicDim::Fixed(d) => d,
        IntrinsicDim::Auto => estimate_intrinsic_dim(fingerprints, params.dim_energy)?,
    };
    if d > n {
        return Err(Error::config(format!("intrinsic dimension {d} exceeds {n} APs")));
    }
    Ok(d)
}

fn assemble(
    map_ap_ids: &[String],
    fingerprints: Vec<Vec<f64>>,
    coords: Vec<crate::radio_map::Point>,
    labels: Vec<usize>,
    admitted: Vec<AdmittedSample>,
    params: &TrainParams,
    d: usize,
) -> Result<(EmbeddingModel, Fit)> {
    let mut samples = fingerprints.clone();
    let mut all_labels = labels.clone();
    for a in &admitted {
        samples.push(a.values.clone());
        all_labels.push(a.label);
    }
    let f = fit(&samples, &all_labels, d, params)?;
    let drold = project_batch(&f.embedding, &fingerprints)?;
    let model = EmbeddingModel {
        ap_ids: map_ap_ids.to_vec(),
        embedding: f.embedding.clone(),
        eigenvalues: f.eigenvalues.clone(),
        drold,
        coords,
        labels,
        provenance: Provenance {
            labeled: fingerprints.len(),
            admitted: admitted.len(),
        },
        fingerprints,
        admitted,
        params: params.clone(),
    };
    Ok((model, f))
}

/// Full offline pipeline: KFCM labels, class matching of `unlabeled`
/// (capped by the update ratio), graph embedding, DROLD.
pub fn train_sde(map: &RadioMap, unlabeled: &[RssVector], params: &TrainParams) -> Result<TrainOutcome> {
    params.validate()?;
    let n = map.n_aps();
    for s in unlabeled {
        check_len(n, s.len())?;
    }
    let fingerprints = map.fingerprints();
    let clusters = run_kfcm(&fingerprints, &params.kfcm())?;
    let labels = clusters.labels();
    let d = resolve_dim(params, &fingerprints, n)?;

    let cap = params.admission_cap(fingerprints.len());
    let (admission, accepted) = if cap == 0 {
        (AdmissionResult::default(), 0)
    } else {
        let res = class_match(unlabeled, &clusters, params.match_eps, params.match_threshold, params.fill_dbm)?;
        let count = res.accepted.len();
        (res, count)
    };
    let admitted: Vec<AdmittedSample> = admission
        .accepted
        .iter()
        .take(cap)
        .map(|a| AdmittedSample {
            values: a.values.clone(),
            label: a.label,
        })
        .collect();

    let (model, f) = assemble(map.ap_ids(), fingerprints, map.coords(), labels, admitted, params, d)?;
    let diagnostics = TrainDiagnostics {
        dim: d,
        eigenvalues: f.eigenvalues,
        heat_t: f.heat_t,
        kernel_lambda: clusters.kernel_lambda,
        kfcm_iterations: clusters.iterations,
        kfcm_converged: clusters.converged,
        objective_trace: clusters.objective_trace.clone(),
        label_histogram: clusters.label_histogram(),
        accepted,
        rejected: admission.rejected_count,
        capped: accepted.saturating_sub(cap),
        admitted: model.provenance.admitted,
        within_edges: f.within_edges,
        between_edges: f.between_edges,
        residual_ratio: f.residual_ratio,
    };
    Ok(TrainOutcome {
        model,
        clusters,
        diagnostics,
    })
}

/// Supervised-only training on the labeled map (no unlabeled admission).
pub fn train_lde(map: &RadioMap, params: &TrainParams) -> Result<TrainOutcome> {
    let supervised = TrainParams {
        update_ratio: 1.0,
        ..params.clone()
    };
    let mut out = train_sde(map, &[], &supervised)?;
    out.model.params = params.clone();
    Ok(out)
}

/// Admits one observation into a trained model and re-solves the embedding.
/// A rejected observation returns the model unchanged; the update-ratio cap
/// does not apply here.
pub fn online_update(
    model: &EmbeddingModel,
    sample: &RssVector,
    clusters: &ClusterModel,
    params: &TrainParams,
) -> Result<EmbeddingModel> {
    check_len(model.n_aps(), sample.len())?;
    let res = class_match(
        std::slice::from_ref(sample),
        clusters,
        params.match_eps,
        params.match_threshold,
        params.fill_dbm,
    )?;
    let Some(a) = res.accepted.into_iter().next() else {
        return Ok(model.clone());
    };
    let mut admitted = model.admitted.clone();
    admitted.push(AdmittedSample {
        values: a.values,
        label: a.label,
    });
    let (next, _) = assemble(
        &model.ap_ids,
        model.fingerprints.clone(),
        model.coords.clone(),
        model.labels.clone(),
        admitted,
        &model.params,
        model.dim(),
    )?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn low_rank(rank: usize, ambient: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis: Vec<Vec<f64>> = (0..rank)
            .map(|_| (0..ambient).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        (0..count)
            .map(|_| {
                let coef: Vec<f64> = (0..rank).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
                (0..ambient)
                    .map(|j| -60.0 + (0..rank).map(|r| coef[r] * basis[r][j]).sum::<f64>())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn dim_of_rank_three_data() {
        let x = low_rank(3, 27, 200, 1);
        assert_eq!(estimate_intrinsic_dim(&x, 0.95).unwrap(), 3);
    }

    #[test]
    fn dim_of_constant_data_is_one() {
        let x = vec![vec![-50.0; 27]; 10];
        assert_eq!(estimate_intrinsic_dim(&x, 0.95).unwrap(), 1);
    }

    #[test]
    fn curvature_is_first_difference() {
        assert_eq!(curvature(&[-50.0, -55.0, -52.0]), vec![-5.0, 3.0]);
        assert_eq!(slope_similarity(&[-50.0, -55.0, -52.0], &[-40.0, -45.0, -50.0], 1.0), 1);
    }

    fn two_cluster_model(centers: Vec<Vec<f64>>) -> ClusterModel {
        ClusterModel {
            centers,
            membership: DMatrix::from_element(2, 1, 0.5),
            fuzzifier: 2.0,
            kernel_lambda: 1e-3,
            objective_trace: vec![],
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn exact_center_is_admitted_with_full_score() {
        let c = two_cluster_model(vec![vec![-40.0, -60.0, -80.0, -70.0], vec![-80.0, -50.0, -45.0, -90.0]]);
        let s = RssVector::complete(c.centers[1].clone()).unwrap();
        let res = class_match(&[s], &c, 0.5, 3, 0.0).unwrap();
        assert_eq!(res.accepted.len(), 1);
        assert_eq!(res.accepted[0].label, 1);
        assert_eq!(res.accepted[0].similarity, 3);
    }

    #[test]
    fn total_slope_mismatch_is_rejected() {
        let c = two_cluster_model(vec![vec![-40.0, -60.0, -80.0, -70.0], vec![-100.0, -100.0, -100.0, -100.0]]);
        // nearest to center 0, but every slope is off by 10 dB
        let s = RssVector::complete(vec![-40.0, -50.0, -80.0, -60.0]).unwrap();
        let res = class_match(&[s], &c, 5.0, 1, 0.0).unwrap();
        assert!(res.accepted.is_empty());
        assert_eq!(res.rejected_count, 1);
        assert_eq!(class_match(&[], &c, 5.0, 1, 0.0).unwrap(), AdmissionResult::default());
    }

    #[test]
    fn projection_identity_and_linearity() {
        let eye = DMatrix::identity(3, 3);
        assert_eq!(project(&eye, &[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let m = DMatrix::from_row_slice(3, 2, &[0.5, 1.0, -0.25, 2.0, 1.5, 0.0]);
        assert_eq!(project(&m, &[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        let x = [1.0, 2.0, 3.0];
        let y = [-4.0, 0.5, 2.0];
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let lhs = project(&m, &combo).unwrap();
        let px = project(&m, &x).unwrap();
        let py = project(&m, &y).unwrap();
        for r in 0..2 {
            assert!((lhs[r] - (2.0 * px[r] - 3.0 * py[r])).abs() < 1e-12);
        }
        assert!(project(&m, &[1.0]).is_err());
    }

    #[test]
    fn batch_projection_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = DMatrix::from_fn(5, 2, |_, _| rng.random::<f64>());
        let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..5).map(|_| -rng.random::<f64>() * 90.0).collect()).collect();
        let xm = DMatrix::from_fn(5, 7, |r, c| xs[c][r]);
        let oracle = m.transpose() * xm;
        assert!((project_batch(&m, &xs).unwrap() - oracle).amax() < 1e-12);
    }

    #[test]
    fn single_class_has_zero_between_scatter() {
        let x = low_rank(3, 4, 30, 2);
        let g = build_neighbor_graphs(&x, &[0; 30], 3).unwrap();
        let w = affinity_weights(&g, &x, default_heat_t(&g, &x)).unwrap();
        let sol = solve_embedding(&x, &w, 2, 1e-6).unwrap();
        assert!(sol.eigen.values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn discriminant_direction_along_separating_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for k in 0..120 {
            let class = k % 2;
            let offset = if class == 0 { -1.5 } else { 1.5 };
            x.push(vec![
                offset + 0.5 * noise.sample(&mut rng),
                3.0 * noise.sample(&mut rng),
                3.0 * noise.sample(&mut rng),
            ]);
            labels.push(class);
        }
        let g = build_neighbor_graphs(&x, &labels, 8).unwrap();
        let w = affinity_weights(&g, &x, default_heat_t(&g, &x)).unwrap();
        let sol = solve_embedding(&x, &w, 1, 1e-8).unwrap();
        let v = sol.eigen.vectors.column(0);
        let cos = v[0].abs() / v.norm();
        assert!(cos > 0.99, "cos {cos}");
        assert!(worst_residual_ratio(&sol.between_scatter, &sol.within_scatter, &sol.eigen) <= 1.0);
    }
}
