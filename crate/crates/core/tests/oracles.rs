use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wlan_sde::eval::{self, compare_methods, run_sweep, EvalData, EvalOptions, Method, SweepAxis};
use wlan_sde::kfcm::{gram_matrix, kernel_distance, run_kfcm, KfcmParams};
use wlan_sde::locate::{knn_locate, locate_sde, OpCount, RawLocator, ReferenceSet, SdeLocator};
use wlan_sde::sde::{online_update, train_lde, train_sde};
use wlan_sde::sim::{build_synthetic_radio_map, SimConfig, Testbed};
use wlan_sde::{EmbeddingModel, IntrinsicDim, ObservationSet, Point, RadioMap, RssVector, TrainParams};

fn testbed(length: f64, queries: usize, pool: usize, sigma: f64) -> Testbed {
    build_synthetic_radio_map(&SimConfig {
        hallway_length: length,
        n_queries: queries,
        n_unlabeled: pool,
        shadowing_sigma: sigma,
        ..SimConfig::default()
    })
    .unwrap()
}

fn dim(d: usize) -> TrainParams {
    TrainParams {
        intrinsic_dim: IntrinsicDim::Fixed(d),
        ..TrainParams::default()
    }
}

/// Every distance, full sort by (distance, index), first k.
fn brute_force(query: &[f64], rows: &[Vec<f64>], coords: &[Point], k: usize) -> (Point, Vec<usize>) {
    let mut all: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ids: Vec<usize> = all[..k].iter().map(|&(_, i)| i).collect();
    let x = ids.iter().map(|&i| coords[i].x).sum::<f64>() / k as f64;
    let y = ids.iter().map(|&i| coords[i].y).sum::<f64>() / k as f64;
    (Point::new(x, y), ids)
}

#[test]
fn knn_matches_brute_force_on_200_queries() {
    let tb = testbed(50.0, 200, 0, 4.0);
    let rows = tb.map.fingerprints();
    let coords = tb.map.coords();
    let refs = ReferenceSet::from_map(&tb.map);
    for k in [1, 3, 5] {
        for q in &tb.queries.samples {
            let x = q.filled(0.0);
            let fix = knn_locate(&x, &refs, k).unwrap();
            let (p, ids) = brute_force(&x, &rows, &coords, k);
            assert_eq!(fix.neighbor_ids, ids);
            assert_eq!(fix.coord, p);
        }
    }
}

#[test]
fn knn_ties_resolve_to_lower_index() {
    let rows = vec![vec![-50.0, -60.0]; 6];
    let coords: Vec<Point> = (0..6).map(|i| Point::new(i as f64, 0.0)).collect();
    let refs = ReferenceSet::new(DMatrix::from_fn(2, 6, |r, c| rows[c][r]), coords.clone()).unwrap();
    let fix = knn_locate(&[-50.0, -60.0], &refs, 3).unwrap();
    assert_eq!(fix.neighbor_ids, vec![0, 1, 2]);
    assert_eq!(brute_force(&[-50.0, -60.0], &rows, &coords, 3).1, vec![0, 1, 2]);
}

/// Explicit double-sum expansion of the kernel-space centroid distance.
fn gram_oracle(k: usize, i: usize, u: &DMatrix<f64>, m: f64, gram: &DMatrix<f64>) -> f64 {
    let n = u.ncols();
    let total: f64 = (0..n).map(|j| u[(i, j)].powf(m)).sum();
    let w: Vec<f64> = (0..n).map(|j| u[(i, j)].powf(m) / total).collect();
    let mut cross = 0.0;
    for j in 0..n {
        cross += w[j] * gram[(k, j)];
    }
    let mut quad = 0.0;
    for j in 0..n {
        for l in 0..n {
            quad += w[j] * w[l] * gram[(j, l)];
        }
    }
    gram[(k, k)] - 2.0 * cross + quad
}

#[test]
fn kernel_distance_matches_gram_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for m_samples in 2..=20 {
        let x: Vec<Vec<f64>> = (0..m_samples)
            .map(|_| (0..27).map(|_| -100.0 + 80.0 * rng.random::<f64>()).collect())
            .collect();
        let lambda = wlan_sde::kfcm::median_heuristic_lambda(&x);
        let gram = gram_matrix(&x, lambda).unwrap();
        let c = 3;
        let mut u = DMatrix::from_fn(c, m_samples, |_, _| rng.random::<f64>() + 1e-3);
        for mut col in u.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
        for fuzz in [1.5, 2.0, 3.0] {
            for i in 0..c {
                for k in 0..m_samples {
                    let got = kernel_distance(k, i, &u, fuzz, &gram).unwrap();
                    let want = gram_oracle(k, i, &u, fuzz, &gram).max(0.0);
                    assert!((got - want).abs() <= 1e-10, "M={m_samples} i={i} k={k}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn batch_training_equals_sequential_online_updates() {
    let tb = testbed(4.0, 0, 50, 2.0);
    assert!(tb.map.len() + tb.unlabeled.len() <= 100);
    let params = TrainParams {
        intrinsic_dim: IntrinsicDim::Fixed(4),
        update_ratio: 0.2,
        affinity_k: 4,
        ..TrainParams::default()
    };
    let batch = train_sde(&tb.map, &tb.unlabeled.samples, &params).unwrap();
    assert!(batch.diagnostics.capped == 0, "pool must fit under the cap");
    assert!(batch.model.provenance.admitted > 0);

    let start = train_lde(&tb.map, &params).unwrap();
    let mut model = start.model.clone();
    for s in &tb.unlabeled.samples {
        model = online_update(&model, s, &start.clusters, &params).unwrap();
    }
    assert_eq!(model.provenance.admitted, batch.model.provenance.admitted);
    assert_eq!(model.admitted, batch.model.admitted);
    let (a, b) = (&model.embedding, &batch.model.embedding);
    for c in 0..a.ncols() {
        let same = (a.column(c) - b.column(c)).amax();
        let flipped = (a.column(c) + b.column(c)).amax();
        assert!(same.min(flipped) <= 1e-8, "column {c}: {same} / {flipped}");
    }
}

#[test]
fn online_update_leaves_model_unchanged_on_rejection() {
    let tb = testbed(7.0, 0, 0, 2.0);
    let params = dim(3);
    let start = train_lde(&tb.map, &params).unwrap();
    // flat fingerprint: every slope is 0, far from any real center
    let junk = RssVector::complete((0..27).map(|j| if j % 2 == 0 { -20.0 } else { -105.0 }).collect()).unwrap();
    let next = online_update(&start.model, &junk, &start.clusters, &params).unwrap();
    assert_eq!(next, start.model);
}

#[test]
fn ratio_one_is_bit_identical_to_lde_and_to_an_empty_pool() {
    let tb = testbed(15.0, 0, 400, 4.0);
    let params = TrainParams {
        update_ratio: 1.0,
        ..dim(5)
    };
    let a = train_sde(&tb.map, &tb.unlabeled.samples, &params).unwrap().model;
    let b = train_lde(&tb.map, &params).unwrap().model;
    let c = train_sde(&tb.map, &[], &TrainParams { update_ratio: 0.2, ..dim(5) }).unwrap().model;
    assert_eq!(a.provenance.admitted, 0);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.embedding, c.embedding);
    assert_eq!(a.drold, c.drold);
}

#[test]
fn rejected_samples_do_not_influence_the_model() {
    let tb = testbed(15.0, 0, 300, 4.0);
    let params = TrainParams {
        match_threshold: 20,
        ..dim(5)
    };
    let clusters = run_kfcm(&tb.map.fingerprints(), &params.kfcm()).unwrap();
    let res = wlan_sde::sde::class_match(
        &tb.unlabeled.samples,
        &clusters,
        params.match_eps,
        params.match_threshold,
        params.fill_dbm,
    )
    .unwrap();
    assert!(res.rejected_count > 0 && !res.accepted.is_empty(), "need both outcomes");
    let kept: Vec<RssVector> = res.accepted.iter().map(|a| tb.unlabeled.samples[a.index].clone()).collect();
    let full = train_sde(&tb.map, &tb.unlabeled.samples, &params).unwrap();
    let ablated = train_sde(&tb.map, &kept, &params).unwrap();
    assert_eq!(full.model.to_json().unwrap(), ablated.model.to_json().unwrap());
    assert_eq!(full.diagnostics.rejected, res.rejected_count);
}

#[test]
fn sign_flips_applied_to_model_and_drold_leave_fixes_unchanged() {
    let tb = testbed(20.0, 100, 200, 4.0);
    let model = train_sde(&tb.map, &tb.unlabeled.samples, &dim(5)).unwrap().model;
    let mut flipped = model.clone();
    for c in [0, 2, 3] {
        flipped.embedding.column_mut(c).neg_mut();
        flipped.drold.row_mut(c).neg_mut();
    }
    let (a, b) = (SdeLocator::new(&model), SdeLocator::new(&flipped));
    for q in &tb.queries.samples {
        let fa = a.locate(q, 3, 0.0, &mut OpCount::default()).unwrap();
        let fb = b.locate(q, 3, 0.0, &mut OpCount::default()).unwrap();
        assert_eq!(fa.neighbor_ids, fb.neighbor_ids);
        assert_eq!(fa.coord, fb.coord);
    }
}

#[test]
fn identity_embedding_reduces_to_raw_knn() {
    let tb = testbed(20.0, 100, 0, 4.0);
    let mut model = train_lde(&tb.map, &dim(27)).unwrap().model;
    model.embedding = DMatrix::identity(27, 27);
    model.drold = DMatrix::from_fn(27, tb.map.len(), |r, c| tb.map.fingerprints()[c][r]);
    let raw = RawLocator::new(&tb.map);
    for q in &tb.queries.samples {
        let a = locate_sde(&model, q, 3, 0.0).unwrap();
        let b = raw.locate(q, 3, 0.0, &mut OpCount::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn noiseless_self_queries_recover_rp_coordinates() {
    let tb = testbed(20.0, 0, 200, 0.0);
    let model = train_sde(&tb.map, &tb.unlabeled.samples, &dim(8)).unwrap().model;
    for rp in tb.map.rps() {
        let fix = locate_sde(&model, &rp.fingerprint, 1, 0.0).unwrap();
        assert!(fix.coord.distance(&rp.coord) < 1e-9);
    }
}

#[test]
fn simulated_files_reload_identically() {
    let tb = testbed(12.0, 40, 50, 4.0);
    let dir = tempfile::tempdir().unwrap();
    let (m, q, u) = (dir.path().join("m.csv"), dir.path().join("q.csv"), dir.path().join("u.csv"));
    tb.map.save(&m).unwrap();
    tb.queries.save(&q).unwrap();
    tb.unlabeled.save(&u).unwrap();
    assert_eq!(RadioMap::load(&m, 0.0).unwrap(), tb.map);
    assert_eq!(ObservationSet::load(&q).unwrap(), tb.queries);
    assert_eq!(ObservationSet::load(&u).unwrap(), tb.unlabeled);
}

#[test]
fn dropout_survives_the_csv_round_trip() {
    let tb = build_synthetic_radio_map(&SimConfig {
        hallway_length: 5.0,
        dropout_prob: 0.3,
        n_queries: 30,
        n_unlabeled: 10,
        ..SimConfig::default()
    })
    .unwrap();
    assert!(tb.queries.samples.iter().any(|s| s.missing_count() > 0));
    let mut buf = Vec::new();
    tb.queries.write_csv(&mut buf).unwrap();
    assert_eq!(ObservationSet::read_csv(&buf[..]).unwrap(), tb.queries);
}

#[test]
fn saved_model_locates_identically() {
    let tb = testbed(25.0, 100, 300, 4.0);
    let model = train_sde(&tb.map, &tb.unlabeled.samples, &TrainParams::default()).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = EmbeddingModel::load(&path).unwrap();
    assert_eq!(loaded, model);
    for q in &tb.queries.samples {
        assert_eq!(locate_sde(&model, q, 3, 0.0).unwrap(), locate_sde(&loaded, q, 3, 0.0).unwrap());
    }
}

#[test]
fn noiseless_testbed_is_solved_by_every_method() {
    let tb = testbed(20.0, 200, 300, 0.0);
    let grid = tb.map.grid_interval();
    let data = EvalData::from(tb);
    let options = EvalOptions {
        radii: vec![grid],
        ..EvalOptions::default()
    };
    // a full-rank embedding; narrower ones discard location detail even without noise
    let report = compare_methods(&data, &dim(27), &[Method::Knn, Method::Lde, Method::Sde], &options).unwrap();
    for m in &report.methods {
        assert_eq!(m.curve[0].accuracy, 1.0, "{}", m.method);
    }
}

#[test]
fn reports_share_one_query_set_and_repeat_exactly() {
    let data = EvalData::from(testbed(20.0, 150, 300, 4.0));
    let options = EvalOptions {
        n_areas: Some(3),
        ..EvalOptions::default()
    };
    let methods = [Method::Knn, Method::Lde, Method::Sde];
    let a = compare_methods(&data, &dim(5), &methods, &options).unwrap();
    let b = compare_methods(&data, &dim(5), &methods, &options).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.query_hash, data.query_hash());
    assert_eq!(a.methods.len(), 3);
    for m in &a.methods {
        assert_eq!(m.areas.iter().map(|r| r.queries).sum::<usize>(), 150);
    }
}

#[test]
fn single_value_sweep_equals_direct_evaluation() {
    let data = EvalData::from(testbed(20.0, 150, 300, 4.0));
    let options = EvalOptions::default();
    let sweep = run_sweep(&data, SweepAxis::AffinityK, &[6.0], &dim(5), &options).unwrap();
    let direct = eval::evaluate(&data, Method::Sde, &dim(5), &options).unwrap();
    let s = sweep.sweep.unwrap();
    assert_eq!(s.points.len(), 1);
    assert_eq!(s.points[0].report.as_ref().unwrap(), &direct);
}

#[test]
fn ratio_one_sweep_point_equals_lde_curve() {
    let data = EvalData::from(testbed(20.0, 150, 300, 4.0));
    let options = EvalOptions::default();
    let sweep = run_sweep(&data, SweepAxis::UpdateRatio, &[1.0, 0.5, 0.2], &dim(5), &options).unwrap();
    let lde = eval::evaluate(&data, Method::Lde, &dim(5), &options).unwrap();
    let p = &sweep.sweep.unwrap().points[0];
    assert_eq!(p.value, 1.0);
    assert_eq!(p.report.as_ref().unwrap().curve, lde.curve);
}

#[test]
fn sweep_records_failures_and_continues() {
    let data = EvalData::from(testbed(10.0, 50, 50, 4.0));
    let r = run_sweep(&data, SweepAxis::IntrinsicDim, &[3.0, 40.0, 2.5, 4.0], &TrainParams::default(), &EvalOptions::default())
        .unwrap();
    let pts = r.sweep.unwrap().points;
    assert_eq!(pts.len(), 4);
    assert!(pts[0].report.is_some() && pts[3].report.is_some());
    assert!(pts[1].error.is_some() && pts[2].error.is_some());
}

#[test]
fn reg_sigma_sweep_reports_stability() {
    let data = EvalData::from(testbed(10.0, 50, 50, 4.0));
    let r = run_sweep(&data, SweepAxis::RegSigma, &[1e-8, 1e-4, 1e-2], &dim(4), &EvalOptions::default()).unwrap();
    let s = r.sweep.unwrap();
    assert!(s.points.iter().all(|p| p.solver_stable == Some(true)));
    assert!(s.curve_spread.is_some());
}

#[test]
fn kfcm_on_the_default_map_converges_monotonically() {
    let tb = build_synthetic_radio_map(&SimConfig::default()).unwrap();
    let fit = run_kfcm(&tb.map.fingerprints(), &KfcmParams::default()).unwrap();
    assert!(fit.converged && fit.iterations <= 100);
    for w in fit.objective_trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
    for col in fit.membership.column_iter() {
        assert!((col.sum() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn eval_data_rejects_mismatched_rosters() {
    let tb = testbed(5.0, 5, 0, 4.0);
    let mut q = tb.queries.clone();
    q.ap_ids[0] = "99".into();
    assert!(EvalData::new(tb.map.clone(), None, q).is_err());
    let mut unlabeled_truths = tb.queries.clone();
    unlabeled_truths.points = None;
    assert!(EvalData::new(tb.map, None, unlabeled_truths).is_err());
}
