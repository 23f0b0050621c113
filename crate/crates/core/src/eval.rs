//! Accuracy-versus-error-radius evaluation, method comparison and
//! one-parameter sweeps.
//!
//! Reports contain only seeded, deterministic quantities unless timings are
//! explicitly requested, so two identical runs serialize to identical bytes.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::locate::{OpCount, RawLocator, SdeLocator};
use crate::model::{IntrinsicDim, TrainParams};
use crate::radio_map::{ObservationSet, Point, RadioMap, RssVector};
use crate::sde::{train_lde, train_sde, TrainOutcome};
use crate::sim::Testbed;

pub const DEFAULT_RADII: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const DEFAULT_AREAS: usize = 6;

pub fn position_errors(estimates: &[Point], truths: &[Point]) -> Result<Vec<f64>> {
    check_len(truths.len(), estimates.len())?;
    if estimates.is_empty() {
        return Err(Error::config("no queries to evaluate"));
    }
    Ok(estimates.iter().zip(truths).map(|(e, t)| e.distance(t)).collect())
}

/// Fraction of estimates within `r` meters of their truth.
pub fn accuracy_at_radius(estimates: &[Point], truths: &[Point], r: f64) -> Result<f64> {
    check_radius(r)?;
    let errors = position_errors(estimates, truths)?;
    Ok(fraction_within(&errors, r))
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("error radius must be non-negative, got {r}")))
    }
}

fn fraction_within(errors: &[f64], r: f64) -> f64 {
    errors.iter().filter(|&&e| e <= r).count() as f64 / errors.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub radius: f64,
    pub accuracy: f64,
}

/// Accuracy at each radius, radii sorted ascending.
pub fn error_cdf(estimates: &[Point], truths: &[Point], radii: &[f64]) -> Result<Vec<CdfPoint>> {
    let errors = position_errors(estimates, truths)?;
    cdf_from_errors(&errors, radii)
}

fn cdf_from_errors(errors: &[f64], radii: &[f64]) -> Result<Vec<CdfPoint>> {
    let radii = sorted_radii(radii)?;
    Ok(radii
        .into_iter()
        .map(|radius| CdfPoint {
            radius,
            accuracy: fraction_within(errors, radius),
        })
        .collect())
}

fn sorted_radii(radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Err(Error::config("--radii must list at least one radius"));
    }
    for &r in radii {
        check_radius(r)?;
    }
    let mut out = radii.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Seeded k-means over RP coordinates; returns a 0-based area per RP.
///
/// Areas are renumbered by ascending centroid `x` (then `y`), so along a
/// hallway area 0 is the leftmost.
pub fn partition_subareas(map: &RadioMap, n_areas: usize, seed: u64) -> Result<Vec<usize>> {
    let coords = map.coords();
    let n = coords.len();
    if n_areas == 0 || n_areas > n {
        return Err(Error::config(format!("--areas must lie in [1, {n}], got {n_areas}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // k-means++ seeding
    let mut centers = vec![coords[rng.random_range(0..n)]];
    while centers.len() < n_areas {
        let d2: Vec<f64> = coords
            .iter()
            .map(|p| centers.iter().map(|c| sq(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            centers.len()
        };
        centers.push(coords[next]);
    }

    let mut assign = vec![0; n];
    for _ in 0..200 {
        let next: Vec<usize> = coords.iter().map(|p| nearest(p, &centers)).collect();
        let changed = next != assign;
        assign = next;
        let mut sums = vec![(0.0, 0.0, 0usize); n_areas];
        for (p, &a) in coords.iter().zip(&assign) {
            sums[a].0 += p.x;
            sums[a].1 += p.y;
            sums[a].2 += 1;
        }
        let mut reseeded = false;
        for a in 0..n_areas {
            if sums[a].2 == 0 {
                // move an empty center onto the point farthest from its own center
                let far = (0..n)
                    .max_by(|&i, &j| {
                        sq(&coords[i], &centers[assign[i]])
                            .total_cmp(&sq(&coords[j], &centers[assign[j]]))
                            .then(j.cmp(&i))
                    })
                    .expect("non-empty map");
                centers[a] = coords[far];
                assign[far] = a;
                reseeded = true;
            } else {
                centers[a] = Point::new(sums[a].0 / sums[a].2 as f64, sums[a].1 / sums[a].2 as f64);
            }
        }
        if !changed && !reseeded {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n_areas).collect();
    order.sort_by(|&i, &j| {
        centers[i]
            .x
            .total_cmp(&centers[j].x)
            .then(centers[i].y.total_cmp(&centers[j].y))
    });
    let mut rank = vec![0; n_areas];
    for (r, &a) in order.iter().enumerate() {
        rank[a] = r;
    }
    Ok(assign.into_iter().map(|a| rank[a]).collect())
}

fn sq(a: &Point, b: &Point) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2)
}

fn nearest(p: &Point, centers: &[Point]) -> usize {
    let mut best = 0;
    for (i, c) in centers.iter().enumerate().skip(1) {
        if sq(p, c) < sq(p, &centers[best]) {
            best = i;
        }
    }
    best
}

/// Localization method under evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// KNN on raw RSS.
    Knn,
    /// Supervised embedding, no unlabeled admission.
    Lde,
    /// Class-matched semi-supervised embedding.
    Sde,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Knn => "knn",
            Method::Lde => "lde",
            Method::Sde => "sde",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "knn" => Ok(Method::Knn),
            "lde" | "lde-knn" => Ok(Method::Lde),
            "sde" | "sde-knn" => Ok(Method::Sde),
            other => Err(Error::config(format!("--methods: unknown method `{other}`"))),
        }
    }
}

/// Radio map, unlabeled pool and ground-truth queries sharing one AP roster.
#[derive(Clone, Debug)]
pub struct EvalData {
    pub map: RadioMap,
    pub unlabeled: Vec<RssVector>,
    pub queries: Vec<RssVector>,
    pub truths: Vec<Point>,
}

impl EvalData {
    pub fn new(map: RadioMap, unlabeled: Option<ObservationSet>, queries: ObservationSet) -> Result<Self> {
        let truths = queries
            .points
            .ok_or_else(|| Error::Schema("query file needs x,y ground-truth columns for evaluation".into()))?;
        if queries.ap_ids != map.ap_ids() {
            return Err(Error::Schema("query AP roster differs from the radio map".into()));
        }
        let unlabeled = match unlabeled {
            Some(u) => {
                if u.ap_ids != map.ap_ids() {
                    return Err(Error::Schema("unlabeled AP roster differs from the radio map".into()));
                }
                u.samples
            }
            None => Vec::new(),
        };
        if queries.samples.is_empty() {
            return Err(Error::config("no queries to evaluate"));
        }
        Ok(Self {
            map,
            unlabeled,
            queries: queries.samples,
            truths,
        })
    }

    /// Same map and pool, queries restricted to `range`.
    pub fn with_query_range(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            map: self.map.clone(),
            unlabeled: self.unlabeled.clone(),
            queries: self.queries[range.clone()].to_vec(),
            truths: self.truths[range].to_vec(),
        }
    }

    /// SHA-256 over every query value, mask bit and truth coordinate.
    pub fn query_hash(&self) -> String {
        let mut h = Sha256::new();
        for (q, t) in self.queries.iter().zip(&self.truths) {
            h.update(t.x.to_le_bytes());
            h.update(t.y.to_le_bytes());
            for (v, m) in q.values().iter().zip(q.missing()) {
                h.update(v.to_le_bytes());
                h.update([*m as u8]);
            }
        }
        hex::encode(h.finalize())
    }
}

impl From<Testbed> for EvalData {
    fn from(tb: Testbed) -> Self {
        Self {
            map: tb.map,
            unlabeled: tb.unlabeled.samples,
            truths: tb.queries.points.unwrap_or_default(),
            queries: tb.queries.samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub radii: Vec<f64>,
    /// Also break accuracy down by coordinate sub-area.
    pub n_areas: Option<usize>,
    pub timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            radii: DEFAULT_RADII.to_vec(),
            n_areas: None,
            timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaAccuracy {
    pub area: usize,
    pub queries: usize,
    pub curve: Vec<CdfPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub curve: Vec<CdfPoint>,
    pub median_error: f64,
    pub mean_error: f64,
    pub macs_per_query: u64,
    /// Embedding dimension, absent for raw KNN.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub admitted: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub areas: Vec<AreaAccuracy>,
}

impl MethodReport {
    pub fn accuracy_at(&self, radius: f64) -> Option<f64> {
        self.curve.iter().find(|p| p.radius == radius).map(|p| p.accuracy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub train_seconds: f64,
    pub locate_seconds_per_query: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    /// Whether the regularized within-class scatter factored; reported on the `reg_sigma` axis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solver_stable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Value with the highest 1 m accuracy (first on ties); needs 1 among the radii.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_at_1m: Option<f64>,
    /// Largest accuracy range across successful points at any radius; reported on the `reg_sigma` axis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curve_spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub query_hash: String,
    pub queries: usize,
    pub reference_points: usize,
    pub radii: Vec<f64>,
    pub params: TrainParams,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub methods: Vec<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<SweepReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Vec<Timing>>,
}

impl EvalReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Validation(e.to_string()))
    }

    /// One `series,radius,accuracy` row per curve point.
    pub fn write_curves_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Validation(e.to_string());
        w.write_record(["series", "radius", "accuracy"]).map_err(err)?;
        let mut rows = |series: String, curve: &[CdfPoint]| -> Result<()> {
            for p in curve {
                w.write_record([series.clone(), p.radius.to_string(), p.accuracy.to_string()])
                    .map_err(err)?;
            }
            Ok(())
        };
        for m in &self.methods {
            rows(m.method.to_string(), &m.curve)?;
        }
        if let Some(s) = &self.sweep {
            for p in &s.points {
                if let Some(r) = &p.report {
                    rows(format!("{}={}", s.axis, p.value), &r.curve)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<curves>", e))
    }
}

struct Evaluated {
    report: MethodReport,
    timing: Timing,
    outcome: Option<TrainOutcome>,
}

fn train(data: &EvalData, method: Method, params: &TrainParams) -> Result<Option<TrainOutcome>> {
    match method {
        Method::Knn => Ok(None),
        Method::Lde => train_lde(&data.map, params).map(Some),
        Method::Sde => train_sde(&data.map, &data.unlabeled, params).map(Some),
    }
}

fn run_method(data: &EvalData, method: Method, params: &TrainParams, options: &EvalOptions) -> Result<Evaluated> {
    params.validate()?;
    let t0 = Instant::now();
    let outcome = train(data, method, params)?;
    let train_seconds = t0.elapsed().as_secs_f64();

    let k = params.knn_k;
    let fill = params.fill_dbm;
    let t1 = Instant::now();
    let fixes: Vec<(Point, u64)> = match &outcome {
        None => {
            let loc = RawLocator::new(&data.map);
            locate_all(&data.queries, |q, ops| loc.locate(q, k, fill, ops))?
        }
        Some(o) => {
            let loc = SdeLocator::new(&o.model);
            locate_all(&data.queries, |q, ops| loc.locate(q, k, fill, ops))?
        }
    };
    let locate_seconds = t1.elapsed().as_secs_f64();

    let estimates: Vec<Point> = fixes.iter().map(|f| f.0).collect();
    let errors = position_errors(&estimates, &data.truths)?;
    let areas = match options.n_areas {
        Some(n) => area_breakdown(data, &errors, n, params.seed, &options.radii)?,
        None => Vec::new(),
    };
    let report = MethodReport {
        method,
        curve: cdf_from_errors(&errors, &options.radii)?,
        median_error: median(&errors),
        mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
        macs_per_query: fixes[0].1,
        dim: outcome.as_ref().map(|o| o.model.dim()),
        admitted: outcome.as_ref().map(|o| o.model.provenance.admitted),
        areas,
    };
    Ok(Evaluated {
        report,
        timing: Timing {
            label: method.to_string(),
            train_seconds,
            locate_seconds_per_query: locate_seconds / data.queries.len() as f64,
        },
        outcome,
    })
}

fn locate_all<F>(queries: &[RssVector], locate: F) -> Result<Vec<(Point, u64)>>
where
    F: Fn(&RssVector, &mut OpCount) -> Result<crate::locate::PositionFix> + Sync,
{
    queries
        .par_iter()
        .map(|q| {
            let mut ops = OpCount::default();
            let fix = locate(q, &mut ops)?;
            Ok((fix.coord, ops.macs))
        })
        .collect()
}

/// Queries are assigned to the area of their nearest RP by coordinate.
fn area_breakdown(
    data: &EvalData,
    errors: &[f64],
    n_areas: usize,
    seed: u64,
    radii: &[f64],
) -> Result<Vec<AreaAccuracy>> {
    let areas = partition_subareas(&data.map, n_areas, seed)?;
    let coords = data.map.coords();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_areas];
    for (t, &e) in data.truths.iter().zip(errors) {
        buckets[areas[nearest(t, &coords)]].push(e);
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(area, errs)| {
            let curve = if errs.is_empty() {
                Vec::new()
            } else {
                cdf_from_errors(&errs, radii)?
            };
            Ok(AreaAccuracy {
                area,
                queries: errs.len(),
                curve,
            })
        })
        .collect()
}

fn base_report(data: &EvalData, params: &TrainParams, options: &EvalOptions) -> Result<EvalReport> {
    Ok(EvalReport {
        query_hash: data.query_hash(),
        queries: data.queries.len(),
        reference_points: data.map.len(),
        radii: sorted_radii(&options.radii)?,
        params: params.clone(),
        methods: Vec::new(),
        sweep: None,
        timings: None,
    })
}

/// One method on the data's queries.
pub fn evaluate(data: &EvalData, method: Method, params: &TrainParams, options: &EvalOptions) -> Result<MethodReport> {
    run_method(data, method, params, options).map(|e| e.report)
}

/// Every listed method on the identical query set.
pub fn compare_methods(
    data: &EvalData,
    params: &TrainParams,
    methods: &[Method],
    options: &EvalOptions,
) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(Error::config("--methods must list at least one method"));
    }
    let mut report = base_report(data, params, options)?;
    let mut timings = Vec::new();
    for &m in methods {
        let e = run_method(data, m, params, options)?;
        report.methods.push(e.report);
        timings.push(e.timing);
    }
    if options.timings {
        report.timings = Some(timings);
    }
    Ok(report)
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    IntrinsicDim,
    NClusters,
    AffinityK,
    RegSigma,
    UpdateRatio,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::IntrinsicDim => "intrinsic_dim",
            SweepAxis::NClusters => "n_clusters",
            SweepAxis::AffinityK => "affinity_k",
            SweepAxis::RegSigma => "reg_sigma",
            SweepAxis::UpdateRatio => "update_ratio",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "intrinsic_dim" | "dim" => Ok(SweepAxis::IntrinsicDim),
            "n_clusters" | "clusters" => Ok(SweepAxis::NClusters),
            "affinity_k" => Ok(SweepAxis::AffinityK),
            "reg_sigma" => Ok(SweepAxis::RegSigma),
            "update_ratio" | "ratio" => Ok(SweepAxis::UpdateRatio),
            other => Err(Error::config(format!("--axis: unknown axis `{other}`"))),
        }
    }
}

impl SweepAxis {
    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &TrainParams, value: f64) -> Result<TrainParams> {
        let mut p = base.clone();
        let int = || {
            if value >= 1.0 && value.fract() == 0.0 && value < u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!("--values: {self} needs positive integers, got {value}")))
            }
        };
        match self {
            SweepAxis::IntrinsicDim => p.intrinsic_dim = IntrinsicDim::Fixed(int()?),
            SweepAxis::NClusters => p.n_clusters = int()?,
            SweepAxis::AffinityK => p.affinity_k = int()?,
            SweepAxis::RegSigma => p.reg_sigma = value,
            SweepAxis::UpdateRatio => p.update_ratio = value,
        }
        p.validate()?;
        Ok(p)
    }
}

/// Parses `1,0.5,0.2` or an inclusive integer range `1..27`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("--values: cannot parse `{spec}`"));
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let lo: i64 = a.trim().parse().map_err(|_| bad())?;
        let hi: i64 = b.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).map(|v| v as f64).collect());
    }
    let values: Vec<f64> = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

/// Trains and evaluates SDE-KNN once per value, all other parameters held
/// at `base`. A value whose training fails is recorded and skipped.
pub fn run_sweep(
    data: &EvalData,
    axis: SweepAxis,
    values: &[f64],
    base: &TrainParams,
    options: &EvalOptions,
) -> Result<EvalReport> {
    if values.is_empty() {
        return Err(Error::config("--values must list at least one value"));
    }
    base.validate()?;
    let mut report = base_report(data, base, options)?;
    let results: Vec<(SweepPoint, Option<Timing>)> = values
        .par_iter()
        .map(|&value| {
            let outcome = axis.apply(base, value).and_then(|p| run_method(data, Method::Sde, &p, options));
            match outcome {
                Ok(e) => {
                    let residual = e.outcome.as_ref().map(|o| o.diagnostics.residual_ratio);
                    let timing = Timing {
                        label: format!("{axis}={value}"),
                        ..e.timing
                    };
                    let point = SweepPoint {
                        value,
                        report: Some(e.report),
                        error: None,
                        solver_stable: (axis == SweepAxis::RegSigma).then_some(true),
                        residual_ratio: residual,
                    };
                    (point, Some(timing))
                }
                Err(err) => {
                    let point = SweepPoint {
                        value,
                        report: None,
                        solver_stable: (axis == SweepAxis::RegSigma && matches!(err, Error::Numerical(_))).then_some(false),
                        error: Some(err.to_string()),
                        residual_ratio: None,
                    };
                    (point, None)
                }
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    let mut points = Vec::with_capacity(results.len());
    let mut timings = Vec::new();
    for (p, t) in results {
        if let Some(acc) = p.report.as_ref().and_then(|r| r.accuracy_at(1.0)) {
            if best.is_none_or(|(b, _)| acc > b) {
                best = Some((acc, p.value));
            }
        }
        timings.extend(t);
        points.push(p);
    }
    let curve_spread = (axis == SweepAxis::RegSigma).then(|| curve_spread(&points));
    report.sweep = Some(SweepReport {
        axis,
        points,
        best_at_1m: best.map(|(_, v)| v),
        curve_spread,
    });
    if options.timings {
        report.timings = Some(timings);
    }
    Ok(report)
}

fn curve_spread(points: &[SweepPoint]) -> f64 {
    let curves: Vec<&Vec<CdfPoint>> = points.iter().filter_map(|p| p.report.as_ref().map(|r| &r.curve)).collect();
    let Some(first) = curves.first() else {
        return 0.0;
    };
    (0..first.len())
        .map(|i| {
            let (lo, hi) = curves.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c[i].accuracy), hi.max(c[i].accuracy))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}
