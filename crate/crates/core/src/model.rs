//! Training parameters and the trained embedding model, with JSON persistence.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kfcm::KfcmParams;
use crate::radio_map::Point;

pub const MODEL_VERSION: &str = "wlan-sde-model/1";

/// Target embedding dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum IntrinsicDim {
    /// Estimate from the covariance spectrum of the labeled fingerprints.
    Auto,
    Fixed(usize),
}

impl fmt::Display for IntrinsicDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntrinsicDim::Auto => f.write_str("auto"),
            IntrinsicDim::Fixed(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for IntrinsicDim {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(IntrinsicDim::Auto);
        }
        match s.parse::<usize>() {
            Ok(d) if d > 0 => Ok(IntrinsicDim::Fixed(d)),
            _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
        }
    }
}

impl From<IntrinsicDim> for String {
    fn from(d: IntrinsicDim) -> Self {
        d.to_string()
    }
}

impl TryFrom<String> for IntrinsicDim {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

/// Every knob of the offline training and online matching pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub intrinsic_dim: IntrinsicDim,
    /// Variance fraction the automatic dimension estimate must capture.
    pub dim_energy: f64,
    pub n_clusters: usize,
    pub affinity_k: usize,
    /// Heat-kernel width; `None` uses the mean squared edge length.
    pub heat_t: Option<f64>,
    /// Gaussian kernel factor for clustering; `None` uses the median heuristic.
    pub kernel_lambda: Option<f64>,
    pub reg_sigma: f64,
    pub fuzzifier_m: f64,
    pub converge_eps: f64,
    pub max_iter: usize,
    pub match_eps: f64,
    pub match_threshold: usize,
    pub update_ratio: f64,
    pub knn_k: usize,
    pub fill_dbm: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            intrinsic_dim: IntrinsicDim::Auto,
            dim_energy: 0.95,
            n_clusters: 2,
            affinity_k: 6,
            heat_t: None,
            kernel_lambda: None,
            reg_sigma: 1e-8,
            fuzzifier_m: 2.0,
            converge_eps: 1e-6,
            max_iter: 100,
            match_eps: 6.0,
            match_threshold: 13,
            update_ratio: 0.2,
            knn_k: 3,
            fill_dbm: crate::DEFAULT_FILL_DBM,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, what: &str| Err(Error::config(format!("--{name} must be {what}")));
        if let IntrinsicDim::Fixed(0) = self.intrinsic_dim {
            return bad("dim", "positive or `auto`");
        }
        if !(self.dim_energy > 0.0 && self.dim_energy < 1.0) {
            return bad("dim-energy", "in (0, 1)");
        }
        if self.n_clusters == 0 {
            return bad("clusters", "positive");
        }
        if self.affinity_k == 0 {
            return bad("affinity-k", "positive");
        }
        if matches!(self.heat_t, Some(t) if !(t > 0.0 && t.is_finite())) {
            return bad("heat-t", "positive");
        }
        if matches!(self.kernel_lambda, Some(l) if !(l > 0.0 && l.is_finite())) {
            return bad("kernel-lambda", "positive");
        }
        if !(self.reg_sigma > 0.0 && self.reg_sigma.is_finite()) {
            return bad("reg-sigma", "positive");
        }
        if !(self.fuzzifier_m > 1.0 && self.fuzzifier_m.is_finite()) {
            return bad("fuzzifier", "greater than 1");
        }
        if !(self.converge_eps > 0.0) {
            return bad("converge-eps", "positive");
        }
        if self.max_iter == 0 {
            return bad("max-iter", "positive");
        }
        if !(self.match_eps > 0.0) {
            return bad("match-eps", "positive");
        }
        if self.match_threshold == 0 {
            return bad("match-threshold", "positive");
        }
        if !(self.update_ratio > 0.0 && self.update_ratio <= 1.0) {
            return bad("ratio", "in (0, 1]");
        }
        if self.knn_k == 0 {
            return bad("knn-k", "positive");
        }
        if !self.fill_dbm.is_finite() {
            return bad("fill-dbm", "finite");
        }
        Ok(())
    }

    pub fn kfcm(&self) -> KfcmParams {
        KfcmParams {
            n_clusters: self.n_clusters,
            fuzzifier: self.fuzzifier_m,
            kernel_lambda: self.kernel_lambda,
            converge_eps: self.converge_eps,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }

    /// Most unlabeled samples that may join `labeled` fingerprints: `⌊m(1 − r)/r⌋`.
    pub fn admission_cap(&self, labeled: usize) -> usize {
        let r = self.update_ratio;
        (labeled as f64 * (1.0 - r) / r + 1e-9).floor() as usize
    }
}

/// An unlabeled observation admitted into training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmittedSample {
    pub values: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub labeled: usize,
    pub admitted: usize,
}

/// Trained embedding plus the reduced online database.
///
/// `embedding` is `n × d`; `drold` is `d × m'` with one column per labeled
/// reference point, aligned with `coords`, `labels` and `fingerprints`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub ap_ids: Vec<String>,
    pub embedding: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub drold: DMatrix<f64>,
    pub coords: Vec<Point>,
    pub labels: Vec<usize>,
    pub fingerprints: Vec<Vec<f64>>,
    pub admitted: Vec<AdmittedSample>,
    pub params: TrainParams,
    pub provenance: Provenance,
}

impl EmbeddingModel {
    pub fn n_aps(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ap_ids.len();
        let d = self.embedding.ncols();
        if self.embedding.nrows() != n {
            return Err(Error::ModelFormat(format!(
                "embedding has {} rows for {n} APs",
                self.embedding.nrows()
            )));
        }
        if d == 0 || d > n {
            return Err(Error::ModelFormat(format!("embedding dimension {d} outside [1, {n}]")));
        }
        if self.drold.nrows() != d {
            return Err(Error::ModelFormat(format!(
                "drold has {} rows, embedding has {d} columns",
                self.drold.nrows()
            )));
        }
        let m = self.drold.ncols();
        if self.coords.len() != m || self.labels.len() != m || self.fingerprints.len() != m {
            return Err(Error::ModelFormat(format!(
                "drold has {m} columns but {} coords, {} labels, {} fingerprints",
                self.coords.len(),
                self.labels.len(),
                self.fingerprints.len()
            )));
        }
        if self.eigenvalues.len() != d {
            return Err(Error::ModelFormat("eigenvalue count differs from dimension".into()));
        }
        if self.provenance.labeled != m || self.provenance.admitted != self.admitted.len() {
            return Err(Error::ModelFormat("provenance counts disagree with contents".into()));
        }
        for (c, f) in self.fingerprints.iter().enumerate() {
            if f.len() != n {
                return Err(Error::ModelFormat(format!("fingerprint {c} has length {}", f.len())));
            }
            for r in 0..d {
                let expect: f64 = self.embedding.column(r).iter().zip(f).map(|(a, b)| a * b).sum();
                let got = self.drold[(r, c)];
                if (expect - got).abs() > 1e-9 * (1.0 + expect.abs()) {
                    return Err(Error::ModelFormat(format!(
                        "drold column {c} is not the projection of its fingerprint"
                    )));
                }
            }
        }
        if self.admitted.iter().any(|a| a.values.len() != n) {
            return Err(Error::ModelFormat("admitted sample length mismatch".into()));
        }
        self.params.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile::from(self);
        serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "version `{}` is not `{MODEL_VERSION}`",
                file.version
            )));
        }
        let model = file.into_model()?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: String,
    ap_ids: Vec<String>,
    embedding: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    drold: Vec<Vec<f64>>,
    coords: Vec<[f64; 2]>,
    labels: Vec<usize>,
    fingerprints: Vec<Vec<f64>>,
    admitted: Vec<AdmittedSample>,
    params: TrainParams,
    provenance: Provenance,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols_if_empty: usize, what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(ncols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ModelFormat(format!("{what} rows are ragged")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl From<&EmbeddingModel> for ModelFile {
    fn from(m: &EmbeddingModel) -> Self {
        Self {
            version: MODEL_VERSION.to_string(),
            ap_ids: m.ap_ids.clone(),
            embedding: rows_of(&m.embedding),
            eigenvalues: m.eigenvalues.clone(),
            drold: rows_of(&m.drold),
            coords: m.coords.iter().map(|p| [p.x, p.y]).collect(),
            labels: m.labels.clone(),
            fingerprints: m.fingerprints.clone(),
            admitted: m.admitted.clone(),
            params: m.params.clone(),
            provenance: m.provenance,
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<EmbeddingModel> {
        let embedding = matrix_from_rows(&self.embedding, 0, "embedding")?;
        let drold = matrix_from_rows(&self.drold, self.coords.len(), "drold")?;
        Ok(EmbeddingModel {
            ap_ids: self.ap_ids,
            embedding,
            eigenvalues: self.eigenvalues,
            drold,
            coords: self.coords.into_iter().map(|[x, y]| Point::new(x, y)).collect(),
            labels: self.labels,
            fingerprints: self.fingerprints,
            admitted: self.admitted,
            params: self.params,
            provenance: self.provenance,
        })
    }
}
