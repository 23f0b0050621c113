//! Online positioning by k-nearest-neighbor matching, in raw RSS space or
//! in the reduced embedding space.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::model::EmbeddingModel;
use crate::radio_map::{Point, RadioMap, RssVector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositionFix {
    pub coord: Point,
    pub neighbor_ids: Vec<usize>,
    /// Ascending.
    pub neighbor_distances: Vec<f64>,
}

/// Multiply-accumulate counter for instrumenting query cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    pub macs: u64,
}

pub fn euclid(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Missing APs replaced by `fill_dbm`.
pub fn fill_missing(sample: &RssVector, fill_dbm: f64) -> Vec<f64> {
    sample.filled(fill_dbm)
}

/// Reference vectors stored column-wise (`dim × N`) with one coordinate per column.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSet {
    pub vectors: DMatrix<f64>,
    pub coords: Vec<Point>,
}

impl ReferenceSet {
    pub fn new(vectors: DMatrix<f64>, coords: Vec<Point>) -> Result<Self> {
        check_len(vectors.ncols(), coords.len())?;
        Ok(Self { vectors, coords })
    }

    pub fn from_map(map: &RadioMap) -> Self {
        let fps = map.fingerprints();
        let vectors = DMatrix::from_fn(map.n_aps(), map.len(), |r, c| fps[c][r]);
        Self {
            vectors,
            coords: map.coords(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

pub fn knn_locate(query: &[f64], refs: &ReferenceSet, k: usize) -> Result<PositionFix> {
    knn_locate_counted(query, refs, k, &mut OpCount::default())
}

/// k smallest distances (lower index on ties), unweighted centroid of their coordinates.
pub fn knn_locate_counted(query: &[f64], refs: &ReferenceSet, k: usize, ops: &mut OpCount) -> Result<PositionFix> {
    let dim = refs.vectors.nrows();
    check_len(dim, query.len())?;
    let n = refs.len();
    if k == 0 || k > n {
        return Err(Error::config(format!("k = {k} outside [1, {n}]")));
    }
    // sorted by (distance², index); scanning in index order keeps earlier ties
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    let data = refs.vectors.as_slice();
    for (c, col) in data.chunks_exact(dim.max(1)).take(n).enumerate() {
        let mut s = 0.0;
        for (a, b) in col.iter().zip(query) {
            let d = a - b;
            s += d * d;
        }
        if best.len() == k && s >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= s);
        best.insert(pos, (s, c));
        best.truncate(k);
    }
    ops.macs += (dim * n) as u64;

    let mut coord = Point::new(0.0, 0.0);
    for &(_, c) in &best {
        coord.x += refs.coords[c].x;
        coord.y += refs.coords[c].y;
    }
    coord.x /= k as f64;
    coord.y /= k as f64;
    Ok(PositionFix {
        coord,
        neighbor_ids: best.iter().map(|&(_, c)| c).collect(),
        neighbor_distances: best.iter().map(|&(s, _)| s.sqrt()).collect(),
    })
}

/// Raw-space KNN against the radio map.
#[derive(Clone, Debug)]
pub struct RawLocator {
    refs: ReferenceSet,
}

impl RawLocator {
    pub fn new(map: &RadioMap) -> Self {
        Self {
            refs: ReferenceSet::from_map(map),
        }
    }

    pub fn refs(&self) -> &ReferenceSet {
        &self.refs
    }

    pub fn locate(&self, query: &RssVector, k: usize, fill_dbm: f64, ops: &mut OpCount) -> Result<PositionFix> {
        knn_locate_counted(&fill_missing(query, fill_dbm), &self.refs, k, ops)
    }
}

/// KNN in embedding space against a model's DROLD.
#[derive(Clone, Debug)]
pub struct SdeLocator {
    embedding: DMatrix<f64>,
    refs: ReferenceSet,
}

impl SdeLocator {
    pub fn new(model: &EmbeddingModel) -> Self {
        Self {
            embedding: model.embedding.clone(),
            refs: ReferenceSet {
                vectors: model.drold.clone(),
                coords: model.coords.clone(),
            },
        }
    }

    pub fn refs(&self) -> &ReferenceSet {
        &self.refs
    }

    pub fn locate(&self, query: &RssVector, k: usize, fill_dbm: f64, ops: &mut OpCount) -> Result<PositionFix> {
        let x = fill_missing(query, fill_dbm);
        let (n, d) = self.embedding.shape();
        check_len(n, x.len())?;
        let mut reduced = vec![0.0; d];
        for (r, col) in self.embedding.as_slice().chunks_exact(n).enumerate() {
            reduced[r] = col.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
        ops.macs += (n * d) as u64;
        knn_locate_counted(&reduced, &self.refs, k, ops)
    }
}

/// Fill, project with the model embedding, match against DROLD.
pub fn locate_sde(model: &EmbeddingModel, raw_query: &RssVector, k: usize, fill_dbm: f64) -> Result<PositionFix> {
    SdeLocator::new(model).locate(raw_query, k, fill_dbm, &mut OpCount::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn refs_from(rows: &[Vec<f64>], coords: Vec<Point>) -> ReferenceSet {
        let dim = rows[0].len();
        ReferenceSet::new(DMatrix::from_fn(dim, rows.len(), |r, c| rows[c][r]), coords).unwrap()
    }

    #[test]
    fn euclid_basics() {
        assert_eq!(euclid(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(euclid(&[0.0, 3.0], &[4.0, 0.0]).unwrap(), 5.0);
        assert!(euclid(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn euclid_matches_component_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let a: Vec<f64> = (0..27).map(|_| -100.0 * rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..27).map(|_| -100.0 * rng.random::<f64>()).collect();
            let mut s = 0.0;
            for j in 0..27 {
                s += (a[j] - b[j]) * (a[j] - b[j]);
            }
            assert!((euclid(&a, &b).unwrap() - s.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn fill_rules() {
        let s = RssVector::complete(vec![-50.0, -60.0]).unwrap();
        assert_eq!(fill_missing(&s, -100.0), vec![-50.0, -60.0]);
        let all = RssVector::new(vec![-1.0, -2.0, -3.0], vec![true; 3]).unwrap();
        assert_eq!(fill_missing(&all, 0.0), vec![0.0; 3]);
        let some = RssVector::new(vec![-50.0, -60.0, -70.0], vec![false, true, false]).unwrap();
        assert_eq!(fill_missing(&some, -93.5), vec![-50.0, -93.5, -70.0]);
    }

    #[test]
    fn exact_match_k1() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![-40.0 - i as f64, -70.0 + i as f64]).collect();
        let coords: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.5)).collect();
        let refs = refs_from(&rows, coords);
        let fix = knn_locate(&rows[7], &refs, 1).unwrap();
        assert_eq!(fix.coord, Point::new(7.0, 0.5));
        assert_eq!(fix.neighbor_ids, vec![7]);
        assert_eq!(fix.neighbor_distances, vec![0.0]);
    }

    #[test]
    fn equidistant_pair_centroid() {
        let refs = refs_from(
            &[vec![-50.0], vec![-60.0], vec![-90.0]],
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(5.0, 5.0)],
        );
        let fix = knn_locate(&[-55.0], &refs, 2).unwrap();
        assert_eq!(fix.coord, Point::new(0.5, 0.0));
    }

    #[test]
    fn k_bounds() {
        let refs = refs_from(&[vec![-50.0]], vec![Point::new(0.0, 0.0)]);
        assert!(matches!(knn_locate(&[-50.0], &refs, 2), Err(Error::Config(_))));
        assert!(knn_locate(&[-50.0], &refs, 0).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let refs = refs_from(
            &[vec![-50.0], vec![-50.0], vec![-50.0]],
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)],
        );
        let fix = knn_locate(&[-50.0], &refs, 2).unwrap();
        assert_eq!(fix.neighbor_ids, vec![0, 1]);
    }

    #[test]
    fn op_count_is_dim_times_refs() {
        let rows: Vec<Vec<f64>> = (0..13).map(|i| vec![-(i as f64); 4]).collect();
        let refs = refs_from(&rows, vec![Point::new(0.0, 0.0); 13]);
        let mut ops = OpCount::default();
        knn_locate_counted(&[-3.0; 4], &refs, 3, &mut ops).unwrap();
        assert_eq!(ops.macs, 52);
    }
}
