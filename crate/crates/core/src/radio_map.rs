//! Fingerprint observations, reference points and the offline radio map.
//!
//! The on-disk format is CSV with header `x,y,ap_<id>...` and one row per
//! sample. A missing AP is an empty cell. Consecutive rows sharing a
//! coordinate belong to the same reference point; a coordinate that
//! reappears after a different one is rejected as a duplicate RP.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Weakest signal accepted in a fingerprint, dBm.
pub const RSS_FLOOR_DBM: f64 = -110.0;
/// Strongest signal accepted in a fingerprint, dBm.
pub const RSS_CEIL_DBM: f64 = 0.0;

const GRID_TAG: &str = "# grid_interval=";

/// Planar position in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One observation: a signal strength per AP and a mask of APs not heard.
///
/// Masked entries hold `0.0` as a placeholder; callers read them through
/// [`RssVector::filled`].
#[derive(Clone, Debug, PartialEq)]
pub struct RssVector {
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl RssVector {
    pub fn new(mut values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        check_len(values.len(), missing.len())?;
        for (j, (v, &m)) in values.iter_mut().zip(&missing).enumerate() {
            if m {
                *v = 0.0;
            } else if !(RSS_FLOOR_DBM..=RSS_CEIL_DBM).contains(v) {
                return Err(Error::Validation(format!(
                    "AP {j}: {v} dBm outside [{RSS_FLOOR_DBM}, {RSS_CEIL_DBM}]"
                )));
            }
        }
        Ok(Self { values, missing })
    }

    /// Observation with every AP heard.
    pub fn complete(values: Vec<f64>) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(values, missing)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_complete(&self) -> bool {
        !self.missing.iter().any(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Value list with masked APs replaced by `fill_dbm`.
    pub fn filled(&self, fill_dbm: f64) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { fill_dbm } else { v })
            .collect()
    }

    /// Copy of this observation with the given APs masked.
    pub fn with_masked(&self, aps: &[usize]) -> Self {
        let mut out = self.clone();
        for &j in aps {
            if j < out.len() {
                out.missing[j] = true;
                out.values[j] = 0.0;
            }
        }
        out
    }
}

/// Per-AP mean over the samples that heard the AP; APs never heard get `fill_dbm`.
pub fn aggregate_samples(samples: &[RssVector], fill_dbm: f64) -> Result<RssVector> {
    let n = samples
        .first()
        .map(RssVector::len)
        .ok_or_else(|| Error::Validation("reference point without samples".into()))?;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for s in samples {
        check_len(n, s.len())?;
        for j in 0..n {
            if !s.missing[j] {
                sum[j] += s.values[j];
                count[j] += 1;
            }
        }
    }
    let values = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| if c == 0 { fill_dbm } else { s / c as f64 })
        .collect();
    RssVector::complete(values)
}

/// A surveyed location with its raw samples and aggregated fingerprint.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePoint {
    pub coord: Point,
    pub samples: Vec<RssVector>,
    pub fingerprint: RssVector,
}

impl ReferencePoint {
    pub fn from_samples(coord: Point, samples: Vec<RssVector>, fill_dbm: f64) -> Result<Self> {
        let fingerprint = aggregate_samples(&samples, fill_dbm)?;
        Ok(Self {
            coord,
            samples,
            fingerprint,
        })
    }
}

/// The labeled offline database.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioMap {
    ap_ids: Vec<String>,
    rps: Vec<ReferencePoint>,
    grid_interval: f64,
}

impl RadioMap {
    pub fn new(ap_ids: Vec<String>, rps: Vec<ReferencePoint>, grid_interval: f64) -> Result<Self> {
        if !(grid_interval > 0.0 && grid_interval.is_finite()) {
            return Err(Error::Validation(format!(
                "grid interval must be positive, got {grid_interval}"
            )));
        }
        if rps.is_empty() {
            return Err(Error::Validation("radio map has no reference points".into()));
        }
        let n = ap_ids.len();
        let mut seen = HashSet::with_capacity(rps.len());
        for (i, rp) in rps.iter().enumerate() {
            if rp.samples.is_empty() {
                return Err(Error::Validation(format!("RP {i} has no samples")));
            }
            if rp.fingerprint.len() != n || rp.samples.iter().any(|s| s.len() != n) {
                return Err(Error::Schema(format!(
                    "RP {i}: fingerprint length {} does not match {n} APs",
                    rp.fingerprint.len()
                )));
            }
            if !rp.fingerprint.is_complete() {
                return Err(Error::Validation(format!("RP {i}: fingerprint has missing APs")));
            }
            if !seen.insert((rp.coord.x.to_bits(), rp.coord.y.to_bits())) {
                return Err(Error::Validation(format!(
                    "duplicate RP coordinate ({}, {})",
                    rp.coord.x, rp.coord.y
                )));
            }
        }
        Ok(Self {
            ap_ids,
            rps,
            grid_interval,
        })
    }

    /// Groups per-sample rows into RPs; consecutive rows with equal coordinates form one RP.
    pub fn from_rows(
        ap_ids: Vec<String>,
        rows: Vec<(Point, RssVector)>,
        grid_interval: Option<f64>,
        fill_dbm: f64,
    ) -> Result<Self> {
        let mut groups: Vec<(Point, Vec<RssVector>)> = Vec::new();
        for (p, s) in rows {
            match groups.last_mut() {
                Some((q, samples)) if q.x.to_bits() == p.x.to_bits() && q.y.to_bits() == p.y.to_bits() => {
                    samples.push(s)
                }
                _ => groups.push((p, vec![s])),
            }
        }
        let grid = match grid_interval {
            Some(g) => g,
            None => infer_grid_interval(groups.iter().map(|(p, _)| *p)),
        };
        let rps = groups
            .into_iter()
            .map(|(p, samples)| ReferencePoint::from_samples(p, samples, fill_dbm))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ap_ids, rps, grid)
    }

    pub fn ap_ids(&self) -> &[String] {
        &self.ap_ids
    }

    pub fn n_aps(&self) -> usize {
        self.ap_ids.len()
    }

    pub fn len(&self) -> usize {
        self.rps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rps.is_empty()
    }

    pub fn rps(&self) -> &[ReferencePoint] {
        &self.rps
    }

    pub fn grid_interval(&self) -> f64 {
        self.grid_interval
    }

    pub fn coords(&self) -> Vec<Point> {
        self.rps.iter().map(|rp| rp.coord).collect()
    }

    /// Fingerprints as rows of length `n_aps`.
    pub fn fingerprints(&self) -> Vec<Vec<f64>> {
        self.rps.iter().map(|rp| rp.fingerprint.values().to_vec()).collect()
    }

    pub fn read_csv<R: Read>(reader: R, fill_dbm: f64) -> Result<Self> {
        let table = read_table(reader, true)?;
        let rows = table
            .points
            .expect("coordinates required")
            .into_iter()
            .zip(table.samples)
            .collect();
        Self::from_rows(table.ap_ids, rows, table.grid_interval, fill_dbm)
    }

    pub fn load(path: impl AsRef<Path>, fill_dbm: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(file), fill_dbm)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "{GRID_TAG}{}", self.grid_interval).map_err(|e| Error::io("<radio map>", e))?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header(&self.ap_ids, true)).map_err(csv_err)?;
        for rp in &self.rps {
            for s in &rp.samples {
                w.write_record(record(Some(rp.coord), s)).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<radio map>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(file)).map_err(|e| relabel_io(e, path))
    }
}

/// Smallest positive coordinate step along either axis; 1 m for a single RP.
fn infer_grid_interval(points: impl Iterator<Item = Point>) -> f64 {
    let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = points.map(|p| (p.x, p.y)).unzip();
    let mut best = f64::INFINITY;
    for axis in [&mut xs, &mut ys] {
        axis.sort_by(f64::total_cmp);
        for w in axis.windows(2) {
            let gap = w[1] - w[0];
            if gap > 1e-9 && gap < best {
                best = gap;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

/// Rows of observations sharing one AP roster, with optional ground-truth coordinates.
///
/// Used for query files (`x,y,ap_...`) and unlabeled pools (`ap_...`).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub ap_ids: Vec<String>,
    pub points: Option<Vec<Point>>,
    pub samples: Vec<RssVector>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let t = read_table(reader, false)?;
        Ok(Self {
            ap_ids: t.ap_ids,
            points: t.points,
            samples: t.samples,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header(&self.ap_ids, self.points.is_some())).map_err(csv_err)?;
        for (i, s) in self.samples.iter().enumerate() {
            let p = self.points.as_ref().map(|ps| ps[i]);
            w.write_record(record(p, s)).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<observations>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(file)).map_err(|e| relabel_io(e, path))
    }
}

fn relabel_io(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn header(ap_ids: &[String], with_coords: bool) -> Vec<String> {
    let mut h = Vec::with_capacity(ap_ids.len() + 2);
    if with_coords {
        h.push("x".to_string());
        h.push("y".to_string());
    }
    h.extend(ap_ids.iter().map(|id| format!("ap_{id}")));
    h
}

fn record(p: Option<Point>, s: &RssVector) -> Vec<String> {
    let mut r = Vec::with_capacity(s.len() + 2);
    if let Some(p) = p {
        r.push(p.x.to_string());
        r.push(p.y.to_string());
    }
    for (v, &m) in s.values().iter().zip(s.missing()) {
        r.push(if m { String::new() } else { v.to_string() });
    }
    r
}

struct Table {
    ap_ids: Vec<String>,
    points: Option<Vec<Point>>,
    samples: Vec<RssVector>,
    grid_interval: Option<f64>,
}

fn read_table<R: Read>(mut reader: R, require_coords: bool) -> Result<Table> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<csv>", e))?;
    let mut grid_interval = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(v) = line.strip_prefix(GRID_TAG) {
            grid_interval = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: 1,
                message: format!("grid interval: {e}"),
            })?);
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let head = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = head.iter().map(str::trim).collect();
    let has_coords = cols.len() >= 2 && cols[0] == "x" && cols[1] == "y";
    if require_coords && !has_coords {
        return Err(Error::Schema("header must start with x,y".into()));
    }
    let offset = if has_coords { 2 } else { 0 };
    let ap_ids = cols[offset..]
        .iter()
        .map(|c| {
            c.strip_prefix("ap_")
                .map(str::to_string)
                .ok_or_else(|| Error::Schema(format!("column `{c}` is not of the form ap_<id>")))
        })
        .collect::<Result<Vec<_>>>()?;
    if ap_ids.is_empty() {
        return Err(Error::Schema("no AP columns".into()));
    }
    let n = ap_ids.len();
    let mut points = has_coords.then(Vec::new);
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != n + offset {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields, found {}",
                n + offset,
                rec.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{s}`: {e}"),
            })
        };
        if let Some(ps) = points.as_mut() {
            ps.push(Point::new(num(&rec[0])?, num(&rec[1])?));
        }
        let mut values = Vec::with_capacity(n);
        let mut missing = Vec::with_capacity(n);
        for cell in rec.iter().skip(offset) {
            if cell.trim().is_empty() {
                values.push(0.0);
                missing.push(true);
            } else {
                values.push(num(cell)?);
                missing.push(false);
            }
        }
        let s = RssVector::new(values, missing).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        samples.push(s);
    }
    Ok(Table {
        ap_ids,
        points,
        samples,
        grid_interval,
    })
}
