//! Synthetic hallway testbed: log-distance path loss with Gaussian shadowing.
//!
//! Reference points sit on a regular grid covering a `length × width`
//! hallway; APs are scattered along the hallway in the rooms on either
//! side. The AP layout is drawn from `layout_seed`, all measurement noise
//! from `seed`, so two noise seeds share one geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio_map::{ObservationSet, Point, RadioMap, ReferencePoint, RssVector, RSS_CEIL_DBM, RSS_FLOOR_DBM};

const STREAM_MAP: u64 = 1;
const STREAM_QUERIES: u64 = 2;
const STREAM_POOL: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub hallway_length: f64,
    pub hallway_width: f64,
    pub grid_interval: f64,
    pub n_aps: usize,
    pub pathloss_exponent: f64,
    pub tx_power_at_1m: f64,
    pub shadowing_sigma: f64,
    pub samples_per_rp: usize,
    pub dropout_prob: f64,
    /// Farthest an AP may sit from the hallway edge, meters.
    pub ap_setback: f64,
    pub n_queries: usize,
    pub n_unlabeled: usize,
    /// Scans averaged into each unlabeled observation.
    pub unlabeled_scans: usize,
    pub layout_seed: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            hallway_length: 50.0,
            hallway_width: 2.0,
            grid_interval: 0.5,
            n_aps: 27,
            pathloss_exponent: 3.0,
            tx_power_at_1m: -30.0,
            shadowing_sigma: 4.0,
            samples_per_rp: 20,
            dropout_prob: 0.0,
            ap_setback: 6.0,
            n_queries: 500,
            n_unlabeled: 3000,
            unlabeled_scans: 10,
            layout_seed: 7,
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hallway-length", self.hallway_length),
            ("hallway-width", self.hallway_width),
            ("grid-interval", self.grid_interval),
            ("pathloss-exponent", self.pathloss_exponent),
            ("ap-setback", self.ap_setback),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("--{name} must be positive, got {v}")));
            }
        }
        if self.n_aps == 0 {
            return Err(Error::config("--n-aps must be positive"));
        }
        if self.unlabeled_scans == 0 {
            return Err(Error::config("--unlabeled-scans must be positive"));
        }
        if self.samples_per_rp == 0 {
            return Err(Error::config("--samples-per-rp must be positive"));
        }
        if !(self.shadowing_sigma >= 0.0 && self.shadowing_sigma.is_finite()) {
            return Err(Error::config("--shadowing-sigma must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::config("--dropout-prob must lie in [0, 1)"));
        }
        if !(RSS_FLOOR_DBM..=RSS_CEIL_DBM).contains(&self.tx_power_at_1m) {
            return Err(Error::config("--tx-power must lie in [-110, 0] dBm"));
        }
        Ok(())
    }
}

/// AP positions plus the RP grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub aps: Vec<Point>,
    pub rps: Vec<Point>,
    pub hallway_length: f64,
    pub hallway_width: f64,
    pub grid_interval: f64,
    pub pathloss_exponent: f64,
    pub tx_power_at_1m: f64,
    pub shadowing_sigma: f64,
    pub dropout_prob: f64,
}

impl Layout {
    pub fn ap_ids(&self) -> Vec<String> {
        (1..=self.aps.len()).map(|i| i.to_string()).collect()
    }

    /// Noiseless received power from AP `ap` at `p`.
    pub fn mean_rss(&self, ap: usize, p: &Point) -> f64 {
        let d = self.aps[ap].distance(p).max(1.0);
        self.tx_power_at_1m - 10.0 * self.pathloss_exponent * d.log10()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.hallway_length).contains(&p.x) && (0.0..=self.hallway_width).contains(&p.y)
    }
}

fn grid_count(extent: f64, step: f64) -> usize {
    (extent / step + 1e-9).floor() as usize + 1
}

pub fn generate_layout(config: &SimConfig) -> Result<Layout> {
    config.validate()?;
    let nx = grid_count(config.hallway_length, config.grid_interval);
    let ny = grid_count(config.hallway_width, config.grid_interval);
    if nx * ny == 0 {
        return Err(Error::config("grid produces no reference points"));
    }
    let mut rps = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            rps.push(Point::new(i as f64 * config.grid_interval, j as f64 * config.grid_interval));
        }
    }

    // Stratified along the hallway, alternating sides, random setback.
    let mut rng = ChaCha8Rng::seed_from_u64(config.layout_seed);
    let slot = config.hallway_length / config.n_aps as f64;
    let aps = (0..config.n_aps)
        .map(|k| {
            let x = (k as f64 + rng.random::<f64>()) * slot;
            let setback = 0.5 + rng.random::<f64>() * (config.ap_setback - 0.5).max(0.0);
            let y = if k % 2 == 0 {
                -setback
            } else {
                config.hallway_width + setback
            };
            Point::new(x, y)
        })
        .collect();

    Ok(Layout {
        aps,
        rps,
        hallway_length: config.hallway_length,
        hallway_width: config.hallway_width,
        grid_interval: config.grid_interval,
        pathloss_exponent: config.pathloss_exponent,
        tx_power_at_1m: config.tx_power_at_1m,
        shadowing_sigma: config.shadowing_sigma,
        dropout_prob: config.dropout_prob,
    })
}

/// One noisy observation at `point`.
///
/// Every AP consumes exactly one normal and one uniform draw regardless of
/// outcome, so streams stay aligned across configurations.
pub fn sample_rss<R: Rng + ?Sized>(layout: &Layout, point: &Point, rng: &mut R) -> RssVector {
    let noise = Normal::new(0.0, layout.shadowing_sigma.max(0.0)).expect("finite sigma");
    let n = layout.aps.len();
    let mut values = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for ap in 0..n {
        let shadow = noise.sample(rng);
        let drop = rng.random::<f64>() < layout.dropout_prob;
        let v = (layout.mean_rss(ap, point) + shadow).clamp(RSS_FLOOR_DBM, RSS_CEIL_DBM);
        values.push(v);
        missing.push(drop);
    }
    RssVector::new(values, missing).expect("clamped values are in range")
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform point inside the hallway that does not coincide with a grid node.
fn off_grid_point<R: Rng + ?Sized>(layout: &Layout, rng: &mut R) -> Point {
    loop {
        let p = Point::new(
            rng.random::<f64>() * layout.hallway_length,
            rng.random::<f64>() * layout.hallway_width,
        );
        let g = layout.grid_interval;
        let on_node = ((p.x / g).round() * g - p.x).abs() < 1e-9 && ((p.y / g).round() * g - p.y).abs() < 1e-9;
        if !on_node {
            return p;
        }
    }
}

/// Per-AP mean over the scans that heard the AP; masked only if no scan did.
fn average_scans(scans: &[RssVector]) -> RssVector {
    if scans.len() == 1 {
        return scans[0].clone();
    }
    let n = scans[0].len();
    let mut values = vec![0.0; n];
    let mut missing = vec![true; n];
    for j in 0..n {
        let heard: Vec<f64> = scans.iter().filter(|s| !s.missing()[j]).map(|s| s.values()[j]).collect();
        if !heard.is_empty() {
            values[j] = heard.iter().sum::<f64>() / heard.len() as f64;
            missing[j] = false;
        }
    }
    RssVector::new(values, missing).expect("mean of in-range values is in range")
}

/// Everything a localization experiment needs.
#[derive(Clone, Debug)]
pub struct Testbed {
    pub config: SimConfig,
    pub layout: Layout,
    pub map: RadioMap,
    /// Online queries with ground-truth positions.
    pub queries: ObservationSet,
    /// User-sampled observations without positions.
    pub unlabeled: ObservationSet,
}

pub fn build_synthetic_radio_map(config: &SimConfig) -> Result<Testbed> {
    let layout = generate_layout(config)?;
    let ap_ids = layout.ap_ids();

    let mut rng = stream(config.seed, STREAM_MAP);
    let rps = layout
        .rps
        .iter()
        .map(|p| {
            let samples = (0..config.samples_per_rp)
                .map(|_| sample_rss(&layout, p, &mut rng))
                .collect();
            ReferencePoint::from_samples(*p, samples, crate::DEFAULT_FILL_DBM)
        })
        .collect::<Result<Vec<_>>>()?;
    let map = RadioMap::new(ap_ids.clone(), rps, config.grid_interval)?;

    let mut rng = stream(config.seed, STREAM_QUERIES);
    let (points, samples) = (0..config.n_queries)
        .map(|_| {
            let p = off_grid_point(&layout, &mut rng);
            (p, sample_rss(&layout, &p, &mut rng))
        })
        .unzip();
    let queries = ObservationSet {
        ap_ids: ap_ids.clone(),
        points: Some(points),
        samples,
    };

    let mut rng = stream(config.seed, STREAM_POOL);
    let samples = (0..config.n_unlabeled)
        .map(|_| {
            let p = off_grid_point(&layout, &mut rng);
            let scans: Vec<RssVector> = (0..config.unlabeled_scans)
                .map(|_| sample_rss(&layout, &p, &mut rng))
                .collect();
            average_scans(&scans)
        })
        .collect();
    let unlabeled = ObservationSet {
        ap_ids,
        points: None,
        samples,
    };

    Ok(Testbed {
        config: config.clone(),
        layout,
        map,
        queries,
        unlabeled,
    })
}
