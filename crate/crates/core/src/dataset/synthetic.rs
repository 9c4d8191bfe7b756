//! Seeded generators for the benchmark shapes.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{squared_euclidean, LabeledPartition, PointSet};
use crate::{PavaError, Result};

const MOON_JITTER: f64 = 0.08;
const BRIDGE_JITTER: f64 = 0.04;
const NOISE_POINTS: usize = 100;
const BRIDGE_POINTS: usize = 20;
const RING_JITTER: f64 = 0.05;
const SPIRAL_JITTER: f64 = 0.1;

/// Shape family plus its settings.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Two interleaved half circles, split evenly.
    TwoMoons,
    /// `n - 100` moon points plus 100 uniform noise points.
    TwoMoonsNoise,
    /// `n - 20` moon points plus a 20-point chain joining two tips.
    TwoMoonsBridge,
    /// Concentric rings of radius 1, 2, ...
    CcRings { rings: usize },
    /// Interleaved Archimedean spiral arms.
    Spiral { arms: usize },
    /// Isotropic Gaussian blobs, `n` split into contiguous blocks.
    Blobs { centers: Vec<Vec<f64>>, spread: f64 },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::TwoMoons => "twomoons",
            Shape::TwoMoonsNoise => "twomoons_noise",
            Shape::TwoMoonsBridge => "twomoons_bridge",
            Shape::CcRings { .. } => "ccrings",
            Shape::Spiral { .. } => "spiral",
            Shape::Blobs { .. } => "blobs",
        }
    }

    /// Number of structural clusters the generator labels.
    pub fn cluster_count(&self) -> usize {
        match self {
            Shape::TwoMoons | Shape::TwoMoonsNoise | Shape::TwoMoonsBridge => 2,
            Shape::CcRings { rings } => *rings,
            Shape::Spiral { arms } => *arms,
            Shape::Blobs { centers, .. } => centers.len(),
        }
    }

    pub fn min_points(&self) -> usize {
        match self {
            Shape::TwoMoons => 4,
            Shape::TwoMoonsNoise => NOISE_POINTS + 4,
            Shape::TwoMoonsBridge => BRIDGE_POINTS + 4,
            _ => 2 * self.cluster_count(),
        }
    }
}

impl FromStr for Shape {
    type Err = PavaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "twomoons" => Shape::TwoMoons,
            "twomoons_noise" => Shape::TwoMoonsNoise,
            "twomoons_bridge" => Shape::TwoMoonsBridge,
            "ccrings" => Shape::CcRings { rings: 2 },
            "spiral" => Shape::Spiral { arms: 3 },
            "blobs" => Shape::Blobs {
                centers: vec![vec![0.0, 0.0], vec![6.0, 0.0], vec![3.0, 5.0]],
                spread: 0.6,
            },
            other => return Err(PavaError::UnknownShape(other.to_owned())),
        })
    }
}

/// Deterministic for a fixed `(shape, n, seed)`. Noise and bridge objects are
/// labeled with their nearest structural cluster.
pub fn generate_synthetic(
    shape: &Shape,
    n: usize,
    seed: u64,
) -> Result<(PointSet, LabeledPartition)> {
    if shape.cluster_count() == 0 {
        return Err(PavaError::InvalidParameter(format!(
            "{} needs at least one cluster",
            shape.name()
        )));
    }
    if n < shape.min_points() {
        return Err(PavaError::InvalidParameter(format!(
            "{} needs at least {} points, got {n}",
            shape.name(),
            shape.min_points()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, labels) = match shape {
        Shape::TwoMoons => moons(&mut rng, n),
        Shape::TwoMoonsNoise => {
            let (mut rows, mut labels) = moons(&mut rng, n - NOISE_POINTS);
            let structural = rows.len();
            for _ in 0..NOISE_POINTS {
                let p = vec![rng.random_range(-1.5..2.5), rng.random_range(-1.0..1.5)];
                labels.push(nearest_label(&rows[..structural], &labels, &p));
                rows.push(p);
            }
            (rows, labels)
        }
        Shape::TwoMoonsBridge => {
            let (mut rows, mut labels) = moons(&mut rng, n - BRIDGE_POINTS);
            let structural = rows.len();
            // Upper moon's right tip to lower moon's left tip.
            let (a, b) = ([1.0, 0.0], [0.0, 0.5]);
            let jitter = Normal::new(0.0, BRIDGE_JITTER).unwrap();
            for _ in 0..BRIDGE_POINTS {
                let t: f64 = rng.random();
                let p = vec![
                    a[0] + t * (b[0] - a[0]) + jitter.sample(&mut rng),
                    a[1] + t * (b[1] - a[1]) + jitter.sample(&mut rng),
                ];
                labels.push(nearest_label(&rows[..structural], &labels, &p));
                rows.push(p);
            }
            (rows, labels)
        }
        Shape::CcRings { rings } => {
            let jitter = Normal::new(0.0, RING_JITTER).unwrap();
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for (ring, count) in split_evenly(n, *rings).into_iter().enumerate() {
                let radius = (ring + 1) as f64;
                for _ in 0..count {
                    let theta = rng.random_range(0.0..2.0 * PI);
                    rows.push(vec![
                        radius * theta.cos() + jitter.sample(&mut rng),
                        radius * theta.sin() + jitter.sample(&mut rng),
                    ]);
                    labels.push(ring + 1);
                }
            }
            (rows, labels)
        }
        Shape::Spiral { arms } => {
            let jitter = Normal::new(0.0, SPIRAL_JITTER).unwrap();
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for (arm, count) in split_evenly(n, *arms).into_iter().enumerate() {
                let phase = 2.0 * PI * arm as f64 / *arms as f64;
                for j in 0..count {
                    let theta = PI / 2.0 + 2.5 * PI * j as f64 / (count.max(2) - 1) as f64;
                    rows.push(vec![
                        theta * (theta + phase).cos() + jitter.sample(&mut rng),
                        theta * (theta + phase).sin() + jitter.sample(&mut rng),
                    ]);
                    labels.push(arm + 1);
                }
            }
            (rows, labels)
        }
        Shape::Blobs { centers, spread } => {
            let dim = centers[0].len();
            if dim == 0 || centers.iter().any(|c| c.len() != dim) {
                return Err(PavaError::InvalidParameter(
                    "blob centers must share a non-zero dimension".into(),
                ));
            }
            if !(spread.is_finite() && *spread >= 0.0) {
                return Err(PavaError::InvalidParameter(format!(
                    "blob spread must be finite and non-negative, got {spread}"
                )));
            }
            let jitter = (*spread > 0.0).then(|| Normal::new(0.0, *spread).unwrap());
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for (c, count) in split_evenly(n, centers.len()).into_iter().enumerate() {
                for _ in 0..count {
                    let p = centers[c]
                        .iter()
                        .map(|&x| x + jitter.map_or(0.0, |j| j.sample(&mut rng)))
                        .collect();
                    rows.push(p);
                    labels.push(c + 1);
                }
            }
            (rows, labels)
        }
    };
    Ok((PointSet::from_rows(&rows)?, LabeledPartition::new(labels)?))
}

fn moons(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let jitter = Normal::new(0.0, MOON_JITTER).unwrap();
    let sizes = split_evenly(n, 2);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (moon, &count) in sizes.iter().enumerate() {
        for j in 0..count {
            let t = PI * j as f64 / (count - 1) as f64;
            let (x, y) = if moon == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            rows.push(vec![x + jitter.sample(rng), y + jitter.sample(rng)]);
            labels.push(moon + 1);
        }
    }
    (rows, labels)
}

fn split_evenly(n: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| n / parts + usize::from(i < n % parts))
        .collect()
}

fn nearest_label(rows: &[Vec<f64>], labels: &[usize], p: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (row, &l) in rows.iter().zip(labels) {
        let d = squared_euclidean(row, p);
        if d < best.0 {
            best = (d, l);
        }
    }
    best.1
}
