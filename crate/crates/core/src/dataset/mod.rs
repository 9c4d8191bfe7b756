//! Point sets, dissimilarity matrices, ground-truth partitions and their CSV
//! forms.

mod csvio;
mod synthetic;

use std::collections::HashMap;
use std::hash::Hash;

pub use csvio::{
    load_labels_csv, load_matrix_csv, load_points_csv, parse_labels_csv, parse_matrix_csv,
    parse_points_csv, write_labels_csv, write_matrix_csv, write_points_csv,
};
pub use synthetic::{generate_synthetic, Shape};

use crate::{PavaError, Result};

/// `n` objects with `dim` real coordinates each, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    n: usize,
    dim: usize,
}

impl PointSet {
    pub fn new(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(PavaError::InvalidData(
                "dimension must be at least 1".into(),
            ));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(PavaError::InvalidData(format!(
                "{} coordinates do not divide into rows of {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if n < 2 {
            return Err(PavaError::InvalidData(format!(
                "need at least 2 objects, got {n}"
            )));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(PavaError::InvalidData(format!(
                "non-finite coordinate at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        Ok(PointSet { coords, n, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(PavaError::InvalidData(format!(
                    "row {} has {} columns, expected {dim}",
                    i + 1,
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        PointSet::new(coords, dim)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance between rows `i` and `j`.
    pub fn pairwise_distance(&self, i: usize, j: usize) -> f64 {
        squared_euclidean(self.row(i), self.row(j)).sqrt()
    }
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Symmetric, zero-diagonal, non-negative N×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    values: Vec<f64>,
    n: usize,
}

impl DissimilarityMatrix {
    /// Relative tolerance (against the largest entry) for symmetry and the
    /// zero diagonal.
    pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

    /// Validates a row-major square matrix. Asymmetry within tolerance is
    /// averaged away.
    pub fn new(mut values: Vec<f64>, n: usize) -> Result<Self> {
        if values.len() != n * n {
            return Err(PavaError::InvalidData(format!(
                "{} entries do not form a {n}x{n} matrix",
                values.len()
            )));
        }
        if n < 2 {
            return Err(PavaError::InvalidData(format!(
                "need at least 2 objects, got {n}"
            )));
        }
        let mut max = 0.0f64;
        for (pos, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(PavaError::InvalidData(format!(
                    "non-finite entry at ({}, {})",
                    pos / n + 1,
                    pos % n + 1
                )));
            }
            if v < 0.0 {
                return Err(PavaError::InvalidData(format!(
                    "negative entry {v} at ({}, {})",
                    pos / n + 1,
                    pos % n + 1
                )));
            }
            max = max.max(v);
        }
        let tol = Self::SYMMETRY_TOLERANCE * max;
        for i in 0..n {
            if values[i * n + i] > tol {
                return Err(PavaError::InvalidData(format!(
                    "non-zero diagonal entry {} at ({}, {})",
                    values[i * n + i],
                    i + 1,
                    i + 1
                )));
            }
            values[i * n + i] = 0.0;
            for j in i + 1..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if (a - b).abs() > tol {
                    return Err(PavaError::Asymmetric {
                        row: i + 1,
                        column: j + 1,
                        a,
                        b,
                    });
                }
                let mean = 0.5 * (a + b);
                values[i * n + j] = mean;
                values[j * n + i] = mean;
            }
        }
        Ok(DissimilarityMatrix { values, n })
    }

    /// Full Euclidean distance matrix of a point set.
    pub fn from_points(points: &PointSet) -> Self {
        let n = points.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = points.pairwise_distance(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DissimilarityMatrix { values, n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Where pairwise dissimilarities come from.
#[derive(Debug, Clone)]
pub enum DissimilaritySource {
    /// Euclidean distances between coordinate rows.
    Points(PointSet),
    /// Explicit pairwise dissimilarities.
    Matrix(DissimilarityMatrix),
}

impl DissimilaritySource {
    pub fn len(&self) -> usize {
        match self {
            DissimilaritySource::Points(p) => p.len(),
            DissimilaritySource::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match self {
            DissimilaritySource::Points(p) => p.pairwise_distance(i, j),
            DissimilaritySource::Matrix(m) => m.get(i, j),
        }
    }

    pub fn points(&self) -> Option<&PointSet> {
        match self {
            DissimilaritySource::Points(p) => Some(p),
            DissimilaritySource::Matrix(_) => None,
        }
    }

    /// Coordinate dimension, or `None` in matrix mode.
    pub fn dim(&self) -> Option<usize> {
        self.points().map(PointSet::dim)
    }
}

impl From<PointSet> for DissimilaritySource {
    fn from(p: PointSet) -> Self {
        DissimilaritySource::Points(p)
    }
}

impl From<DissimilarityMatrix> for DissimilaritySource {
    fn from(m: DissimilarityMatrix) -> Self {
        DissimilaritySource::Matrix(m)
    }
}

/// Labels in `1..=m`, each value used at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPartition {
    labels: Vec<usize>,
    m: usize,
}

impl LabeledPartition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let m = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; m + 1];
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 {
                return Err(PavaError::InvalidData(format!(
                    "label 0 at row {}; labels start at 1",
                    i + 1
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = (1..=m).find(|&l| !seen[l]) {
            return Err(PavaError::InvalidData(format!(
                "label {missing} is unused; labels must cover 1..={m}"
            )));
        }
        Ok(LabeledPartition { labels, m })
    }

    /// Remaps arbitrary label tokens onto `1..=m` in order of first appearance.
    pub fn from_raw<T: Eq + Hash + Clone>(raw: &[T]) -> Self {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let labels = raw
            .iter()
            .map(|t| {
                let next = ids.len() + 1;
                *ids.entry(t.clone()).or_insert(next)
            })
            .collect();
        LabeledPartition {
            labels,
            m: ids.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let p = PointSet::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(p.pairwise_distance(0, 1), 5.0);
        assert_eq!(p.pairwise_distance(1, 0), 5.0);
        assert_eq!(p.pairwise_distance(1, 1), 0.0);
    }

    #[test]
    fn distance_matches_reference_formula() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 3]> = (0..10)
            .map(|_| {
                [
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                ]
            })
            .collect();
        let p = PointSet::from_rows(&rows).unwrap();
        for i in 0..10 {
            assert_eq!(p.pairwise_distance(i, i), 0.0);
            for j in 0..10 {
                let (a, b) = (rows[i], rows[j]);
                let reference = f64::hypot(f64::hypot(a[0] - b[0], a[1] - b[1]), a[2] - b[2]);
                let got = p.pairwise_distance(i, j);
                assert!((got - reference).abs() <= 1e-12 * reference.max(1e-300));
                assert_eq!(got, p.pairwise_distance(j, i));
            }
        }
    }

    #[test]
    fn point_set_rejects_bad_input() {
        assert!(PointSet::new(vec![1.0, 2.0], 2).is_err());
        assert!(PointSet::new(vec![1.0, f64::NAN, 0.0, 0.0], 2).is_err());
        assert!(PointSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(PointSet::new(vec![1.0, 2.0], 0).is_err());
    }

    #[test]
    fn matrix_validation() {
        let m = DissimilarityMatrix::new(vec![0.0, 1.0, 1.0 + 1e-12, 0.0], 2).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!(matches!(
            DissimilarityMatrix::new(vec![0.0, 1.0, 2.0, 0.0], 2),
            Err(PavaError::Asymmetric { .. })
        ));
        assert!(DissimilarityMatrix::new(vec![0.0, -1.0, -1.0, 0.0], 2).is_err());
        assert!(DissimilarityMatrix::new(vec![1.0, 1.0, 1.0, 0.0], 2).is_err());
    }

    #[test]
    fn partition_remaps_by_first_appearance() {
        let p = LabeledPartition::from_raw(&["b", "b", "a", "c", "a"]);
        assert_eq!(p.labels(), &[1, 1, 2, 3, 2]);
        assert_eq!(p.m(), 3);
        assert!(LabeledPartition::new(vec![1, 3]).is_err());
        assert!(LabeledPartition::new(vec![0, 1]).is_err());
        assert_eq!(LabeledPartition::new(vec![2, 1, 2]).unwrap().m(), 2);
    }
}
