//! Exact nearest-neighbor queries and k-distance density.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::{squared_euclidean, DissimilaritySource, PointSet};
use crate::{PavaError, Result};

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Balanced k-d tree over the rows of a [`PointSet`].
#[derive(Debug)]
pub struct SpatialIndex<'a> {
    points: &'a PointSet,
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node, `dim` lower corners then `dim` upper corners.
    boxes: Vec<f64>,
}

/// Heap entry ordered by `(squared distance, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> SpatialIndex<'a> {
    pub fn build(points: &'a PointSet) -> Self {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &'a PointSet, leaf_size: usize) -> Self {
        let mut index = SpatialIndex {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        let n = points.len();
        if n > 0 {
            index.build_node(0, n, leaf_size.max(1));
        }
        index.boxes = vec![0.0; 2 * points.dim() * index.nodes.len()];
        for id in 0..index.nodes.len() {
            index.fill_box(id);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize, leaf_size: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let points = self.points;
        let dim = (0..points.dim())
            .map(|d| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &i| {
                        let v = points.row(i)[d];
                        (lo.min(v), hi.max(v))
                    },
                );
                (d, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(d, _)| d)
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[dim]
                .total_cmp(&points.row(b)[dim])
                .then(a.cmp(&b))
        });
        let value = points.row(self.order[mid])[dim];
        // Placeholder, patched once both children exist.
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid, leaf_size);
        let right = self.build_node(mid, end, leaf_size);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn fill_box(&mut self, id: usize) {
        let dim = self.points.dim();
        let (start, end) = self.span(id);
        let (lo, hi) = self.boxes[2 * dim * id..2 * dim * (id + 1)].split_at_mut(dim);
        lo.fill(f64::INFINITY);
        hi.fill(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            for (d, &v) in self.points.row(i).iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
    }

    /// Range of `order` covered by a node.
    fn span(&self, id: usize) -> (usize, usize) {
        match self.nodes[id] {
            Node::Leaf { start, end } => (start, end),
            Node::Split { left, right, .. } => (self.span(left).0, self.span(right).1),
        }
    }

    /// Squared distance from `query` to the node's bounding box, summed in
    /// the same order as point distances so it never exceeds them.
    fn box_dist2(&self, id: usize, query: &[f64]) -> f64 {
        let dim = self.points.dim();
        let b = &self.boxes[2 * dim * id..2 * dim * (id + 1)];
        query
            .iter()
            .enumerate()
            .map(|(d, &q)| {
                let gap = if q < b[d] {
                    b[d] - q
                } else if q > b[dim + d] {
                    q - b[dim + d]
                } else {
                    0.0
                };
                gap * gap
            })
            .sum()
    }

    /// For each node, the group shared by every row under it, if any.
    pub(crate) fn uniform_groups(&self, group: &[usize]) -> Vec<Option<usize>> {
        let mut uniform = vec![None; self.nodes.len()];
        // Children are created after their parent.
        for id in (0..self.nodes.len()).rev() {
            uniform[id] = match self.nodes[id] {
                Node::Leaf { start, end } => {
                    let g = group[self.order[start]];
                    self.order[start..end]
                        .iter()
                        .all(|&i| group[i] == g)
                        .then_some(g)
                }
                Node::Split { left, right, .. } => match (uniform[left], uniform[right]) {
                    (Some(a), Some(b)) if a == b => Some(a),
                    _ => None,
                },
            };
        }
        uniform
    }

    /// Closest row to row `i` in another group, ordered by distance then by
    /// the sorted index pair, if it beats `bound`.
    pub(crate) fn nearest_foreign(
        &self,
        i: usize,
        group: &[usize],
        uniform: &[Option<usize>],
        bound: Option<(f64, (usize, usize))>,
    ) -> Option<(f64, (usize, usize))> {
        let mut best = bound;
        self.foreign_search(0, i, group, uniform, &mut best);
        best.filter(|b| Some(*b) != bound)
    }

    fn foreign_search(
        &self,
        node: usize,
        i: usize,
        group: &[usize],
        uniform: &[Option<usize>],
        best: &mut Option<(f64, (usize, usize))>,
    ) {
        let g = group[i];
        if uniform[node] == Some(g) {
            return;
        }
        let query = self.points.row(i);
        if let Some((d, _)) = *best {
            if self.box_dist2(node, query).sqrt() > d {
                return;
            }
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.order[start..end] {
                    if group[j] == g {
                        continue;
                    }
                    let d = squared_euclidean(query, self.points.row(j)).sqrt();
                    let pair = if i < j { (i, j) } else { (j, i) };
                    if best.is_none_or(|(bd, bp)| {
                        d.total_cmp(&bd).then(pair.cmp(&bp)) == Ordering::Less
                    }) {
                        *best = Some((d, pair));
                    }
                }
            }
            Node::Split { left, right, .. } => {
                let (near, far) = if self.box_dist2(left, query) <= self.box_dist2(right, query) {
                    (left, right)
                } else {
                    (right, left)
                };
                self.foreign_search(near, i, group, uniform, best);
                self.foreign_search(far, i, group, uniform, best);
            }
        }
    }

    /// The `k` nearest rows to `query`, ascending by distance (then index).
    /// `exclude` drops one row index from consideration, typically the query
    /// point itself; exact duplicates of the query are still returned.
    pub fn knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.order.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, exclude, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|Candidate(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }

    fn search(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let c = Candidate(squared_euclidean(self.points.row(i), query), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, exclude, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().0 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

/// Per-object k-distance: distance to the k-th nearest other object.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub kdist: Vec<f64>,
    pub k: usize,
}

impl DensityProfile {
    pub fn len(&self) -> usize {
        self.kdist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kdist.is_empty()
    }
}

/// `⌈ln n⌉`, clamped to `[1, n - 1]`.
pub fn default_k(n: usize) -> usize {
    let k = (n.max(1) as f64).ln().ceil() as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(PavaError::InvalidParameter("k must be at least 1".into()));
    }
    if k >= n {
        return Err(PavaError::InvalidParameter(format!(
            "k must be < N (k = {k}, N = {n})"
        )));
    }
    Ok(())
}

/// k-th order statistic of the off-diagonal distances of every object. This
/// satisfies both the "at least k" and "at most k-1 strictly closer" clauses,
/// so ties are handled without special cases.
pub fn k_distance_all(src: &DissimilaritySource, k: usize) -> Result<DensityProfile> {
    let n = src.len();
    check_k(k, n)?;
    let kdist = match src {
        DissimilaritySource::Points(points) => {
            let index = SpatialIndex::build(points);
            map_objects(n, |i| {
                index
                    .knn(points.row(i), k, Some(i))
                    .last()
                    .map(|nb| nb.distance)
                    .unwrap_or(0.0)
            })
        }
        DissimilaritySource::Matrix(matrix) => map_objects(n, |i| {
            let mut row: Vec<f64> = matrix
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .collect();
            *row.select_nth_unstable_by(k - 1, f64::total_cmp).1
        }),
    };
    Ok(DensityProfile { kdist, k })
}

#[cfg(feature = "parallel")]
pub(crate) fn map_objects<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_objects<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
