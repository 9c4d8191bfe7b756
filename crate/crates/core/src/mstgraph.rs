//! Minimum spanning tree construction, density adjustment, single-source
//! minmax distances and label propagation along the tree.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dataset::{DissimilaritySource, PointSet};
use crate::neighbors::{default_k, DensityProfile, SpatialIndex};
use crate::{PavaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Raw,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MstMode {
    /// Borůvka over a k-d tree for points, dense Prim for matrices.
    #[default]
    Exact,
    /// Kruskal over the kNN graph, stitched into a single component.
    #[serde(alias = "approx")]
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// A spanning tree with adjacency lists. Adjacency entries are
/// `(neighbor, edge index)`.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    kind: TreeKind,
}

impl SpanningTree {
    /// Checks that `edges` form a spanning tree on `n` vertices with finite,
    /// non-negative weights.
    pub fn from_edges(n: usize, edges: Vec<Edge>, kind: TreeKind) -> Result<Self> {
        if n == 0 || edges.len() != n - 1 {
            return Err(PavaError::InvalidData(format!(
                "a spanning tree on {n} vertices needs {} edges, got {}",
                n.saturating_sub(1),
                edges.len()
            )));
        }
        let mut dsu = DisjointSets::new(n);
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(PavaError::InvalidData(format!(
                    "edge ({}, {}) out of range",
                    e.u, e.v
                )));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(PavaError::InvalidData(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.u, e.v, e.weight
                )));
            }
            if !dsu.union(e.u, e.v) {
                return Err(PavaError::InvalidData(format!(
                    "edge ({}, {}) closes a cycle",
                    e.u, e.v
                )));
            }
        }
        Ok(Self::assemble(n, edges, kind))
    }

    fn assemble(n: usize, edges: Vec<Edge>, kind: TreeKind) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
        }
        SpanningTree {
            n,
            edges,
            adjacency,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[v]
            .iter()
            .map(move |&(w, id)| (w, self.edges[id].weight))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[inline]
fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Candidate edge ordering: weight, then the sorted endpoint pair.
#[inline]
fn edge_cmp(wa: f64, a: (usize, usize), wb: f64, b: (usize, usize)) -> Ordering {
    wa.total_cmp(&wb).then(a.cmp(&b))
}

pub fn build_mst(src: &DissimilaritySource, mode: MstMode) -> SpanningTree {
    match (mode, src) {
        (MstMode::Exact, DissimilaritySource::Points(points)) => boruvka_points(points),
        (MstMode::Exact, DissimilaritySource::Matrix(_)) => prim_dense(src),
        (MstMode::Approximate, _) => knn_kruskal(src),
    }
}

/// Exact Euclidean MST by Borůvka rounds, each component's cheapest outgoing
/// edge found with k-d tree searches that skip subtrees inside the component.
/// The edge order is strict, so the tree is the one Prim finds.
fn boruvka_points(points: &PointSet) -> SpanningTree {
    let n = points.len();
    let index = SpatialIndex::build(points);
    let mut dsu = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    while edges.len() + 1 < n {
        let group: Vec<usize> = (0..n).map(|v| dsu.find(v)).collect();
        let uniform = index.uniform_groups(&group);
        let mut cheapest: Vec<Option<(f64, (usize, usize))>> = vec![None; n];
        for i in 0..n {
            let g = group[i];
            if let Some(c) = index.nearest_foreign(i, &group, &uniform, cheapest[g]) {
                cheapest[g] = Some(c);
            }
        }
        for (w, (u, v)) in cheapest.into_iter().flatten() {
            if dsu.union(u, v) {
                edges.push(Edge { u, v, weight: w });
            }
        }
    }
    edges.sort_by(|a, b| edge_cmp(a.weight, (a.u, a.v), b.weight, (b.u, b.v)));
    SpanningTree::assemble(n, edges, TreeKind::Raw)
}

/// O(N²) time, O(N) memory. Ties go to the smaller endpoint pair; edges come
/// out sorted, as from Borůvka.
fn prim_dense(src: &DissimilaritySource) -> SpanningTree {
    let n = src.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for w in 0..n {
            if in_tree[w] {
                continue;
            }
            let d = src.dist(current, w);
            if edge_cmp(d, ordered(current, w), best[w], ordered(parent[w], w)) == Ordering::Less {
                best[w] = d;
                parent[w] = current;
            }
            if next == usize::MAX
                || edge_cmp(
                    best[w],
                    ordered(parent[w], w),
                    best[next],
                    ordered(parent[next], next),
                ) == Ordering::Less
            {
                next = w;
            }
        }
        in_tree[next] = true;
        let (u, v) = ordered(parent[next], next);
        edges.push(Edge {
            u,
            v,
            weight: best[next],
        });
        current = next;
    }
    edges.sort_by(|a, b| edge_cmp(a.weight, (a.u, a.v), b.weight, (b.u, b.v)));
    SpanningTree::assemble(n, edges, TreeKind::Raw)
}

fn knn_kruskal(src: &DissimilaritySource) -> SpanningTree {
    let n = src.len();
    let k = default_k(n).max(10).min(n - 1);
    let mut candidates: Vec<(f64, (usize, usize))> = match src {
        DissimilaritySource::Points(points) => {
            let index = SpatialIndex::build(points);
            (0..n)
                .flat_map(|i| {
                    index
                        .knn(points.row(i), k, Some(i))
                        .into_iter()
                        .map(move |nb| (nb.distance, ordered(i, nb.index)))
                })
                .collect()
        }
        DissimilaritySource::Matrix(matrix) => (0..n)
            .flat_map(|i| {
                let mut row: Vec<(f64, usize)> = matrix
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, &d)| (d, j))
                    .collect();
                row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                row.truncate(k);
                row.into_iter().map(move |(d, j)| (d, ordered(i, j)))
            })
            .collect(),
    };
    candidates.sort_by(|a, b| edge_cmp(a.0, a.1, b.0, b.1));
    candidates.dedup_by(|a, b| a.1 == b.1);

    let mut dsu = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (w, (u, v)) in candidates {
        if dsu.union(u, v) {
            edges.push(Edge { u, v, weight: w });
        }
    }

    // Stitch leftover components, smallest first, by their nearest outside pair.
    while edges.len() < n - 1 {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for v in 0..n {
            let r = dsu.find(v);
            members[r].push(v);
        }
        let smallest = members
            .iter()
            .filter(|m| !m.is_empty())
            .min_by_key(|m| (m.len(), m[0]))
            .unwrap();
        let root = dsu.find(smallest[0]);
        let mut best: Option<(f64, (usize, usize))> = None;
        for &i in smallest {
            for j in 0..n {
                if dsu.find(j) == root {
                    continue;
                }
                let cand = (src.dist(i, j), ordered(i, j));
                if best.is_none_or(|b| edge_cmp(cand.0, cand.1, b.0, b.1) == Ordering::Less) {
                    best = Some(cand);
                }
            }
        }
        let (w, (u, v)) = best.expect("another component exists");
        dsu.union(u, v);
        edges.push(Edge { u, v, weight: w });
    }
    SpanningTree::assemble(n, edges, TreeKind::Raw)
}

/// Same edges, weights replaced by `cbrt(w · kd(u) · kd(v))`. k-distances are
/// floored at `1e-12 ×` the largest raw weight so duplicate points do not
/// zero out their edges.
pub fn adjust_weights(tree: &SpanningTree, density: &DensityProfile) -> Result<SpanningTree> {
    if tree.kind != TreeKind::Raw {
        return Err(PavaError::InvalidParameter(
            "only a raw tree can be density-adjusted".into(),
        ));
    }
    if density.len() != tree.n {
        return Err(PavaError::LengthMismatch(tree.n, density.len()));
    }
    let floor = 1e-12 * tree.max_weight();
    let kd = |i: usize| density.kdist[i].max(floor);
    let edges = tree
        .edges
        .iter()
        .map(|e| Edge {
            weight: (e.weight * kd(e.u) * kd(e.v)).cbrt(),
            ..*e
        })
        .collect();
    Ok(SpanningTree::assemble(tree.n, edges, TreeKind::Adjusted))
}

/// Minmax distances from one source over a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct MinmaxVector {
    pub source: usize,
    pub dist: Vec<f64>,
}

/// Breadth-first: each vertex takes the max of its parent's value and the
/// connecting edge.
pub fn minmax_from_center(tree: &SpanningTree, center: usize) -> Result<MinmaxVector> {
    if center >= tree.n {
        return Err(PavaError::InvalidParameter(format!(
            "center {center} out of range for {} vertices",
            tree.n
        )));
    }
    let mut dist = vec![0.0f64; tree.n];
    let mut visited = vec![false; tree.n];
    let mut queue = VecDeque::with_capacity(tree.n);
    visited[center] = true;
    queue.push_back(center);
    while let Some(head) = queue.pop_front() {
        for &(next, id) in &tree.adjacency[head] {
            if !visited[next] {
                visited[next] = true;
                dist[next] = dist[head].max(tree.edges[id].weight);
                queue.push_back(next);
            }
        }
    }
    Ok(MinmaxVector {
        source: center,
        dist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    label: usize,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.label.cmp(&other.label))
            .then(self.vertex.cmp(&other.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Fills every `None` with the label of the labeled vertex closest by summed
/// tree-path weight; equal distances go to the smaller label.
pub fn propagate_labels(tree: &SpanningTree, labels: &[Option<usize>]) -> Result<Vec<usize>> {
    if labels.len() != tree.n {
        return Err(PavaError::LengthMismatch(tree.n, labels.len()));
    }
    let mut heap = BinaryHeap::new();
    for (v, l) in labels.iter().enumerate() {
        if let Some(label) = *l {
            heap.push(Reverse(Frontier {
                dist: 0.0,
                label,
                vertex: v,
            }));
        }
    }
    if heap.is_empty() {
        return Err(PavaError::InvalidParameter(
            "label propagation needs at least one labeled vertex".into(),
        ));
    }
    let mut out: Vec<Option<usize>> = vec![None; tree.n];
    while let Some(Reverse(f)) = heap.pop() {
        if out[f.vertex].is_some() {
            continue;
        }
        out[f.vertex] = Some(f.label);
        for (w, weight) in tree.neighbors(f.vertex) {
            if out[w].is_none() {
                heap.push(Reverse(Frontier {
                    dist: f.dist + weight,
                    label: f.label,
                    vertex: w,
                }));
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|l| l.expect("tree is connected"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DissimilarityMatrix, PointSet};
    use crate::neighbors::k_distance_all;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(weights: &[f64]) -> SpanningTree {
        let edges = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Edge {
                u: i,
                v: i + 1,
                weight: w,
            })
            .collect();
        SpanningTree::from_edges(weights.len() + 1, edges, TreeKind::Raw).unwrap()
    }

    fn random_src(rng: &mut ChaCha8Rng, n: usize) -> DissimilaritySource {
        let coords = (0..2 * n).map(|_| rng.random_range(0.0..1.0)).collect();
        DissimilaritySource::Points(PointSet::new(coords, 2).unwrap())
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> SpanningTree {
        let edges = (1..n)
            .map(|v| Edge {
                u: rng.random_range(0..v),
                v,
                weight: rng.random_range(0.0..3.0),
            })
            .collect();
        SpanningTree::from_edges(n, edges, TreeKind::Raw).unwrap()
    }

    /// Kruskal over all pairs of the materialized matrix.
    fn kruskal_total(src: &DissimilaritySource) -> f64 {
        let n = src.len();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((src.dist(i, j), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut dsu = DisjointSets::new(n);
        pairs
            .into_iter()
            .filter(|&(_, i, j)| dsu.union(i, j))
            .map(|p| p.0)
            .sum()
    }

    #[test]
    fn line_mst() {
        let src = DissimilaritySource::Points(PointSet::from_rows(&[[0.0], [1.0], [3.0]]).unwrap());
        let t = build_mst(&src, MstMode::Exact);
        let mut got: Vec<(usize, usize, f64)> =
            t.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
        got.sort_by_key(|e| e.0);
        assert_eq!(got, vec![(0, 1, 1.0), (1, 2, 2.0)]);
        assert_eq!(t.total_weight(), 3.0);
    }

    #[test]
    fn unit_square() {
        let src = DissimilaritySource::Points(
            PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap(),
        );
        for mode in [MstMode::Exact, MstMode::Approximate] {
            let t = build_mst(&src, mode);
            assert_eq!(t.total_weight(), 3.0);
            assert_eq!(t.edges().len(), 3);
        }
    }

    #[test]
    fn prim_matches_kruskal_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.random_range(2..=10);
            let src = random_src(&mut rng, n);
            let t = build_mst(&src, MstMode::Exact);
            let want = kruskal_total(&src);
            assert!((t.total_weight() - want).abs() <= 1e-12 * want);
            SpanningTree::from_edges(n, t.edges().to_vec(), TreeKind::Raw).unwrap();
        }
    }

    #[test]
    fn boruvka_matches_prim_edge_for_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for t in 0..40 {
            let n = rng.random_range(2..=300);
            let coords: Vec<f64> = (0..2 * n)
                .map(|_| {
                    if t % 2 == 0 {
                        rng.random_range(0..5) as f64
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            let src = DissimilaritySource::Points(PointSet::new(coords, 2).unwrap());
            let sorted = |tree: &SpanningTree| {
                let mut e: Vec<(usize, usize, u64)> = tree
                    .edges()
                    .iter()
                    .map(|e| (e.u, e.v, e.weight.to_bits()))
                    .collect();
                e.sort();
                e
            };
            assert_eq!(
                sorted(&boruvka_points(src.points().unwrap())),
                sorted(&prim_dense(&src)),
                "case {t}"
            );
        }
    }

    #[test]
    fn matrix_mode_matches_point_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let src = random_src(&mut rng, 40);
        let m =
            DissimilaritySource::Matrix(DissimilarityMatrix::from_points(src.points().unwrap()));
        assert_eq!(
            build_mst(&src, MstMode::Exact).edges(),
            build_mst(&m, MstMode::Exact).edges()
        );
    }

    #[test]
    fn approximate_is_connected_and_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Two far-apart groups force the stitching path.
        let mut rows: Vec<[f64; 2]> = (0..150)
            .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        rows.extend((0..150).map(|_| [rng.random_range(50.0..51.0), rng.random_range(0.0..1.0)]));
        let src = DissimilaritySource::Points(PointSet::from_rows(&rows).unwrap());
        let approx = build_mst(&src, MstMode::Approximate);
        SpanningTree::from_edges(300, approx.edges().to_vec(), TreeKind::Raw).unwrap();
        let exact = build_mst(&src, MstMode::Exact).total_weight();
        assert!(approx.total_weight() >= exact - 1e-9);
        assert!(approx.total_weight() <= exact * 1.05);
        let m =
            DissimilaritySource::Matrix(DissimilarityMatrix::from_points(src.points().unwrap()));
        let approx_m = build_mst(&m, MstMode::Approximate);
        assert_eq!(approx_m.edges().len(), 299);
    }

    #[test]
    fn adjusted_weight_examples() {
        let t = chain(&[8.0]);
        let d = DensityProfile {
            kdist: vec![1.0, 8.0],
            k: 1,
        };
        let a = adjust_weights(&t, &d).unwrap();
        assert_eq!(a.edges()[0].weight, 4.0);
        assert_eq!(a.kind(), TreeKind::Adjusted);

        let t = chain(&[2.5]);
        let d = DensityProfile {
            kdist: vec![2.5, 2.5],
            k: 1,
        };
        let w = adjust_weights(&t, &d).unwrap().edges()[0].weight;
        assert!((w - 2.5).abs() <= 1e-15 * 2.5);

        assert!(adjust_weights(&a, &d).is_err());
        assert!(adjust_weights(
            &t,
            &DensityProfile {
                kdist: vec![1.0],
                k: 1
            }
        )
        .is_err());
    }

    #[test]
    fn adjusted_weights_follow_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tree(&mut rng, 60);
        let kdist: Vec<f64> = (0..60).map(|_| rng.random_range(0.01..2.0)).collect();
        let a = adjust_weights(
            &t,
            &DensityProfile {
                kdist: kdist.clone(),
                k: 3,
            },
        )
        .unwrap();
        assert_eq!(a.len(), t.len());
        for (raw, adj) in t.edges().iter().zip(a.edges()) {
            assert_eq!((raw.u, raw.v), (adj.u, adj.v));
            let want = (raw.weight * kdist[raw.u] * kdist[raw.v]).powf(1.0 / 3.0);
            assert!((adj.weight - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn duplicate_points_keep_positive_adjusted_weights() {
        let src = DissimilaritySource::Points(
            PointSet::from_rows(&[[0.0], [0.0], [1.0], [3.0]]).unwrap(),
        );
        let t = build_mst(&src, MstMode::Exact);
        let dens = k_distance_all(&src, 1).unwrap();
        let a = adjust_weights(&t, &dens).unwrap();
        for (raw, adj) in t.edges().iter().zip(a.edges()) {
            assert_eq!(raw.weight > 0.0, adj.weight > 0.0);
        }
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(
            minmax_from_center(&chain(&[1.0, 5.0, 2.0]), 0)
                .unwrap()
                .dist,
            vec![0.0, 1.0, 5.0, 5.0]
        );
        let star = SpanningTree::from_edges(
            3,
            vec![
                Edge {
                    u: 0,
                    v: 1,
                    weight: 2.0,
                },
                Edge {
                    u: 0,
                    v: 2,
                    weight: 7.0,
                },
            ],
            TreeKind::Raw,
        )
        .unwrap();
        assert_eq!(
            minmax_from_center(&star, 0).unwrap().dist,
            vec![0.0, 2.0, 7.0]
        );
        assert!(minmax_from_center(&star, 3).is_err());
    }

    /// Running max along every simple path from `o`, keeping the best per target.
    fn path_minimax(src: &DissimilaritySource, o: usize) -> Vec<f64> {
        fn dfs(
            src: &DissimilaritySource,
            v: usize,
            running: f64,
            on_path: &mut [bool],
            best: &mut [f64],
        ) {
            best[v] = best[v].min(running);
            for w in 0..src.len() {
                if !on_path[w] {
                    on_path[w] = true;
                    dfs(src, w, running.max(src.dist(v, w)), on_path, best);
                    on_path[w] = false;
                }
            }
        }
        let n = src.len();
        let mut best = vec![f64::INFINITY; n];
        let mut on_path = vec![false; n];
        on_path[o] = true;
        dfs(src, o, 0.0, &mut on_path, &mut best);
        best
    }

    #[test]
    fn tree_minmax_equals_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let n = rng.random_range(2..=8);
            let src = random_src(&mut rng, n);
            let t = build_mst(&src, MstMode::Exact);
            for o in 0..n {
                assert_eq!(
                    minmax_from_center(&t, o).unwrap().dist,
                    path_minimax(&src, o)
                );
            }
        }
    }

    #[test]
    fn propagate_examples() {
        let t = chain(&[1.0, 5.0]);
        assert_eq!(
            propagate_labels(&t, &[Some(1), None, Some(2)]).unwrap(),
            vec![1, 1, 2]
        );
        assert_eq!(
            propagate_labels(&t, &[Some(3), Some(1), Some(2)]).unwrap(),
            vec![3, 1, 2]
        );
        // Equidistant: smaller label wins.
        let t = chain(&[2.0, 2.0]);
        assert_eq!(
            propagate_labels(&t, &[Some(2), None, Some(1)]).unwrap(),
            vec![2, 1, 1]
        );
        assert!(propagate_labels(&t, &[None, None, None]).is_err());
    }

    #[test]
    fn propagate_matches_per_vertex_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let n = rng.random_range(2..=200);
            let t = random_tree(&mut rng, n);
            let mut labels: Vec<Option<usize>> = (0..n)
                .map(|_| rng.random_bool(0.2).then(|| rng.random_range(1..=4)))
                .collect();
            labels[rng.random_range(0..n)] = Some(1);
            let got = propagate_labels(&t, &labels).unwrap();
            for v in 0..n {
                // Path length from v to every vertex by DFS.
                let mut len = vec![f64::NAN; n];
                let mut stack = vec![(v, 0.0f64)];
                len[v] = 0.0;
                while let Some((x, d)) = stack.pop() {
                    for (y, w) in t.neighbors(x) {
                        if len[y].is_nan() {
                            len[y] = d + w;
                            stack.push((y, d + w));
                        }
                    }
                }
                let want = (0..n)
                    .filter_map(|u| labels[u].map(|l| (len[u], l)))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .unwrap()
                    .1;
                assert_eq!(got[v], want, "vertex {v}");
            }
        }
    }

    #[test]
    fn from_edges_rejects_non_trees() {
        let e = |u, v| Edge { u, v, weight: 1.0 };
        assert!(SpanningTree::from_edges(3, vec![e(0, 1)], TreeKind::Raw).is_err());
        assert!(SpanningTree::from_edges(3, vec![e(0, 1), e(1, 0)], TreeKind::Raw).is_err());
        assert!(SpanningTree::from_edges(
            2,
            vec![Edge {
                u: 0,
                v: 1,
                weight: -1.0
            }],
            TreeKind::Raw
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn minmax_is_ultrametric(seed in any::<u64>(), n in 3usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = build_mst(&random_src(&mut rng, n), MstMode::Exact);
            let all: Vec<Vec<f64>> = (0..n).map(|o| minmax_from_center(&t, o).unwrap().dist).collect();
            for a in 0..n {
                prop_assert_eq!(all[a][a], 0.0);
                for b in 0..n {
                    prop_assert_eq!(all[a][b], all[b][a]);
                    for c in 0..n {
                        prop_assert!(all[a][c] <= all[a][b].max(all[b][c]));
                    }
                }
            }
        }
    }
}
