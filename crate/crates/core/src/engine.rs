//! The clustering loop: densities and tree up front, then one cluster per
//! round until most objects are labeled, then propagation of the remainder.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::DissimilaritySource;
use crate::mstgraph::{
    adjust_weights, build_mst, minmax_from_center, propagate_labels, MstMode, SpanningTree,
};
use crate::neighbors::{check_k, default_k, k_distance_all, DensityProfile};
use crate::valley::{find_radius, RadiusEstimate, ValleyParams};
use crate::{PavaError, Result, Stopwatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PavaConfig {
    /// Neighbor count for k-distance; `None` means `⌈ln N⌉`.
    pub k: Option<usize>,
    /// Measure minmax distances on the density-adjusted tree.
    pub use_adjusted: bool,
    /// Stop extracting once at least `1 - stop_fraction` of objects are labeled.
    pub stop_fraction: f64,
    pub bins: usize,
    pub smooth_window: usize,
    pub trim_percentile: f64,
    /// Share of the best valley score a valley needs to be taken.
    pub min_score: f64,
    /// Minimum share of distances on each side of a valley.
    pub min_side: f64,
    /// Tallest bin after a valley relative to the tallest before it.
    pub min_rise: f64,
    /// Narrowest valley, in bins.
    pub min_width: usize,
    /// Fewest distances per bin on average; caps `bins` for small inputs.
    pub min_per_bin: f64,
    /// Stop extracting once fewer objects than this remain unlabeled.
    pub min_unlabeled: usize,
    pub mst_mode: MstMode,
}

impl Default for PavaConfig {
    fn default() -> Self {
        let valley = ValleyParams::default();
        PavaConfig {
            k: None,
            use_adjusted: true,
            stop_fraction: 0.10,
            bins: valley.bins,
            smooth_window: valley.window,
            trim_percentile: valley.percentile,
            min_score: valley.min_score,
            min_side: valley.min_side,
            min_rise: valley.min_rise,
            min_width: valley.min_width,
            min_per_bin: valley.min_per_bin,
            min_unlabeled: 20,
            mst_mode: MstMode::Exact,
        }
    }
}

impl PavaConfig {
    /// Defaults with `k` pinned to `⌈ln n⌉`.
    pub fn for_size(n: usize) -> Self {
        PavaConfig {
            k: Some(default_k(n)),
            ..Default::default()
        }
    }

    pub fn resolved_k(&self, n: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(n))
    }

    pub fn valley_params(&self) -> ValleyParams {
        ValleyParams {
            percentile: self.trim_percentile,
            bins: self.bins,
            window: self.smooth_window,
            min_score: self.min_score,
            min_side: self.min_side,
            min_rise: self.min_rise,
            min_width: self.min_width,
            min_per_bin: self.min_per_bin,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(PavaError::InvalidData(format!(
                "need at least 2 objects, got {n}"
            )));
        }
        check_k(self.resolved_k(n), n)?;
        if !(self.stop_fraction > 0.0 && self.stop_fraction < 1.0) {
            return Err(PavaError::InvalidParameter(format!(
                "stop fraction must be in (0, 1), got {}",
                self.stop_fraction
            )));
        }
        if self.bins < 3 {
            return Err(PavaError::InvalidParameter(format!(
                "need at least 3 bins, got {}",
                self.bins
            )));
        }
        if self.smooth_window.is_multiple_of(2) {
            return Err(PavaError::InvalidParameter(format!(
                "smoothing window must be odd, got {}",
                self.smooth_window
            )));
        }
        if !(self.trim_percentile > 0.0 && self.trim_percentile <= 100.0) {
            return Err(PavaError::InvalidParameter(format!(
                "percentile must be in (0, 100], got {}",
                self.trim_percentile
            )));
        }
        self.valley_params().check_valley()
    }
}

/// One extraction round.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub center: usize,
    /// Infinite when the histogram was degenerate and everything left was taken.
    pub radius: f64,
    /// Objects labeled this round, ascending.
    pub claimed: Vec<usize>,
    pub duration: Duration,
    pub estimate: Option<RadiusEstimate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub kdist: Duration,
    pub mst: Duration,
    pub extraction: Duration,
    pub propagation: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone)]
pub struct ClusterModel {
    /// Labels in `1..=m`.
    pub labels: Vec<usize>,
    pub m: usize,
    pub k: usize,
    pub rounds: Vec<RoundRecord>,
    /// Objects labeled by propagation rather than by a round.
    pub propagated: Vec<usize>,
    pub density: DensityProfile,
    pub raw_tree: SpanningTree,
    pub adjusted_tree: Option<SpanningTree>,
    pub timings: PhaseTimings,
}

impl ClusterModel {
    /// The tree that rounds and propagation ran on.
    pub fn working_tree(&self) -> &SpanningTree {
        self.adjusted_tree.as_ref().unwrap_or(&self.raw_tree)
    }
}

/// Unlabeled object of least k-distance; ties go to the smaller index.
pub fn select_center(density: &DensityProfile, labeled: &[bool]) -> Result<usize> {
    if labeled.len() != density.len() {
        return Err(PavaError::LengthMismatch(density.len(), labeled.len()));
    }
    density
        .kdist
        .iter()
        .zip(labeled)
        .enumerate()
        .filter(|(_, (_, &done))| !done)
        .min_by(|a, b| a.1 .0.total_cmp(b.1 .0).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| PavaError::InvalidParameter("every object is already labeled".into()))
}

/// Unlabeled objects strictly inside `radius`.
pub fn claim_within(dist: &[f64], radius: f64, labeled: &[bool]) -> Vec<usize> {
    dist.iter()
        .zip(labeled)
        .enumerate()
        .filter(|&(_, (&d, &done))| !done && d < radius)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub claimed: Vec<usize>,
    pub radius: f64,
    pub estimate: Option<RadiusEstimate>,
}

/// Radius from the minmax distances of all objects (labeled ones included);
/// claims only unlabeled ones. A degenerate histogram claims every unlabeled
/// object.
pub fn extract_cluster(
    tree: &SpanningTree,
    center: usize,
    cfg: &PavaConfig,
    labeled: &[bool],
) -> Result<Extraction> {
    if labeled.get(center).copied().unwrap_or(true) {
        return Err(PavaError::InvalidParameter(format!(
            "center {center} is labeled or out of range"
        )));
    }
    let minmax = minmax_from_center(tree, center)?;
    match find_radius(&minmax.dist, &cfg.valley_params())? {
        Some(est) => Ok(Extraction {
            claimed: claim_within(&minmax.dist, est.radius, labeled),
            radius: est.radius,
            estimate: Some(est),
        }),
        None => Ok(Extraction {
            claimed: (0..labeled.len()).filter(|&i| !labeled[i]).collect(),
            radius: f64::INFINITY,
            estimate: None,
        }),
    }
}

pub fn run(src: &DissimilaritySource, cfg: &PavaConfig) -> Result<ClusterModel> {
    let n = src.len();
    cfg.validate(n)?;
    let k = cfg.resolved_k(n);
    let total = Stopwatch::start();

    let clock = Stopwatch::start();
    let density = k_distance_all(src, k)?;
    let kdist_time = clock.elapsed();

    let clock = Stopwatch::start();
    let raw_tree = build_mst(src, cfg.mst_mode);
    let adjusted_tree = if cfg.use_adjusted {
        Some(adjust_weights(&raw_tree, &density)?)
    } else {
        None
    };
    let mst_time = clock.elapsed();
    let tree = adjusted_tree.as_ref().unwrap_or(&raw_tree);

    let clock = Stopwatch::start();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut labeled = vec![false; n];
    let mut labeled_count = 0usize;
    let mut rounds = Vec::new();
    let target = (1.0 - cfg.stop_fraction) * n as f64;
    // The first round always runs, so propagation has a seed.
    while rounds.is_empty()
        || ((labeled_count as f64) < target && n - labeled_count >= cfg.min_unlabeled)
    {
        let round_clock = Stopwatch::start();
        let center = select_center(&density, &labeled)?;
        let ex = extract_cluster(tree, center, cfg, &labeled)?;
        // Later rounds see the labeled clusters in their histogram, so a real
        // cluster always has a valley below them. Without one, or with fewer
        // objects than the leftover floor, the center is noise or a fringe
        // and its objects go to propagation instead.
        let rejected = ex.claimed.len() < cfg.min_unlabeled
            || ex.estimate.as_ref().is_some_and(|e| e.valley.is_none());
        if !rounds.is_empty() && rejected {
            break;
        }
        let label = rounds.len() + 1;
        for &i in &ex.claimed {
            labels[i] = Some(label);
            labeled[i] = true;
        }
        labeled_count += ex.claimed.len();
        rounds.push(RoundRecord {
            center,
            radius: ex.radius,
            claimed: ex.claimed,
            duration: round_clock.elapsed(),
            estimate: ex.estimate,
        });
        if labeled_count == n {
            break;
        }
    }
    let extraction_time = clock.elapsed();

    let clock = Stopwatch::start();
    let propagated: Vec<usize> = (0..n).filter(|&i| !labeled[i]).collect();
    let labels = propagate_labels(tree, &labels)?;
    let propagation_time = clock.elapsed();

    let m = rounds.len();
    Ok(ClusterModel {
        labels,
        m,
        k,
        rounds,
        propagated,
        density,
        raw_tree,
        adjusted_tree,
        timings: PhaseTimings {
            kdist: kdist_time,
            mst: mst_time,
            extraction: extraction_time,
            propagation: propagation_time,
            total: total.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, PointSet, Shape};
    use crate::DissimilarityMatrix;

    fn density(kdist: Vec<f64>) -> DensityProfile {
        DensityProfile { kdist, k: 1 }
    }

    #[test]
    fn center_examples() {
        // 0-based indices.
        let d = density(vec![3.0, 1.0, 2.0]);
        assert_eq!(select_center(&d, &[false; 3]).unwrap(), 1);
        assert_eq!(select_center(&d, &[false, true, false]).unwrap(), 2);
        let d = density(vec![1.0, 1.0, 5.0]);
        assert_eq!(select_center(&d, &[false; 3]).unwrap(), 0);
        assert!(select_center(&d, &[true; 3]).is_err());
        assert!(select_center(&d, &[false; 2]).is_err());
    }

    #[test]
    fn claim_is_strict() {
        let dist = [0.0, 0.5, 1.0, 1.5];
        assert_eq!(claim_within(&dist, 1.0, &[false; 4]), vec![0, 1]);
        assert_eq!(
            claim_within(&dist, 1.0, &[false, true, false, false]),
            vec![0]
        );
    }

    /// Two 10×10 grids with spacing 1, the second shifted by 40, so every
    /// inter-blob minmax distance is far beyond 5× the intra-blob edges.
    fn two_grids() -> PointSet {
        let mut rows = Vec::new();
        for offset in [0.0, 40.0] {
            for i in 0..10 {
                for j in 0..10 {
                    rows.push(vec![offset + i as f64, j as f64]);
                }
            }
        }
        PointSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn separated_blobs_claim_exactly_one() {
        let src = DissimilaritySource::Points(two_grids());
        let tree = build_mst(&src, MstMode::Exact);
        let cfg = PavaConfig::for_size(200);
        for center in [0, 55, 99, 100, 177] {
            let ex = extract_cluster(&tree, center, &cfg, &[false; 200]).unwrap();
            let want: Vec<usize> = if center < 100 {
                (0..100).collect()
            } else {
                (100..200).collect()
            };
            assert_eq!(ex.claimed, want, "center {center}");
            assert!(ex.estimate.unwrap().valley.is_some());
        }
        let mut labeled = [false; 200];
        labeled[1] = true;
        let ex = extract_cluster(&tree, 55, &cfg, &labeled).unwrap();
        assert_eq!(ex.claimed, (0..100).filter(|&i| i != 1).collect::<Vec<_>>());
        assert!(extract_cluster(&tree, 1, &cfg, &labeled).is_err());
    }

    #[test]
    fn single_cluster_engulfs() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 0.0]).collect();
        let src = DissimilaritySource::Points(PointSet::from_rows(&rows).unwrap());
        let tree = build_mst(&src, MstMode::Exact);
        let ex = extract_cluster(&tree, 0, &PavaConfig::for_size(30), &[false; 30]).unwrap();
        assert_eq!(ex.claimed.len(), 30);
        assert!(ex.estimate.unwrap().valley.is_none());
    }

    #[test]
    fn degenerate_histogram_claims_rest() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let src = DissimilaritySource::Points(PointSet::from_rows(&rows).unwrap());
        let tree = build_mst(&src, MstMode::Exact);
        let ex =
            extract_cluster(&tree, 1, &PavaConfig::for_size(3), &[true, false, false]).unwrap();
        assert!(ex.estimate.is_some());
        assert_eq!(ex.claimed, vec![1, 2]);
        let two = DissimilaritySource::Points(PointSet::from_rows(&rows[..2]).unwrap());
        let tree = build_mst(&two, MstMode::Exact);
        let ex = extract_cluster(&tree, 0, &PavaConfig::for_size(2), &[false, false]).unwrap();
        assert!(ex.estimate.is_none());
        assert!(ex.radius.is_infinite());
        assert_eq!(ex.claimed, vec![0, 1]);
    }

    fn check_model(model: &ClusterModel, n: usize) {
        assert_eq!(model.labels.len(), n);
        let mut seen = vec![false; model.m + 1];
        for &l in &model.labels {
            assert!((1..=model.m).contains(&l));
            seen[l] = true;
        }
        assert!(seen[1..].iter().all(|&s| s));
        let mut owner = vec![0usize; n];
        for (r, round) in model.rounds.iter().enumerate() {
            assert!(round.claimed.contains(&round.center));
            for &i in &round.claimed {
                assert_eq!(owner[i], 0, "object {i} claimed twice");
                owner[i] = r + 1;
                assert_eq!(model.labels[i], r + 1);
            }
        }
        for &i in &model.propagated {
            assert_eq!(owner[i], 0);
            owner[i] = usize::MAX;
        }
        assert!(owner.iter().all(|&o| o != 0));
        assert_eq!(model.m, model.rounds.len());
    }

    #[test]
    fn single_blob_is_one_cluster() {
        let shape = Shape::Blobs {
            centers: vec![vec![0.0, 0.0]],
            spread: 1.0,
        };
        for seed in 0..5 {
            let (p, _) = generate_synthetic(&shape, 300, seed).unwrap();
            let model = run(&p.into(), &PavaConfig::default()).unwrap();
            check_model(&model, 300);
            assert_eq!(model.m, 1, "seed {seed}");
        }
    }

    #[test]
    fn twomoons_model_is_consistent_and_deterministic() {
        let (p, truth) = generate_synthetic(&Shape::TwoMoons, 600, 3).unwrap();
        let src: DissimilaritySource = p.into();
        let cfg = PavaConfig::default();
        let a = run(&src, &cfg).unwrap();
        check_model(&a, 600);
        assert_eq!(a.m, 2);
        assert_eq!(a.k, 7);
        assert!(crate::metrics::adjusted_rand_index(truth.labels(), &a.labels).unwrap() > 0.99);
        let b = run(&src, &cfg).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(
            a.rounds.iter().map(|r| r.radius).collect::<Vec<_>>(),
            b.rounds.iter().map(|r| r.radius).collect::<Vec<_>>()
        );
        assert!(a.adjusted_tree.is_some());
        assert_eq!(a.working_tree().kind(), crate::mstgraph::TreeKind::Adjusted);
    }

    #[test]
    fn matrix_mode_matches_points() {
        let (p, _) = generate_synthetic(&Shape::TwoMoons, 200, 1).unwrap();
        let m = DissimilarityMatrix::from_points(&p);
        let cfg = PavaConfig::default();
        let from_points = run(&p.into(), &cfg).unwrap();
        let from_matrix = run(&m.into(), &cfg).unwrap();
        assert_eq!(from_points.labels, from_matrix.labels);
    }

    #[test]
    fn raw_tree_mode() {
        let (p, _) = generate_synthetic(&Shape::TwoMoons, 300, 2).unwrap();
        let cfg = PavaConfig {
            use_adjusted: false,
            ..Default::default()
        };
        let model = run(&p.into(), &cfg).unwrap();
        check_model(&model, 300);
        assert!(model.adjusted_tree.is_none());
        assert_eq!(model.working_tree().kind(), crate::mstgraph::TreeKind::Raw);
    }

    #[test]
    fn small_inputs_still_label_everything() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 0.0],
            vec![5.1, 0.0],
        ];
        let model = run(
            &PointSet::from_rows(&rows).unwrap().into(),
            &PavaConfig::default(),
        )
        .unwrap();
        check_model(&model, 4);
    }

    #[test]
    fn validation() {
        let (p, _) = generate_synthetic(&Shape::TwoMoons, 50, 0).unwrap();
        let src: DissimilaritySource = p.into();
        let bad = [
            PavaConfig {
                k: Some(50),
                ..Default::default()
            },
            PavaConfig {
                k: Some(0),
                ..Default::default()
            },
            PavaConfig {
                stop_fraction: 0.0,
                ..Default::default()
            },
            PavaConfig {
                stop_fraction: 1.0,
                ..Default::default()
            },
            PavaConfig {
                bins: 2,
                ..Default::default()
            },
            PavaConfig {
                smooth_window: 4,
                ..Default::default()
            },
            PavaConfig {
                trim_percentile: 0.0,
                ..Default::default()
            },
            PavaConfig {
                min_side: 0.7,
                ..Default::default()
            },
        ];
        for cfg in bad {
            let err = run(&src, &cfg).unwrap_err();
            assert!(err.is_usage(), "{cfg:?} gave {err}");
        }
        let msg = run(
            &src,
            &PavaConfig {
                k: Some(50),
                ..Default::default()
            },
        )
        .unwrap_err()
        .to_string();
        assert!(msg.contains("k must be < N"), "{msg}");
    }

    #[test]
    fn rigid_motion_and_scale_keep_labels() {
        for seed in 0..3 {
            let (p, _) = generate_synthetic(&Shape::TwoMoons, 300, seed).unwrap();
            let cfg = PavaConfig::default();
            let base = run(&p.clone().into(), &cfg).unwrap();
            let (c, s) = (0.6f64, 0.8f64);
            for scale in [1.0, 3.5, 0.01] {
                let rows: Vec<Vec<f64>> = p
                    .rows()
                    .map(|r| {
                        vec![
                            scale * (c * r[0] - s * r[1]) + 7.0,
                            scale * (s * r[0] + c * r[1]) - 2.0,
                        ]
                    })
                    .collect();
                let moved = run(&PointSet::from_rows(&rows).unwrap().into(), &cfg).unwrap();
                assert_eq!(base.labels, moved.labels, "seed {seed} scale {scale}");
            }
        }
    }

    #[test]
    fn config_serde_fills_defaults() {
        let cfg: PavaConfig = serde_json::from_str(r#"{"k": 5, "mst_mode": "approx"}"#).unwrap();
        assert_eq!(cfg.k, Some(5));
        assert_eq!(cfg.mst_mode, MstMode::Approximate);
        assert_eq!(cfg.bins, 200);
    }
}
