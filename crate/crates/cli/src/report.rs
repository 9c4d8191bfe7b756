//! The JSON run report. Object indices are 1-based, like the labels.

use std::path::Path;

use pava::engine::{ClusterModel, PavaConfig};
use pava::metrics::Scores;
use pava::valley::SparseRun;
use pava::DissimilaritySource;
use serde::Serialize;

pub const SCHEMA: u32 = 1;

#[derive(Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub input: String,
    pub mode: &'static str,
    pub n: usize,
    pub dim: Option<usize>,
    pub config: PavaConfig,
    pub k: usize,
    pub m: usize,
    pub rounds: Vec<RoundReport>,
    pub propagated: usize,
    pub cluster_sizes: Vec<usize>,
    pub metrics: Option<Scores>,
    pub timings_ms: Timings,
}

#[derive(Serialize)]
pub struct RoundReport {
    pub label: usize,
    pub center: usize,
    pub center_kdist: f64,
    /// `None` when the round took everything left.
    pub radius: Option<f64>,
    pub claimed: usize,
    pub bins: Option<usize>,
    pub valley: Option<SparseRun>,
    pub duration_ms: f64,
}

#[derive(Serialize)]
pub struct Timings {
    pub kdist: f64,
    pub mst: f64,
    pub extraction: f64,
    pub propagation: f64,
    pub total: f64,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl RunReport {
    pub fn new(
        input: &Path,
        src: &DissimilaritySource,
        config: &PavaConfig,
        model: &ClusterModel,
        metrics: Option<Scores>,
    ) -> Self {
        let mut config = config.clone();
        config.k = Some(model.k);
        let mut cluster_sizes = vec![0; model.m];
        for &l in &model.labels {
            cluster_sizes[l - 1] += 1;
        }
        RunReport {
            schema: SCHEMA,
            input: input.display().to_string(),
            mode: match src {
                DissimilaritySource::Points(_) => "points",
                DissimilaritySource::Matrix(_) => "matrix",
            },
            n: src.len(),
            dim: src.dim(),
            config,
            k: model.k,
            m: model.m,
            rounds: model
                .rounds
                .iter()
                .enumerate()
                .map(|(i, r)| RoundReport {
                    label: i + 1,
                    center: r.center + 1,
                    center_kdist: model.density.kdist[r.center],
                    radius: r.radius.is_finite().then_some(r.radius),
                    claimed: r.claimed.len(),
                    bins: r.estimate.as_ref().map(|e| e.histogram.bins()),
                    valley: r.estimate.as_ref().and_then(|e| e.valley),
                    duration_ms: ms(r.duration),
                })
                .collect(),
            propagated: model.propagated.len(),
            cluster_sizes,
            metrics,
            timings_ms: Timings {
                kdist: ms(model.timings.kdist),
                mst: ms(model.timings.mst),
                extraction: ms(model.timings.extraction),
                propagation: ms(model.timings.propagation),
                total: ms(model.timings.total),
            },
        }
    }
}
