//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns JSON strings. The `*_json` functions hold the
//! logic and are plain Rust, so they are tested natively.

use pava::dataset::{generate_synthetic, Shape};
use pava::engine::{extract_cluster, run, PavaConfig};
use pava::metrics::{score_all, Scores};
use pava::mstgraph::{adjust_weights, build_mst, minmax_from_center};
use pava::neighbors::k_distance_all;
use pava::valley::{DistanceHistogram, SparseRun};
use pava::{DissimilaritySource, PointSet};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

#[derive(Serialize)]
struct Dataset {
    points: Vec<[f64; 2]>,
    labels: Vec<usize>,
}

#[derive(Serialize)]
struct Histogram {
    centers: Vec<f64>,
    raw: Vec<usize>,
    smoothed: Vec<f64>,
    valley: Option<SparseRun>,
}

impl Histogram {
    fn new(h: &DistanceHistogram, valley: Option<SparseRun>) -> Self {
        Histogram {
            centers: h.bin_centers.clone(),
            raw: h.raw_freq.clone(),
            smoothed: h.smoothed_freq.clone(),
            valley,
        }
    }
}

#[derive(Serialize)]
struct Round {
    center: usize,
    radius: Option<f64>,
    claimed: usize,
    histogram: Option<Histogram>,
}

#[derive(Serialize)]
struct Clustering {
    labels: Vec<usize>,
    m: usize,
    k: usize,
    rounds: Vec<Round>,
    propagated: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
    kdist: Vec<f64>,
    scores: Option<Scores>,
}

#[derive(Serialize)]
struct Probe {
    center: usize,
    radius: Option<f64>,
    claimed: Vec<usize>,
    dist: Vec<f64>,
    histogram: Option<Histogram>,
}

fn points_2d(coords: &[f64]) -> Result<PointSet> {
    if !coords.len().is_multiple_of(2) {
        return Err(format!("expected x,y pairs, got {} numbers", coords.len()));
    }
    PointSet::new(coords.to_vec(), 2).map_err(|e| e.to_string())
}

fn config(options: &str, n: usize) -> Result<PavaConfig> {
    let cfg: PavaConfig = if options.trim().is_empty() {
        PavaConfig::default()
    } else {
        serde_json::from_str(options).map_err(|e| format!("options: {e}"))?
    };
    cfg.validate(n).map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn generate_json(shape: &str, n: usize, seed: u64) -> Result<String> {
    let shape: Shape = shape.parse().map_err(|e: pava::PavaError| e.to_string())?;
    let (points, truth) = generate_synthetic(&shape, n, seed).map_err(|e| e.to_string())?;
    if points.dim() != 2 {
        return Err(format!("{} is not two-dimensional", shape.name()));
    }
    to_json(&Dataset {
        points: points.rows().map(|r| [r[0], r[1]]).collect(),
        labels: truth.into_labels(),
    })
}

/// Full run on x,y pairs. `truth` (same length, any ids) adds scores.
pub fn cluster_json(coords: &[f64], options: &str, truth: Option<&[usize]>) -> Result<String> {
    let src = DissimilaritySource::Points(points_2d(coords)?);
    let cfg = config(options, src.len())?;
    let model = run(&src, &cfg).map_err(|e| e.to_string())?;
    let scores = truth
        .map(|t| score_all(t, &model.labels))
        .transpose()
        .map_err(|e| e.to_string())?;
    to_json(&Clustering {
        m: model.m,
        k: model.k,
        rounds: model
            .rounds
            .iter()
            .map(|r| Round {
                center: r.center,
                radius: r.radius.is_finite().then_some(r.radius),
                claimed: r.claimed.len(),
                histogram: r
                    .estimate
                    .as_ref()
                    .map(|e| Histogram::new(&e.histogram, e.valley)),
            })
            .collect(),
        propagated: model.propagated.clone(),
        edges: model
            .working_tree()
            .edges()
            .iter()
            .map(|e| (e.u, e.v, e.weight))
            .collect(),
        kdist: model.density.kdist.clone(),
        scores,
        labels: model.labels,
    })
}

/// One extraction from an arbitrary center with nothing labeled: the minmax
/// distances, their histogram and the objects the valley would claim.
pub fn probe_json(coords: &[f64], center: usize, options: &str) -> Result<String> {
    let src = DissimilaritySource::Points(points_2d(coords)?);
    let n = src.len();
    let cfg = config(options, n)?;
    if center >= n {
        return Err(format!("center {center} out of range for {n} points"));
    }
    let raw = build_mst(&src, cfg.mst_mode);
    let tree = if cfg.use_adjusted {
        let density = k_distance_all(&src, cfg.resolved_k(n)).map_err(|e| e.to_string())?;
        adjust_weights(&raw, &density).map_err(|e| e.to_string())?
    } else {
        raw
    };
    let dist = minmax_from_center(&tree, center)
        .map_err(|e| e.to_string())?
        .dist;
    let ex = extract_cluster(&tree, center, &cfg, &vec![false; n]).map_err(|e| e.to_string())?;
    to_json(&Probe {
        center,
        radius: ex.radius.is_finite().then_some(ex.radius),
        claimed: ex.claimed,
        dist,
        histogram: ex
            .estimate
            .as_ref()
            .map(|e| Histogram::new(&e.histogram, e.valley)),
    })
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// `{points: [[x, y]], labels: [..]}` for a named shape.
#[wasm_bindgen]
pub fn generate(shape: &str, n: usize, seed: u32) -> std::result::Result<String, JsError> {
    js(generate_json(shape, n, seed as u64))
}

/// `coords` is flat `x0, y0, x1, y1, ...`; `options` is a partial config as JSON.
#[wasm_bindgen]
pub fn cluster(
    coords: &[f64],
    options: &str,
    truth: Option<Vec<u32>>,
) -> std::result::Result<String, JsError> {
    let truth: Option<Vec<usize>> = truth.map(|t| t.into_iter().map(|l| l as usize).collect());
    js(cluster_json(coords, options, truth.as_deref()))
}

#[wasm_bindgen]
pub fn probe(coords: &[f64], center: usize, options: &str) -> std::result::Result<String, JsError> {
    js(probe_json(coords, center, options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn flat(points: &Value) -> Vec<f64> {
        points
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|p| [p[0].as_f64().unwrap(), p[1].as_f64().unwrap()])
            .collect()
    }

    #[test]
    fn generate_cluster_score() {
        let data: Value =
            serde_json::from_str(&generate_json("twomoons", 400, 3).unwrap()).unwrap();
        let coords = flat(&data["points"]);
        assert_eq!(coords.len(), 800);
        let truth: Vec<usize> = data["labels"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| l.as_u64().unwrap() as usize)
            .collect();
        let out: Value =
            serde_json::from_str(&cluster_json(&coords, "", Some(&truth)).unwrap()).unwrap();
        assert_eq!(out["m"], 2);
        assert_eq!(out["labels"].as_array().unwrap().len(), 400);
        assert_eq!(out["edges"].as_array().unwrap().len(), 399);
        assert!(out["scores"]["ari"].as_f64().unwrap() > 0.99);
        let hist = &out["rounds"][0]["histogram"];
        assert_eq!(
            hist["raw"].as_array().unwrap().len(),
            hist["smoothed"].as_array().unwrap().len()
        );
        assert!(hist["valley"].is_object());
    }

    #[test]
    fn options_and_errors() {
        let data: Value =
            serde_json::from_str(&generate_json("twomoons", 200, 1).unwrap()).unwrap();
        let coords = flat(&data["points"]);
        let out: Value = serde_json::from_str(
            &cluster_json(&coords, r#"{"k": 4, "use_adjusted": false}"#, None).unwrap(),
        )
        .unwrap();
        assert_eq!(out["k"], 4);
        assert!(out["scores"].is_null());
        assert!(cluster_json(&coords, r#"{"k": 200}"#, None)
            .unwrap_err()
            .contains("k must be < N"));
        assert!(cluster_json(&coords, "{not json", None).is_err());
        assert!(cluster_json(&coords[..3], "", None).is_err());
        assert!(generate_json("hexagon", 100, 0).is_err());
        assert!(probe_json(&coords, 200, "").is_err());
    }

    #[test]
    fn probe_from_a_moon_claims_it() {
        let data: Value =
            serde_json::from_str(&generate_json("twomoons", 400, 5).unwrap()).unwrap();
        let coords = flat(&data["points"]);
        let labels = data["labels"].as_array().unwrap();
        let out: Value = serde_json::from_str(&probe_json(&coords, 10, "").unwrap()).unwrap();
        let claimed = out["claimed"].as_array().unwrap();
        assert_eq!(out["dist"].as_array().unwrap().len(), 400);
        assert!(claimed.iter().any(|c| c.as_u64() == Some(10)));
        let own = &labels[10];
        let agree = claimed
            .iter()
            .filter(|c| labels[c.as_u64().unwrap() as usize] == *own)
            .count();
        assert!(agree as f64 >= 0.98 * claimed.len() as f64);
        assert!(
            claimed.len() > 150 && claimed.len() < 250,
            "{}",
            claimed.len()
        );
    }
}
