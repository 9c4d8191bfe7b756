//! Valley-seeking clustering on minmax path distances.
//!
//! Clusters are extracted one at a time. Each round picks the densest
//! unlabeled object as a generalized center, measures minmax (path) distances
//! from it along a density-adjusted minimum spanning tree, and cuts the
//! cluster at the first valley of the smoothed distance histogram that
//! separates two real masses. The number of clusters is an output, never an
//! input.
//!
//! ```
//! use pava::{dataset::Shape, engine::{run, PavaConfig}, DissimilaritySource};
//!
//! let (points, truth) = pava::dataset::generate_synthetic(&Shape::TwoMoons, 600, 7).unwrap();
//! let src = DissimilaritySource::Points(points);
//! let model = run(&src, &PavaConfig::for_size(src.len())).unwrap();
//! assert_eq!(model.m, 2);
//! let ari = pava::metrics::adjusted_rand_index(truth.labels(), &model.labels).unwrap();
//! assert!(ari > 0.99);
//! ```

pub mod dataset;
pub mod engine;
mod error;
pub mod metrics;
pub mod mstgraph;
pub mod neighbors;
mod timing;
pub mod valley;

pub use dataset::{DissimilarityMatrix, DissimilaritySource, LabeledPartition, PointSet};
pub use error::{PavaError, Result};
pub use timing::Stopwatch;
