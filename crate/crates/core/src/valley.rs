//! Radius selection: trim the distance vector, histogram it, smooth the
//! profile and cut at the first valley that separates two real masses.
//!
//! A valley is a run of bins whose smoothed shifted frequency is at most zero,
//! i.e. bins averaging one object or fewer. Each run is scored by its width
//! times the smaller of the masses below and above it; runs with less than
//! [`DEFAULT_MIN_SIDE`] of the retained distances on either side are ignored.
//! The tallest bin above a run must also reach at least [`DEFAULT_MIN_RISE`]
//! of the tallest bin before it, so a thinning tail is not mistaken for a new
//! mass. The first run scoring at least [`DEFAULT_MIN_SCORE`] of the best one
//! wins.
//! The radius is the center of its last empty bin (or of its lowest bin when
//! none is empty), so sparse tail objects in front of the next mass are
//! claimed together with the cluster.

use serde::Serialize;

use crate::{PavaError, Result};

pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_PERCENTILE: f64 = 99.0;
/// Share of the best valley score a valley needs to be taken.
pub const DEFAULT_MIN_SCORE: f64 = 0.5;
/// Minimum share of retained distances on each side of a valley.
pub const DEFAULT_MIN_SIDE: f64 = 0.05;
/// Tallest bin after a valley relative to the tallest bin before it.
pub const DEFAULT_MIN_RISE: f64 = 0.25;
/// Narrowest valley, in bins.
pub const DEFAULT_MIN_WIDTH: usize = 1;
/// Fewest retained distances per bin on average; caps the bin count.
pub const DEFAULT_MIN_PER_BIN: f64 = 4.0;

/// Relative margin of the engulf-all radius above the largest distance.
pub const FALLBACK_MARGIN: f64 = 1e-9;

/// Linear-interpolation percentile: rank `(n - 1) · p / 100` into the sorted
/// values.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    check_percentile(p)?;
    if values.is_empty() {
        return Err(PavaError::InvalidData(
            "percentile of an empty vector".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    Ok(match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    })
}

fn check_percentile(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(PavaError::InvalidParameter(format!(
            "percentile must be in (0, 100], got {p}"
        )));
    }
    Ok(())
}

/// Drops values strictly above the `p`-th percentile, keeping order.
pub fn cap_percentile(dist: &[f64], p: f64) -> Result<Vec<f64>> {
    let threshold = percentile(dist, p)?;
    Ok(dist.iter().copied().filter(|&d| d <= threshold).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceHistogram {
    pub min: f64,
    pub max: f64,
    pub width: f64,
    pub bin_centers: Vec<f64>,
    pub raw_freq: Vec<usize>,
    /// `raw_freq - 1`: empty bins sit at -1.
    pub shifted_freq: Vec<i64>,
    /// Empty until [`smooth_profile`] runs.
    pub smoothed_freq: Vec<f64>,
}

impl DistanceHistogram {
    pub fn bins(&self) -> usize {
        self.bin_centers.len()
    }

    /// Lower edge of bin `i`; `edge(bins())` is the upper end of the range.
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.bins() {
            self.max
        } else {
            self.min + i as f64 * self.width
        }
    }

    /// Bin holding `x`: half-open `[edge(i), edge(i + 1))`, last bin closed.
    pub fn bin_of(&self, x: f64) -> usize {
        let last = self.bins() - 1;
        let mut i = (((x - self.min) / self.width).floor().max(0.0) as usize).min(last);
        while i > 0 && x < self.edge(i) {
            i -= 1;
        }
        while i < last && x >= self.edge(i + 1) {
            i += 1;
        }
        i
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Binned {
    Histogram(DistanceHistogram),
    /// Every value is identical; there is nothing to bin.
    Degenerate {
        value: f64,
    },
}

/// `bins` equal-width bins spanning `[min, max]` of `dists`.
pub fn build_histogram(dists: &[f64], bins: usize) -> Result<Binned> {
    if bins < 3 {
        return Err(PavaError::InvalidParameter(format!(
            "need at least 3 bins, got {bins}"
        )));
    }
    let Some(&first) = dists.first() else {
        return Err(PavaError::InvalidData(
            "histogram of an empty vector".into(),
        ));
    };
    let (min, max) = dists
        .iter()
        .fold((first, first), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if min == max {
        return Ok(Binned::Degenerate { value: min });
    }
    let width = (max - min) / bins as f64;
    let mut h = DistanceHistogram {
        min,
        max,
        width,
        bin_centers: (0..bins).map(|i| min + (i as f64 + 0.5) * width).collect(),
        raw_freq: vec![0; bins],
        shifted_freq: Vec::new(),
        smoothed_freq: Vec::new(),
    };
    for &d in dists {
        let i = h.bin_of(d);
        h.raw_freq[i] += 1;
    }
    h.shifted_freq = h.raw_freq.iter().map(|&c| c as i64 - 1).collect();
    Ok(Binned::Histogram(h))
}

/// Centered moving average of `shifted_freq`. Near the ends the window
/// shrinks symmetrically, so the first and last bins pass through unchanged.
pub fn smooth_profile(mut h: DistanceHistogram, window: usize) -> Result<DistanceHistogram> {
    h.smoothed_freq = moving_average(&h.shifted_freq, window)?;
    Ok(h)
}

pub(crate) fn moving_average(values: &[i64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(PavaError::InvalidParameter(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    let b = values.len();
    let reach = (window - 1) / 2;
    let mut prefix = vec![0i64; b + 1];
    for (i, &v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    Ok((0..b)
        .map(|i| {
            let half = reach.min(i).min(b - 1 - i);
            let sum = prefix[i + half + 1] - prefix[i - half];
            sum as f64 / (2 * half + 1) as f64
        })
        .collect())
}

/// Index of the first interior bin no higher than both neighbors.
pub fn first_valley(smoothed: &[f64]) -> Option<usize> {
    (1..smoothed.len().saturating_sub(1))
        .find(|&i| smoothed[i] <= smoothed[i - 1].min(smoothed[i + 1]))
}

/// Center of the first bin found by [`first_valley`], or just above the
/// largest distance when there is none. This is the plain local-minimum rule;
/// [`find_radius`] uses [`separating_valley`] instead.
pub fn first_valley_radius(h: &DistanceHistogram) -> Result<f64> {
    if h.smoothed_freq.len() != h.bins() {
        return Err(PavaError::InvalidParameter(
            "histogram has not been smoothed".into(),
        ));
    }
    Ok(match first_valley(&h.smoothed_freq) {
        Some(i) => h.bin_centers[i],
        None => h.max * (1.0 + FALLBACK_MARGIN),
    })
}

/// A sparse run of bins, `start..=end`, with the mass on either side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SparseRun {
    pub start: usize,
    pub end: usize,
    pub below: usize,
    pub above: usize,
    /// Tallest raw bin below the run.
    pub peak_below: usize,
    /// Tallest raw bin above the run.
    pub peak_above: usize,
}

impl SparseRun {
    /// Bin whose center becomes the radius.
    pub fn cut_bin(&self, h: &DistanceHistogram) -> usize {
        let bins = self.start..=self.end;
        bins.clone()
            .rev()
            .find(|&i| h.raw_freq[i] == 0)
            .unwrap_or_else(|| {
                bins.rev()
                    .min_by(|&a, &b| h.smoothed_freq[a].total_cmp(&h.smoothed_freq[b]))
                    .unwrap_or(self.end)
            })
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn score(&self) -> usize {
        self.width() * self.below.min(self.above)
    }
}

/// Maximal runs of bins with `smoothed <= 0`, in increasing order.
pub fn sparse_runs(smoothed: &[f64], raw: &[usize]) -> Vec<SparseRun> {
    let b = smoothed.len();
    let total: usize = raw.iter().sum();
    let mut runs: Vec<SparseRun> = Vec::new();
    let (mut below, mut peak) = (0, 0);
    let mut i = 0;
    while i < b {
        if smoothed[i] > 0.0 {
            below += raw[i];
            peak = peak.max(raw[i]);
            i += 1;
            continue;
        }
        let start = i;
        let (mut inside, mut inside_peak) = (0, 0);
        while i < b && smoothed[i] <= 0.0 {
            inside += raw[i];
            inside_peak = inside_peak.max(raw[i]);
            i += 1;
        }
        runs.push(SparseRun {
            start,
            end: i - 1,
            below,
            above: total - below - inside,
            peak_below: peak,
            peak_above: raw[i..].iter().copied().max().unwrap_or(0),
        });
        below += inside;
        peak = peak.max(inside_peak);
    }
    runs
}

/// First sparse run with at least `min_side · total` objects on each side and
/// a peak above it of at least `min_rise` times the tallest bin below, whose score
/// reaches `min_score` times the best such score.
pub fn separating_valley(
    h: &DistanceHistogram,
    params: &ValleyParams,
) -> Result<Option<SparseRun>> {
    if h.smoothed_freq.len() != h.bins() {
        return Err(PavaError::InvalidParameter(
            "histogram has not been smoothed".into(),
        ));
    }
    params.check_valley()?;
    let total: usize = h.raw_freq.iter().sum();
    let side = ((params.min_side * total as f64).ceil() as usize).max(1);
    let runs: Vec<SparseRun> = sparse_runs(&h.smoothed_freq, &h.raw_freq)
        .into_iter()
        .filter(|r| {
            r.width() >= params.min_width
                && r.below >= side
                && r.above >= side
                && r.peak_above as f64 >= params.min_rise * r.peak_below as f64
        })
        .collect();
    let best = runs.iter().map(SparseRun::score).max().unwrap_or(0);
    Ok(runs
        .into_iter()
        .find(|r| r.score() as f64 >= params.min_score * best as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValleyParams {
    pub percentile: f64,
    pub bins: usize,
    pub window: usize,
    pub min_score: f64,
    pub min_side: f64,
    pub min_rise: f64,
    pub min_width: usize,
    pub min_per_bin: f64,
}

impl ValleyParams {
    /// `bins`, reduced so that `count` values average at least
    /// `min_per_bin` per bin, and never below 3.
    pub fn effective_bins(&self, count: usize) -> usize {
        if self.min_per_bin <= 0.0 {
            return self.bins;
        }
        let cap = (count as f64 / self.min_per_bin).floor() as usize;
        self.bins.min(cap).max(3)
    }

    pub(crate) fn check_valley(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.min_score)
            && (0.0..=0.5).contains(&self.min_side)
            && self.min_rise >= 0.0;
        if !ok {
            return Err(PavaError::InvalidParameter(format!(
                "valley score share must be in [0, 1], side share in [0, 0.5] and rise at least 0, got {}, {} and {}",
                self.min_score, self.min_side, self.min_rise
            )));
        }
        Ok(())
    }
}

impl Default for ValleyParams {
    fn default() -> Self {
        ValleyParams {
            percentile: DEFAULT_PERCENTILE,
            bins: DEFAULT_BINS,
            window: DEFAULT_WINDOW,
            min_score: DEFAULT_MIN_SCORE,
            min_side: DEFAULT_MIN_SIDE,
            min_rise: DEFAULT_MIN_RISE,
            min_width: DEFAULT_MIN_WIDTH,
            min_per_bin: DEFAULT_MIN_PER_BIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusEstimate {
    pub radius: f64,
    /// `None` when the engulf-all fallback was used.
    pub valley: Option<SparseRun>,
    pub histogram: DistanceHistogram,
}

/// The whole trim → histogram → smooth → valley pipeline. `Ok(None)` reports a
/// degenerate histogram. Without a separating valley the radius sits just
/// above the largest retained distance.
pub fn find_radius(dist: &[f64], params: &ValleyParams) -> Result<Option<RadiusEstimate>> {
    let retained = cap_percentile(dist, params.percentile)?;
    let h = match build_histogram(&retained, params.effective_bins(retained.len()))? {
        Binned::Histogram(h) => h,
        Binned::Degenerate { .. } => return Ok(None),
    };
    let h = smooth_profile(h, params.window)?;
    let valley = separating_valley(&h, params)?;
    let radius = match valley {
        Some(run) => h.bin_centers[run.cut_bin(&h)],
        None => h.max * (1.0 + FALLBACK_MARGIN),
    };
    Ok(Some(RadiusEstimate {
        radius,
        valley,
        histogram: h,
    }))
}
