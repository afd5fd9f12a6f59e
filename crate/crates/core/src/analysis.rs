//! Split statistics over distance-sorted images, scaling, smoothing and
//! few-shot selection.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default selection band on min-max scaled distance.
pub const DEFAULT_BAND: (f64, f64) = (0.6, 1.0);

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("part count {0} is not 2 or 3 (pass the override to allow it)")]
    BadK(usize),
    #[error("{values} values cannot be split into {parts} nonempty parts")]
    TooFewValues { values: usize, parts: usize },
    #[error("length mismatch: {expected} distances but {found} scores")]
    LengthMismatch { expected: usize, found: usize },
    #[error("distances are not in ascending order at index {0}")]
    NotSorted(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("window must be at least 1")]
    ZeroWindow,
    #[error("band [{low}, {high}] is not within 0 <= low < high <= 1")]
    BadBand { low: f64, high: f64 },
    #[error("scaled series is degenerate (all inputs equal)")]
    DegenerateScale,
    #[error("only {found} candidates in band, {requested} requested")]
    InsufficientCandidates { found: usize, requested: usize },
}

impl AnalysisError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::BadK(_) => "BadK",
            Self::TooFewValues { .. } => "TooFewValues",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::NotSorted(_) => "NotSorted",
            Self::EmptyInput => "EmptyInput",
            Self::ZeroWindow => "ZeroWindow",
            Self::BadBand { .. } => "BadBand",
            Self::DegenerateScale => "DegenerateScale",
            Self::InsufficientCandidates { .. } => "InsufficientCandidates",
        }
    }
}

/// Stable ascending order of `values`; equal values keep their input order.
pub fn sort_by_distance(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation, `sqrt(mean((x − μ)²))`.
pub fn population_std(values: &[f64]) -> f64 {
    let mu = mean(values);
    let var = values.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Min-max scale the whole series before computing part statistics.
    pub scale: bool,
    /// Accept part counts other than 2 and 3.
    pub allow_any_k: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { scale: true, allow_any_k: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPart {
    /// Half-open range into the ascending-distance order.
    pub start: usize,
    pub end: usize,
    pub mean_distance: f64,
    pub std_distance: f64,
    pub f_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub k: usize,
    pub scaled: bool,
    pub parts: Vec<SplitPart>,
}

/// Part boundaries `floor(i·m/k)` for `i = 0..=k`.
pub fn split_boundaries(m: usize, k: usize) -> Vec<usize> {
    (0..=k).map(|i| i * m / k).collect()
}

/// Splits ascending distances into `k` contiguous parts and reports each
/// part's mean and spread. When `scores` are given (aligned with the sorted
/// order), each part also carries the mean of its scores.
pub fn split_stats(
    sorted_distances: &[f64],
    scores: Option<&[f64]>,
    k: usize,
    opts: SplitOptions,
) -> Result<SplitReport, AnalysisError> {
    let m = sorted_distances.len();
    if !(opts.allow_any_k || k == 2 || k == 3) {
        return Err(AnalysisError::BadK(k));
    }
    if k == 0 || m < k {
        return Err(AnalysisError::TooFewValues { values: m, parts: k });
    }
    if let Some(s) = scores {
        if s.len() != m {
            return Err(AnalysisError::LengthMismatch { expected: m, found: s.len() });
        }
    }
    if let Some(i) = sorted_distances.windows(2).position(|w| w[1] < w[0]) {
        return Err(AnalysisError::NotSorted(i + 1));
    }

    let values = if opts.scale {
        min_max_scale(sorted_distances)?.values
    } else {
        sorted_distances.to_vec()
    };

    let bounds = split_boundaries(m, k);
    let parts = bounds
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let part = &values[start..end];
            SplitPart {
                start,
                end,
                mean_distance: mean(part),
                std_distance: population_std(part),
                f_score: scores.map(|s| mean(&s[start..end])),
            }
        })
        .collect();
    Ok(SplitReport { k, scaled: opts.scale, parts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSeries {
    pub values: Vec<f64>,
    pub degenerate: bool,
    pub source_min: f64,
    pub source_max: f64,
}

/// `(x − min) / (max − min)`; a constant series maps to zeros and is flagged.
pub fn min_max_scale(values: &[f64]) -> Result<ScaledSeries, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let degenerate = !(range > 0.0);
    let scaled = if degenerate {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|x| ((x - lo) / range).clamp(0.0, 1.0)).collect()
    };
    Ok(ScaledSeries { values: scaled, degenerate, source_min: lo, source_max: hi })
}

/// Default smoothing window: a tenth of the series, at least 1.
pub fn default_window(m: usize) -> usize {
    (m / 10).max(1)
}

/// Centered moving average with edges truncated to the available neighbours.
///
/// A window of width `w` covers `(w − 1) / 2` values to the left and `w / 2`
/// to the right, so even widths lean right by one.
pub fn moving_average(values: &[f64], window: Option<usize>) -> Result<Vec<f64>, AnalysisError> {
    let m = values.len();
    if m == 0 {
        return Err(AnalysisError::EmptyInput);
    }
    let w = window.unwrap_or_else(|| default_window(m));
    if w == 0 {
        return Err(AnalysisError::ZeroWindow);
    }
    let (left, right) = ((w - 1) / 2, w / 2);
    Ok((0..m)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(m - 1);
            mean(&values[lo..=hi])
        })
        .collect())
}

/// Draws `count` indices uniformly without replacement from those whose
/// scaled value lies in `[low, high]`. The draw is a pure function of the
/// inputs and `seed` (ChaCha20 seeded via `seed_from_u64`).
pub fn select_for_adaptation(
    scaled: &ScaledSeries,
    count: usize,
    band: (f64, f64),
    seed: u64,
) -> Result<Vec<usize>, AnalysisError> {
    let (low, high) = band;
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(AnalysisError::BadBand { low, high });
    }
    if scaled.degenerate {
        return Err(AnalysisError::DegenerateScale);
    }
    let candidates: Vec<usize> = scaled
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= low && v <= high)
        .map(|(i, _)| i)
        .collect();
    if candidates.len() < count {
        return Err(AnalysisError::InsufficientCandidates { found: candidates.len(), requested: count });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, candidates.len(), count)
        .into_iter()
        .map(|i| candidates[i])
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

/// Quantile of ascending data by linear interpolation at rank `p·(m − 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Five-number summary plus mean/std and the raw values, for violin plots.
pub fn distribution_summary(values: &[f64]) -> Result<DistributionSummary, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionSummary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: mean(values),
        std: population_std(values),
        values: values.to_vec(),
    })
}
