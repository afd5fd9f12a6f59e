//! Image-to-dataset and dataset-to-dataset distances over projected features.
//!
//! For projected secondary rows `s_j` and primary rows `p_k`, the pairwise
//! matrix holds `‖s_j − p_k‖₂`. Each row sum is the distance of one
//! secondary image from the whole primary set, and the mean of those sums is
//! the distance between the two datasets. Row sums are not normalized by
//! the primary size, so values are only comparable against the same primary.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_io::FeatureMatrix;
use crate::projection::{project_pair, ProjectionError};

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("column counts differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("reports refer to different primaries: {0:?} and {1:?}")]
    MixedPrimary(String, String),
    #[error("k = {k} exceeds the {available} available items")]
    KTooLarge { k: usize, available: usize },
    #[error("ragged table: row {row} has {found} entries, expected {expected}")]
    RaggedTable { row: usize, expected: usize, found: usize },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

impl DistanceError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::EmptyInput => "EmptyInput",
            Self::MixedPrimary(..) => "MixedPrimary",
            Self::KTooLarge { .. } => "KTooLarge",
            Self::RaggedTable { .. } => "RaggedTable",
            Self::Projection(e) => e.kind(),
        }
    }
}

/// Euclidean distance with coordinates summed in ascending index order.
#[inline]
fn euclidean<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// m×n matrix of distances from each secondary row to each primary row.
///
/// Rows are computed in parallel; each entry has a fixed reduction order,
/// so the result does not depend on the thread count.
pub fn pairwise(secondary: &DMatrix<f64>, primary: &DMatrix<f64>) -> Result<DMatrix<f64>, DistanceError> {
    if secondary.ncols() != primary.ncols() {
        return Err(DistanceError::DimensionMismatch { left: secondary.ncols(), right: primary.ncols() });
    }
    let (m, n) = (secondary.nrows(), primary.nrows());
    // row-major copies so each distance walks contiguous memory
    let s_rows: Vec<Vec<f64>> = secondary.row_iter().map(|r| r.iter().copied().collect()).collect();
    let p_rows: Vec<Vec<f64>> = primary.row_iter().map(|r| r.iter().copied().collect()).collect();
    let rows: Vec<Vec<f64>> = s_rows
        .par_iter()
        .map(|s| p_rows.iter().map(|p| euclidean(s.iter(), p.iter())).collect())
        .collect();
    Ok(DMatrix::from_fn(m, n, |j, k| rows[j][k]))
}

/// Row sums, left to right.
pub fn image_distances(matrix: &DMatrix<f64>) -> Vec<f64> {
    matrix
        .row_iter()
        .map(|row| row.iter().fold(0.0, |acc, &x| acc + x))
        .collect()
}

/// Arithmetic mean of the per-image distances.
pub fn dataset_distance(image_distances: &[f64]) -> Result<f64, DistanceError> {
    if image_distances.is_empty() {
        return Err(DistanceError::EmptyInput);
    }
    let sum = image_distances.iter().fold(0.0, |acc, &x| acc + x);
    Ok(sum / image_distances.len() as f64)
}

#[derive(Debug, Clone)]
pub struct DistanceReport {
    pub primary_id: String,
    pub secondary_id: String,
    pub secondary_image_ids: Vec<String>,
    /// m×n, secondary rows by primary columns.
    pub matrix: DMatrix<f64>,
    pub image_distances: Vec<f64>,
    pub dataset_distance: f64,
    pub components: usize,
}

impl DistanceReport {
    /// Builds a report from already projected coordinates.
    pub fn from_projected(
        primary_id: &str,
        secondary_id: &str,
        secondary_image_ids: Vec<String>,
        secondary_proj: &DMatrix<f64>,
        primary_proj: &DMatrix<f64>,
    ) -> Result<Self, DistanceError> {
        let matrix = pairwise(secondary_proj, primary_proj)?;
        let image_distances = image_distances(&matrix);
        let dataset_distance = dataset_distance(&image_distances)?;
        Ok(Self {
            primary_id: primary_id.to_string(),
            secondary_id: secondary_id.to_string(),
            secondary_image_ids,
            matrix,
            image_distances,
            dataset_distance,
            components: secondary_proj.ncols(),
        })
    }

    pub fn primary_rows(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn score(&self) -> DatasetScore {
        DatasetScore {
            primary_id: self.primary_id.clone(),
            secondary_id: self.secondary_id.clone(),
            o_dist: self.dataset_distance,
        }
    }

    pub fn summary(&self) -> DistanceSummary {
        DistanceSummary {
            primary_id: self.primary_id.clone(),
            secondary_id: self.secondary_id.clone(),
            o_dist: self.dataset_distance,
            n_primary: self.primary_rows(),
            components: self.components,
            i_dist: self
                .secondary_image_ids
                .iter()
                .zip(&self.image_distances)
                .map(|(id, &value)| ImageDistance { image_id: id.clone(), value })
                .collect(),
        }
    }
}

/// Projects the pair jointly and measures the secondary against the primary.
pub fn measure(primary: &FeatureMatrix, secondary: &FeatureMatrix, z: Option<usize>) -> Result<DistanceReport, DistanceError> {
    let proj = project_pair(primary, secondary, z)?;
    DistanceReport::from_projected(
        primary.dataset_id(),
        secondary.dataset_id(),
        secondary.image_ids().to_vec(),
        &proj.projected_secondary,
        &proj.projected_primary,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDistance {
    pub image_id: String,
    pub value: f64,
}

/// Serializable form of a report without the full pairwise matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub primary_id: String,
    pub secondary_id: String,
    pub o_dist: f64,
    pub n_primary: usize,
    pub components: usize,
    pub i_dist: Vec<ImageDistance>,
}

impl DistanceSummary {
    pub fn image_ids(&self) -> Vec<String> {
        self.i_dist.iter().map(|d| d.image_id.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.i_dist.iter().map(|d| d.value).collect()
    }

    pub fn score(&self) -> DatasetScore {
        DatasetScore {
            primary_id: self.primary_id.clone(),
            secondary_id: self.secondary_id.clone(),
            o_dist: self.o_dist,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub primary_id: String,
    pub secondary_id: String,
    pub o_dist: f64,
}

/// Divides each row by its sum. Rows summing to zero come back all-zero
/// and are flagged in the second return value.
pub fn normalize_rows(raw: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<bool>) {
    raw.iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                (row.iter().map(|x| x / sum).collect(), false)
            } else {
                (vec![0.0; row.len()], true)
            }
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTable {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    pub zero_rows: Vec<bool>,
}

impl DistanceTable {
    pub fn new(row_labels: Vec<String>, column_labels: Vec<String>, raw: Vec<Vec<f64>>) -> Result<Self, DistanceError> {
        if raw.len() != row_labels.len() {
            return Err(DistanceError::RaggedTable { row: raw.len(), expected: row_labels.len(), found: raw.len() });
        }
        for (i, r) in raw.iter().enumerate() {
            if r.len() != column_labels.len() {
                return Err(DistanceError::RaggedTable { row: i, expected: column_labels.len(), found: r.len() });
            }
        }
        let (normalized, zero_rows) = normalize_rows(&raw);
        Ok(Self { row_labels, column_labels, raw, normalized, zero_rows })
    }

    /// Groups dataset scores by primary (rows) and secondary (columns).
    /// Missing cells are zero.
    pub fn from_scores(scores: &[DatasetScore]) -> Result<Self, DistanceError> {
        let mut rows: Vec<String> = Vec::new();
        let mut cols: Vec<String> = Vec::new();
        for s in scores {
            if !rows.contains(&s.primary_id) {
                rows.push(s.primary_id.clone());
            }
            if !cols.contains(&s.secondary_id) {
                cols.push(s.secondary_id.clone());
            }
        }
        let mut raw = vec![vec![0.0; cols.len()]; rows.len()];
        for s in scores {
            let i = rows.iter().position(|r| *r == s.primary_id).unwrap();
            let j = cols.iter().position(|c| *c == s.secondary_id).unwrap();
            raw[i][j] = s.o_dist;
        }
        Self::new(rows, cols, raw)
    }

    /// Column labels of the `k` largest normalized entries of `row`, largest first.
    pub fn farthest(&self, row: usize, k: usize) -> Vec<&str> {
        let values = &self.normalized[row];
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| {
            values[b]
                .total_cmp(&values[a])
                .then_with(|| self.column_labels[a].cmp(&self.column_labels[b]))
        });
        idx.into_iter().take(k).map(|j| self.column_labels[j].as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub components: usize,
    pub o_dist: f64,
    /// |O(z) − O(previous z)|, absent on the first row.
    pub abs_diff: Option<f64>,
}

/// Repeats the projection + distance pipeline for each component count.
pub fn pc_sweep(primary: &FeatureMatrix, secondary: &FeatureMatrix, z_values: &[usize]) -> Result<Vec<SweepRow>, DistanceError> {
    if z_values.is_empty() {
        return Err(DistanceError::EmptyInput);
    }
    let mut out: Vec<SweepRow> = Vec::with_capacity(z_values.len());
    for &z in z_values {
        let o_dist = measure(primary, secondary, Some(z))?.dataset_distance;
        let abs_diff = out.last().map(|prev| (o_dist - prev.o_dist).abs());
        out.push(SweepRow { components: z, o_dist, abs_diff });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Ascending by distance; ties by secondary label.
    pub ordered: Vec<DatasetScore>,
}

impl Ranking {
    pub fn closest(&self, k: usize) -> &[DatasetScore] {
        &self.ordered[..k.min(self.ordered.len())]
    }

    /// Farthest first.
    pub fn farthest(&self, k: usize) -> Vec<&DatasetScore> {
        self.ordered.iter().rev().take(k).collect()
    }
}

fn by_distance_then_label(a: &DatasetScore, b: &DatasetScore) -> Ordering {
    a.o_dist.total_cmp(&b.o_dist).then_with(|| a.secondary_id.cmp(&b.secondary_id))
}

pub fn rank_datasets(scores: &[DatasetScore]) -> Result<Ranking, DistanceError> {
    let first = scores.first().ok_or(DistanceError::EmptyInput)?;
    if let Some(other) = scores.iter().find(|s| s.primary_id != first.primary_id) {
        return Err(DistanceError::MixedPrimary(first.primary_id.clone(), other.primary_id.clone()));
    }
    let mut ordered = scores.to_vec();
    ordered.sort_by(by_distance_then_label);
    Ok(Ranking { ordered })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeImages {
    pub closest: Vec<String>,
    pub farthest: Vec<String>,
}

/// The `k` closest and `k` farthest secondary images; ties by image id.
pub fn extreme_images(ids: &[String], image_distances: &[f64], k: usize) -> Result<ExtremeImages, DistanceError> {
    let m = image_distances.len();
    if k > m {
        return Err(DistanceError::KTooLarge { k, available: m });
    }
    let mut asc: Vec<usize> = (0..m).collect();
    asc.sort_by(|&a, &b| image_distances[a].total_cmp(&image_distances[b]).then_with(|| ids[a].cmp(&ids[b])));
    let mut desc: Vec<usize> = (0..m).collect();
    desc.sort_by(|&a, &b| image_distances[b].total_cmp(&image_distances[a]).then_with(|| ids[a].cmp(&ids[b])));
    Ok(ExtremeImages {
        closest: asc.into_iter().take(k).map(|i| ids[i].clone()).collect(),
        farthest: desc.into_iter().take(k).map(|i| ids[i].clone()).collect(),
    })
}
