//! Binary PGM input and the ODS (best single threshold over a dataset) F-score.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerformanceError {
    #[error("bad PGM header: {0}")]
    BadHeader(String),
    #[error("PGM payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported PGM maxval {0} (must be 1..=255)")]
    UnsupportedMaxval(u32),
    #[error("pixel grid {width}x{height} does not match {len} values")]
    BadGrid { width: usize, height: usize, len: usize },
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("{0} predictions but {1} masks")]
    LengthMismatch(usize, usize),
    #[error("no counterpart for {0:?}")]
    MissingPair(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure { path: String, source: io::Error },
}

impl PerformanceError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::BadHeader(_) => "BadHeader",
            Self::TruncatedPayload { .. } => "TruncatedPayload",
            Self::UnsupportedMaxval(_) => "UnsupportedMaxval",
            Self::BadGrid { .. } => "BadGrid",
            Self::OutOfRange(_) => "OutOfRange",
            Self::DimensionMismatch(..) => "DimensionMismatch",
            Self::EmptyInput => "EmptyInput",
            Self::LengthMismatch(..) => "LengthMismatch",
            Self::MissingPair(_) => "MissingPair",
            Self::IoFailure { .. } => "IoFailure",
        }
    }
}

/// Row-major grid of values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, PerformanceError> {
        if width * height != values.len() {
            return Err(PerformanceError::BadGrid { width, height, len: values.len() });
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PerformanceError::OutOfRange(v));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn same_shape(&self, other: &Self) -> Result<(), PerformanceError> {
        if self.width != other.width || self.height != other.height {
            return Err(PerformanceError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PerformanceError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PerformanceError::BadHeader(format!("missing or invalid {what}")))
    }
}

/// Decodes a binary (P5) PGM; pixel values are divided by maxval.
pub fn decode_pgm(bytes: &[u8]) -> Result<PixelGrid, PerformanceError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PerformanceError::BadHeader("expected binary 'P5' magic".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PerformanceError::UnsupportedMaxval(maxval));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PerformanceError::BadHeader("no whitespace after maxval".into())),
    }
    let payload = &bytes[cur.pos..];
    let expected = width * height;
    if payload.len() < expected {
        return Err(PerformanceError::TruncatedPayload { expected, found: payload.len() });
    }
    let scale = f64::from(maxval);
    let values = payload[..expected]
        .iter()
        .map(|&b| (f64::from(b) / scale).min(1.0))
        .collect();
    PixelGrid::new(width, height, values)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<PixelGrid, PerformanceError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| PerformanceError::IoFailure { path: path.display().to_string(), source })?;
    decode_pgm(&bytes)
}

/// Encodes 8-bit pixels as a P5 PGM with maxval 255.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    fn add(self, o: Self) -> Self {
        Self { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// Harmonic mean of precision and recall; 0 when there are no true positives.
    pub fn f_score(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let (p, r) = (self.precision(), self.recall());
        2.0 * p * r / (p + r)
    }
}

/// Mask pixels above 0.5 are positive; predictions at or above `threshold` are.
pub fn confusion_counts(prediction: &PixelGrid, mask: &PixelGrid, threshold: f64) -> Result<Counts, PerformanceError> {
    prediction.same_shape(mask)?;
    let mut c = Counts::default();
    for (&p, &g) in prediction.values.iter().zip(&mask.values) {
        match (p >= threshold, g > 0.5) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Thresholds `k / steps` for `k = 1..steps`; the default `steps = 100`
/// gives 0.01..=0.99.
pub fn threshold_grid(steps: usize) -> Vec<f64> {
    (1..steps).map(|k| k as f64 / steps as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdsResult {
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn check_pairs(predictions: &[PixelGrid], masks: &[PixelGrid]) -> Result<(), PerformanceError> {
    if predictions.len() != masks.len() {
        return Err(PerformanceError::LengthMismatch(predictions.len(), masks.len()));
    }
    if predictions.is_empty() {
        return Err(PerformanceError::EmptyInput);
    }
    for (p, m) in predictions.iter().zip(masks) {
        p.same_shape(m)?;
    }
    Ok(())
}

/// Counts of one image at every threshold of the grid.
fn counts_over_grid(prediction: &PixelGrid, mask: &PixelGrid, thresholds: &[f64]) -> Vec<Counts> {
    thresholds
        .iter()
        .map(|&t| confusion_counts(prediction, mask, t).expect("shapes checked"))
        .collect()
}

fn best_of(per_threshold: &[Counts], thresholds: &[f64]) -> OdsResult {
    let mut best = 0;
    let mut best_f = per_threshold[0].f_score();
    for (i, c) in per_threshold.iter().enumerate().skip(1) {
        let f = c.f_score();
        if f > best_f {
            best = i;
            best_f = f;
        }
    }
    let c = per_threshold[best];
    OdsResult {
        best_threshold: thresholds[best],
        precision: c.precision(),
        recall: c.recall(),
        f_score: best_f,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
    }
}

/// Aggregates counts over all images at each threshold and returns the
/// threshold with the highest F-score (the smallest one on ties).
pub fn ods(predictions: &[PixelGrid], masks: &[PixelGrid], thresholds: &[f64]) -> Result<OdsResult, PerformanceError> {
    check_pairs(predictions, masks)?;
    if thresholds.is_empty() {
        return Err(PerformanceError::EmptyInput);
    }
    let totals = predictions
        .par_iter()
        .zip(masks.par_iter())
        .map(|(p, m)| counts_over_grid(p, m, thresholds))
        .reduce(
            || vec![Counts::default(); thresholds.len()],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.add(y)).collect(),
        );
    Ok(best_of(&totals, thresholds))
}

/// ODS over the images at `indices` only.
pub fn ods_subset(
    predictions: &[PixelGrid],
    masks: &[PixelGrid],
    indices: &[usize],
    thresholds: &[f64],
) -> Result<OdsResult, PerformanceError> {
    let p: Vec<PixelGrid> = indices.iter().map(|&i| predictions[i].clone()).collect();
    let m: Vec<PixelGrid> = indices.iter().map(|&i| masks[i].clone()).collect();
    ods(&p, &m, thresholds)
}

/// Each image's F-score at one shared threshold.
pub fn per_image_fscores(predictions: &[PixelGrid], masks: &[PixelGrid], threshold: f64) -> Result<Vec<f64>, PerformanceError> {
    check_pairs(predictions, masks)?;
    predictions
        .par_iter()
        .zip(masks.par_iter())
        .map(|(p, m)| confusion_counts(p, m, threshold).map(|c| c.f_score()))
        .collect()
}

/// Each image's F-score at its own best grid threshold.
pub fn per_image_best_fscores(predictions: &[PixelGrid], masks: &[PixelGrid], thresholds: &[f64]) -> Result<Vec<f64>, PerformanceError> {
    check_pairs(predictions, masks)?;
    if thresholds.is_empty() {
        return Err(PerformanceError::EmptyInput);
    }
    Ok(predictions
        .par_iter()
        .zip(masks.par_iter())
        .map(|(p, m)| best_of(&counts_over_grid(p, m, thresholds), thresholds).f_score)
        .collect())
}

fn pgm_stems(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>, PerformanceError> {
    let io_err = |source| PerformanceError::IoFailure { path: dir.display().to_string(), source };
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            if let Some(stem) = path.file_stem() {
                out.insert(stem.to_string_lossy().into_owned(), path);
            }
        }
    }
    Ok(out)
}

/// Prediction/mask pairs matched by file stem.
#[derive(Debug, Clone)]
pub struct PairedGrids {
    pub image_ids: Vec<String>,
    pub predictions: Vec<PixelGrid>,
    pub masks: Vec<PixelGrid>,
}

impl PairedGrids {
    /// Pairs restricted to `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Self, PerformanceError> {
        let index: BTreeMap<&str, usize> = self.image_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut out = Self { image_ids: Vec::new(), predictions: Vec::new(), masks: Vec::new() };
        for id in ids {
            let &i = index.get(id.as_str()).ok_or_else(|| PerformanceError::MissingPair(id.clone()))?;
            out.image_ids.push(id.clone());
            out.predictions.push(self.predictions[i].clone());
            out.masks.push(self.masks[i].clone());
        }
        Ok(out)
    }
}

/// Loads every `<id>.pgm` in `pred_dir` with its namesake in `mask_dir`,
/// sorted by id. A file without a counterpart on either side is an error.
pub fn load_pairs(pred_dir: impl AsRef<Path>, mask_dir: impl AsRef<Path>) -> Result<PairedGrids, PerformanceError> {
    let preds = pgm_stems(pred_dir.as_ref())?;
    let masks = pgm_stems(mask_dir.as_ref())?;
    if let Some(id) = masks.keys().find(|k| !preds.contains_key(*k)) {
        return Err(PerformanceError::MissingPair(id.clone()));
    }
    let mut out = PairedGrids { image_ids: Vec::new(), predictions: Vec::new(), masks: Vec::new() };
    for (id, path) in &preds {
        let mask_path = masks.get(id).ok_or_else(|| PerformanceError::MissingPair(id.clone()))?;
        out.image_ids.push(id.clone());
        out.predictions.push(read_pgm(path)?);
        out.masks.push(read_pgm(mask_path)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, v: &[f64]) -> PixelGrid {
        PixelGrid::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn decode_basic_p5() {
        let g = decode_pgm(&encode_pgm(2, 2, &[0, 255, 255, 0])).unwrap();
        assert_eq!(g.values(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn header_with_comment_and_small_maxval() {
        let mut bytes = b"P5 # note\n2 1\n# more\n4\n".to_vec();
        bytes.extend_from_slice(&[2, 4]);
        let g = decode_pgm(&bytes).unwrap();
        assert_eq!(g.values(), &[0.5, 1.0]);
    }

    #[test]
    fn rejects_ascii_and_short_payload() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(PerformanceError::BadHeader(_))));
        let mut short = encode_pgm(2, 2, &[0, 0, 0, 0]);
        short.truncate(short.len() - 1);
        assert!(matches!(decode_pgm(&short), Err(PerformanceError::TruncatedPayload { expected: 4, found: 3 })));
        assert!(matches!(decode_pgm(b"P5\n1 1\n65535\n\0\0"), Err(PerformanceError::UnsupportedMaxval(65535))));
        assert!(matches!(decode_pgm(b"P5\n1\n"), Err(PerformanceError::BadHeader(_))));
    }

    #[test]
    fn counts_worked_example() {
        let p = grid(2, 2, &[0.2, 0.8, 0.6, 0.4]);
        let g = grid(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = confusion_counts(&p, &g, 0.5).unwrap();
        assert_eq!(c, Counts { tp: 2, fp: 0, fn_: 0, tn: 2 });
    }

    #[test]
    fn counts_identity_and_empty_mask() {
        let g = grid(3, 1, &[1.0, 0.0, 1.0]);
        let c = confusion_counts(&g, &g, 0.5).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (2, 0, 0));
        let empty = grid(3, 1, &[0.0; 3]);
        assert_eq!(confusion_counts(&g, &empty, 0.1).unwrap().tp, 0);
        let wide = grid(1, 3, &[0.0; 3]);
        assert!(matches!(confusion_counts(&g, &wide, 0.5), Err(PerformanceError::DimensionMismatch(..))));
    }

    #[test]
    fn boundary_threshold_is_inclusive() {
        let c = confusion_counts(&grid(1, 1, &[0.4]), &grid(1, 1, &[1.0]), 0.4).unwrap();
        assert_eq!(c.tp, 1);
    }

    #[test]
    fn ods_worked_example() {
        let p = grid(2, 2, &[0.2, 0.8, 0.6, 0.4]);
        let g = grid(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = ods(&[p], &[g], &threshold_grid(100)).unwrap();
        assert_eq!(r.best_threshold, 0.41);
        assert_eq!(r.f_score, 1.0);
    }

    #[test]
    fn ods_empty_masks() {
        let p = grid(2, 1, &[0.3, 0.9]);
        let g = grid(2, 1, &[0.0, 0.0]);
        let r = ods(&[p], &[g], &threshold_grid(100)).unwrap();
        assert_eq!(r.best_threshold, 0.01);
        assert_eq!(r.f_score, 0.0);
    }

    #[test]
    fn ods_perfect_binary() {
        let g = grid(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let r = ods(&[g.clone()], &[g], &threshold_grid(100)).unwrap();
        assert_eq!(r.f_score, 1.0);
        assert!(matches!(ods(&[], &[], &threshold_grid(100)), Err(PerformanceError::EmptyInput)));
    }

    #[test]
    fn per_image() {
        let g = grid(2, 1, &[1.0, 0.0]);
        let empty = grid(2, 1, &[0.0, 0.0]);
        let noisy = grid(2, 1, &[0.9, 0.9]);
        let f = per_image_fscores(&[g.clone(), noisy], &[g, empty], 0.5).unwrap();
        assert_eq!(f, vec![1.0, 0.0]);
    }

    #[test]
    fn grid_default() {
        let t = threshold_grid(100);
        assert_eq!(t.len(), 99);
        assert_eq!(t[0], 0.01);
        assert_eq!(t[98], 0.99);
    }
}
