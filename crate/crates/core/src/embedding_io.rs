//! Feature-matrix container and its on-disk formats.
//!
//! The binary format (FVEC1) is little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       6     magic "SIMFV1" (53 49 4D 46 56 31)
//! 6       1     version = 1
//! 7       1     reserved = 0
//! 8       4     rows (u32)
//! 12      4     cols (u32)
//! 16      4     id_block_len (u32, bytes)
//! 20      ..    id block: UTF-8, one line per entry, each terminated by '\n';
//!               first line is "#" + dataset_id, then exactly `rows` image ids
//! ..      ..    rows * cols f64 values, row-major
//! ```
//!
//! A CSV fallback is accepted for hand-made inputs.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

pub const FVEC_MAGIC: [u8; 6] = *b"SIMFV1";
pub const FVEC_VERSION: u8 = 1;
pub const FVEC_HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("not an FVEC1 file (bad magic)")]
    BadMagic,
    #[error("unsupported FVEC version {0}")]
    UnsupportedVersion(u8),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingData(u64),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix has a zero dimension ({rows}x{cols})")]
    DimensionZero { rows: usize, cols: usize },
    #[error("invalid id block: {0}")]
    BadIdBlock(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("cannot parse {value:?} at row {row}, column {col}")]
    ParseFailure { row: usize, col: usize, value: String },
    #[error("matrix dimension exceeds u32 range")]
    TooLarge,
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
}

impl EmbeddingError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::BadMagic => "BadMagic",
            Self::UnsupportedVersion(_) => "UnsupportedVersion",
            Self::TruncatedFile { .. } => "TruncatedFile",
            Self::TrailingData(_) => "TrailingData",
            Self::NonFinite { .. } => "NonFinite",
            Self::DimensionZero { .. } => "DimensionZero",
            Self::BadIdBlock(_) => "BadIdBlock",
            Self::RaggedRows { .. } => "RaggedRows",
            Self::ParseFailure { .. } => "ParseFailure",
            Self::TooLarge => "TooLarge",
            Self::IoFailure(_) => "IoFailure",
        }
    }
}

/// Per-image feature vectors of one dataset, one row per image.
///
/// Values are finite, ids are unique and line-safe, and both dimensions
/// are nonzero. The matrix is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dataset_id: String,
    image_ids: Vec<String>,
    values: DMatrix<f64>,
}

fn check_label(label: &str, what: &str) -> Result<(), EmbeddingError> {
    if label.contains('\n') || label.contains('\r') {
        return Err(EmbeddingError::BadIdBlock(format!(
            "{what} {label:?} contains a line break"
        )));
    }
    Ok(())
}

impl FeatureMatrix {
    pub fn new(
        dataset_id: impl Into<String>,
        image_ids: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self, EmbeddingError> {
        let dataset_id = dataset_id.into();
        let (rows, cols) = values.shape();
        if rows == 0 || cols == 0 {
            return Err(EmbeddingError::DimensionZero { rows, cols });
        }
        if image_ids.len() != rows {
            return Err(EmbeddingError::BadIdBlock(format!(
                "{} image ids for {rows} rows",
                image_ids.len()
            )));
        }
        check_label(&dataset_id, "dataset id")?;
        let mut seen = HashSet::with_capacity(rows);
        for id in &image_ids {
            check_label(id, "image id")?;
            if id.is_empty() {
                return Err(EmbeddingError::BadIdBlock("empty image id".into()));
            }
            if !seen.insert(id.as_str()) {
                return Err(EmbeddingError::BadIdBlock(format!("duplicate image id {id:?}")));
            }
        }
        for row in 0..rows {
            for col in 0..cols {
                if !values[(row, col)].is_finite() {
                    return Err(EmbeddingError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { dataset_id, image_ids, values })
    }

    /// Builds a matrix from row vectors, naming rows `row0`, `row1`, ...
    pub fn from_rows(dataset_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self, EmbeddingError> {
        let ids = (0..rows.len()).map(|i| format!("row{i}")).collect();
        Self::from_rows_with_ids(dataset_id, ids, rows)
    }

    pub fn from_rows_with_ids(
        dataset_id: impl Into<String>,
        image_ids: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self, EmbeddingError> {
        let cols = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(EmbeddingError::RaggedRows { row: i, expected: cols, found: r.len() });
            }
        }
        let values = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
        Self::new(dataset_id, image_ids, values)
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Copy of the given rows, in the given order.
    pub fn select_rows(&self, dataset_id: impl Into<String>, indices: &[usize]) -> Result<Self, EmbeddingError> {
        let ids = indices.iter().map(|&i| self.image_ids[i].clone()).collect();
        let values = self.values.select_rows(indices);
        Self::new(dataset_id, ids, values)
    }

    pub fn with_dataset_id(mut self, dataset_id: impl Into<String>) -> Result<Self, EmbeddingError> {
        let id = dataset_id.into();
        check_label(&id, "dataset id")?;
        self.dataset_id = id;
        Ok(self)
    }
}

fn encode_id_block(m: &FeatureMatrix) -> Vec<u8> {
    let mut block = String::new();
    block.push('#');
    block.push_str(&m.dataset_id);
    block.push('\n');
    for id in &m.image_ids {
        block.push_str(id);
        block.push('\n');
    }
    block.into_bytes()
}

/// Serializes a matrix into FVEC1 bytes.
pub fn encode_fvec(m: &FeatureMatrix) -> Result<Vec<u8>, EmbeddingError> {
    let rows = u32::try_from(m.rows()).map_err(|_| EmbeddingError::TooLarge)?;
    let cols = u32::try_from(m.cols()).map_err(|_| EmbeddingError::TooLarge)?;
    let ids = encode_id_block(m);
    let id_len = u32::try_from(ids.len()).map_err(|_| EmbeddingError::TooLarge)?;

    let mut out = Vec::with_capacity(FVEC_HEADER_LEN + ids.len() + m.rows() * m.cols() * 8);
    out.extend_from_slice(&FVEC_MAGIC);
    out.push(FVEC_VERSION);
    out.push(0);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&id_len.to_le_bytes());
    out.extend_from_slice(&ids);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out.extend_from_slice(&m.values[(r, c)].to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses FVEC1 bytes. Any deviation from the layout is an error.
pub fn decode_fvec(bytes: &[u8]) -> Result<FeatureMatrix, EmbeddingError> {
    if bytes.len() < FVEC_MAGIC.len() || bytes[..FVEC_MAGIC.len()] != FVEC_MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    if bytes.len() < FVEC_HEADER_LEN {
        return Err(EmbeddingError::TruncatedFile {
            expected: FVEC_HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = bytes[6];
    if version != FVEC_VERSION {
        return Err(EmbeddingError::UnsupportedVersion(version));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let rows = u32_at(8) as usize;
    let cols = u32_at(12) as usize;
    let id_len = u32_at(16) as u64;
    if rows == 0 || cols == 0 {
        return Err(EmbeddingError::DimensionZero { rows, cols });
    }

    let payload_len = (rows as u64) * (cols as u64) * 8;
    let expected = FVEC_HEADER_LEN as u64 + id_len + payload_len;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(EmbeddingError::TruncatedFile { expected, found });
    }
    if found > expected {
        return Err(EmbeddingError::TrailingData(found - expected));
    }

    let id_end = FVEC_HEADER_LEN + id_len as usize;
    let block = std::str::from_utf8(&bytes[FVEC_HEADER_LEN..id_end])
        .map_err(|e| EmbeddingError::BadIdBlock(format!("not UTF-8: {e}")))?;
    let body = block
        .strip_suffix('\n')
        .ok_or_else(|| EmbeddingError::BadIdBlock("missing final newline".into()))?;
    let mut lines = body.split('\n');
    let dataset_id = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| EmbeddingError::BadIdBlock("first line must be '#<dataset id>'".into()))?
        .to_string();
    let image_ids: Vec<String> = lines.map(str::to_string).collect();
    if image_ids.len() != rows {
        return Err(EmbeddingError::BadIdBlock(format!(
            "{} image ids for {rows} rows",
            image_ids.len()
        )));
    }

    let payload = &bytes[id_end..];
    let mut values = DMatrix::zeros(rows, cols);
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        let (r, c) = (k / cols, k % cols);
        if !v.is_finite() {
            return Err(EmbeddingError::NonFinite { row: r, col: c });
        }
        values[(r, c)] = v;
    }
    FeatureMatrix::new(dataset_id, image_ids, values)
}

pub fn read_fvec(path: impl AsRef<Path>) -> Result<FeatureMatrix, EmbeddingError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_fvec(&bytes)
}

pub fn write_fvec(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let bytes = encode_fvec(m)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a rectangular numeric CSV.
///
/// With `has_header`, the first record is a header; if its first cell is
/// `id`, the first column holds image ids. Otherwise rows are named
/// `row0`, `row1`, .... The dataset id is the file stem.
pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<FeatureMatrix, EmbeddingError> {
    let path = path.as_ref();
    let dataset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv_from(File::open(path)?, &dataset_id, has_header)
}

pub fn read_csv_from<R: Read>(
    reader: R,
    dataset_id: &str,
    has_header: bool,
) -> Result<FeatureMatrix, EmbeddingError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let mut id_column = false;
    let mut header_width = None;
    if has_header {
        if let Some(rec) = records.next() {
            let rec = rec.map_err(csv_err)?;
            id_column = rec.get(0).is_some_and(|c| c.eq_ignore_ascii_case("id"));
            header_width = Some(rec.len());
        }
    }

    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = header_width;
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(EmbeddingError::RaggedRows { row: i, expected, found: rec.len() });
        }
        let mut fields = rec.iter();
        if id_column {
            ids.push(fields.next().unwrap_or_default().to_string());
        } else {
            ids.push(format!("row{}", rows.len()));
        }
        let offset = usize::from(id_column);
        let row = fields
            .enumerate()
            .map(|(j, cell)| {
                let v: f64 = cell.parse().map_err(|_| EmbeddingError::ParseFailure {
                    row: i,
                    col: j + offset,
                    value: cell.to_string(),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(EmbeddingError::NonFinite { row: i, col: j })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        let cols = rows.first().map_or(0, Vec::len);
        return Err(EmbeddingError::DimensionZero { rows: rows.len(), cols });
    }
    FeatureMatrix::from_rows_with_ids(dataset_id, ids, &rows)
}

fn csv_err(e: csv::Error) -> EmbeddingError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => EmbeddingError::IoFailure(io),
        other => EmbeddingError::ParseFailure { row: 0, col: 0, value: format!("{other:?}") },
    }
}

/// Writes a matrix as CSV with an `id` column and `f0..f{q-1}` headers.
pub fn write_csv<W: Write>(m: &FeatureMatrix, writer: W) -> Result<(), EmbeddingError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..m.cols()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (r, id) in m.image_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend((0..m.cols()).map(|c| format!("{:?}", m.values[(r, c)])));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
