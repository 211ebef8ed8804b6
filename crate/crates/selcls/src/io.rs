//! File formats and dataset manifests.
//!
//! Two matrix formats are supported everywhere:
//!
//! - `csv`: a header row followed by comma-separated decimal floats, read
//!   and written in full double precision;
//! - `bin`: the SCLG container (magic `SCLG`, version u16 = 1, row and
//!   column counts as u32, then little-endian f32 payload, row-major).
//!   Model exports are single precision anyway, so the binary format
//!   stores f32 and round-trips it exactly; all arithmetic after loading
//!   is f64.
//!
//! A manifest is a JSON document naming the files of each evaluation
//! split, the shift tag its rows carry, and the global shape constants.
//! [`load_data`] turns a manifest into a validated [`EvalSet`], failing
//! fast on any file whose shape disagrees with the declaration:
//!
//! ```json
//! {
//!   "num_classes": 4,
//!   "feature_dim": 512,
//!   "splits": [
//!     { "shift": "in_d", "files": [
//!       { "kind": "logits",   "path": "ind_logits.csv",  "format": "csv" },
//!       { "kind": "labels",   "path": "ind_labels.csv",  "format": "csv" },
//!       { "kind": "features", "path": "ind_feats.bin",   "format": "bin" } ] },
//!     { "shift": "shift_label", "files": [
//!       { "kind": "logits",   "path": "ood_logits.bin",  "format": "bin" } ] }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. A
//! `weight_norms` file (one value per class) may appear in any split and
//! supplies the classifier head. Splits without a labels file get the
//! out-of-distribution label on every row, which is only legal for
//! label-shifted splits.
//!
//! All writers go through [`atomic_write`]: content lands in a temporary
//! file first and is renamed into place, so readers never observe a
//! half-written file.

use crate::data::{ClassifierHead, DataError, EvalSet, ShiftTag, OOD_LABEL};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};

const BIN_MAGIC: &[u8; 4] = b"SCLG";
const BIN_VERSION: u16 = 1;

#[derive(Debug)]
pub enum IoError {
    /// Filesystem failure on the named path.
    Io { path: PathBuf, source: std::io::Error },
    /// Unparseable content; the detail names the line or byte position.
    Format { path: PathBuf, detail: String },
    /// Parsed fine but disagrees with the manifest's declared shape.
    Shape { path: PathBuf, expected: String, got: String },
    /// The manifest itself is inconsistent.
    Manifest { detail: String },
    /// The assembled set violated a dataset invariant.
    Data(DataError),
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IoError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            IoError::Format { path, detail } => write!(f, "{}: {detail}", path.display()),
            IoError::Shape { path, expected, got } => {
                write!(f, "{}: expected {expected}, got {got}", path.display())
            }
            IoError::Manifest { detail } => write!(f, "manifest: {detail}"),
            IoError::Data(e) => write!(f, "{e}"),
        }
    }
}

// Display already flattens the cause into the message, so the source
// chain stays empty; wrapping layers would otherwise print it twice.
impl std::error::Error for IoError {}

impl From<DataError> for IoError {
    fn from(e: DataError) -> Self {
        IoError::Data(e)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, detail: impl Into<String>) -> IoError {
    IoError::Format { path: path.to_path_buf(), detail: detail.into() }
}

/// On-disk encoding of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Bin,
}

impl FileFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Csv => "csv",
            FileFormat::Bin => "bin",
        }
    }
}

/// What a manifest file contributes to the evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Logits,
    Features,
    Labels,
    WeightNorms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub kind: FileKind,
    pub path: String,
    pub format: FileFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    /// Shift tag stamped on every row of this split.
    pub shift: ShiftTag,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_classes: usize,
    /// Required as soon as any split carries features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    pub splits: Vec<SplitEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            format_err(path, format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and an
/// atomic rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| io_err(path, e))?;
    std::io::Write::write_all(&mut tmp.as_file(), bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Reads a matrix in either format. CSV must start with a header row;
/// every data field is parsed as a decimal float.
pub fn read_matrix(path: &Path, format: FileFormat) -> Result<Array2<f64>, IoError> {
    match format {
        FileFormat::Csv => read_matrix_csv(path),
        FileFormat::Bin => read_matrix_bin(path),
    }
}

/// Writes a matrix in either format. CSV gets a generated `c0..c{n-1}`
/// header and shortest-round-trip float formatting; BIN stores f32.
pub fn write_matrix(path: &Path, format: FileFormat, matrix: &Array2<f64>) -> Result<(), IoError> {
    let bytes = match format {
        FileFormat::Csv => {
            let header: Vec<String> = (0..matrix.ncols()).map(|j| format!("c{j}")).collect();
            let rows = matrix.rows().into_iter().map(|r| r.to_vec());
            csv_bytes(&header, rows.map(|r| r.iter().map(|v| format!("{v}")).collect()))
        }
        FileFormat::Bin => bin_bytes(path, matrix)?,
    };
    atomic_write(path, &bytes)
}

/// Reads an integer label column (a one-column matrix in either format;
/// values must be exact integers).
pub fn read_labels(path: &Path, format: FileFormat) -> Result<Vec<i64>, IoError> {
    let matrix = read_matrix(path, format)?;
    if matrix.ncols() != 1 {
        return Err(IoError::Shape {
            path: path.to_path_buf(),
            expected: "1 label column".to_string(),
            got: format!("{} columns", matrix.ncols()),
        });
    }
    matrix
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() == 0.0 && v.abs() <= 2f64.powi(53) {
                Ok(v as i64)
            } else {
                Err(format_err(path, format!("row {}: label '{v}' is not an integer", i + 1)))
            }
        })
        .collect()
}

/// Writes labels as a one-column CSV with a `label` header.
pub fn write_labels(path: &Path, labels: &[i64]) -> Result<(), IoError> {
    let rows = labels.iter().map(|l| vec![l.to_string()]);
    atomic_write(path, &csv_bytes(&["label".to_string()], rows))
}

/// Serializes header + string rows as CSV bytes. Shared by every CSV
/// writer so the byte layout (and thus determinism) has a single source.
pub fn csv_bytes<I>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn read_matrix_csv(path: &Path) -> Result<Array2<f64>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(path, std::io::Error::other(e.to_string())),
            _ => format_err(path, e.to_string()),
        })?;
    let cols = reader
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .len();
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".to_string());
        if record.len() != cols {
            return Err(format_err(
                path,
                format!("line {line}: expected {cols} fields, got {}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                format_err(path, format!("line {line}, field {}: invalid float '{field}'", j + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("consistent row lengths"))
}

fn read_matrix_bin(path: &Path) -> Result<Array2<f64>, IoError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut cursor = std::io::Cursor::new(&bytes);
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| format_err(path, "byte 0: bad magic (file shorter than 4 bytes)"))?;
    if &magic != BIN_MAGIC {
        return Err(format_err(path, format!("byte 0: bad magic {magic:?}")));
    }
    let version = cursor
        .read_u16::<LittleEndian>()
        .map_err(|_| format_err(path, "byte 4: truncated version field"))?;
    if version != BIN_VERSION {
        return Err(format_err(
            path,
            format!("byte 4: unsupported version {version} (expected {BIN_VERSION})"),
        ));
    }
    let rows = cursor
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err(path, "byte 6: truncated row count"))? as usize;
    let cols = cursor
        .read_u32::<LittleEndian>()
        .map_err(|_| format_err(path, "byte 10: truncated column count"))? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err(path, "header: row*column count overflows"))?;
    let expected_len = 14 + 4 * count;
    if bytes.len() != expected_len {
        return Err(format_err(
            path,
            format!("payload: expected {expected_len} bytes total, file has {}", bytes.len()),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(cursor.read_f32::<LittleEndian>().expect("length checked") as f64);
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

fn bin_bytes(path: &Path, matrix: &Array2<f64>) -> Result<Vec<u8>, IoError> {
    let rows = u32::try_from(matrix.nrows())
        .map_err(|_| format_err(path, "too many rows for the binary format"))?;
    let cols = u32::try_from(matrix.ncols())
        .map_err(|_| format_err(path, "too many columns for the binary format"))?;
    let mut bytes = Vec::with_capacity(14 + matrix.len() * 4);
    bytes.extend_from_slice(BIN_MAGIC);
    bytes.write_u16::<LittleEndian>(BIN_VERSION).expect("vec write");
    bytes.write_u32::<LittleEndian>(rows).expect("vec write");
    bytes.write_u32::<LittleEndian>(cols).expect("vec write");
    for row in matrix.rows() {
        for &v in row {
            bytes.write_f32::<LittleEndian>(v as f32).expect("vec write");
        }
    }
    Ok(bytes)
}

/// Everything a manifest yields: the concatenated evaluation set (splits
/// in manifest order) and the classifier head when one was declared.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub set: EvalSet,
    pub head: Option<ClassifierHead>,
}

/// Loads the manifest at `path` and assembles its data, resolving
/// relative file paths against the manifest's directory.
pub fn load_data(path: &Path) -> Result<LoadedData, IoError> {
    let manifest = Manifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    assemble_data(&manifest, base)
}

/// Reads every file a manifest names and builds the evaluation set,
/// checking each file's shape against the declared constants before any
/// computation can start.
pub fn assemble_data(manifest: &Manifest, base: &Path) -> Result<LoadedData, IoError> {
    if manifest.splits.is_empty() {
        return Err(IoError::Manifest { detail: "no splits declared".to_string() });
    }
    let k = manifest.num_classes;
    let mut logits_parts: Vec<Array2<f64>> = Vec::new();
    let mut feature_parts: Vec<Option<Array2<f64>>> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut tags: Vec<ShiftTag> = Vec::new();
    let mut norms: Option<Vec<f64>> = None;

    for (si, split) in manifest.splits.iter().enumerate() {
        let mut split_logits: Option<(Array2<f64>, PathBuf)> = None;
        let mut split_features: Option<Array2<f64>> = None;
        let mut split_labels: Option<(Vec<i64>, PathBuf)> = None;
        for entry in &split.files {
            let path = base.join(&entry.path);
            match entry.kind {
                FileKind::Logits => {
                    if split_logits.is_some() {
                        return Err(IoError::Manifest {
                            detail: format!("split {si}: more than one logits file"),
                        });
                    }
                    let m = read_matrix(&path, entry.format)?;
                    if m.ncols() != k {
                        return Err(IoError::Shape {
                            path,
                            expected: format!("{k} logit columns"),
                            got: format!("{}", m.ncols()),
                        });
                    }
                    split_logits = Some((m, path));
                }
                FileKind::Features => {
                    if split_features.is_some() {
                        return Err(IoError::Manifest {
                            detail: format!("split {si}: more than one features file"),
                        });
                    }
                    let d = manifest.feature_dim.ok_or_else(|| IoError::Manifest {
                        detail: "features declared but feature_dim missing".to_string(),
                    })?;
                    let m = read_matrix(&path, entry.format)?;
                    if m.ncols() != d {
                        return Err(IoError::Shape {
                            path,
                            expected: format!("{d} feature columns"),
                            got: format!("{}", m.ncols()),
                        });
                    }
                    split_features = Some(m);
                }
                FileKind::Labels => {
                    if split_labels.is_some() {
                        return Err(IoError::Manifest {
                            detail: format!("split {si}: more than one labels file"),
                        });
                    }
                    split_labels = Some((read_labels(&path, entry.format)?, path));
                }
                FileKind::WeightNorms => {
                    if norms.is_some() {
                        return Err(IoError::Manifest {
                            detail: "more than one weight_norms file".to_string(),
                        });
                    }
                    let m = read_matrix(&path, entry.format)?;
                    let flat: Vec<f64> = m.iter().copied().collect();
                    if flat.len() != k {
                        return Err(IoError::Shape {
                            path,
                            expected: format!("{k} weight norms"),
                            got: format!("{}", flat.len()),
                        });
                    }
                    norms = Some(flat);
                }
            }
        }

        let (logits, logits_path) = split_logits.ok_or_else(|| IoError::Manifest {
            detail: format!("split {si}: no logits file"),
        })?;
        let n = logits.nrows();
        match split_labels {
            Some((l, label_path)) => {
                if l.len() != n {
                    return Err(IoError::Shape {
                        path: label_path,
                        expected: format!("{n} labels (rows of {})", logits_path.display()),
                        got: format!("{}", l.len()),
                    });
                }
                labels.extend(l);
            }
            // A split without labels is out-of-domain by definition.
            None => labels.extend(std::iter::repeat_n(OOD_LABEL, n)),
        }
        if let Some(ref feats) = split_features {
            if feats.nrows() != n {
                return Err(IoError::Manifest {
                    detail: format!(
                        "split {si}: {} feature rows but {n} logit rows",
                        feats.nrows()
                    ),
                });
            }
        }
        tags.extend(std::iter::repeat_n(split.shift, n));
        logits_parts.push(logits);
        feature_parts.push(split_features);
    }

    let with_features = feature_parts.iter().filter(|f| f.is_some()).count();
    if with_features != 0 && with_features != feature_parts.len() {
        return Err(IoError::Manifest {
            detail: "features must be present in all splits or none".to_string(),
        });
    }

    let logits = concat_rows(&logits_parts);
    let features = if with_features == feature_parts.len() {
        Some(concat_rows(
            &feature_parts.into_iter().map(Option::unwrap).collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    let head = norms.map(ClassifierHead::from_norms);
    let set = EvalSet::new(logits, features, labels, tags)?;
    Ok(LoadedData { set, head })
}

fn concat_rows(parts: &[Array2<f64>]) -> Array2<f64> {
    let cols = parts[0].ncols();
    let rows = parts.iter().map(Array2::nrows).sum();
    let mut out = Array2::zeros((rows, cols));
    let mut at = 0;
    for part in parts {
        assert_eq!(part.ncols(), cols, "split column counts agree by validation");
        for row in part.rows() {
            for (j, &v) in row.iter().enumerate() {
                out[[at, j]] = v;
            }
            at += 1;
        }
    }
    out
}
