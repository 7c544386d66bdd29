//! Tabular data model: matrices with missing cells, their masks, column schemas,
//! min-max scaling, CSV ingestion and seeded splitting.
//!
//! Missing cells are held internally as `NaN`; the public accessors expose them as
//! `Option<f64>` and every constructor rejects infinities, so a finite value is always
//! data and `NaN` is always "missing".

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
}

/// Cell-wise equality where two missing cells compare equal.
impl PartialEq for DataMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

impl DataMatrix {
    /// Fully observed matrix from row-major values. Fails on non-finite input.
    pub fn from_dense(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        check_len(rows, cols, values.len())?;
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
                value: values[idx],
            });
        }
        Ok(Self {
            rows,
            cols,
            cells: values,
        })
    }

    /// Matrix from optional cells, `None` meaning missing.
    pub fn from_options(rows: usize, cols: usize, values: Vec<Option<f64>>) -> Result<Self> {
        check_len(rows, cols, values.len())?;
        let mut cells = Vec::with_capacity(values.len());
        for (idx, v) in values.into_iter().enumerate() {
            match v {
                Some(x) if !x.is_finite() => {
                    return Err(Error::NonFinite {
                        row: idx / cols,
                        col: idx % cols,
                        value: x,
                    })
                }
                Some(x) => cells.push(x),
                None => cells.push(f64::NAN),
            }
        }
        Ok(Self { rows, cols, cells })
    }

    /// Row-major matrix where `NaN` marks missing cells; infinities are rejected.
    pub fn from_nan_encoded(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        check_len(rows, cols, values.len())?;
        if let Some(idx) = values.iter().position(|v| v.is_infinite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
                value: values[idx],
            });
        }
        Ok(Self {
            rows,
            cols,
            cells: values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::from_nan_encoded(rows.len(), cols, rows.concat())
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            cells: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.cells[row * self.cols + col];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col].is_nan()
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let v = match value {
            Some(x) => {
                assert!(x.is_finite(), "non-finite value {x} at ({row}, {col})");
                x
            }
            None => f64::NAN,
        };
        self.cells[row * self.cols + col] = v;
    }

    /// Row slice with missing cells encoded as `NaN`.
    pub fn row(&self, row: usize) -> &[f64] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    /// Row-major values with missing cells encoded as `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.cells
    }

    pub fn into_values(self) -> Vec<f64> {
        self.cells
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.rows).map(move |r| self.get(r, col))
    }

    pub fn observed_in_column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        self.column(col).flatten()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|v| v.is_nan()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|v| !v.is_nan())
    }

    /// Fails with [`Error::MissingCells`] unless every cell is observed.
    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::MissingCells)
        }
    }

    pub fn row_is_complete(&self, row: usize) -> bool {
        self.row(row).iter().all(|v| !v.is_nan())
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            cells,
        }
    }

    pub fn select_cols(&self, indices: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(self.rows * indices.len());
        for r in 0..self.rows {
            let row = self.row(r);
            cells.extend(indices.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            cols: indices.len(),
            cells,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: (other.rows, self.cols),
                found: other.shape(),
            });
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            cells,
        })
    }

    pub fn mask(&self) -> MaskMatrix {
        MaskMatrix {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells.iter().map(|v| v.is_nan()).collect(),
        }
    }

    /// Per-column mean over observed cells; `None` for all-missing columns.
    pub fn column_means(&self) -> Vec<Option<f64>> {
        let mut sum = vec![0.0; self.cols];
        let mut count = vec![0usize; self.cols];
        for r in 0..self.rows {
            for (c, &v) in self.row(r).iter().enumerate() {
                if !v.is_nan() {
                    sum[c] += v;
                    count[c] += 1;
                }
            }
        }
        sum.into_iter()
            .zip(count)
            .map(|(s, n)| (n > 0).then(|| s / n as f64))
            .collect()
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other,
            })
        }
    }
}

fn check_len(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows * cols != len {
        return Err(Error::InvalidArgument(format!(
            "{len} cells cannot form a {rows}x{cols} matrix"
        )));
    }
    Ok(())
}

/// Binary missingness indicator: `true` (1) where the paired data cell is missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl MaskMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self> {
        check_len(rows, cols, cells.len())?;
        Ok(Self { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, missing: bool) {
        self.cells[row * self.cols + col] = missing;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&m| m).count()
    }

    pub fn column_count(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, col)).count()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            cells.extend_from_slice(&self.cells[i * self.cols..(i + 1) * self.cols]);
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            cells,
        }
    }

    /// Applies the mask: copies `data` with masked cells set missing.
    pub fn apply(&self, data: &DataMatrix) -> Result<DataMatrix> {
        data.ensure_same_shape(self.shape())?;
        let cells = data
            .values()
            .iter()
            .zip(&self.cells)
            .map(|(&v, &m)| if m { f64::NAN } else { v })
            .collect();
        DataMatrix::from_nan_encoded(self.rows, self.cols, cells)
    }

    /// True iff this mask is exactly the missingness pattern of `data`.
    pub fn agrees_with(&self, data: &DataMatrix) -> bool {
        data.shape() == self.shape()
            && data
                .values()
                .iter()
                .zip(&self.cells)
                .all(|(v, &m)| v.is_nan() == m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    IntegerCoded,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub missing_codes: Vec<f64>,
}

impl ColumnSchema {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::new(name, ColumnKind::Continuous, lower, upper)
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::new(name, ColumnKind::IntegerCoded, lower, upper)
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Binary, 0.0, 1.0)
    }

    fn new(name: impl Into<String>, kind: ColumnKind, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            lower,
            upper,
            missing_codes: Vec::new(),
        }
    }

    pub fn with_missing_codes(mut self, codes: impl IntoIterator<Item = f64>) -> Self {
        self.missing_codes = codes.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower <= self.upper) {
            return Err(Error::InvalidArgument(format!(
                "column {:?}: lower {} > upper {}",
                self.name, self.lower, self.upper
            )));
        }
        if self.kind == ColumnKind::Binary && (self.lower != 0.0 || self.upper != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binary column {:?} must span [0, 1]",
                self.name
            )));
        }
        Ok(())
    }

    fn is_missing_code(&self, v: f64) -> bool {
        self.missing_codes.iter().any(|&c| c == v)
    }

    /// Maps one value into the column's type and range.
    pub fn conform(&self, v: f64) -> f64 {
        match self.kind {
            ColumnKind::Continuous => v.clamp(self.lower, self.upper),
            // f64::round is half-away-from-zero.
            ColumnKind::IntegerCoded => v.round().clamp(self.lower, self.upper),
            ColumnKind::Binary => {
                if v >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Schema with every column continuous and bounded by its observed range.
pub fn infer_schema(names: &[String], m: &DataMatrix) -> Vec<ColumnSchema> {
    names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let (lo, hi) = m
                .observed_in_column(c)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
            ColumnSchema::continuous(name.clone(), lo, hi)
        })
        .collect()
}

/// Reads a schema file with header `name,kind,lower,upper,missing_codes`, where
/// `missing_codes` is a `;`-separated list (possibly empty).
pub fn read_schema_csv(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
        let bad = |what: &str, v: String| Error::UnparseableCell {
            row: i + 1,
            column: what.into(),
            value: v,
        };
        let kind = match field(1).as_str() {
            "continuous" => ColumnKind::Continuous,
            "integer" | "integer_coded" => ColumnKind::IntegerCoded,
            "binary" => ColumnKind::Binary,
            other => return Err(bad("kind", other.into())),
        };
        let lower: f64 = field(2).parse().map_err(|_| bad("lower", field(2)))?;
        let upper: f64 = field(3).parse().map_err(|_| bad("upper", field(3)))?;
        let codes = field(4)
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("missing_codes", s.into())))
            .collect::<Result<Vec<_>>>()?;
        let schema = ColumnSchema {
            name: field(0),
            kind,
            lower,
            upper,
            missing_codes: codes,
        };
        schema.validate()?;
        out.push(schema);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DataMatrix,
    pub mask: MaskMatrix,
    pub target: Option<Vec<u8>>,
    pub schema: Vec<ColumnSchema>,
}

impl Dataset {
    pub fn new(
        features: DataMatrix,
        target: Option<Vec<u8>>,
        schema: Vec<ColumnSchema>,
    ) -> Result<Self> {
        if schema.len() != features.cols() {
            return Err(Error::InvalidArgument(format!(
                "schema has {} columns, data has {}",
                schema.len(),
                features.cols()
            )));
        }
        if let Some(t) = &target {
            if t.len() != features.rows() {
                return Err(Error::InvalidArgument(format!(
                    "target length {} != rows {}",
                    t.len(),
                    features.rows()
                )));
            }
            if t.iter().any(|&y| y > 1) {
                return Err(Error::InvalidArgument("target labels must be 0 or 1".into()));
            }
        }
        let mask = features.mask();
        Ok(Self {
            features,
            mask,
            target,
            schema,
        })
    }

    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.schema.iter().map(|s| s.name.clone()).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            mask: self.mask.select_rows(indices),
            target: self
                .target
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            schema: self.schema.clone(),
        }
    }

    /// Moves the named column out of the features into the binary target.
    pub fn split_target(self, name: &str) -> Result<Self> {
        let idx = self
            .schema
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named {name:?}")))?;
        let mut target = Vec::with_capacity(self.rows());
        for (r, v) in self.features.column(idx).enumerate() {
            match v {
                Some(0.0) => target.push(0),
                Some(1.0) => target.push(1),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "target column {name:?} row {r}: {other:?} is not a binary label"
                    )))
                }
            }
        }
        let keep: Vec<usize> = (0..self.features.cols()).filter(|&c| c != idx).collect();
        let schema = keep.iter().map(|&c| self.schema[c].clone()).collect();
        Dataset::new(self.features.select_cols(&keep), Some(target), schema)
    }

    /// Mask/data coherence check.
    pub fn is_coherent(&self) -> bool {
        self.mask.agrees_with(&self.features)
    }
}

fn parse_cell(raw: &str, schema: &ColumnSchema, row: usize) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::UnparseableCell {
        row,
        column: schema.name.clone(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::UnparseableCell {
            row,
            column: schema.name.clone(),
            value: raw.to_string(),
        });
    }
    Ok((!schema.is_missing_code(v)).then_some(v))
}

/// Reads a CSV whose header must equal the schema's column names in order.
/// Empty fields and declared missing codes become missing cells. Rows are
/// numbered from 1 in errors, counting the first data row as 1.
pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSchema]) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    for s in schema {
        s.validate()?;
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected: Vec<String> = schema.iter().map(|s| s.name.clone()).collect();
    if header != expected {
        return Err(Error::HeaderMismatch {
            expected,
            found: header,
        });
    }
    let cols = schema.len();
    let mut cells = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec?;
        rows += 1;
        if rec.len() != cols {
            return Err(Error::InvalidArgument(format!(
                "row {rows} has {} fields, expected {cols}",
                rec.len()
            )));
        }
        for (field, s) in rec.iter().zip(schema) {
            cells.push(parse_cell(field, s, rows)?);
        }
    }
    Dataset::new(
        DataMatrix::from_options(rows, cols, cells)?,
        None,
        schema.to_vec(),
    )
}

/// Loads a CSV of plain numbers with a continuous schema bounded by each
/// column's observed range.
pub fn load_csv_inferred(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let names = read_csv_header(path)?;
    let open: Vec<ColumnSchema> = names
        .iter()
        .map(|n| ColumnSchema::continuous(n.clone(), f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    let d = load_csv(path, &open)?;
    let schema = infer_schema(&names, &d.features);
    Dataset::new(d.features, None, schema)
}

/// Writes the features followed by the target (when present) as column `target_name`.
pub fn write_labelled_csv(path: impl AsRef<Path>, d: &Dataset, target_name: &str) -> Result<()> {
    let mut names = d.column_names();
    let Some(target) = &d.target else {
        return write_csv(path, &names, &d.features);
    };
    names.push(target_name.to_string());
    let cols = d.features.cols() + 1;
    let mut cells = Vec::with_capacity(d.rows() * cols);
    for (r, &y) in target.iter().enumerate() {
        cells.extend_from_slice(d.features.row(r));
        cells.push(f64::from(y));
    }
    write_csv(path, &names, &DataMatrix::from_nan_encoded(d.rows(), cols, cells)?)
}

/// Reads the header of a CSV file without parsing the body.
pub fn read_csv_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

/// Writes a matrix with a header row; missing cells are empty fields.
pub fn write_csv(path: impl AsRef<Path>, names: &[String], m: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in 0..m.rows() {
        let line: Vec<String> = m
            .row(r)
            .iter()
            .map(|v| if v.is_nan() { String::new() } else { format!("{v}") })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_mask_csv(path: impl AsRef<Path>, names: &[String], m: &MaskMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in 0..m.rows() {
        let line: Vec<&str> = (0..m.cols())
            .map(|c| if m.get(r, c) { "1" } else { "0" })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path.as_ref(), out.as_bytes())
}

pub fn read_mask_csv(path: impl AsRef<Path>) -> Result<MaskMatrix> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let cols = reader.headers()?.len();
    let names: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let mut cells = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec?;
        rows += 1;
        for (c, f) in rec.iter().enumerate() {
            cells.push(match f.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::UnparseableCell {
                        row: rows,
                        column: names.get(c).cloned().unwrap_or_default(),
                        value: other.into(),
                    })
                }
            });
        }
    }
    MaskMatrix::from_cells(rows, cols, cells)
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Complete-case filter: keeps rows with no missing cell, in order.
pub fn drop_incomplete_rows(d: &Dataset) -> Result<Dataset> {
    let keep: Vec<usize> = (0..d.rows())
        .filter(|&r| d.features.row_is_complete(r))
        .collect();
    if keep.is_empty() && d.rows() > 0 {
        return Err(Error::EmptyResult);
    }
    Ok(d.select_rows(&keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    Forward,
    Inverse,
}

/// Per-column min/max over observed cells. `names` labels the error for an
/// all-missing column; pass `None` to report the column index.
pub fn fit_minmax(m: &DataMatrix, names: Option<&[String]>) -> Result<ScalerParams> {
    let mut min = vec![f64::INFINITY; m.cols()];
    let mut max = vec![f64::NEG_INFINITY; m.cols()];
    for r in 0..m.rows() {
        for (c, &v) in m.row(r).iter().enumerate() {
            if !v.is_nan() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
    }
    if let Some(c) = min.iter().position(|v| !v.is_finite()) {
        let name = names
            .and_then(|n| n.get(c).cloned())
            .unwrap_or_else(|| format!("#{c}"));
        return Err(Error::AllMissingColumn(name));
    }
    Ok(ScalerParams { min, max })
}

pub fn scaler_transform(
    p: &ScalerParams,
    m: &DataMatrix,
    direction: ScaleDirection,
) -> Result<DataMatrix> {
    if p.min.len() != m.cols() {
        return Err(Error::ShapeMismatch {
            expected: (m.rows(), p.min.len()),
            found: m.shape(),
        });
    }
    let cols = m.cols();
    let cells = m
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            if v.is_nan() {
                return v;
            }
            let c = idx % cols;
            let (lo, hi) = (p.min[c], p.max[c]);
            let span = hi - lo;
            match direction {
                ScaleDirection::Forward if span == 0.0 => 0.0,
                ScaleDirection::Forward => (v - lo) / span,
                ScaleDirection::Inverse => lo + v * span,
            }
        })
        .collect();
    DataMatrix::from_nan_encoded(m.rows(), cols, cells)
}

/// Clips, rounds or thresholds every observed cell according to its column kind.
pub fn conform_to_schema(m: &DataMatrix, schema: &[ColumnSchema]) -> Result<DataMatrix> {
    if schema.len() != m.cols() {
        return Err(Error::ShapeMismatch {
            expected: (m.rows(), schema.len()),
            found: m.shape(),
        });
    }
    let cols = m.cols();
    let cells = m
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| if v.is_nan() { v } else { schema[idx % cols].conform(v) })
        .collect();
    DataMatrix::from_nan_encoded(m.rows(), cols, cells)
}

/// Seeded shuffle partition of `0..n`. Split sizes are `floor(f * n)` with the
/// remainder added to the first split.
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::BadFractions(format!(
            "fractions must be positive: {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions(format!(
            "fractions sum to {total}, not 1"
        )));
    }
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| (f * n as f64 + 1e-9).floor() as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += n.saturating_sub(assigned);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        out.push(order[start..start + s].to_vec());
        start += s;
    }
    Ok(out)
}

pub fn split_dataset(d: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    Ok(split_indices(d.rows(), fractions, seed)?
        .iter()
        .map(|idx| d.select_rows(idx))
        .collect())
}

/// Distinct row values of a matrix as a sorted bag, for partition checks.
#[doc(hidden)]
pub fn row_bag(m: &DataMatrix) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = (0..m.rows())
        .map(|r| m.row(r).iter().map(|v| v.to_bits()).collect())
        .collect();
    rows.sort();
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[Option<f64>]]) -> DataMatrix {
        let cols = rows[0].len();
        DataMatrix::from_options(rows.len(), cols, rows.concat()).unwrap()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn load_csv_marks_blank_and_code_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n3,\n99,5\n").unwrap();
        let schema = vec![
            ColumnSchema::continuous("a", 0.0, 100.0).with_missing_codes([99.0]),
            ColumnSchema::continuous("b", 0.0, 100.0),
        ];
        let d = load_csv(&path, &schema).unwrap();
        assert_eq!(d.features.shape(), (3, 2));
        assert_eq!(d.mask.count(), 2);
        assert!(d.mask.get(1, 1));
        assert!(d.mask.get(2, 0));
        assert!(d.is_coherent());
    }

    #[test]
    fn load_csv_single_blank() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n3,\n4,5\n").unwrap();
        let schema = vec![
            ColumnSchema::continuous("a", 0.0, 10.0),
            ColumnSchema::continuous("b", 0.0, 10.0),
        ];
        let d = load_csv(&path, &schema).unwrap();
        assert_eq!(d.features.missing_count(), 1);
        assert_eq!(d.mask.count(), 1);
    }

    #[test]
    fn load_csv_errors() {
        let schema = vec![ColumnSchema::continuous("a", 0.0, 1.0)];
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &schema),
            Err(Error::FileNotFound(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "z\n1\n").unwrap();
        assert!(matches!(
            load_csv(&path, &schema),
            Err(Error::HeaderMismatch { .. })
        ));
        std::fs::write(&path, "a\n1\nfoo\n").unwrap();
        match load_csv(&path, &schema) {
            Err(Error::UnparseableCell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drop_incomplete() {
        let d = Dataset::new(
            m(&[&[Some(1.0), None], &[Some(2.0), Some(3.0)]]),
            None,
            vec![ColumnSchema::continuous("a", 0.0, 9.0); 2],
        )
        .unwrap();
        let out = drop_incomplete_rows(&d).unwrap();
        assert_eq!(out.features.values(), &[2.0, 3.0]);
        assert_eq!(out.mask.count(), 0);

        let full = out.clone();
        assert_eq!(drop_incomplete_rows(&full).unwrap(), full);

        let all_bad = Dataset::new(
            m(&[&[None, Some(1.0)], &[Some(2.0), None]]),
            None,
            vec![ColumnSchema::continuous("a", 0.0, 9.0); 2],
        )
        .unwrap();
        assert!(matches!(
            drop_incomplete_rows(&all_bad),
            Err(Error::EmptyResult)
        ));
    }

    #[test]
    fn minmax_fit_and_transform() {
        let x = m(&[&[Some(0.0), Some(7.0), Some(1.0)], &[Some(5.0), Some(7.0), None], &[
            Some(10.0),
            Some(7.0),
            Some(3.0),
        ]]);
        let p = fit_minmax(&x, None).unwrap();
        assert_eq!(p.min, vec![0.0, 7.0, 1.0]);
        assert_eq!(p.max, vec![10.0, 7.0, 3.0]);
        let f = scaler_transform(&p, &x, ScaleDirection::Forward).unwrap();
        assert_eq!(f.get(1, 0), Some(0.5));
        assert_eq!(f.get(0, 1), Some(0.0));
        assert_eq!(f.get(1, 2), None);

        let col = m(&[&[Some(1.0)], &[Some(2.0)], &[Some(3.0)]]);
        let p = fit_minmax(&col, None).unwrap();
        let back = scaler_transform(
            &p,
            &scaler_transform(&p, &col, ScaleDirection::Forward).unwrap(),
            ScaleDirection::Inverse,
        )
        .unwrap();
        for (a, b) in back.values().iter().zip(col.values()) {
            assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn minmax_all_missing_column_named() {
        let x = m(&[&[Some(1.0), None], &[Some(2.0), None]]);
        match fit_minmax(&x, Some(&["a".into(), "b".into()])) {
            Err(Error::AllMissingColumn(name)) => assert_eq!(name, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transform_shape_mismatch() {
        let p = ScalerParams {
            min: vec![0.0],
            max: vec![1.0],
        };
        let x = m(&[&[Some(1.0), Some(2.0)]]);
        assert!(scaler_transform(&p, &x, ScaleDirection::Forward).is_err());
    }

    #[test]
    fn conform_rules() {
        let schema = vec![
            ColumnSchema::binary("b"),
            ColumnSchema::integer("i", 0.0, 40.0),
            ColumnSchema::continuous("c", 0.0, 1.0),
        ];
        let x = m(&[&[Some(0.72), Some(41.3), Some(-0.2)], &[Some(0.3), Some(2.5), None]]);
        let out = conform_to_schema(&x, &schema).unwrap();
        assert_eq!(out.row(0), &[1.0, 40.0, 0.0]);
        assert_eq!(out.get(1, 0), Some(0.0));
        assert_eq!(out.get(1, 1), Some(3.0));
        assert_eq!(out.get(1, 2), None);
        assert_eq!(schema[1].conform(-2.5), 0.0);
        assert_eq!(ColumnSchema::integer("n", -10.0, 10.0).conform(-2.5), -3.0);
    }

    #[test]
    fn schema_validation() {
        assert!(ColumnSchema::continuous("x", 2.0, 1.0).validate().is_err());
        let mut b = ColumnSchema::binary("b");
        b.upper = 2.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_indices(25_000, &[0.8, 0.2], 3).unwrap();
        assert_eq!(s[0].len(), 20_000);
        assert_eq!(s[1].len(), 5_000);
        assert_eq!(s, split_indices(25_000, &[0.8, 0.2], 3).unwrap());
        let s = split_indices(10, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0).unwrap();
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert!(split_indices(10, &[0.5, 0.6], 0).is_err());
        assert!(split_indices(10, &[1.5, -0.5], 0).is_err());

        let d = Dataset::new(
            m(&[&[Some(1.0)], &[Some(2.0)]]),
            Some(vec![0, 1]),
            vec![ColumnSchema::continuous("a", 0.0, 2.0)],
        )
        .unwrap();
        let one = split_dataset(&d, &[1.0], 9).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(row_bag(&one[0].features), row_bag(&d.features));
    }

    #[test]
    fn split_target_column() {
        let d = Dataset::new(
            m(&[&[Some(1.0), Some(0.0)], &[Some(2.0), Some(1.0)]]),
            None,
            vec![
                ColumnSchema::continuous("a", 0.0, 2.0),
                ColumnSchema::binary("y"),
            ],
        )
        .unwrap();
        let d = d.split_target("y").unwrap();
        assert_eq!(d.target, Some(vec![0, 1]));
        assert_eq!(d.features.cols(), 1);
    }

    #[test]
    fn csv_round_trip_with_mask() {
        let dir = tempfile::tempdir().unwrap();
        let x = m(&[&[Some(1.5), None], &[Some(-2.0), Some(3.25)]]);
        let p = dir.path().join("a.csv");
        write_csv(&p, &names(2), &x).unwrap();
        let schema = infer_schema(&names(2), &x);
        let back = load_csv(&p, &schema).unwrap();
        assert_eq!(back.features, x);
        let mp = dir.path().join("a.mask.csv");
        write_mask_csv(&mp, &names(2), &x.mask()).unwrap();
        assert_eq!(read_mask_csv(&mp).unwrap(), x.mask());
    }

    fn arb_matrix() -> impl Strategy<Value = DataMatrix> {
        (1usize..8, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                prop_oneof![1 => Just(None), 4 => (-1e3f64..1e3).prop_map(Some)],
                r * c,
            )
            .prop_map(move |cells| DataMatrix::from_options(r, c, cells).unwrap())
        })
    }

    proptest! {
        #[test]
        fn conform_is_idempotent(x in arb_matrix()) {
            let schema: Vec<ColumnSchema> = (0..x.cols())
                .map(|c| match c % 3 {
                    0 => ColumnSchema::continuous(format!("c{c}"), -10.0, 10.0),
                    1 => ColumnSchema::integer(format!("c{c}"), -5.0, 50.0),
                    _ => ColumnSchema::binary(format!("c{c}")),
                })
                .collect();
            let once = conform_to_schema(&x, &schema).unwrap();
            let twice = conform_to_schema(&once, &schema).unwrap();
            prop_assert_eq!(once.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            twice.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn scaler_round_trip(x in arb_matrix()) {
            if let Ok(p) = fit_minmax(&x, None) {
                let f = scaler_transform(&p, &x, ScaleDirection::Forward).unwrap();
                let b = scaler_transform(&p, &f, ScaleDirection::Inverse).unwrap();
                for r in 0..x.rows() {
                    for c in 0..x.cols() {
                        match (x.get(r, c), b.get(r, c)) {
                            (None, None) => {}
                            (Some(a), Some(bb)) if p.max[c] > p.min[c] => {
                                prop_assert!((a - bb).abs() <= 1e-9 * a.abs().max(1.0));
                            }
                            (Some(_), Some(_)) => {}
                            _ => prop_assert!(false, "missingness changed"),
                        }
                    }
                }
            }
        }

        #[test]
        fn split_is_partition(n in 0usize..200, seed in any::<u64>(), a in 1u32..9) {
            let f = a as f64 / 10.0;
            let s = split_indices(n, &[f, 1.0 - f], seed).unwrap();
            let mut all: Vec<usize> = s.concat();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn drop_incomplete_idempotent(x in arb_matrix()) {
            let schema = infer_schema(&names(x.cols()), &x);
            let d = Dataset::new(x, None, schema).unwrap();
            prop_assert!(d.is_coherent());
            if let Ok(once) = drop_incomplete_rows(&d) {
                prop_assert_eq!(drop_incomplete_rows(&once).unwrap(), once);
            }
        }
    }
}
