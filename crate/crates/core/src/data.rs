//! Dataset loading, categorical encodings, standardization, and seeded
//! few-shot splits.
//!
//! Categorical columns can be encoded three ways: `raw` (ordinal in the
//! schema's source-file order), `ordered` (ordinal in a supplied ranking,
//! typically from a prior file), or `onehot`. Ordinal columns become
//! consecutive integers `0..K-1` before standardization; the rank 0 category
//! is the first entry of the ranking. Standardization statistics are fitted
//! on the training split only and one-hot indicator columns keep identity
//! stats so their row sums stay exactly 1.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest standard deviation used in standardization; constant columns
/// divide by this instead of zero and map to all-zero features.
pub const STD_FLOOR: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// One feature column: its name, kind, and (for categoricals) the category
/// labels in source-file order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// The schema JSON file: `{"target": name, "columns": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let schema: Schema = serde_json::from_str(&text)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", col.name)));
            }
            match col.kind {
                ColumnKind::Continuous => {
                    if !col.categories.is_empty() {
                        return Err(Error::Schema(format!(
                            "continuous column {:?} declares categories",
                            col.name
                        )));
                    }
                }
                ColumnKind::Categorical => {
                    if col.categories.len() < 2 {
                        return Err(Error::Schema(format!(
                            "categorical column {:?} needs at least 2 categories",
                            col.name
                        )));
                    }
                    let mut cats = HashSet::new();
                    for c in &col.categories {
                        if !cats.insert(c.as_str()) {
                            return Err(Error::Schema(format!(
                                "duplicate category {c:?} in column {:?}",
                                col.name
                            )));
                        }
                    }
                }
            }
        }
        if seen.contains(self.target.as_str()) {
            return Err(Error::Schema(format!(
                "target {:?} also listed as a feature column",
                self.target
            )));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }
}

// ---------------------------------------------------------------------------
// Table
// ---------------------------------------------------------------------------

/// One parsed cell: a number for continuous columns, or an index into the
/// schema's category list for categorical ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Number(f64),
    Category(usize),
}

/// A fully parsed dataset: feature rows plus a binary target.
#[derive(Debug, Clone)]
pub struct DatasetTable {
    pub schema: Vec<ColumnSchema>,
    pub target_name: String,
    pub rows: Vec<Vec<CellValue>>,
    pub target: Vec<u8>,
}

impl DatasetTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.schema.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }
}

/// Parses a CSV file against a schema. The header must contain exactly the
/// schema's feature columns plus the target, in any order; cells must be
/// complete, categorical values must match a declared category, and the
/// target must be 0/1 with both classes present.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<DatasetTable> {
    let path = path.as_ref();
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            source: e,
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            source: e,
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let mut expected: HashSet<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    expected.insert(schema.target.as_str());
    let got: HashSet<&str> = headers.iter().map(|h| h.as_str()).collect();
    if expected != got {
        let missing: Vec<_> = expected.difference(&got).collect();
        let extra: Vec<_> = got.difference(&expected).collect();
        return Err(Error::Schema(format!(
            "header mismatch in {}: missing {missing:?}, unexpected {extra:?}",
            path.display()
        )));
    }

    let col_pos: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| headers.iter().position(|h| *h == c.name).unwrap())
        .collect();
    let target_pos = headers.iter().position(|h| *h == schema.target).unwrap();

    let mut rows = Vec::new();
    let mut target = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut row = Vec::with_capacity(schema.columns.len());
        for (col, &pos) in schema.columns.iter().zip(&col_pos) {
            let raw = record.get(pos).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::MissingCell {
                    column: col.name.clone(),
                    row: row_idx,
                });
            }
            match col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = raw.parse().map_err(|_| {
                        Error::Schema(format!(
                            "non-numeric value {raw:?} in continuous column {:?} (row {row_idx})",
                            col.name
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "column {:?} row {row_idx}",
                            col.name
                        )));
                    }
                    row.push(CellValue::Number(v));
                }
                ColumnKind::Categorical => {
                    let idx = col.categories.iter().position(|c| c == raw).ok_or_else(|| {
                        Error::UnknownCategory {
                            column: col.name.clone(),
                            value: raw.to_string(),
                            row: row_idx,
                        }
                    })?;
                    row.push(CellValue::Category(idx));
                }
            }
        }
        let raw_target = record.get(target_pos).unwrap_or("");
        let label = match raw_target {
            "0" => 0u8,
            "1" => 1u8,
            "" => {
                return Err(Error::MissingCell {
                    column: schema.target.clone(),
                    row: row_idx,
                })
            }
            other => {
                return Err(Error::NonBinaryTarget {
                    column: schema.target.clone(),
                    detail: format!("value {other:?} at row {row_idx} (expected 0 or 1)"),
                })
            }
        };
        rows.push(row);
        target.push(label);
    }

    if rows.is_empty() {
        return Err(Error::Schema(format!("{} has no data rows", path.display())));
    }
    let n_pos = target.iter().filter(|&&t| t == 1).count();
    if n_pos == 0 || n_pos == target.len() {
        return Err(Error::NonBinaryTarget {
            column: schema.target.clone(),
            detail: "only one class present".into(),
        });
    }

    Ok(DatasetTable {
        schema: schema.columns.clone(),
        target_name: schema.target.clone(),
        rows,
        target,
    })
}

// ---------------------------------------------------------------------------
// Column encoders
// ---------------------------------------------------------------------------

/// Maps category labels to their position in `ordering` (rank 0 first).
/// Every value must appear in the ordering and the ordering must not repeat
/// labels.
pub fn ordinal_encode(values: &[&str], ordering: &[&str]) -> Result<Vec<usize>> {
    let mut rank: BTreeMap<&str, usize> = BTreeMap::new();
    for (k, cat) in ordering.iter().enumerate() {
        if rank.insert(cat, k).is_some() {
            return Err(Error::Schema(format!(
                "ordering repeats category {cat:?}"
            )));
        }
    }
    values
        .iter()
        .map(|v| {
            rank.get(v).copied().ok_or_else(|| Error::Schema(format!(
                "value {v:?} missing from ordering {ordering:?}"
            )))
        })
        .collect()
}

/// Expands values into indicator rows over `categories`; each output row has
/// exactly one 1.
pub fn one_hot_encode(values: &[&str], categories: &[&str]) -> Result<Vec<Vec<f64>>> {
    values
        .iter()
        .map(|v| {
            let idx = categories.iter().position(|c| c == v).ok_or_else(|| {
                Error::Schema(format!("value {v:?} not in categories {categories:?}"))
            })?;
            let mut row = vec![0.0; categories.len()];
            row[idx] = 1.0;
            Ok(row)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Encoded matrix
// ---------------------------------------------------------------------------

/// Which of the three categorical treatments to apply when encoding a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// Ordinal in the schema's source-file order.
    Raw,
    /// Ordinal in the supplied ranking (falls back to source order for
    /// columns without one).
    Ordered,
    /// One indicator column per category.
    Onehot,
}

impl Encoding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Encoding::Raw => "raw",
            Encoding::Ordered => "ordered",
            Encoding::Onehot => "onehot",
        }
    }
}

impl std::str::FromStr for Encoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Encoding::Raw),
            "ordered" => Ok(Encoding::Ordered),
            "onehot" => Ok(Encoding::Onehot),
            other => Err(Error::InvalidArgument(format!(
                "unknown encoding {other:?} (expected raw|ordered|onehot)"
            ))),
        }
    }
}

/// How one encoded column was produced from its source column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "lowercase")]
pub enum EncodedKind {
    Continuous,
    /// `ranking[rank] = category`; inverts the ordinal encoding exactly.
    Ordinal { ranking: Vec<String> },
    Onehot { category: String, group_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub source: String,
    pub source_index: usize,
    #[serde(flatten)]
    pub kind: EncodedKind,
}

/// Per-column standardization statistics (population standard deviation,
/// floored at [`STD_FLOOR`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

/// Dense row-major feature matrix with its encoding metadata and, once
/// standardized, the stats that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    pub column_map: Vec<EncodedColumn>,
    pub stats: Option<Vec<ColumnStats>>,
}

impl EncodedMatrix {
    /// Builds a matrix from row-major values; `values.len()` must be a
    /// multiple of `column_map.len()` and everything must be finite.
    pub fn new(values: Vec<f64>, column_map: Vec<EncodedColumn>) -> Result<EncodedMatrix> {
        let n_cols = column_map.len();
        if n_cols == 0 || values.len() % n_cols != 0 {
            return Err(Error::LayoutMismatch(format!(
                "{} values do not tile {} columns",
                values.len(),
                n_cols
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix value {bad}")));
        }
        Ok(EncodedMatrix {
            n_rows: values.len() / n_cols,
            values,
            n_cols,
            column_map,
            stats: None,
        })
    }

    /// Convenience constructor: columns named `c0..cN`, all continuous.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<EncodedMatrix> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let column_map = (0..n_cols)
            .map(|i| EncodedColumn {
                source: format!("c{i}"),
                source_index: i,
                kind: EncodedKind::Continuous,
            })
            .collect();
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::LayoutMismatch("ragged rows".into()));
        }
        EncodedMatrix::new(rows.iter().flatten().copied().collect(), column_map)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.value(r, col)).collect()
    }

    /// New matrix holding the given rows (in the given order), sharing the
    /// column metadata and stats.
    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        EncodedMatrix {
            values,
            n_rows: rows.len(),
            n_cols: self.n_cols,
            column_map: self.column_map.clone(),
            stats: self.stats.clone(),
        }
    }
}

/// Encodes a table into a dense matrix. `orderings` supplies per-column
/// category rankings for [`Encoding::Ordered`]; columns without one keep the
/// schema order. Ordinal values are exact consecutive integers before any
/// standardization.
pub fn encode_table(
    table: &DatasetTable,
    encoding: Encoding,
    orderings: Option<&BTreeMap<String, Vec<String>>>,
) -> Result<EncodedMatrix> {
    let mut column_map = Vec::new();
    // rank_of[source_index][category_index] = encoded rank (ordinal columns)
    let mut rank_of: Vec<Vec<usize>> = Vec::new();
    for (src_idx, col) in table.schema.iter().enumerate() {
        match col.kind {
            ColumnKind::Continuous => {
                column_map.push(EncodedColumn {
                    source: col.name.clone(),
                    source_index: src_idx,
                    kind: EncodedKind::Continuous,
                });
                rank_of.push(Vec::new());
            }
            ColumnKind::Categorical => match encoding {
                Encoding::Raw | Encoding::Ordered => {
                    let ranking: Vec<String> = match (encoding, orderings) {
                        (Encoding::Ordered, Some(m)) if m.contains_key(&col.name) => {
                            let ord = &m[&col.name];
                            validate_permutation(&col.name, ord, &col.categories)?;
                            ord.clone()
                        }
                        _ => col.categories.clone(),
                    };
                    let mut ranks = vec![0usize; col.categories.len()];
                    for (cat_idx, cat) in col.categories.iter().enumerate() {
                        ranks[cat_idx] = ranking.iter().position(|c| c == cat).unwrap();
                    }
                    rank_of.push(ranks);
                    column_map.push(EncodedColumn {
                        source: col.name.clone(),
                        source_index: src_idx,
                        kind: EncodedKind::Ordinal { ranking },
                    });
                }
                Encoding::Onehot => {
                    rank_of.push(Vec::new());
                    for cat in &col.categories {
                        column_map.push(EncodedColumn {
                            source: col.name.clone(),
                            source_index: src_idx,
                            kind: EncodedKind::Onehot {
                                category: cat.clone(),
                                group_size: col.categories.len(),
                            },
                        });
                    }
                }
            },
        }
    }

    let n_cols = column_map.len();
    let mut values = Vec::with_capacity(table.n_rows() * n_cols);
    for row in &table.rows {
        for enc in &column_map {
            let cell = row[enc.source_index];
            match (&enc.kind, cell) {
                (EncodedKind::Continuous, CellValue::Number(v)) => values.push(v),
                (EncodedKind::Ordinal { .. }, CellValue::Category(c)) => {
                    values.push(rank_of[enc.source_index][c] as f64)
                }
                (EncodedKind::Onehot { category, .. }, CellValue::Category(c)) => {
                    let is = &table.schema[enc.source_index].categories[c] == category;
                    values.push(if is { 1.0 } else { 0.0 });
                }
                _ => {
                    return Err(Error::LayoutMismatch(format!(
                        "cell kind does not match encoding for column {:?}",
                        enc.source
                    )))
                }
            }
        }
    }

    Ok(EncodedMatrix {
        values,
        n_rows: table.n_rows(),
        n_cols,
        column_map,
        stats: None,
    })
}

/// Re-encodes a table with a previously captured column map (e.g. from a
/// model checkpoint), so new data lines up with the layout a model was
/// trained on.
pub fn encode_with_map(table: &DatasetTable, column_map: &[EncodedColumn]) -> Result<EncodedMatrix> {
    let n_cols = column_map.len();
    let mut values = Vec::with_capacity(table.n_rows() * n_cols);
    for enc in column_map {
        let col = table
            .schema
            .iter()
            .find(|c| c.name == enc.source)
            .ok_or_else(|| {
                Error::LayoutMismatch(format!("table has no column {:?}", enc.source))
            })?;
        if let EncodedKind::Ordinal { ranking } = &enc.kind {
            validate_permutation(&enc.source, ranking, &col.categories)?;
        }
    }
    for row in &table.rows {
        for enc in column_map {
            let src_idx = table
                .schema
                .iter()
                .position(|c| c.name == enc.source)
                .unwrap();
            let cell = row[src_idx];
            match (&enc.kind, cell) {
                (EncodedKind::Continuous, CellValue::Number(v)) => values.push(v),
                (EncodedKind::Ordinal { ranking }, CellValue::Category(c)) => {
                    let cat = &table.schema[src_idx].categories[c];
                    let rank = ranking.iter().position(|r| r == cat).unwrap();
                    values.push(rank as f64);
                }
                (EncodedKind::Onehot { category, .. }, CellValue::Category(c)) => {
                    let is = &table.schema[src_idx].categories[c] == category;
                    values.push(if is { 1.0 } else { 0.0 });
                }
                _ => {
                    return Err(Error::LayoutMismatch(format!(
                        "cell kind does not match encoding for column {:?}",
                        enc.source
                    )))
                }
            }
        }
    }
    Ok(EncodedMatrix {
        values,
        n_rows: table.n_rows(),
        n_cols,
        column_map: column_map.to_vec(),
        stats: None,
    })
}

pub(crate) fn validate_permutation(
    column: &str,
    ordering: &[String],
    categories: &[String],
) -> Result<()> {
    let want: HashSet<&str> = categories.iter().map(|s| s.as_str()).collect();
    let got: HashSet<&str> = ordering.iter().map(|s| s.as_str()).collect();
    if ordering.len() != categories.len() || want != got {
        return Err(Error::InvalidPrior {
            column: column.to_string(),
            detail: format!(
                "ordering {ordering:?} is not a permutation of categories {categories:?}"
            ),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Fits per-column mean and population std over the given rows. One-hot
/// columns get identity stats (mean 0, std 1) so indicator groups keep their
/// exact sum-to-1 structure.
pub fn fit_standardizer(matrix: &EncodedMatrix, rows: &[usize]) -> Result<Vec<ColumnStats>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot fit standardizer on an empty row set".into(),
        ));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= matrix.n_rows()) {
        return Err(Error::InvalidArgument(format!(
            "row index {bad} out of range ({} rows)",
            matrix.n_rows()
        )));
    }
    let n = rows.len() as f64;
    let mut stats = Vec::with_capacity(matrix.n_cols());
    for (c, enc) in matrix.column_map.iter().enumerate() {
        if matches!(enc.kind, EncodedKind::Onehot { .. }) {
            stats.push(ColumnStats { mean: 0.0, std: 1.0 });
            continue;
        }
        let mean = rows.iter().map(|&r| matrix.value(r, c)).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|&r| {
                let d = matrix.value(r, c) - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        stats.push(ColumnStats {
            mean,
            std: var.sqrt().max(STD_FLOOR),
        });
    }
    Ok(stats)
}

/// Applies `(value - mean) / std` column-wise and records the stats on the
/// returned matrix.
pub fn apply_standardizer(matrix: &EncodedMatrix, stats: &[ColumnStats]) -> Result<EncodedMatrix> {
    if stats.len() != matrix.n_cols() {
        return Err(Error::LayoutMismatch(format!(
            "{} stats for {} columns",
            stats.len(),
            matrix.n_cols()
        )));
    }
    let mut out = matrix.clone();
    for r in 0..out.n_rows {
        for c in 0..out.n_cols {
            let v = &mut out.values[r * out.n_cols + c];
            *v = (*v - stats[c].mean) / stats[c].std;
        }
    }
    out.stats = Some(stats.to_vec());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Few-shot splits
// ---------------------------------------------------------------------------

/// A seeded stratified train/test partition; `train_indices` holds exactly
/// `n_shots` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSplit {
    #[serde(rename = "n")]
    pub n_shots: usize,
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Draws a stratified `n`-shot training set: class counts proportional to the
/// pool up to integer rounding, with at least one row per class when `n >= 2`.
/// The remaining rows form the test set. Identical `(table, n, seed)` give
/// bit-identical splits.
pub fn sample_shots(table: &DatasetTable, n: usize, seed: u64) -> Result<ShotSplit> {
    let total = table.n_rows();
    if n == 0 {
        return Err(Error::InvalidArgument("n_shots must be positive".into()));
    }
    if n > total - 1 {
        return Err(Error::InvalidArgument(format!(
            "n_shots {n} leaves no test rows in a pool of {total}"
        )));
    }
    let mut pos: Vec<usize> = (0..total).filter(|&i| table.target[i] == 1).collect();
    let mut neg: Vec<usize> = (0..total).filter(|&i| table.target[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidArgument(
            "both classes must be present in the pool".into(),
        ));
    }

    let ideal = n as f64 * pos.len() as f64 / total as f64;
    let mut n_pos = ideal.round() as usize;
    if n >= 2 {
        n_pos = n_pos.clamp(1, n - 1);
    } else {
        n_pos = n_pos.min(n);
    }
    // Respect pool sizes, shifting the remainder to the other class.
    if n_pos > pos.len() {
        n_pos = pos.len();
    }
    let mut n_neg = n - n_pos;
    if n_neg > neg.len() {
        n_neg = neg.len();
        n_pos = n - n_neg;
        if n_pos > pos.len() {
            return Err(Error::InvalidArgument(format!(
                "pool too small for {n} shots"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut train: Vec<usize> = pos[..n_pos].iter().chain(neg[..n_neg].iter()).copied().collect();
    let mut test: Vec<usize> = pos[n_pos..].iter().chain(neg[n_neg..].iter()).copied().collect();
    train.sort_unstable();
    test.sort_unstable();

    Ok(ShotSplit {
        n_shots: n,
        seed,
        train_indices: train,
        test_indices: test,
    })
}
