//! Tabular data with an explicit observed-mask, CSV ingestion, missingness
//! summaries, the PGM heatmap and MCAR amputation.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{Matrix, RandomStream};

/// Value stored in every missing slot. Never read it: consult the mask.
pub const MISSING_SENTINEL: f64 = f64::NAN;

const MAX_AMPUTATION_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("label column '{0}' not found")]
    MissingLabel(String),
    #[error("dataset contains a single class (positive label '{positive}', {positives} positives of {n})")]
    SingleClassDataset { positive: String, positives: usize, n: usize },
    #[error("amputation infeasible: {0}")]
    AmputationInfeasible(String),
    #[error("dataset is not fully observed ({0} missing cells)")]
    NotFullyObserved(usize),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl DatasetError {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetError::Parse { .. } => "ParseError",
            DatasetError::MissingLabel(_) => "MissingLabel",
            DatasetError::SingleClassDataset { .. } => "SingleClassDataset",
            DatasetError::AmputationInfeasible(_) => "AmputationInfeasible",
            DatasetError::NotFullyObserved(_) => "NotFullyObserved",
            DatasetError::Invalid(_) => "Invalid",
            DatasetError::Io(_) => "IoError",
            DatasetError::Csv(_) => "CsvError",
        }
    }
}

/// Values, observed-mask and binary labels for `n` instances × `d` features.
#[derive(Debug, Clone)]
pub struct Dataset {
    values: Matrix,
    mask: Vec<bool>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    instance_ids: Vec<String>,
    label_column: String,
    positive_label_name: String,
    negative_label_name: String,
}

/// Equal when masks, observed values and metadata agree; whatever sits in a
/// missing slot is ignored.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self.values.rows() == other.values.rows()
            && self.values.cols() == other.values.cols()
            && self.labels == other.labels
            && self.feature_names == other.feature_names
            && self.instance_ids == other.instance_ids
            && self.label_column == other.label_column
            && self.positive_label_name == other.positive_label_name
            && self.negative_label_name == other.negative_label_name
            && self.values.as_slice().iter().zip(other.values.as_slice()).zip(&self.mask).all(|((a, b), &observed)| !observed || a == b)
    }
}

impl Dataset {
    /// Builds a dataset. `mask[i*d + j]` is true when cell `(i, j)` is
    /// observed; unobserved slots are overwritten with the sentinel.
    pub fn new(values: Matrix, mask: Vec<bool>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self, DatasetError> {
        let ds = Self::new_unchecked_classes(values, mask, labels, feature_names)?;
        ds.check_both_classes()?;
        Ok(ds)
    }

    fn new_unchecked_classes(
        mut values: Matrix,
        mask: Vec<bool>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let (n, d) = (values.rows(), values.cols());
        if mask.len() != n * d {
            return Err(DatasetError::Invalid(format!("mask has {} entries for a {n}x{d} matrix", mask.len())));
        }
        if labels.len() != n {
            return Err(DatasetError::Invalid(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(DatasetError::Invalid(format!("label {bad} is not 0 or 1")));
        }
        if feature_names.len() != d {
            return Err(DatasetError::Invalid(format!("{} feature names for {d} features", feature_names.len())));
        }
        for i in 0..n {
            for j in 0..d {
                if mask[i * d + j] {
                    if !values[(i, j)].is_finite() {
                        return Err(DatasetError::Invalid(format!("observed cell ({i}, {j}) is not finite")));
                    }
                } else {
                    values[(i, j)] = MISSING_SENTINEL;
                }
            }
        }
        Ok(Dataset {
            values,
            mask,
            labels,
            feature_names,
            instance_ids: (1..=n).map(|i| i.to_string()).collect(),
            label_column: "label".to_string(),
            positive_label_name: "1".to_string(),
            negative_label_name: "0".to_string(),
        })
    }

    /// Fully observed dataset from a complete matrix.
    pub fn complete(values: Matrix, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self, DatasetError> {
        let mask = vec![true; values.rows() * values.cols()];
        Self::new(values, mask, labels, feature_names)
    }

    fn check_both_classes(&self) -> Result<(), DatasetError> {
        let positives = self.labels.iter().filter(|&&l| l == 1).count();
        if positives == 0 || positives == self.labels.len() {
            return Err(DatasetError::SingleClassDataset { positive: self.positive_label_name.clone(), positives, n: self.labels.len() });
        }
        Ok(())
    }

    pub fn with_label_names(mut self, column: &str, positive: &str, negative: &str) -> Self {
        self.label_column = column.to_string();
        self.positive_label_name = positive.to_string();
        self.negative_label_name = negative.to_string();
        self
    }

    pub fn with_instance_ids(mut self, ids: Vec<String>) -> Result<Self, DatasetError> {
        if ids.len() != self.n() {
            return Err(DatasetError::Invalid(format!("{} ids for {} rows", ids.len(), self.n())));
        }
        self.instance_ids = ids;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn d(&self) -> usize {
        self.values.cols()
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.d() + j]
    }

    /// The value of cell `(i, j)`, or `None` when it is missing.
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j).then(|| self.values[(i, j)])
    }

    /// Raw value storage; missing slots hold the sentinel.
    pub fn raw_values(&self) -> &Matrix {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn positive_label_name(&self) -> &str {
        &self.positive_label_name
    }

    pub fn negative_label_name(&self) -> &str {
        &self.negative_label_name
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Observed values of feature `j`, in row order.
    pub fn observed_column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).filter_map(|i| self.value(i, j)).collect()
    }

    /// Row subset. The result may contain a single class.
    pub fn subset_rows(&self, rows: &[usize]) -> Dataset {
        let d = self.d();
        let mut mask = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            mask.extend_from_slice(&self.mask[i * d..(i + 1) * d]);
        }
        Dataset {
            values: self.values.select_rows(rows),
            mask,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            instance_ids: rows.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            label_column: self.label_column.clone(),
            positive_label_name: self.positive_label_name.clone(),
            negative_label_name: self.negative_label_name.clone(),
        }
    }

    /// Copy with the mask replaced; values under newly-missing cells become
    /// the sentinel. Labels and names are kept.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Dataset, DatasetError> {
        if mask.len() != self.mask.len() {
            return Err(DatasetError::Invalid("mask size mismatch".into()));
        }
        if mask.iter().zip(&self.mask).any(|(&new, &old)| new && !old) {
            return Err(DatasetError::Invalid("cannot reveal a missing cell".into()));
        }
        let mut out = Self::new_unchecked_classes(self.values.clone(), mask, self.labels.clone(), self.feature_names.clone())?;
        out.instance_ids = self.instance_ids.clone();
        out.label_column = self.label_column.clone();
        out.positive_label_name = self.positive_label_name.clone();
        out.negative_label_name = self.negative_label_name.clone();
        Ok(out)
    }

    /// Overwrites every missing slot with `value`. Test hook for checking
    /// that no computation reads missing cells.
    #[doc(hidden)]
    pub fn poison_missing(&mut self, value: f64) {
        let d = self.d();
        for i in 0..self.n() {
            for j in 0..d {
                if !self.mask[i * d + j] {
                    self.values[(i, j)] = value;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub missing_tokens: BTreeSet<String>,
    pub zero_as_missing: bool,
    pub label_column: String,
    pub positive_label: String,
}

impl LoadOptions {
    pub fn new(label_column: &str, positive_label: &str) -> Self {
        LoadOptions {
            missing_tokens: default_missing_tokens(),
            zero_as_missing: false,
            label_column: label_column.to_string(),
            positive_label: positive_label.to_string(),
        }
    }
}

pub fn default_missing_tokens() -> BTreeSet<String> {
    ["".to_string(), "NA".to_string()].into_iter().collect()
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, options)
}

/// Parses CSV from any reader; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, options: &LoadOptions) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx =
        headers.iter().position(|h| h == &options.label_column).ok_or_else(|| DatasetError::MissingLabel(options.label_column.clone()))?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let d = feature_cols.len();

    let mut data = Vec::new();
    let mut mask = Vec::new();
    let mut labels = Vec::new();
    let mut negative_name: Option<String> = None;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = r + 2;
        if record.len() != headers.len() {
            return Err(DatasetError::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let label = record.get(label_idx).unwrap_or_default();
        if options.missing_tokens.contains(label) {
            return Err(DatasetError::Parse { row, column: options.label_column.clone(), message: "label is missing".into() });
        }
        if label == options.positive_label {
            labels.push(1);
        } else {
            negative_name.get_or_insert_with(|| label.to_string());
            labels.push(0);
        }
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or_default();
            if options.missing_tokens.contains(cell) {
                data.push(MISSING_SENTINEL);
                mask.push(false);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| DatasetError::Parse {
                row,
                column: headers[c].clone(),
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::Parse { row, column: headers[c].clone(), message: format!("non-finite value '{cell}'") });
            }
            if options.zero_as_missing && v == 0.0 {
                data.push(MISSING_SENTINEL);
                mask.push(false);
            } else {
                data.push(v);
                mask.push(true);
            }
        }
    }
    let n = labels.len();
    let values = Matrix::from_vec(n, d, data).map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let ds = Dataset::new_unchecked_classes(values, mask, labels, feature_names)?.with_label_names(
        &options.label_column,
        &options.positive_label,
        negative_name.as_deref().unwrap_or("negative"),
    );
    ds.check_both_classes()?;
    Ok(ds)
}

/// Writes the dataset as CSV: features in order, then the label column.
/// Missing cells are written as `missing_token`.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W, missing_token: &str) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(&ds.label_column);
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = (0..ds.d()).map(|j| ds.value(i, j).map_or_else(|| missing_token.to_string(), format_number)).collect();
        rec.push(if ds.labels[i] == 1 { ds.positive_label_name.clone() } else { ds.negative_label_name.clone() });
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// Missingness

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingnessSummary {
    pub per_feature_missing: Vec<usize>,
    pub per_instance_missing: Vec<usize>,
    pub overall_rate: f64,
}

impl MissingnessSummary {
    pub fn total_missing(&self) -> usize {
        self.per_feature_missing.iter().sum()
    }

    /// Feature indices by descending missing count, ties by original index.
    pub fn heatmap_column_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.per_feature_missing.len()).collect();
        order.sort_by(|&a, &b| self.per_feature_missing[b].cmp(&self.per_feature_missing[a]).then(a.cmp(&b)));
        order
    }
}

pub fn summarize_missingness(ds: &Dataset) -> MissingnessSummary {
    let (n, d) = (ds.n(), ds.d());
    let mut per_feature = vec![0usize; d];
    let mut per_instance = vec![0usize; n];
    for i in 0..n {
        for j in 0..d {
            if !ds.is_observed(i, j) {
                per_feature[j] += 1;
                per_instance[i] += 1;
            }
        }
    }
    let total: usize = per_feature.iter().sum();
    let cells = n * d;
    MissingnessSummary {
        per_feature_missing: per_feature,
        per_instance_missing: per_instance,
        overall_rate: if cells == 0 { 0.0 } else { total as f64 / cells as f64 },
    }
}

/// Renders the missingness heatmap as a plain PGM (`P2`) image: one pixel per
/// cell, instances as rows in input order, features as columns sorted by
/// descending missing count. Missing = 255, observed = 0.
pub fn heatmap_pgm(ds: &Dataset) -> String {
    let order = summarize_missingness(ds).heatmap_column_order();
    let mut out = format!("P2\n{} {}\n255\n", ds.d(), ds.n());
    for i in 0..ds.n() {
        let line: Vec<&str> = order.iter().map(|&j| if ds.is_observed(i, j) { "0" } else { "255" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn export_heatmap(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    crate::io::write_atomic(path.as_ref(), heatmap_pgm(ds).as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Amputation

/// Removes exactly `floor(rate·n·d)` cells chosen uniformly without
/// replacement, keeping at least one observed cell in every row and column.
pub fn ampute_mcar(ds: &Dataset, rate: f64, stream: &mut RandomStream) -> Result<Dataset, DatasetError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(DatasetError::AmputationInfeasible(format!("rate {rate} outside [0, 1)")));
    }
    let missing = ds.missing_count();
    if missing > 0 {
        return Err(DatasetError::NotFullyObserved(missing));
    }
    let (n, d) = (ds.n(), ds.d());
    let cells = n * d;
    let target = (rate * cells as f64).floor() as usize;
    if target == 0 {
        return Ok(ds.clone());
    }
    // every row and column keeps one observed cell, so at least max(n, d) stay
    if cells - target < n.max(d) {
        return Err(DatasetError::AmputationInfeasible(format!(
            "removing {target} of {cells} cells cannot leave every row and column observed"
        )));
    }
    for _ in 0..MAX_AMPUTATION_ATTEMPTS {
        let chosen = sample_without_replacement(cells, target, stream);
        let mut row_left = vec![d; n];
        let mut col_left = vec![n; d];
        for &c in &chosen {
            row_left[c / d] -= 1;
            col_left[c % d] -= 1;
        }
        if row_left.iter().all(|&r| r > 0) && col_left.iter().all(|&c| c > 0) {
            let mut mask = vec![true; cells];
            for c in chosen {
                mask[c] = false;
            }
            return ds.with_mask(mask);
        }
    }
    Err(DatasetError::AmputationInfeasible(format!(
        "no valid pattern for {target} of {cells} cells after {MAX_AMPUTATION_ATTEMPTS} attempts"
    )))
}

/// Partial Fisher-Yates: the first `k` entries of a uniform shuffle of `0..n`.
fn sample_without_replacement(n: usize, k: usize, stream: &mut RandomStream) -> Vec<usize> {
    let mut swapped: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = i + stream.next_below((n - i) as u64) as usize;
        let vj = *swapped.get(&j).unwrap_or(&j);
        let vi = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, vi);
        out.push(vj);
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Two-class Gaussian data: class 1 centred at `+shift·𝟙`, class 0 at
/// `-shift·𝟙`, identity covariance. Rows are interleaved by a shuffle.
pub fn synthetic_two_gaussian(
    n_pos: usize,
    n_neg: usize,
    d: usize,
    shift: f64,
    stream: &mut RandomStream,
) -> Result<Dataset, DatasetError> {
    let n = n_pos + n_neg;
    let order = crate::numerics::permutation(n, stream);
    let mut values = Matrix::zeros(n, d);
    let mut labels = vec![0u8; n];
    for (slot, &i) in order.iter().enumerate() {
        let label = u8::from(slot < n_pos);
        labels[i] = label;
        let centre = if label == 1 { shift } else { -shift };
        for j in 0..d {
            values[(i, j)] = centre + stream.next_normal();
        }
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Ok(Dataset::complete(values, labels, names)?.with_label_names("status", "deactivated", "active"))
}

/// Survey-like analogue of the business-survival data: integer scores in
/// `1..=5` whose mean depends on the class for the first `informative`
/// features; a `zero_rate` fraction of cells is recorded as 0 (to be read
/// back with `zero_as_missing`).
pub fn synthetic_survey(
    n_pos: usize,
    n_neg: usize,
    d: usize,
    informative: usize,
    zero_rate: f64,
    stream: &mut RandomStream,
) -> Result<Dataset, DatasetError> {
    let n = n_pos + n_neg;
    let order = crate::numerics::permutation(n, stream);
    let mut values = Matrix::zeros(n, d);
    let mut labels = vec![0u8; n];
    for (slot, &i) in order.iter().enumerate() {
        let label = u8::from(slot < n_pos);
        labels[i] = label;
        let latent = stream.next_normal();
        for j in 0..d {
            let shift = if j < informative {
                if label == 1 {
                    -0.8
                } else {
                    0.8
                }
            } else {
                0.0
            };
            let raw = 3.0 + shift + 0.6 * latent + stream.next_normal();
            let score = raw.round().clamp(1.0, 5.0);
            values[(i, j)] = if stream.next_f64() < zero_rate { 0.0 } else { score };
        }
    }
    let names = (1..=d).map(|j| format!("Q{j}")).collect();
    Ok(Dataset::complete(values, labels, names)?.with_label_names("status", "deactivated", "active"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LoadOptions {
        LoadOptions::new("status", "deactivated")
    }

    fn parse(text: &str, o: &LoadOptions) -> Result<Dataset, DatasetError> {
        read_csv(text.as_bytes(), o)
    }

    #[test]
    fn na_token_is_missing() {
        let ds = parse("a,b,status\n1,NA,active\n2,3,deactivated\n", &opts()).unwrap();
        assert!(!ds.is_observed(0, 1));
        assert_eq!(ds.value(1, 1), Some(3.0));
        assert_eq!(ds.value(0, 1), None);
    }

    #[test]
    fn empty_cell_is_missing_by_default() {
        let ds = parse("a,b,status\n1,,active\n2,3,deactivated\n", &opts()).unwrap();
        assert!(!ds.is_observed(0, 1));
    }

    #[test]
    fn zero_as_missing_flag() {
        let text = "a,b,status\n0,1,active\n2,3,deactivated\n";
        let ds = parse(text, &opts()).unwrap();
        assert_eq!(ds.value(0, 0), Some(0.0));
        let mut o = opts();
        o.zero_as_missing = true;
        let ds = parse(text, &o).unwrap();
        assert!(!ds.is_observed(0, 0));
    }

    #[test]
    fn label_mapping_and_column_position() {
        let ds = parse("status,a\nactive,1\ndeactivated,2\nactive,3\n", &opts()).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.feature_names(), &["a".to_string()]);
        assert_eq!(ds.negative_label_name(), "active");
    }

    #[test]
    fn parse_error_has_coordinates() {
        let err = parse("a,status\n1,active\nxyz,deactivated\n", &opts()).unwrap_err();
        match err {
            DatasetError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_column() {
        let err = parse("a,b\n1,2\n", &opts()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingLabel(_)));
    }

    #[test]
    fn single_class_rejected() {
        let err = parse("a,status\n1,active\n2,active\n", &opts()).unwrap_err();
        assert!(matches!(err, DatasetError::SingleClassDataset { .. }));
    }

    fn small(mask: Vec<bool>, n: usize, d: usize) -> Dataset {
        let values = Matrix::from_vec(n, d, (0..n * d).map(|v| v as f64 + 1.0).collect()).unwrap();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Dataset::new(values, mask, labels, names).unwrap()
    }

    #[test]
    fn summary_counts() {
        let full = small(vec![true; 9], 3, 3);
        assert_eq!(summarize_missingness(&full).overall_rate, 0.0);
        let one = small(vec![true, false, true, true], 2, 2);
        let s = summarize_missingness(&one);
        assert_eq!(s.overall_rate, 0.25);
        assert_eq!(s.per_feature_missing, vec![0, 1]);
        assert_eq!(s.per_instance_missing, vec![1, 0]);
        assert_eq!(s.heatmap_column_order(), vec![1, 0]);
    }

    #[test]
    fn heatmap_examples() {
        let full = small(vec![true; 4], 2, 2);
        assert_eq!(heatmap_pgm(&full), "P2\n2 2\n255\n0 0\n0 0\n");
        let one = small(vec![true, true, false, true], 2, 2);
        assert_eq!(heatmap_pgm(&one), "P2\n2 2\n255\n0 0\n255 0\n");
        // column 1 has 3 missing, column 0 has 1 → column 1 drawn first
        let mask = vec![false, false, true, false, true, false, true, true];
        let ds = small(mask, 4, 2);
        let pgm = heatmap_pgm(&ds);
        let rows: Vec<&str> = pgm.lines().skip(3).collect();
        assert_eq!(rows, vec!["255 255", "255 0", "255 0", "0 0"]);
    }

    #[test]
    fn sentinel_is_canonical() {
        let values = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let ds = Dataset::new(values, vec![true, false, true, true], vec![0, 1], vec!["a".into(), "b".into()]).unwrap();
        assert!(ds.raw_values()[(0, 1)].is_nan());
    }

    #[test]
    fn ampute_examples() {
        let full = small(vec![true; 4], 2, 2);
        let same = ampute_mcar(&full, 0.0, &mut RandomStream::new(1)).unwrap();
        assert_eq!(same, full);
        let half = ampute_mcar(&full, 0.5, &mut RandomStream::new(1)).unwrap();
        assert_eq!(half.missing_count(), 2);
        let a = ampute_mcar(&full, 0.5, &mut RandomStream::new(3)).unwrap();
        let b = ampute_mcar(&full, 0.5, &mut RandomStream::new(3)).unwrap();
        assert_eq!(a.mask(), b.mask());
        assert_eq!(a.labels(), full.labels());
    }

    #[test]
    fn ampute_infeasible() {
        let full = small(vec![true; 4], 2, 2);
        let err = ampute_mcar(&full, 0.75, &mut RandomStream::new(1)).unwrap_err();
        assert!(matches!(err, DatasetError::AmputationInfeasible(_)));
        let partial = small(vec![true, false, true, true], 2, 2);
        assert!(matches!(ampute_mcar(&partial, 0.25, &mut RandomStream::new(1)), Err(DatasetError::NotFullyObserved(1))));
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut s = RandomStream::new(11);
        let mut picked = sample_without_replacement(50, 50, &mut s);
        picked.sort_unstable();
        assert_eq!(picked, (0..50).collect::<Vec<_>>());
    }
}
