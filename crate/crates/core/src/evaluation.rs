//! Stratified k-fold cross-validation of imputer → selector → classifier
//! pipelines, binary metrics with explicit undefined values, ROC curves and
//! the imputer × classifier grid.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::classifiers::{label_from_score, predict_score, ClassifierError, ClassifierSpec, TrainedClassifier};
use crate::dataset::Dataset;
use crate::error::Error;
use crate::imputation::{FittedImputer, ImputerSpec};
use crate::numerics::{permutation, Matrix, RandomStream};
use crate::selection::{kept_columns, project_features, t_test_select, SelectionReport, SelectorSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class} has {count} instances, fewer than k = {k}")]
    ClassSmallerThanK { class: u8, count: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty fold")]
    EmptyFold,
    #[error("scores cover a single class")]
    SingleClass,
    #[error("empty {0} list")]
    EmptyList(&'static str),
    #[error("{}{source}", fold.map(|f| format!("fold {f}: ")).unwrap_or_default())]
    Stage { fold: Option<usize>, source: Box<Error> },
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::ClassSmallerThanK { .. } => "ClassSmallerThanK",
            EvalError::InvalidK(_) => "InvalidK",
            EvalError::LengthMismatch(..) => "LengthMismatch",
            EvalError::EmptyFold => "EmptyFold",
            EvalError::SingleClass => "SingleClass",
            EvalError::EmptyList(_) => "EmptyList",
            EvalError::Stage { source, .. } => source.kind(),
        }
    }

    fn stage(fold: Option<usize>, e: impl Into<Error>) -> Self {
        EvalError::Stage { fold, source: Box::new(e.into()) }
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// A metric value that may be undefined; undefined renders as `"NaN"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric(pub Option<f64>);

impl Metric {
    pub const UNDEFINED: Metric = Metric(None);

    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_defined(self) -> bool {
        self.0.is_some()
    }

    pub fn render(self) -> String {
        match self.0 {
            Some(v) => format!("{v}"),
            None => "NaN".to_string(),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("NaN"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion_counts(truth: &[u8], predicted: &[u8]) -> Result<ConfusionCounts, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    let mut c = ConfusionCounts { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t == 1, p == 1) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub acc: Metric,
    pub auc: Metric,
    pub sen: Metric,
    pub spe: Metric,
}

impl FoldMetrics {
    pub const UNDEFINED: FoldMetrics =
        FoldMetrics { acc: Metric::UNDEFINED, auc: Metric::UNDEFINED, sen: Metric::UNDEFINED, spe: Metric::UNDEFINED };
}

fn ratio(num: usize, den: usize) -> Metric {
    Metric((den > 0).then(|| num as f64 / den as f64))
}

/// Accuracy, sensitivity and specificity; `auc` is left undefined.
pub fn binary_metrics(c: &ConfusionCounts) -> Result<FoldMetrics, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::EmptyFold);
    }
    Ok(FoldMetrics {
        acc: ratio(c.tp + c.tn, total),
        auc: Metric::UNDEFINED,
        sen: ratio(c.tp, c.tp + c.fn_),
        spe: ratio(c.tn, c.tn + c.fp),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// CSV with columns `threshold,fpr,tpr`; the initial point has
    /// threshold `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }
}

/// ROC curve over every distinct score (positive when score ≥ threshold,
/// tied scores as one step) and its trapezoidal area.
pub fn roc_curve_auc(scores: &[f64], truth: &[u8]) -> Result<(RocCurve, f64), EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch(scores.len(), truth.len()));
    }
    let pos = truth.iter().filter(|&&t| t == 1).count() as u64;
    let neg = truth.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    // adding 0.0 maps -0.0 to 0.0 so signed zeros form one tie group
    let scores: Vec<f64> = scores.iter().map(|s| s + 0.0).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of (1/pos)·(1/neg)
    let mut doubled_area: u128 = 0;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        let (prev_tp, prev_fp) = (tp, fp);
        while idx < order.len() && scores[order[idx]].total_cmp(&threshold).is_eq() {
            if truth[order[idx]] == 1 {
                tp += 1
            } else {
                fp += 1
            }
            idx += 1;
        }
        doubled_area += u128::from(fp - prev_fp) * u128::from(tp + prev_tp);
        points.push(RocPoint { threshold, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    let auc = doubled_area as f64 / (2.0 * pos as f64 * neg as f64);
    Ok((RocCurve { points }, auc))
}

// ---------------------------------------------------------------------------
// Folds

/// Fold index in `0..k` for each instance. Each class is shuffled and dealt
/// round-robin, so per-fold class counts differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, stream: &mut RandomStream) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut folds = vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in [0u8, 1] {
        let members: Vec<usize> = labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect();
        if members.len() < k {
            return Err(EvalError::ClassSmallerThanK { class, count: members.len(), k });
        }
        for p in permutation(members.len(), stream) {
            folds[members[p]] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

// ---------------------------------------------------------------------------
// Cross-validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    /// Fit imputer and selector on each training fold.
    PerFold,
    /// Impute and select once on the whole dataset before splitting.
    WholeDataset,
}

impl FidelityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FidelityMode::PerFold => "per_fold",
            FidelityMode::WholeDataset => "whole_dataset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSpec {
    pub imputer: ImputerSpec,
    pub selector: Option<SelectorSpec>,
    pub classifier: ClassifierSpec,
    pub folds: usize,
    pub stream_seed: u64,
    pub fidelity_mode: FidelityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: Option<ConfusionCounts>,
    pub metrics: FoldMetrics,
    pub selected_features: Option<Vec<String>>,
    pub diagnostic: Option<String>,
    #[serde(skip)]
    pub test_rows: Vec<usize>,
    #[serde(skip)]
    pub test_scores: Vec<f64>,
    #[serde(skip)]
    pub test_truth: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: Metric,
    pub sd: Metric,
    pub defined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub acc: MetricSummary,
    pub auc: MetricSummary,
    pub sen: MetricSummary,
    pub spe: MetricSummary,
}

/// Mean and sample SD (denominator m − 1) over the defined values.
pub fn summarize_metric(values: impl IntoIterator<Item = Metric>) -> MetricSummary {
    let defined: Vec<f64> = values.into_iter().filter_map(Metric::value).collect();
    let m = defined.len();
    let mean = (m > 0).then(|| defined.iter().sum::<f64>() / m as f64);
    let sd = match mean {
        Some(mu) if m >= 2 => Some((defined.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (m - 1) as f64).sqrt()),
        _ => None,
    };
    MetricSummary { mean: Metric(mean), sd: Metric(sd), defined: m }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub imputer: String,
    pub classifier: String,
    pub pipeline: PipelineSpec,
    pub folds: Vec<FoldRecord>,
    pub summary: Summary,
}

impl CvReport {
    fn from_folds(imputer: &ImputerSpec, classifier: &ClassifierSpec, pipeline: PipelineSpec, folds: Vec<FoldRecord>) -> Self {
        let pick = |f: fn(&FoldMetrics) -> Metric| summarize_metric(folds.iter().map(|r| f(&r.metrics)));
        let summary = Summary { acc: pick(|m| m.acc), auc: pick(|m| m.auc), sen: pick(|m| m.sen), spe: pick(|m| m.spe) };
        CvReport { imputer: imputer.name(), classifier: classifier.name().to_string(), pipeline, folds, summary }
    }

    /// ROC over all test-fold scores concatenated in fold order.
    pub fn pooled_roc(&self) -> Option<(RocCurve, f64)> {
        let scores: Vec<f64> = self.folds.iter().flat_map(|f| f.test_scores.iter().copied()).collect();
        let truth: Vec<u8> = self.folds.iter().flat_map(|f| f.test_truth.iter().copied()).collect();
        roc_curve_auc(&scores, &truth).ok()
    }

    /// Folds whose metrics are not all defined.
    pub fn incomplete_folds(&self) -> usize {
        self.folds.iter().filter(|f| ![f.metrics.acc, f.metrics.auc, f.metrics.sen, f.metrics.spe].iter().all(|m| m.is_defined())).count()
    }
}

/// Imputed and projected training/test matrices for one fold, plus the
/// fitted models that produced them.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub imputer: FittedImputer,
    pub selection: Option<SelectionReport>,
    pub kept: Vec<usize>,
    pub x_train: Matrix,
    pub x_test: Matrix,
}

fn select_and_project(
    x_fit: &Matrix,
    y_fit: &[u8],
    selector: Option<&SelectorSpec>,
) -> Result<(Option<SelectionReport>, Vec<usize>), Error> {
    match selector {
        None => Ok((None, (0..x_fit.cols()).collect())),
        Some(spec) => {
            let mut report = t_test_select(x_fit, y_fit, spec.alpha, spec.variant)?;
            project_features(x_fit, &mut report, spec.keep_all_on_empty)?;
            let kept = kept_columns(&report);
            Ok((Some(report), kept))
        }
    }
}

/// Fits the imputer and selector on `train` only and applies them to both
/// row sets. Test rows never influence the fitted models.
pub fn prepare_fold(
    data: &Dataset,
    train: &[usize],
    test: &[usize],
    imputer: &ImputerSpec,
    selector: Option<&SelectorSpec>,
) -> Result<PreparedFold, Error> {
    let train_ds = data.subset_rows(train);
    let test_ds = data.subset_rows(test);
    let fitted = imputer.fit(&train_ds)?;
    let x_train = fitted.impute(&train_ds)?;
    let x_test = fitted.impute(&test_ds)?;
    let (selection, kept) = select_and_project(&x_train, train_ds.labels(), selector)?;
    Ok(PreparedFold { imputer: fitted, selection, x_train: x_train.select_cols(&kept), x_test: x_test.select_cols(&kept), kept })
}

fn train_with_fallback(spec: &ClassifierSpec, x: &Matrix, y: &[u8]) -> Result<(TrainedClassifier, Option<String>), ClassifierError> {
    match spec.train(x, y) {
        Ok(m) => Ok((m, None)),
        Err(ClassifierError::DidNotConverge { model, detail }) => {
            Ok((*model, Some(format!("did not converge: {detail}; best iterate used"))))
        }
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn score_fold(
    fold: usize,
    kept_names: Option<Vec<String>>,
    classifier: &ClassifierSpec,
    x_train: &Matrix,
    y_train: &[u8],
    x_test: &Matrix,
    test_rows: &[usize],
    y_test: &[u8],
) -> FoldRecord {
    let mut record = FoldRecord {
        fold,
        n_train: x_train.rows(),
        n_test: x_test.rows(),
        confusion: None,
        metrics: FoldMetrics::UNDEFINED,
        selected_features: kept_names,
        diagnostic: None,
        test_rows: test_rows.to_vec(),
        test_scores: Vec::new(),
        test_truth: y_test.to_vec(),
    };
    let (model, note) = match train_with_fallback(classifier, x_train, y_train) {
        Ok(v) => v,
        Err(e) => {
            record.diagnostic = Some(format!("error:classifiers:{}: {e}", e.kind()));
            return record;
        }
    };
    record.diagnostic = note;
    let scores = match predict_score(&model, x_test) {
        Ok(s) => s,
        Err(e) => {
            record.diagnostic = Some(format!("error:classifiers:{}: {e}", e.kind()));
            return record;
        }
    };
    let predicted: Vec<u8> = scores.iter().map(|&s| label_from_score(s)).collect();
    let confusion = confusion_counts(y_test, &predicted).expect("equal lengths");
    let mut metrics = binary_metrics(&confusion).unwrap_or(FoldMetrics::UNDEFINED);
    metrics.auc = Metric(roc_curve_auc(&scores, y_test).ok().map(|(_, auc)| auc));
    record.confusion = Some(confusion);
    record.metrics = metrics;
    record.test_scores = scores;
    record
}

fn failed_fold(fold: usize, train: &[usize], test: &[usize], y_test: Vec<u8>, e: &Error) -> FoldRecord {
    FoldRecord {
        fold,
        n_train: train.len(),
        n_test: test.len(),
        confusion: None,
        metrics: FoldMetrics::UNDEFINED,
        selected_features: None,
        diagnostic: Some(format!("error:{}:{}: {e}", e.module(), e.kind())),
        test_rows: test.to_vec(),
        test_scores: Vec::new(),
        test_truth: y_test,
    }
}

/// Train/test row indices (ascending) for each fold.
pub fn fold_rows(assignment: &[usize], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..k)
        .map(|f| {
            let test: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] == f).collect();
            let train: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] != f).collect();
            (train, test)
        })
        .collect()
}

pub fn cross_validate(
    data: &Dataset,
    imputer: &ImputerSpec,
    selector: Option<&SelectorSpec>,
    classifier: &ClassifierSpec,
    k: usize,
    stream: &mut RandomStream,
    mode: FidelityMode,
) -> Result<CvReport, EvalError> {
    let pipeline = PipelineSpec {
        imputer: imputer.clone(),
        selector: selector.copied(),
        classifier: *classifier,
        folds: k,
        stream_seed: stream.seed(),
        fidelity_mode: mode,
    };
    let assignment = stratified_kfold(data.labels(), k, stream)?;
    let labels = data.labels();
    let names = data.feature_names();
    let name_cols = |kept: &[usize]| kept.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();

    let whole = match mode {
        FidelityMode::PerFold => None,
        FidelityMode::WholeDataset => {
            let fitted = imputer.fit(data).map_err(|e| EvalError::stage(None, e))?;
            let x_all = fitted.impute(data).map_err(|e| EvalError::stage(None, e))?;
            let (selection, kept) = select_and_project(&x_all, labels, selector).map_err(|e| EvalError::stage(None, e))?;
            let projected = x_all.select_cols(&kept);
            Some((projected, selection.map(|_| name_cols(&kept))))
        }
    };

    let mut folds = Vec::with_capacity(k);
    for (f, (train, test)) in fold_rows(&assignment, k).into_iter().enumerate() {
        let y_train: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let y_test: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
        let record = match &whole {
            Some((x_all, kept_names)) => score_fold(
                f,
                kept_names.clone(),
                classifier,
                &x_all.select_rows(&train),
                &y_train,
                &x_all.select_rows(&test),
                &test,
                &y_test,
            ),
            None => match prepare_fold(data, &train, &test, imputer, selector) {
                Ok(prep) => {
                    let kept_names = prep.selection.as_ref().map(|_| name_cols(&prep.kept));
                    score_fold(f, kept_names, classifier, &prep.x_train, &y_train, &prep.x_test, &test, &y_test)
                }
                Err(e) => failed_fold(f, &train, &test, y_test, &e),
            },
        };
        folds.push(record);
    }
    Ok(CvReport::from_folds(imputer, classifier, pipeline, folds))
}

// ---------------------------------------------------------------------------
// Grid

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub imputer: String,
    pub classifier: String,
    pub status: &'static str,
    pub error: Option<String>,
    pub folds: Vec<FoldRecord>,
    pub summary: Summary,
    pub pooled_auc: Metric,
    #[serde(skip)]
    pub pooled_roc: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub seed: u64,
    pub fidelity_mode: FidelityMode,
    pub folds: usize,
    pub cells: Vec<GridCell>,
}

/// Stream key for a grid cell.
pub fn cell_stream(root: &RandomStream, imputer: &ImputerSpec, classifier: &ClassifierSpec) -> RandomStream {
    root.child(&format!("{}/{}", imputer.name(), classifier.name()))
}

fn empty_summary() -> Summary {
    let s = summarize_metric(std::iter::empty());
    Summary { acc: s, auc: s, sen: s, spe: s }
}

fn run_cell(
    data: &Dataset,
    imputer: &ImputerSpec,
    classifier: &ClassifierSpec,
    selector: Option<&SelectorSpec>,
    k: usize,
    root: &RandomStream,
    mode: FidelityMode,
) -> GridCell {
    let mut stream = cell_stream(root, imputer, classifier);
    match cross_validate(data, imputer, selector, classifier, k, &mut stream, mode) {
        Ok(report) => {
            let roc = report.pooled_roc();
            GridCell {
                imputer: report.imputer,
                classifier: report.classifier,
                status: "ok",
                error: None,
                summary: report.summary,
                pooled_auc: Metric(roc.as_ref().map(|r| r.1)),
                pooled_roc: roc.map(|r| r.0),
                folds: report.folds,
            }
        }
        Err(e) => {
            let err: Error = e.into();
            GridCell {
                imputer: imputer.name(),
                classifier: classifier.name().to_string(),
                status: "failed",
                error: Some(format!("error:{}:{}: {err}", err.module(), err.kind())),
                folds: Vec::new(),
                summary: empty_summary(),
                pooled_auc: Metric::UNDEFINED,
                pooled_roc: None,
            }
        }
    }
}

/// Cross-validates every (imputer, classifier) pair. Cells are ordered
/// classifier-major and each draws its folds from a child stream keyed by
/// the pair's names, so results do not depend on list order or `jobs`.
#[allow(clippy::too_many_arguments)]
pub fn grid_evaluate(
    data: &Dataset,
    imputers: &[ImputerSpec],
    classifiers: &[ClassifierSpec],
    selector: Option<&SelectorSpec>,
    k: usize,
    root: &RandomStream,
    mode: FidelityMode,
    jobs: usize,
) -> Result<GridReport, EvalError> {
    if imputers.is_empty() {
        return Err(EvalError::EmptyList("imputer"));
    }
    if classifiers.is_empty() {
        return Err(EvalError::EmptyList("classifier"));
    }
    let pairs: Vec<(&ImputerSpec, &ClassifierSpec)> = classifiers.iter().flat_map(|c| imputers.iter().map(move |i| (i, c))).collect();
    let cells = if jobs <= 1 {
        pairs.iter().map(|(i, c)| run_cell(data, i, c, selector, k, root, mode)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
        pool.install(|| pairs.par_iter().map(|(i, c)| run_cell(data, i, c, selector, k, root, mode)).collect())
    };
    Ok(GridReport { seed: root.seed(), fidelity_mode: mode, folds: k, cells })
}

pub const SUMMARY_COLUMNS: [&str; 10] =
    ["classifier", "imputer", "acc_mean", "acc_sd", "auc_mean", "auc_sd", "sen_mean", "sen_sd", "spe_mean", "spe_sd"];

/// One summary row per cell in the order of [`SUMMARY_COLUMNS`].
pub fn summary_rows(cells: &[GridCell]) -> Vec<Vec<String>> {
    cells
        .iter()
        .map(|c| {
            let s = &c.summary;
            vec![
                c.classifier.clone(),
                c.imputer.clone(),
                s.acc.mean.render(),
                s.acc.sd.render(),
                s.auc.mean.render(),
                s.auc.sd.render(),
                s.sen.mean.render(),
                s.sen.sd.render(),
                s.spe.mean.render(),
                s.spe.sd.render(),
            ]
        })
        .collect()
}
