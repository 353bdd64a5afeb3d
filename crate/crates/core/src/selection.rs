//! Two-sample t-test feature selection.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{student_t_two_sided_p, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("class {class} has {count} instances; at least 2 are required")]
    ClassTooSmall { class: u8, count: usize },
    #[error("no feature selected at alpha {alpha}")]
    NoFeaturesSelected { alpha: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl SelectionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SelectionError::ClassTooSmall { .. } => "ClassTooSmall",
            SelectionError::NoFeaturesSelected { .. } => "NoFeaturesSelected",
            SelectionError::DimensionMismatch(_) => "DimensionMismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVariant {
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_variant")]
    pub variant: TestVariant,
    /// Keep every feature instead of failing when none passes the test.
    #[serde(default)]
    pub keep_all_on_empty: bool,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_variant() -> TestVariant {
    TestVariant::Pooled
}

impl Default for SelectorSpec {
    fn default() -> Self {
        SelectorSpec { alpha: default_alpha(), variant: default_variant(), keep_all_on_empty: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTest {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub features: Vec<FeatureTest>,
    pub alpha: f64,
    pub variant: TestVariant,
    /// Set by [`project_features`] when nothing was selected and all
    /// features were kept.
    pub kept_all_on_empty: bool,
}

impl SelectionReport {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.features.iter().enumerate().filter(|(_, f)| f.selected).map(|(j, _)| j).collect()
    }
}

struct GroupStats {
    n: f64,
    mean: f64,
    var: f64,
}

fn group_stats(values: &[f64]) -> GroupStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    GroupStats { n, mean, var }
}

/// Two-sample t statistic (class 1 minus class 0) and degrees of freedom.
fn t_statistic(g0: &GroupStats, g1: &GroupStats, variant: TestVariant) -> (f64, f64, f64) {
    let diff = g1.mean - g0.mean;
    match variant {
        TestVariant::Pooled => {
            let df = g0.n + g1.n - 2.0;
            let sp2 = ((g0.n - 1.0) * g0.var + (g1.n - 1.0) * g1.var) / df;
            let se = (sp2 * (1.0 / g0.n + 1.0 / g1.n)).sqrt();
            (diff, se, df)
        }
        TestVariant::Welch => {
            let a = g0.var / g0.n;
            let b = g1.var / g1.n;
            let se = (a + b).sqrt();
            let df = if a + b > 0.0 { (a + b) * (a + b) / (a * a / (g0.n - 1.0) + b * b / (g1.n - 1.0)) } else { g0.n + g1.n - 2.0 };
            (diff, se, df)
        }
    }
}

/// Per-feature two-sample t-test between the label groups.
pub fn t_test_select(x: &Matrix, labels: &[u8], alpha: f64, variant: TestVariant) -> Result<SelectionReport, SelectionError> {
    if labels.len() != x.rows() {
        return Err(SelectionError::DimensionMismatch(format!("{} labels for {} rows", labels.len(), x.rows())));
    }
    for class in [0u8, 1] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < 2 {
            return Err(SelectionError::ClassTooSmall { class, count });
        }
    }
    let features = (0..x.cols())
        .map(|j| {
            let (mut g0, mut g1) = (Vec::new(), Vec::new());
            for (i, &l) in labels.iter().enumerate() {
                if l == 1 {
                    g1.push(x[(i, j)])
                } else {
                    g0.push(x[(i, j)])
                }
            }
            let (s0, s1) = (group_stats(&g0), group_stats(&g1));
            let (diff, se, df) = t_statistic(&s0, &s1, variant);
            let (t_stat, p_value) = if se > 0.0 {
                let t = diff / se;
                (t, student_t_two_sided_p(t, df))
            } else if diff == 0.0 {
                (0.0, 1.0)
            } else {
                (diff.signum() * f64::INFINITY, 0.0)
            };
            FeatureTest { t_stat, df, p_value, selected: p_value < alpha }
        })
        .collect();
    Ok(SelectionReport { features, alpha, variant, kept_all_on_empty: false })
}

/// Keeps the selected columns in their original order.
pub fn project_features(x: &Matrix, report: &mut SelectionReport, keep_all_on_empty: bool) -> Result<Matrix, SelectionError> {
    if report.features.len() != x.cols() {
        return Err(SelectionError::DimensionMismatch(format!(
            "report covers {} features, matrix has {}",
            report.features.len(),
            x.cols()
        )));
    }
    let selected = report.selected_indices();
    if selected.is_empty() {
        if keep_all_on_empty {
            report.kept_all_on_empty = true;
            return Ok(x.clone());
        }
        return Err(SelectionError::NoFeaturesSelected { alpha: report.alpha });
    }
    Ok(x.select_cols(&selected))
}

/// Column indices a report keeps, honoring `kept_all_on_empty`.
pub fn kept_columns(report: &SelectionReport) -> Vec<usize> {
    if report.kept_all_on_empty {
        (0..report.features.len()).collect()
    } else {
        report.selected_indices()
    }
}

/// CSV: `feature_name,t_stat,df,p_value,selected`.
pub fn write_report_csv<W: Write>(report: &SelectionReport, names: &[String], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["feature_name", "t_stat", "df", "p_value", "selected"])?;
    for (name, f) in names.iter().zip(&report.features) {
        wtr.write_record([name.clone(), format!("{}", f.t_stat), format!("{}", f.df), format!("{}", f.p_value), f.selected.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
