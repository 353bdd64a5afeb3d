//! `pipeline` command line: configuration (JSON file + flags) and the six
//! sub-commands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::classifiers::{ClassifierSpec, KernelKind, LdaOptions, LogisticOptions, NaiveBayesOptions, SvmOptions};
use crate::dataset::{self, Dataset, LoadOptions};
use crate::evaluation::{self, FidelityMode};
use crate::imputation::ImputerSpec;
use crate::io::write_atomic;
use crate::numerics::RandomStream;
use crate::selection::{self, SelectorSpec, TestVariant};
use crate::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PIPELINE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { key: key.into(), reason: reason.into() }
    }
}

/// Failure of a CLI invocation, mapped onto an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("error:cli:ConfigError: {0}")]
    Config(#[from] ConfigError),
    #[error("error:{}:{}: {0}", .0.module(), .0.kind())]
    Pipeline(#[from] Error),
    #[error("error:io:IoError: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Pipeline(_) | CliError::Io(_) => EXIT_PIPELINE,
        }
    }
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "pipeline", version, about = "Missing-data imputation and classifier evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Missingness summary and heatmap
    Inspect(Flags),
    /// Delete cells completely at random from a complete dataset
    Ampute(Flags),
    /// Write the imputed matrix for each configured imputer
    Impute(Flags),
    /// t-test feature selection on the imputed data
    Select(Flags),
    /// Cross-validate a single imputer/classifier pair
    Evaluate(Flags),
    /// Cross-validate every imputer × classifier pair
    Grid(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Inspect(_) => "inspect",
            Command::Ampute(_) => "ampute",
            Command::Impute(_) => "impute",
            Command::Select(_) => "select",
            Command::Evaluate(_) => "evaluate",
            Command::Grid(_) => "grid",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Inspect(f)
            | Command::Ampute(f)
            | Command::Impute(f)
            | Command::Select(f)
            | Command::Evaluate(f)
            | Command::Grid(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the label column
    #[arg(long)]
    pub label: Option<String>,
    /// Label value of the positive class
    #[arg(long)]
    pub positive: Option<String>,
    /// Cell text treated as missing (repeatable)
    #[arg(long = "missing-token")]
    pub missing_tokens: Vec<String>,
    #[arg(long)]
    pub zero_as_missing: bool,
    /// mean | knn[:k] | em (repeatable)
    #[arg(long = "imputer")]
    pub imputers: Vec<String>,
    /// logistic | naive_bayes | lda | svm[:linear|:rbf] (repeatable)
    #[arg(long = "classifier")]
    pub classifiers: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// pooled | welch
    #[arg(long)]
    pub variant: Option<String>,
    /// Disable t-test feature selection
    #[arg(long)]
    pub no_selection: bool,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// per_fold | whole_dataset
    #[arg(long)]
    pub fidelity: Option<String>,
    /// Grid cells evaluated concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    #[arg(long)]
    pub summary_json: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub roc_dir: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OffTag {
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SelectorField {
    Off(OffTag),
    On(SelectorSpec),
}

/// Config file contents; every field optional so flags can fill gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data_path: Option<PathBuf>,
    missing_tokens: Option<Vec<String>>,
    zero_as_missing: Option<bool>,
    label_column: Option<String>,
    positive_label: Option<String>,
    imputers: Option<Vec<ImputerSpec>>,
    selector: Option<SelectorField>,
    classifiers: Option<Vec<ClassifierSpec>>,
    folds: Option<usize>,
    seed: Option<u64>,
    fidelity_mode: Option<FidelityMode>,
    rate: Option<f64>,
    report_json: Option<PathBuf>,
    summary_csv: Option<PathBuf>,
    roc_dir: Option<PathBuf>,
    heatmap: Option<PathBuf>,
    summary_json: Option<PathBuf>,
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub missing_tokens: Vec<String>,
    pub zero_as_missing: bool,
    pub label_column: String,
    pub positive_label: String,
    pub imputers: Vec<ImputerSpec>,
    pub selector: Option<SelectorSpec>,
    pub classifiers: Vec<ClassifierSpec>,
    pub folds: usize,
    pub seed: Option<u64>,
    pub fidelity_mode: FidelityMode,
    pub rate: Option<f64>,
    pub report_json: Option<PathBuf>,
    pub summary_csv: Option<PathBuf>,
    pub roc_dir: Option<PathBuf>,
    pub heatmap: Option<PathBuf>,
    pub summary_json: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Every option that influences results; output locations and the job
    /// count are left out so they cannot change the bytes written.
    pub fn digest(&self) -> Value {
        json!({
            "data_path": self.data_path,
            "missing_tokens": self.missing_tokens,
            "zero_as_missing": self.zero_as_missing,
            "label_column": self.label_column,
            "positive_label": self.positive_label,
            "imputers": self.imputers,
            "selector": self.selector.map_or(json!("off"), |s| json!(s)),
            "classifiers": self.classifiers,
            "folds": self.folds,
            "seed": self.seed,
            "fidelity_mode": self.fidelity_mode,
            "rate": self.rate,
        })
    }

    fn digest_comment(&self) -> String {
        format!("# config: {}\n", self.digest())
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            missing_tokens: self.missing_tokens.iter().cloned().collect(),
            zero_as_missing: self.zero_as_missing,
            label_column: self.label_column.clone(),
            positive_label: self.positive_label.clone(),
        }
    }

    fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::new("seed", "required (no default seed is ever invented)"))
    }
}

pub fn parse_imputer(text: &str) -> Result<ImputerSpec, ConfigError> {
    let (name, arg) = text.split_once(':').map_or((text, None), |(a, b)| (a, Some(b)));
    match (name, arg) {
        ("mean" | "mi", None) => Ok(ImputerSpec::Mean),
        ("knn", None) => Ok(ImputerSpec::Knn { k: 3 }),
        ("knn", Some(k)) => match k.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(ImputerSpec::Knn { k }),
            _ => Err(ConfigError::new("imputers", format!("invalid k in '{text}'"))),
        },
        ("em", None) => Ok(ImputerSpec::em_default()),
        _ => Err(ConfigError::new("imputers", format!("unknown imputer '{text}'"))),
    }
}

pub fn parse_classifier(text: &str) -> Result<ClassifierSpec, ConfigError> {
    match text {
        "logistic" | "lr" => Ok(ClassifierSpec::Logistic(LogisticOptions::default())),
        "naive_bayes" | "nb" => Ok(ClassifierSpec::NaiveBayes(NaiveBayesOptions::default())),
        "lda" => Ok(ClassifierSpec::Lda(LdaOptions::default())),
        "svm" | "svm:rbf" => Ok(ClassifierSpec::Svm(SvmOptions::default())),
        "svm:linear" => Ok(ClassifierSpec::Svm(SvmOptions { kernel: KernelKind::Linear, ..SvmOptions::default() })),
        _ => Err(ConfigError::new("classifiers", format!("unknown classifier '{text}'"))),
    }
}

fn parse_fidelity(text: &str) -> Result<FidelityMode, ConfigError> {
    match text {
        "per_fold" => Ok(FidelityMode::PerFold),
        "whole_dataset" => Ok(FidelityMode::WholeDataset),
        _ => Err(ConfigError::new("fidelity_mode", format!("expected per_fold or whole_dataset, got '{text}'"))),
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))
}

/// Merges the optional config file with flags (flags win) and validates.
pub fn parse_config(flags: &Flags) -> Result<RunConfig, ConfigError> {
    let file = match &flags.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };

    let data_path = flags.data.clone().or(file.data_path).ok_or_else(|| ConfigError::new("data_path", "required"))?;
    let label_column = flags.label.clone().or(file.label_column).ok_or_else(|| ConfigError::new("label_column", "required"))?;
    let missing_tokens = if flags.missing_tokens.is_empty() {
        file.missing_tokens.unwrap_or_else(|| vec!["NA".to_string(), String::new()])
    } else {
        flags.missing_tokens.clone()
    };
    let imputers = if flags.imputers.is_empty() {
        file.imputers.unwrap_or_else(|| vec![ImputerSpec::Mean, ImputerSpec::Knn { k: 3 }, ImputerSpec::em_default()])
    } else {
        flags.imputers.iter().map(|s| parse_imputer(s)).collect::<Result<_, _>>()?
    };
    let classifiers = if flags.classifiers.is_empty() {
        file.classifiers.unwrap_or_else(ClassifierSpec::all_default)
    } else {
        flags.classifiers.iter().map(|s| parse_classifier(s)).collect::<Result<_, _>>()?
    };

    let mut selector = match file.selector {
        None => Some(SelectorSpec::default()),
        Some(SelectorField::Off(_)) => None,
        Some(SelectorField::On(s)) => Some(s),
    };
    if flags.no_selection {
        selector = None;
    } else if flags.alpha.is_some() || flags.variant.is_some() {
        let mut s = selector.unwrap_or_default();
        if let Some(a) = flags.alpha {
            s.alpha = a;
        }
        if let Some(v) = &flags.variant {
            s.variant = match v.as_str() {
                "pooled" => TestVariant::Pooled,
                "welch" => TestVariant::Welch,
                other => return Err(ConfigError::new("selector.variant", format!("unknown variant '{other}'"))),
            };
        }
        selector = Some(s);
    }

    let fidelity_mode = match &flags.fidelity {
        Some(f) => parse_fidelity(f)?,
        None => file.fidelity_mode.unwrap_or(FidelityMode::PerFold),
    };

    let cfg = RunConfig {
        data_path,
        missing_tokens,
        zero_as_missing: flags.zero_as_missing || file.zero_as_missing.unwrap_or(false),
        label_column,
        positive_label: flags.positive.clone().or(file.positive_label).unwrap_or_else(|| "deactivated".to_string()),
        imputers,
        selector,
        classifiers,
        folds: flags.folds.or(file.folds).unwrap_or(5),
        seed: flags.seed.or(file.seed),
        fidelity_mode,
        rate: flags.rate.or(file.rate),
        report_json: flags.report.clone().or(file.report_json),
        summary_csv: flags.summary.clone().or(file.summary_csv),
        roc_dir: flags.roc_dir.clone().or(file.roc_dir),
        heatmap: flags.heatmap.clone().or(file.heatmap),
        summary_json: flags.summary_json.clone().or(file.summary_json),
        out: flags.out.clone().or(file.out),
        out_dir: flags.out_dir.clone().or(file.out_dir),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.folds < 2 {
        return Err(ConfigError::new("folds", format!("must be at least 2, got {}", cfg.folds)));
    }
    if cfg.imputers.is_empty() {
        return Err(ConfigError::new("imputers", "list is empty"));
    }
    if cfg.classifiers.is_empty() {
        return Err(ConfigError::new("classifiers", "list is empty"));
    }
    if cfg.missing_tokens.is_empty() {
        return Err(ConfigError::new("missing_tokens", "list is empty"));
    }
    for (i, imp) in cfg.imputers.iter().enumerate() {
        match imp {
            ImputerSpec::Knn { k } if *k == 0 => {
                return Err(ConfigError::new(format!("imputers[{i}].k"), "must be at least 1"));
            }
            ImputerSpec::Em { tol, max_iter, ridge } if !(*tol > 0.0 && *max_iter > 0 && *ridge >= 0.0) => {
                return Err(ConfigError::new(format!("imputers[{i}]"), "em needs tol > 0, max_iter > 0, ridge ≥ 0"));
            }
            _ => {}
        }
    }
    for (i, c) in cfg.classifiers.iter().enumerate() {
        let ok = match c {
            ClassifierSpec::Logistic(o) => o.l2 >= 0.0 && o.tol > 0.0 && o.max_iter > 0,
            ClassifierSpec::NaiveBayes(o) => o.var_smoothing > 0.0,
            ClassifierSpec::Lda(o) => o.ridge >= 0.0,
            ClassifierSpec::Svm(o) => o.c > 0.0 && o.tol > 0.0 && o.max_passes > 0 && o.gamma.is_none_or(|g| g > 0.0),
        };
        if !ok {
            return Err(ConfigError::new(format!("classifiers[{i}]"), "options must be positive"));
        }
    }
    if let Some(s) = &cfg.selector {
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return Err(ConfigError::new("selector.alpha", "must lie in (0, 1)"));
        }
    }
    if let Some(r) = cfg.rate {
        if !(0.0..1.0).contains(&r) {
            return Err(ConfigError::new("rate", "must lie in [0, 1)"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Execution

fn load(cfg: &RunConfig) -> Result<Dataset, CliError> {
    Ok(dataset::load_csv(&cfg.data_path, &cfg.load_options()).map_err(Error::from)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)?;
    Ok(())
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn csv_text(cfg: &RunConfig, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).expect("in-memory write");
    for r in rows {
        wtr.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(wtr.into_inner().expect("flush")).expect("utf-8");
    format!("{}{body}", cfg.digest_comment())
}

fn dataset_csv(cfg: &RunConfig, ds: &Dataset) -> Result<String, CliError> {
    let token = cfg.missing_tokens.first().map(String::as_str).unwrap_or("NA");
    let mut buf = Vec::new();
    dataset::write_csv(ds, &mut buf, token).map_err(Error::from)?;
    Ok(format!("{}{}", cfg.digest_comment(), String::from_utf8(buf).expect("utf-8")))
}

fn with_config(cfg: &RunConfig, body: impl Serialize) -> Value {
    let mut v = serde_json::to_value(body).expect("serializable");
    if let Value::Object(map) = &mut v {
        map.insert("config".to_string(), cfg.digest());
    }
    v
}

fn single<'a, T>(items: &'a [T], key: &str) -> Result<&'a T, ConfigError> {
    match items {
        [one] => Ok(one),
        _ => Err(ConfigError::new(key, format!("exactly one entry required, found {}", items.len()))),
    }
}

fn roc_file_name(classifier: &str, imputer: &str) -> String {
    format!("roc_{classifier}_{imputer}.csv")
}

/// Runs one sub-command. Data goes to files or `stdout`; diagnostics to
/// `stderr`.
pub fn execute(
    command: &Command,
    cfg: &RunConfig,
    stdout: &mut dyn std::io::Write,
    stderr: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let jobs = command.flags().jobs.max(1);
    match command {
        Command::Inspect(_) => {
            let ds = load(cfg)?;
            let summary = dataset::summarize_missingness(&ds);
            writeln!(stdout, "instances: {}", ds.n())?;
            writeln!(stdout, "features: {}", ds.d())?;
            writeln!(stdout, "positives ({}): {}", ds.positive_label_name(), ds.labels().iter().filter(|&&l| l == 1).count())?;
            writeln!(stdout, "missing cells: {} (rate {})", summary.total_missing(), summary.overall_rate)?;
            for j in summary.heatmap_column_order() {
                writeln!(stdout, "  {}: {}", ds.feature_names()[j], summary.per_feature_missing[j])?;
            }
            if let Some(p) = &cfg.summary_json {
                let body = json!({
                    "features": ds.feature_names(),
                    "per_feature_missing": summary.per_feature_missing,
                    "per_instance_missing": summary.per_instance_missing,
                    "overall_rate": summary.overall_rate,
                });
                write_file(p, to_json(&with_config(cfg, body)).as_bytes())?;
            }
            if let Some(p) = &cfg.heatmap {
                dataset::export_heatmap(&ds, p).map_err(Error::from)?;
            }
        }
        Command::Ampute(_) => {
            let seed = cfg.require_seed()?;
            let rate = cfg.rate.ok_or_else(|| ConfigError::new("rate", "required for ampute"))?;
            let out = cfg.out.as_ref().ok_or_else(|| ConfigError::new("out", "required for ampute"))?;
            let ds = load(cfg)?;
            let mut stream = RandomStream::new(seed);
            let amputed = dataset::ampute_mcar(&ds, rate, &mut stream).map_err(Error::from)?;
            write_file(out, dataset_csv(cfg, &amputed)?.as_bytes())?;
            writeln!(stderr, "ampute: {} of {} cells removed", amputed.missing_count(), ds.n() * ds.d())?;
        }
        Command::Impute(_) => {
            let dir = cfg.out_dir.as_ref().ok_or_else(|| ConfigError::new("out_dir", "required for impute"))?;
            let ds = load(cfg)?;
            for imp in &cfg.imputers {
                let fitted = imp.fit(&ds).map_err(Error::from)?;
                let x = fitted.impute(&ds).map_err(Error::from)?;
                let full = Dataset::complete(x, ds.labels().to_vec(), ds.feature_names().to_vec()).map_err(Error::from)?.with_label_names(
                    ds.label_column(),
                    ds.positive_label_name(),
                    ds.negative_label_name(),
                );
                let path = dir.join(format!("imputed_{}.csv", imp.name()));
                write_file(&path, dataset_csv(cfg, &full)?.as_bytes())?;
            }
        }
        Command::Select(_) => {
            let spec = cfg.selector.ok_or_else(|| ConfigError::new("selector", "select needs a selector"))?;
            let imp = single(&cfg.imputers, "imputers")?;
            let ds = load(cfg)?;
            let x = imp.fit(&ds).and_then(|m| m.impute(&ds)).map_err(Error::from)?;
            let report = selection::t_test_select(&x, ds.labels(), spec.alpha, spec.variant).map_err(Error::from)?;
            let mut buf = Vec::new();
            selection::write_report_csv(&report, ds.feature_names(), &mut buf).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
            let text = format!("{}{}", cfg.digest_comment(), String::from_utf8(buf).expect("utf-8"));
            match &cfg.out {
                Some(p) => write_file(p, text.as_bytes())?,
                None => stdout.write_all(text.as_bytes())?,
            }
        }
        Command::Evaluate(_) => {
            let seed = cfg.require_seed()?;
            let imp = single(&cfg.imputers, "imputers")?;
            let clf = single(&cfg.classifiers, "classifiers")?;
            let ds = load(cfg)?;
            let mut stream = evaluation::cell_stream(&RandomStream::new(seed), imp, clf);
            let report = evaluation::cross_validate(&ds, imp, cfg.selector.as_ref(), clf, cfg.folds, &mut stream, cfg.fidelity_mode)
                .map_err(Error::from)?;
            for f in &report.folds {
                if let Some(d) = &f.diagnostic {
                    writeln!(stderr, "fold {}: {d}", f.fold)?;
                }
            }
            let roc = report.pooled_roc();
            let cell = evaluation::GridCell {
                imputer: report.imputer.clone(),
                classifier: report.classifier.clone(),
                status: "ok",
                error: None,
                folds: report.folds.clone(),
                summary: report.summary,
                pooled_auc: evaluation::Metric(roc.as_ref().map(|r| r.1)),
                pooled_roc: roc.map(|r| r.0),
            };
            write_grid_outputs(cfg, &[cell], with_config(cfg, &report), stdout)?;
        }
        Command::Grid(_) => {
            let seed = cfg.require_seed()?;
            let ds = load(cfg)?;
            let report = evaluation::grid_evaluate(
                &ds,
                &cfg.imputers,
                &cfg.classifiers,
                cfg.selector.as_ref(),
                cfg.folds,
                &RandomStream::new(seed),
                cfg.fidelity_mode,
                jobs,
            )
            .map_err(Error::from)?;
            for cell in &report.cells {
                if let Some(e) = &cell.error {
                    writeln!(stderr, "{} + {}: {e}", cell.classifier, cell.imputer)?;
                }
                for f in &cell.folds {
                    if let Some(d) = &f.diagnostic {
                        writeln!(stderr, "{} + {} fold {}: {d}", cell.classifier, cell.imputer, f.fold)?;
                    }
                }
            }
            write_grid_outputs(cfg, &report.cells, with_config(cfg, &report), stdout)?;
        }
    }
    Ok(())
}

fn write_grid_outputs(
    cfg: &RunConfig,
    cells: &[evaluation::GridCell],
    report_json: Value,
    stdout: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let summary = csv_text(cfg, &evaluation::SUMMARY_COLUMNS, &evaluation::summary_rows(cells));
    if let Some(p) = &cfg.report_json {
        write_file(p, to_json(&report_json).as_bytes())?;
    }
    match &cfg.summary_csv {
        Some(p) => write_file(p, summary.as_bytes())?,
        None => stdout.write_all(summary.as_bytes())?,
    }
    if let Some(dir) = &cfg.roc_dir {
        for cell in cells {
            if let Some(roc) = &cell.pooled_roc {
                let text = format!("{}{}", cfg.digest_comment(), roc.to_csv());
                write_file(&dir.join(roc_file_name(&cell.classifier, &cell.imputer)), text.as_bytes())?;
            }
        }
    }
    Ok(())
}

/// Parses the command line, runs it, and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let result = parse_config(cli.command.flags()).map_err(CliError::from).and_then(|cfg| execute(&cli.command, &cfg, stdout, stderr));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}
