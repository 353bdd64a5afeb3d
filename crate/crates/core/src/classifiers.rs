//! Logistic regression, Gaussian naive Bayes, linear discriminant analysis
//! and an SMO-trained support vector machine behind one scoring contract:
//! a larger score means "more positive", and the label is 1 iff score ≥ 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{cholesky_inverse, cholesky_solve, cholesky_spd, cholesky_with_ridge, dot, Matrix, NumericsError};

const RIDGE_ESCALATIONS: usize = 3;
const MAX_HALVINGS: usize = 30;
const SMO_MAX_UPDATES: usize = 100_000;
const SMO_TAU: f64 = 1e-12;

#[derive(Debug, Clone, Error)]
pub enum ClassifierError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("did not converge ({detail})")]
    DidNotConverge { model: Box<TrainedClassifier>, detail: String },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

impl ClassifierError {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassifierError::SingleClass => "SingleClass",
            ClassifierError::DidNotConverge { .. } => "DidNotConverge",
            ClassifierError::NumericalBreakdown(_) => "NumericalBreakdown",
            ClassifierError::DimensionMismatch(_) => "DimensionMismatch",
            ClassifierError::InvalidOption(_) => "InvalidOption",
        }
    }
}

fn check_training(x: &Matrix, y: &[u8]) -> Result<(), ClassifierError> {
    if y.len() != x.rows() {
        return Err(ClassifierError::DimensionMismatch(format!("{} labels for {} rows", y.len(), x.rows())));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(ClassifierError::SingleClass);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Options

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticOptions {
    #[serde(default = "LogisticOptions::default_l2")]
    pub l2: f64,
    #[serde(default = "LogisticOptions::default_tol")]
    pub tol: f64,
    #[serde(default = "LogisticOptions::default_max_iter")]
    pub max_iter: usize,
}

impl LogisticOptions {
    fn default_l2() -> f64 {
        1e-4
    }
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_max_iter() -> usize {
        100
    }
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { l2: 1e-4, tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaiveBayesOptions {
    /// Variance floor as a fraction of the largest feature variance.
    #[serde(default = "NaiveBayesOptions::default_var_smoothing")]
    pub var_smoothing: f64,
}

impl NaiveBayesOptions {
    fn default_var_smoothing() -> f64 {
        1e-9
    }
}

impl Default for NaiveBayesOptions {
    fn default() -> Self {
        NaiveBayesOptions { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaOptions {
    #[serde(default = "LdaOptions::default_ridge")]
    pub ridge: f64,
}

impl LdaOptions {
    fn default_ridge() -> f64 {
        1e-6
    }
}

impl Default for LdaOptions {
    fn default() -> Self {
        LdaOptions { ridge: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmOptions {
    #[serde(default = "SvmOptions::default_c", alias = "C")]
    pub c: f64,
    #[serde(default = "SvmOptions::default_kernel")]
    pub kernel: KernelKind,
    /// RBF width; `None` means `1 / d` for the training dimension.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "SvmOptions::default_tol")]
    pub tol: f64,
    #[serde(default = "SvmOptions::default_max_passes")]
    pub max_passes: usize,
}

impl SvmOptions {
    fn default_c() -> f64 {
        1.0
    }
    fn default_kernel() -> KernelKind {
        KernelKind::Rbf
    }
    fn default_tol() -> f64 {
        1e-3
    }
    fn default_max_passes() -> usize {
        10
    }
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions { c: 1.0, kernel: KernelKind::Rbf, gamma: None, tol: 1e-3, max_passes: 10 }
    }
}

/// Which classifier to train, with its options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Logistic(#[serde(default)] LogisticOptions),
    NaiveBayes(#[serde(default)] NaiveBayesOptions),
    Lda(#[serde(default)] LdaOptions),
    Svm(#[serde(default)] SvmOptions),
}

impl ClassifierSpec {
    pub fn all_default() -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::Logistic(LogisticOptions::default()),
            ClassifierSpec::NaiveBayes(NaiveBayesOptions::default()),
            ClassifierSpec::Lda(LdaOptions::default()),
            ClassifierSpec::Svm(SvmOptions::default()),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Logistic(_) => "logistic",
            ClassifierSpec::NaiveBayes(_) => "naive_bayes",
            ClassifierSpec::Lda(_) => "lda",
            ClassifierSpec::Svm(_) => "svm",
        }
    }

    pub fn train(&self, x: &Matrix, y: &[u8]) -> Result<TrainedClassifier, ClassifierError> {
        match self {
            ClassifierSpec::Logistic(o) => train_logistic(x, y, o),
            ClassifierSpec::NaiveBayes(o) => train_gaussian_nb(x, y, o),
            ClassifierSpec::Lda(o) => train_lda(x, y, o),
            ClassifierSpec::Svm(o) => train_svm_smo(x, y, o),
        }
    }
}

// ---------------------------------------------------------------------------
// Trained models

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }

    pub fn gram(&self, x: &Matrix) -> Matrix {
        let n = x.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(x.row(i), x.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Logistic {
        weights: Vec<f64>,
        intercept: f64,
        iterations: usize,
        gradient_norm: f64,
    },
    NaiveBayes {
        priors: [f64; 2],
        means: [Vec<f64>; 2],
        variances: [Vec<f64>; 2],
        var_floor: f64,
    },
    Lda {
        sigma: Matrix,
        means: [Vec<f64>; 2],
        priors: [f64; 2],
        ridge: f64,
        /// `Σ⁻¹(μ₁ − μ₀)`
        coef: Vec<f64>,
        intercept: f64,
    },
    Svm {
        kernel: Kernel,
        /// `αᵢ·yᵢ` for each support vector.
        dual_coef: Vec<f64>,
        support_vectors: Matrix,
        bias: f64,
        c: f64,
        converged: bool,
    },
}

impl TrainedClassifier {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedClassifier::Logistic { .. } => "logistic",
            TrainedClassifier::NaiveBayes { .. } => "naive_bayes",
            TrainedClassifier::Lda { .. } => "lda",
            TrainedClassifier::Svm { .. } => "svm",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedClassifier::Logistic { weights, .. } => weights.len(),
            TrainedClassifier::NaiveBayes { means, .. } => means[0].len(),
            TrainedClassifier::Lda { coef, .. } => coef.len(),
            TrainedClassifier::Svm { support_vectors, .. } => support_vectors.cols(),
        }
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match self {
            TrainedClassifier::Logistic { weights, intercept, .. } => dot(weights, row) + intercept,
            TrainedClassifier::NaiveBayes { priors, means, variances, .. } => {
                let mut s = (priors[1] / priors[0]).ln();
                for (j, &v) in row.iter().enumerate() {
                    s += log_normal(v, means[1][j], variances[1][j]) - log_normal(v, means[0][j], variances[0][j]);
                }
                s
            }
            TrainedClassifier::Lda { coef, intercept, .. } => dot(coef, row) + intercept,
            TrainedClassifier::Svm { kernel, dual_coef, support_vectors, bias, .. } => {
                dual_coef.iter().enumerate().map(|(s, a)| a * kernel.eval(support_vectors.row(s), row)).sum::<f64>() + bias
            }
        }
    }
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

pub fn predict_score(model: &TrainedClassifier, x: &Matrix) -> Result<Vec<f64>, ClassifierError> {
    if x.cols() != model.dim() {
        return Err(ClassifierError::DimensionMismatch(format!("model expects {} features, input has {}", model.dim(), x.cols())));
    }
    Ok((0..x.rows()).map(|i| model.score_row(x.row(i))).collect())
}

pub fn label_from_score(score: f64) -> u8 {
    u8::from(score >= 0.0)
}

pub fn predict_label(model: &TrainedClassifier, x: &Matrix) -> Result<Vec<u8>, ClassifierError> {
    Ok(predict_score(model, x)?.into_iter().map(label_from_score).collect())
}

// ---------------------------------------------------------------------------
// Logistic regression

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized log-likelihood `Σ[yᵢzᵢ − log(1+e^{zᵢ})] − ½·l2·‖w‖²`.
pub fn logistic_objective(x: &Matrix, y: &[u8], weights: &[f64], intercept: f64, l2: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.rows() {
        let z = dot(x.row(i), weights) + intercept;
        ll += f64::from(y[i]) * z - softplus(z);
    }
    ll - 0.5 * l2 * dot(weights, weights)
}

/// Gradient of [`logistic_objective`]: `(∂/∂w, ∂/∂b)`.
pub fn logistic_gradient(x: &Matrix, y: &[u8], weights: &[f64], intercept: f64, l2: f64) -> (Vec<f64>, f64) {
    let d = x.cols();
    let mut gw: Vec<f64> = weights.iter().map(|w| -l2 * w).collect();
    let mut gb = 0.0;
    for i in 0..x.rows() {
        let r = f64::from(y[i]) - sigmoid(dot(x.row(i), weights) + intercept);
        let row = x.row(i);
        for j in 0..d {
            gw[j] += r * row[j];
        }
        gb += r;
    }
    (gw, gb)
}

fn inf_norm(gw: &[f64], gb: f64) -> f64 {
    gw.iter().fold(gb.abs(), |m, v| m.max(v.abs()))
}

/// Newton ascent on the L2-penalized Bernoulli log-likelihood with
/// step-halving. The intercept is not penalized.
pub fn train_logistic(x: &Matrix, y: &[u8], opts: &LogisticOptions) -> Result<TrainedClassifier, ClassifierError> {
    check_training(x, y)?;
    if !(opts.l2 >= 0.0 && opts.tol > 0.0) {
        return Err(ClassifierError::InvalidOption("logistic l2 must be ≥ 0 and tol > 0".into()));
    }
    let (n, d) = (x.rows(), x.cols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut obj = logistic_objective(x, y, &w, b, opts.l2);
    let (mut gw, mut gb) = logistic_gradient(x, y, &w, b, opts.l2);
    let mut iterations = 0;
    let build = |w: &[f64], b: f64, iterations: usize, gnorm: f64| TrainedClassifier::Logistic {
        weights: w.to_vec(),
        intercept: b,
        iterations,
        gradient_norm: gnorm,
    };

    while inf_norm(&gw, gb) > opts.tol {
        if iterations >= opts.max_iter {
            let gnorm = inf_norm(&gw, gb);
            return Err(ClassifierError::DidNotConverge {
                model: Box::new(build(&w, b, iterations, gnorm)),
                detail: format!("gradient inf-norm {gnorm:e} after {iterations} Newton steps"),
            });
        }
        iterations += 1;
        // negative Hessian over (w, b)
        let mut h = Matrix::zeros(d + 1, d + 1);
        for i in 0..n {
            let p = sigmoid(dot(x.row(i), &w) + b);
            let weight = p * (1.0 - p);
            let row = x.row(i);
            for a in 0..=d {
                let xa = if a < d { row[a] } else { 1.0 };
                for c in 0..=a {
                    let xc = if c < d { row[c] } else { 1.0 };
                    h[(a, c)] += weight * xa * xc;
                }
            }
        }
        for a in 0..=d {
            for c in 0..a {
                h[(c, a)] = h[(a, c)];
            }
        }
        for j in 0..d {
            h[(j, j)] += opts.l2;
        }
        let mut g = gw.clone();
        g.push(gb);
        let step = match cholesky_spd(&h) {
            Ok(l) => cholesky_solve(&l, &g),
            Err(_) => {
                let scale = (0..=d).fold(0.0_f64, |m, a| m.max(h[(a, a)])).max(1.0);
                let (l, _) = cholesky_with_ridge(&h, 1e-12 * scale, 6).map_err(|e| ClassifierError::NumericalBreakdown(e.to_string()))?;
                cholesky_solve(&l, &g)
            }
        }
        .map_err(|e: NumericsError| ClassifierError::NumericalBreakdown(e.to_string()))?;

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand_w: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi + t * si).collect();
            let cand_b = b + t * step[d];
            let cand_obj = logistic_objective(x, y, &cand_w, cand_b, opts.l2);
            if cand_obj >= obj {
                w = cand_w;
                b = cand_b;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        (gw, gb) = logistic_gradient(x, y, &w, b, opts.l2);
        if !accepted {
            let gnorm = inf_norm(&gw, gb);
            if gnorm <= opts.tol {
                break;
            }
            return Err(ClassifierError::DidNotConverge {
                model: Box::new(build(&w, b, iterations, gnorm)),
                detail: format!("no ascent step after {MAX_HALVINGS} halvings (gradient inf-norm {gnorm:e})"),
            });
        }
    }
    Ok(build(&w, b, iterations, inf_norm(&gw, gb)))
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

fn class_rows(y: &[u8], class: u8) -> Vec<usize> {
    y.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect()
}

fn column_means(x: &Matrix, rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for &i in rows {
        for (acc, v) in m.iter_mut().zip(x.row(i)) {
            *acc += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= rows.len() as f64);
    m
}

pub fn train_gaussian_nb(x: &Matrix, y: &[u8], opts: &NaiveBayesOptions) -> Result<TrainedClassifier, ClassifierError> {
    check_training(x, y)?;
    let (n, d) = (x.rows(), x.cols());
    let all: Vec<usize> = (0..n).collect();
    let overall = column_means(x, &all);
    let max_var = (0..d).map(|j| all.iter().map(|&i| (x[(i, j)] - overall[j]).powi(2)).sum::<f64>() / n as f64).fold(0.0_f64, f64::max);
    let var_floor = if max_var > 0.0 { opts.var_smoothing * max_var } else { opts.var_smoothing };

    let mut priors = [0.0; 2];
    let mut means: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut variances: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for class in 0..2u8 {
        let rows = class_rows(y, class);
        let c = usize::from(class);
        priors[c] = rows.len() as f64 / n as f64;
        let mu = column_means(x, &rows);
        variances[c] =
            (0..d).map(|j| rows.iter().map(|&i| (x[(i, j)] - mu[j]).powi(2)).sum::<f64>() / rows.len() as f64 + var_floor).collect();
        means[c] = mu;
    }
    Ok(TrainedClassifier::NaiveBayes { priors, means, variances, var_floor })
}

// ---------------------------------------------------------------------------
// LDA

pub fn train_lda(x: &Matrix, y: &[u8], opts: &LdaOptions) -> Result<TrainedClassifier, ClassifierError> {
    check_training(x, y)?;
    let (n, d) = (x.rows(), x.cols());
    let mut priors = [0.0; 2];
    let mut means: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut scatter = Matrix::zeros(d, d);
    for class in 0..2u8 {
        let rows = class_rows(y, class);
        let c = usize::from(class);
        priors[c] = rows.len() as f64 / n as f64;
        let mu = column_means(x, &rows);
        for &i in &rows {
            let row = x.row(i);
            for a in 0..d {
                for b in 0..=a {
                    scatter[(a, b)] += (row[a] - mu[a]) * (row[b] - mu[b]);
                }
            }
        }
        means[c] = mu;
    }
    let denom = (n as f64 - 2.0).max(1.0);
    for a in 0..d {
        for b in 0..=a {
            let v = scatter[(a, b)] / denom;
            scatter[(a, b)] = v;
            scatter[(b, a)] = v;
        }
    }
    let (l, ridge) = cholesky_with_ridge(&scatter, opts.ridge, RIDGE_ESCALATIONS)
        .map_err(|e| ClassifierError::NumericalBreakdown(format!("pooled covariance: {e}")))?;
    let mut sigma = scatter;
    sigma.add_diagonal(ridge);
    let inv = cholesky_inverse(&l);
    let diff: Vec<f64> = means[1].iter().zip(&means[0]).map(|(a, b)| a - b).collect();
    let coef = inv.matvec(&diff).expect("square");
    let quad = |mu: &[f64]| dot(mu, &inv.matvec(mu).expect("square"));
    let intercept = -0.5 * (quad(&means[1]) - quad(&means[0])) + (priors[1] / priors[0]).ln();
    Ok(TrainedClassifier::Lda { sigma, means, priors, ridge, coef, intercept })
}

// ---------------------------------------------------------------------------
// SVM via SMO

/// Dual solution from [`smo_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub updates: usize,
    pub converged: bool,
    /// Dual objective `Σα − ½ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ` at the solution.
    pub dual_objective: f64,
    /// Dual objective after each accepted pair update (index 0 = start).
    pub objective_trace: Vec<f64>,
}

/// Dual objective for labels `y ∈ {−1, +1}`.
pub fn svm_dual_objective(k: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

struct SmoState<'a> {
    k: &'a Matrix,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    /// gradient of ½αᵀQα − eᵀα
    grad: Vec<f64>,
}

impl SmoState<'_> {
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.k[(i, j)]
    }

    fn in_up(&self, i: usize) -> bool {
        (self.y[i] > 0.0 && self.alpha[i] < self.c) || (self.y[i] < 0.0 && self.alpha[i] > 0.0)
    }

    fn in_low(&self, i: usize) -> bool {
        (self.y[i] > 0.0 && self.alpha[i] > 0.0) || (self.y[i] < 0.0 && self.alpha[i] < self.c)
    }

    /// `yᵢ − gᵢ`, the bias that would put point i exactly on its margin.
    fn margin_bias(&self, i: usize) -> f64 {
        -self.y[i] * self.grad[i]
    }

    /// Maximal violating pair `(i, j, m, M)`; `i` maximizes the margin bias
    /// over the "up" set, `j` minimizes it over the "low" set.
    fn select_pair(&self) -> Option<(usize, usize, f64, f64)> {
        let n = self.alpha.len();
        let mut best_i = None;
        let mut m = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let v = self.margin_bias(t);
            if self.in_up(t) && v > m {
                m = v;
                best_i = Some(t);
            }
            if self.in_low(t) && v < big_m {
                big_m = v;
                best_j = Some(t);
            }
        }
        Some((best_i?, best_j?, m, big_m))
    }

    fn recompute_gradient(&mut self) {
        let n = self.alpha.len();
        for i in 0..n {
            let mut g = -1.0;
            for j in 0..n {
                if self.alpha[j] != 0.0 {
                    g += self.q(i, j) * self.alpha[j];
                }
            }
            self.grad[i] = g;
        }
    }

    /// Analytic update of the pair with box clipping.
    fn update_pair(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        if self.y[i] != self.y[j] {
            let mut quad = self.q(i, i) + self.q(j, j) + 2.0 * self.q(i, j);
            if quad <= 0.0 {
                quad = SMO_TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j);
            if quad <= 0.0 {
                quad = SMO_TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..self.alpha.len() {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    fn bias(&self, m: f64, big_m: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.alpha.len() {
            if self.alpha[i] > 0.0 && self.alpha[i] < self.c {
                sum += self.margin_bias(i);
                count += 1;
            }
        }
        if count > 0 {
            sum / count as f64
        } else {
            0.5 * (m + big_m)
        }
    }

    fn objective(&self) -> f64 {
        // f = ½αᵀQα − eᵀα = ½Σαᵢ(gᵢ − 1); dual = −f
        -0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    }

    /// Largest per-point KKT violation, in units of `|yᵢf(xᵢ) − 1|`.
    fn max_violation(&self, bias: f64) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.alpha.len() {
            let v = self.margin_bias(i);
            if self.in_up(i) {
                worst = worst.max(v - bias);
            }
            if self.in_low(i) {
                worst = worst.max(bias - v);
            }
        }
        worst
    }
}

/// Solves the soft-margin SVM dual for the Gram matrix `k` and labels
/// `y ∈ {−1, +1}` by sequential minimal optimization.
pub fn smo_solve(k: &Matrix, y: &[f64], c: f64, tol: f64, max_passes: usize) -> SmoSolution {
    let n = y.len();
    let mut st = SmoState { k, y, c, alpha: vec![0.0; n], grad: vec![-1.0; n] };
    let mut trace = vec![0.0];
    let mut updates = 0;
    let mut clean_passes = 0;
    let mut converged = false;
    let mut bias = 0.0;
    loop {
        let Some((i, j, m, big_m)) = st.select_pair() else {
            converged = true;
            break;
        };
        if m - big_m <= tol {
            // verification sweep against a gradient recomputed from α, so
            // drift in the incremental updates cannot fake convergence
            st.recompute_gradient();
            let (_, _, m, big_m) = st.select_pair().expect("sets unchanged by recompute");
            bias = st.bias(m, big_m);
            if st.max_violation(bias) <= tol {
                clean_passes += 1;
                if clean_passes >= max_passes.max(1) {
                    converged = true;
                    break;
                }
            } else if m - big_m <= tol {
                // free-vector average drifted out of [M, m]; the midpoint
                // is within tol of every margin
                bias = 0.5 * (m + big_m);
                converged = true;
                break;
            } else {
                clean_passes = 0;
            }
            continue;
        }
        clean_passes = 0;
        if updates >= SMO_MAX_UPDATES {
            bias = st.bias(m, big_m);
            break;
        }
        st.update_pair(i, j);
        updates += 1;
        trace.push(st.objective());
    }
    st.recompute_gradient();
    let dual_objective = svm_dual_objective(k, y, &st.alpha);
    SmoSolution { alpha: st.alpha, bias, updates, converged, dual_objective, objective_trace: trace }
}

/// Per-point KKT violation of a dual solution, measured against the full
/// decision function `f(xᵢ) = Σⱼ αⱼyⱼKᵢⱼ + b`.
pub fn svm_kkt_violations(k: &Matrix, y: &[f64], alpha: &[f64], bias: f64, c: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[(i, j)]).sum::<f64>() + bias;
            let margin = y[i] * f;
            if alpha[i] <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if alpha[i] >= c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .collect()
}

pub fn train_svm_smo(x: &Matrix, y: &[u8], opts: &SvmOptions) -> Result<TrainedClassifier, ClassifierError> {
    check_training(x, y)?;
    if !(opts.c > 0.0 && opts.tol > 0.0) {
        return Err(ClassifierError::InvalidOption("svm C and tol must be positive".into()));
    }
    let kernel = match opts.kernel {
        KernelKind::Linear => Kernel::Linear,
        KernelKind::Rbf => {
            let gamma = opts.gamma.unwrap_or(1.0 / x.cols().max(1) as f64);
            if !(gamma > 0.0) {
                return Err(ClassifierError::InvalidOption("svm gamma must be positive".into()));
            }
            Kernel::Rbf { gamma }
        }
    };
    let signs: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let gram = kernel.gram(x);
    let sol = smo_solve(&gram, &signs, opts.c, opts.tol, opts.max_passes);
    let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let model = TrainedClassifier::Svm {
        kernel,
        dual_coef: sv.iter().map(|&i| sol.alpha[i] * signs[i]).collect(),
        support_vectors: x.select_rows(&sv),
        bias: sol.bias,
        c: opts.c,
        converged: sol.converged,
    };
    if !sol.converged {
        return Err(ClassifierError::DidNotConverge {
            model: Box::new(model),
            detail: format!("{} pair updates without meeting tol {}", sol.updates, opts.tol),
        });
    }
    Ok(model)
}
