//! Mean, k-nearest-neighbour and EM (multivariate normal) imputation.
//!
//! Every imputer copies observed cells unchanged and only fills cells whose
//! mask entry is false. Missing slots of the input are never read.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::numerics::{cholesky_logdet, cholesky_solve, cholesky_spd, cholesky_with_ridge, Matrix, NumericsError};

const RIDGE_ESCALATIONS: usize = 3;
const LOG_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImputeError {
    #[error("feature {0} has no observed values")]
    EmptyColumn(usize),
    #[error("dimension mismatch: model has {expected} features, data has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("EM needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

impl ImputeError {
    pub fn kind(&self) -> &'static str {
        match self {
            ImputeError::EmptyColumn(_) => "EmptyColumn",
            ImputeError::DimensionMismatch { .. } => "DimensionMismatch",
            ImputeError::TooFewRows(_) => "TooFewRows",
            ImputeError::InvalidK => "InvalidK",
            ImputeError::NumericalBreakdown(_) => "NumericalBreakdown",
        }
    }
}

fn observed_mean(ds: &Dataset, j: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..ds.n() {
        if let Some(v) = ds.value(i, j) {
            sum += v;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

fn check_dims(expected: usize, target: &Dataset) -> Result<(), ImputeError> {
    if target.d() != expected {
        return Err(ImputeError::DimensionMismatch { expected, found: target.d() });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Mean

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub column_means: Vec<f64>,
}

pub fn fit_mean(train: &Dataset) -> Result<MeanModel, ImputeError> {
    let column_means = (0..train.d()).map(|j| observed_mean(train, j).ok_or(ImputeError::EmptyColumn(j))).collect::<Result<_, _>>()?;
    Ok(MeanModel { column_means })
}

impl MeanModel {
    pub fn impute(&self, target: &Dataset) -> Result<Matrix, ImputeError> {
        check_dims(self.column_means.len(), target)?;
        let mut out = Matrix::zeros(target.n(), target.d());
        for i in 0..target.n() {
            for j in 0..target.d() {
                out[(i, j)] = target.value(i, j).unwrap_or(self.column_means[j]);
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// EM

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub ridge: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-6, max_iter: 500, ridge: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmModel {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    pub iterations_run: usize,
    pub final_loglik: f64,
    pub converged: bool,
    /// Ridge actually added to the covariance (after any escalation).
    pub ridge: f64,
    /// Objective value after initialization and after each iteration.
    pub loglik_trace: Vec<f64>,
}

/// Observed coordinates of each row, computed once.
struct RowPatterns {
    observed: Vec<Vec<usize>>,
    missing: Vec<Vec<usize>>,
}

impl RowPatterns {
    fn new(ds: &Dataset) -> Self {
        let (n, d) = (ds.n(), ds.d());
        let mut observed = Vec::with_capacity(n);
        let mut missing = Vec::with_capacity(n);
        for i in 0..n {
            let (o, m): (Vec<usize>, Vec<usize>) = (0..d).partition(|&j| ds.is_observed(i, j));
            observed.push(o);
            missing.push(m);
        }
        RowPatterns { observed, missing }
    }
}

/// Observed-data log-likelihood `Σᵢ log N(x_{i,o}; μ_o, Σ_oo)`.
pub fn observed_loglik(ds: &Dataset, mu: &[f64], sigma: &Matrix) -> Result<f64, NumericsError> {
    let pats = RowPatterns::new(ds);
    observed_loglik_with(ds, &pats, mu, sigma)
}

fn observed_loglik_with(ds: &Dataset, pats: &RowPatterns, mu: &[f64], sigma: &Matrix) -> Result<f64, NumericsError> {
    let mut total = 0.0;
    for i in 0..ds.n() {
        let o = &pats.observed[i];
        if o.is_empty() {
            continue;
        }
        let s_oo = sigma.select(o, o);
        let l = cholesky_spd(&s_oo)?;
        let r: Vec<f64> = o.iter().map(|&j| ds.value(i, j).expect("observed") - mu[j]).collect();
        let z = cholesky_solve(&l, &r)?;
        let quad: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        total += -0.5 * (o.len() as f64 * LOG_2PI + cholesky_logdet(&l) + quad);
    }
    Ok(total)
}

/// Ridge-penalized objective `ℓ_obs − (n/2)·ridge·tr(Σ⁻¹)`. The ridge M-step
/// `Σ = S + ridge·I` is its exact maximizer, so EM ascends this quantity.
fn penalized_objective(ds: &Dataset, pats: &RowPatterns, mu: &[f64], sigma: &Matrix, ridge: f64) -> Result<f64, NumericsError> {
    let ll = observed_loglik_with(ds, pats, mu, sigma)?;
    if ridge == 0.0 {
        return Ok(ll);
    }
    let l = cholesky_spd(sigma)?;
    let inv = crate::numerics::cholesky_inverse(&l);
    let trace: f64 = (0..sigma.rows()).map(|j| inv[(j, j)]).sum();
    Ok(ll - 0.5 * ds.n() as f64 * ridge * trace)
}

/// Conditional distribution of the missing block given the observed block.
/// Returns the conditional mean of the missing coordinates and, if asked,
/// the conditional covariance `Σ_mm − Σ_mo Σ_oo⁻¹ Σ_om`.
fn conditional(
    row: &[f64],
    o: &[usize],
    m: &[usize],
    mu: &[f64],
    sigma: &Matrix,
    want_cov: bool,
) -> Result<(Vec<f64>, Option<Matrix>), NumericsError> {
    if o.is_empty() {
        let mean = m.iter().map(|&j| mu[j]).collect();
        let cov = want_cov.then(|| sigma.select(m, m));
        return Ok((mean, cov));
    }
    let l = cholesky_spd(&sigma.select(o, o))?;
    let r: Vec<f64> = o.iter().map(|&j| row[j] - mu[j]).collect();
    let z = cholesky_solve(&l, &r)?;
    let s_mo = sigma.select(m, o);
    let mean: Vec<f64> = m.iter().enumerate().map(|(a, &j)| mu[j] + crate::numerics::dot(s_mo.row(a), &z)).collect();
    let cov = if want_cov {
        let mut c = sigma.select(m, m);
        for a in 0..m.len() {
            let w = cholesky_solve(&l, s_mo.row(a))?;
            for b in 0..m.len() {
                c[(b, a)] -= crate::numerics::dot(s_mo.row(b), &w);
            }
        }
        for a in 0..m.len() {
            for b in 0..a {
                let v = 0.5 * (c[(a, b)] + c[(b, a)]);
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        Some(c)
    } else {
        None
    };
    Ok((mean, cov))
}

fn breakdown(e: NumericsError) -> ImputeError {
    ImputeError::NumericalBreakdown(e.to_string())
}

/// Adds ridge to a raw covariance, escalating it when needed, and returns
/// the PD result and the ridge used.
fn regularize(raw: &Matrix, ridge: f64) -> Result<(Matrix, f64), ImputeError> {
    let (_, used) = cholesky_with_ridge(raw, ridge, RIDGE_ESCALATIONS).map_err(breakdown)?;
    let mut s = raw.clone();
    s.add_diagonal(used);
    Ok((s, used))
}

pub fn fit_em(train: &Dataset, opts: &EmOptions) -> Result<EmModel, ImputeError> {
    let (n, d) = (train.n(), train.d());
    if n < 2 {
        return Err(ImputeError::TooFewRows(n));
    }
    let init = fit_mean(train)?;
    let pats = RowPatterns::new(train);

    // initial Σ: MLE covariance of the mean-completed data
    let completed = init.impute(train)?;
    let mu = init.column_means.clone();
    let mut raw = Matrix::zeros(d, d);
    for i in 0..n {
        let row = completed.row(i);
        for a in 0..d {
            for b in 0..=a {
                raw[(a, b)] += (row[a] - mu[a]) * (row[b] - mu[b]);
            }
        }
    }
    symmetrize_scaled(&mut raw, n as f64);
    let (mut sigma, mut ridge) = regularize(&raw, opts.ridge)?;
    let mut mu = mu;
    let mut objective = penalized_objective(train, &pats, &mu, &sigma, ridge).map_err(breakdown)?;
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (new_mu, new_raw) = em_step(train, &pats, &mu, &sigma)?;
        let (new_sigma, new_ridge) = regularize(&new_raw, ridge)?;
        let new_objective = penalized_objective(train, &pats, &new_mu, &new_sigma, new_ridge).map_err(breakdown)?;
        let improvement = new_objective - objective;
        mu = new_mu;
        sigma = new_sigma;
        ridge = new_ridge;
        objective = new_objective;
        trace.push(objective);
        if improvement < opts.tol {
            converged = true;
            break;
        }
    }
    let final_loglik = observed_loglik_with(train, &pats, &mu, &sigma).map_err(breakdown)?;
    if !final_loglik.is_finite() {
        return Err(ImputeError::NumericalBreakdown("log-likelihood is not finite".into()));
    }
    Ok(EmModel { mu, sigma, iterations_run: iterations, final_loglik, converged, ridge, loglik_trace: trace })
}

/// Fills the upper triangle from the lower one and divides by `denom`.
fn symmetrize_scaled(m: &mut Matrix, denom: f64) {
    let d = m.rows();
    for a in 0..d {
        for b in 0..=a {
            let v = m[(a, b)] / denom;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

/// One E-step + M-step. Returns the new mean and the un-ridged covariance.
fn em_step(ds: &Dataset, pats: &RowPatterns, mu: &[f64], sigma: &Matrix) -> Result<(Vec<f64>, Matrix), ImputeError> {
    let (n, d) = (ds.n(), ds.d());
    let mut completed = Matrix::zeros(n, d);
    let mut correction = Matrix::zeros(d, d);
    for i in 0..n {
        let (o, m) = (&pats.observed[i], &pats.missing[i]);
        let row: Vec<f64> = (0..d).map(|j| ds.value(i, j).unwrap_or(0.0)).collect();
        let out = completed.row_mut(i);
        for &j in o {
            out[j] = row[j];
        }
        if m.is_empty() {
            continue;
        }
        let (mean, cov) = conditional(&row, o, m, mu, sigma, true).map_err(breakdown)?;
        let cov = cov.expect("requested");
        for (a, &j) in m.iter().enumerate() {
            out[j] = mean[a];
            for (b, &k) in m.iter().enumerate() {
                correction[(j, k)] += cov[(a, b)];
            }
        }
    }
    let mut new_mu = vec![0.0; d];
    for i in 0..n {
        for (acc, v) in new_mu.iter_mut().zip(completed.row(i)) {
            *acc += v;
        }
    }
    new_mu.iter_mut().for_each(|v| *v /= n as f64);
    let mut raw = Matrix::zeros(d, d);
    for i in 0..n {
        let row = completed.row(i);
        for a in 0..d {
            for b in 0..=a {
                raw[(a, b)] += (row[a] - new_mu[a]) * (row[b] - new_mu[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            raw[(a, b)] += 0.5 * (correction[(a, b)] + correction[(b, a)]);
        }
    }
    symmetrize_scaled(&mut raw, n as f64);
    Ok((new_mu, raw))
}

impl EmModel {
    /// Conditional-mean imputation under `N(μ, Σ)`.
    pub fn impute(&self, target: &Dataset) -> Result<Matrix, ImputeError> {
        let d = self.mu.len();
        check_dims(d, target)?;
        let mut out = Matrix::zeros(target.n(), d);
        for i in 0..target.n() {
            let (o, m): (Vec<usize>, Vec<usize>) = (0..d).partition(|&j| target.is_observed(i, j));
            let row: Vec<f64> = (0..d).map(|j| target.value(i, j).unwrap_or(0.0)).collect();
            let dst = out.row_mut(i);
            for &j in &o {
                dst[j] = row[j];
            }
            if m.is_empty() {
                continue;
            }
            let (mean, _) = conditional(&row, &o, &m, &self.mu, &self.sigma, false).map_err(breakdown)?;
            for (a, &j) in m.iter().enumerate() {
                dst[j] = mean[a];
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// KNN

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub reference: Dataset,
}

impl KnnModel {
    pub fn new(reference: Dataset, k: usize) -> Result<Self, ImputeError> {
        if k == 0 {
            return Err(ImputeError::InvalidK);
        }
        Ok(KnnModel { k, reference })
    }

    pub fn impute(&self, target: &Dataset) -> Result<Matrix, ImputeError> {
        impute_knn(&self.reference, target, self.k)
    }
}

/// Per-feature standardization taken from the reference rows: observed mean
/// and sample standard deviation (1 when fewer than two values or zero
/// spread).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn from_observed(ds: &Dataset) -> Self {
        let d = ds.d();
        let mut means = vec![0.0; d];
        let mut scales = vec![1.0; d];
        for j in 0..d {
            let col = ds.observed_column(j);
            if col.is_empty() {
                continue;
            }
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            means[j] = mean;
            if col.len() > 1 {
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (col.len() - 1) as f64;
                let sd = var.sqrt();
                if sd > 0.0 {
                    scales[j] = sd;
                }
            }
        }
        Standardizer { means, scales }
    }
}

/// Partial distance between two rows: standardized Euclidean over features
/// observed in both, rescaled by `d / |S|`. `None` when no feature is shared.
pub fn partial_distance(a: &[Option<f64>], b: &[Option<f64>], std: &Standardizer) -> Option<f64> {
    let d = a.len();
    let mut shared = 0usize;
    let mut sum = 0.0;
    for j in 0..d {
        if let (Some(x), Some(y)) = (a[j], b[j]) {
            let diff = (x - y) / std.scales[j];
            sum += diff * diff;
            shared += 1;
        }
    }
    (shared > 0).then(|| (d as f64 / shared as f64 * sum).sqrt())
}

fn row_options(ds: &Dataset, i: usize) -> Vec<Option<f64>> {
    (0..ds.d()).map(|j| ds.value(i, j)).collect()
}

/// k-nearest-neighbour imputation of `target` using donors from `reference`.
pub fn impute_knn(reference: &Dataset, target: &Dataset, k: usize) -> Result<Matrix, ImputeError> {
    if k == 0 {
        return Err(ImputeError::InvalidK);
    }
    let d = reference.d();
    check_dims(d, target)?;
    let std = Standardizer::from_observed(reference);
    let ref_rows: Vec<Vec<Option<f64>>> = (0..reference.n()).map(|r| row_options(reference, r)).collect();
    let fallback: Vec<Option<f64>> = (0..d).map(|j| observed_mean(reference, j)).collect();

    let mut out = Matrix::zeros(target.n(), d);
    for i in 0..target.n() {
        let row = row_options(target, i);
        let dst = out.row_mut(i);
        if row.iter().all(Option::is_some) {
            for (x, v) in dst.iter_mut().zip(&row) {
                *x = v.expect("observed");
            }
            continue;
        }
        let distances: Vec<Option<f64>> = ref_rows.iter().map(|r| partial_distance(&row, r, &std)).collect();
        for j in 0..d {
            if let Some(v) = row[j] {
                dst[j] = v;
                continue;
            }
            let mut donors: Vec<(f64, usize)> = distances
                .iter()
                .enumerate()
                .filter_map(|(r, dist)| match (dist, ref_rows[r][j]) {
                    (Some(dist), Some(_)) => Some((*dist, r)),
                    _ => None,
                })
                .collect();
            if donors.is_empty() {
                dst[j] = fallback[j].ok_or(ImputeError::EmptyColumn(j))?;
                continue;
            }
            donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let take = donors.len().min(k);
            let sum: f64 = donors[..take].iter().map(|&(_, r)| ref_rows[r][j].expect("donor")).sum();
            dst[j] = sum / take as f64;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Specs

/// Which imputer to fit, with its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImputerSpec {
    Mean,
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Em {
        #[serde(default = "default_em_tol")]
        tol: f64,
        #[serde(default = "default_em_max_iter")]
        max_iter: usize,
        #[serde(default = "default_em_ridge")]
        ridge: f64,
    },
}

fn default_k() -> usize {
    3
}
fn default_em_tol() -> f64 {
    EmOptions::default().tol
}
fn default_em_max_iter() -> usize {
    EmOptions::default().max_iter
}
fn default_em_ridge() -> f64 {
    EmOptions::default().ridge
}

impl ImputerSpec {
    pub fn em_default() -> Self {
        let o = EmOptions::default();
        ImputerSpec::Em { tol: o.tol, max_iter: o.max_iter, ridge: o.ridge }
    }

    /// Short name used in reports and stream keys.
    pub fn name(&self) -> String {
        match self {
            ImputerSpec::Mean => "MI".to_string(),
            ImputerSpec::Knn { k } if *k == 3 => "KNN".to_string(),
            ImputerSpec::Knn { k } => format!("KNN{k}"),
            ImputerSpec::Em { .. } => "EM".to_string(),
        }
    }

    pub fn fit(&self, train: &Dataset) -> Result<FittedImputer, ImputeError> {
        Ok(match self {
            ImputerSpec::Mean => FittedImputer::Mean(fit_mean(train)?),
            ImputerSpec::Knn { k } => FittedImputer::Knn(KnnModel::new(train.clone(), *k)?),
            ImputerSpec::Em { tol, max_iter, ridge } => {
                FittedImputer::Em(fit_em(train, &EmOptions { tol: *tol, max_iter: *max_iter, ridge: *ridge })?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedImputer {
    Mean(MeanModel),
    Knn(KnnModel),
    Em(EmModel),
}

impl FittedImputer {
    pub fn impute(&self, target: &Dataset) -> Result<Matrix, ImputeError> {
        match self {
            FittedImputer::Mean(m) => m.impute(target),
            FittedImputer::Knn(m) => m.impute(target),
            FittedImputer::Em(m) => m.impute(target),
        }
    }
}
