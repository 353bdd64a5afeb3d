//! Dense SPD linear algebra, the Student-t tail probability and a seeded,
//! splittable random stream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

impl NumericsError {
    pub fn kind(&self) -> &'static str {
        match self {
            NumericsError::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            NumericsError::DimensionMismatch(_) => "DimensionMismatch",
            NumericsError::NotSymmetric { .. } => "NotSymmetric",
        }
    }
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!("{} entries for a {}x{} matrix", data.len(), rows, cols)));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    ///
    /// Panics if the rows are ragged; intended for literals and tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NumericsError> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if v.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!("{}x{} times vector of length {}", self.rows, self.cols, v.len())));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }

    /// Selects the sub-matrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = a`.
pub fn cholesky_spd(a: &Matrix) -> Result<Matrix, NumericsError> {
    if a.rows != a.cols {
        return Err(NumericsError::DimensionMismatch(format!("cholesky of a {}x{} matrix", a.rows, a.cols)));
    }
    let n = a.rows;
    if !a.is_symmetric(1e-10) {
        for i in 0..n {
            for j in 0..i {
                if a[(i, j)] != a[(j, i)] {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { index: j, pivot: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = l.rows;
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch(format!("right-hand side of length {} for a {}x{} system", b.len(), n, n)));
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// `log det(a)` from its Cholesky factor.
pub fn cholesky_logdet(l: &Matrix) -> f64 {
    (0..l.rows).map(|i| 2.0 * l[(i, i)].ln()).sum()
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.rows;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e).expect("square factor");
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    // symmetrize against round-off
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    inv
}

pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let l = cholesky_spd(a)?;
    cholesky_solve(&l, b)
}

/// Factors `a + ridge·I`, multiplying the ridge by 10 up to `escalations`
/// times while the factorization fails. Returns the factor and the ridge
/// that succeeded.
pub fn cholesky_with_ridge(a: &Matrix, ridge: f64, escalations: usize) -> Result<(Matrix, f64), NumericsError> {
    let mut current = ridge;
    let mut last_err = None;
    for _ in 0..=escalations {
        let mut m = a.clone();
        m.add_diagonal(current);
        match cholesky_spd(&m) {
            Ok(l) => return Ok((l, current)),
            Err(e) => last_err = Some(e),
        }
        current *= 10.0;
    }
    Err(last_err.expect("at least one attempt"))
}

// ---------------------------------------------------------------------------
// Student-t tail probability

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const CF_TOL: f64 = 1e-12;
const CF_MAX_ITER: usize = 300;
const CF_TINY: f64 = 1e-300;

/// Continued fraction of the incomplete beta function, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| ≥ |t|)` for `T ~ Student-t(df)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    let p = regularized_incomplete_beta(0.5 * df, 0.5, x);
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

// ---------------------------------------------------------------------------
// Random stream

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based 64-bit generator. Output `k` is a mix of `seed + k·γ`, so
/// the stream is fully described by `(seed, counter)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream keyed by `label`; does not advance `self`.
    pub fn child(&self, label: &str) -> RandomStream {
        // FNV-1a over the label, folded with the parent seed
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        RandomStream::new(mix64(self.seed ^ mix64(h.wrapping_add(GOLDEN_GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` without modulo bias.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Standard normal draw (Box-Muller).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Uniform random permutation of `0..n` (Fisher-Yates).
pub fn permutation(n: usize, stream: &mut RandomStream) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = stream.next_below(i as u64 + 1) as usize;
        p.swap(i, j);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky_spd(&Matrix::identity(2)).unwrap();
        assert_eq!(l, Matrix::identity(2));
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = cholesky_spd(&a).unwrap();
        assert!(close(l[(0, 0)], 2.0, 1e-15));
        assert_eq!(l[(0, 1)], 0.0);
        assert!(close(l[(1, 0)], 1.0, 1e-15));
        assert!(close(l[(1, 1)], 2f64.sqrt(), 1e-15));
        let back = l.matmul(&l.transpose()).unwrap();
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn cholesky_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(cholesky_spd(&a), Err(NumericsError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![1.0, 3.0]]);
        assert!(matches!(cholesky_spd(&a), Err(NumericsError::NotSymmetric { .. })));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_spd(&Matrix::identity(2), &[3.0, 7.0]).unwrap(), vec![3.0, 7.0]);
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let x = solve_spd(&a, &[10.0, 8.0]).unwrap();
        assert!(close(x[0], 1.75, 1e-12) && close(x[1], 1.5, 1e-12));
        let mut two = Matrix::identity(2);
        two.add_diagonal(1.0);
        let x = solve_spd(&two, &[2.0, 4.0]).unwrap();
        assert!(close(x[0], 1.0, 1e-15) && close(x[1], 2.0, 1e-15));
    }

    #[test]
    fn ridge_escalation_recovers_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let (l, ridge) = cholesky_with_ridge(&a, 1e-6, 3).unwrap();
        assert_eq!(ridge, 1e-6);
        assert!(l[(1, 1)] > 0.0);
        let neg = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert!(cholesky_with_ridge(&neg, 1e-6, 3).is_err());
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let inv = cholesky_inverse(&cholesky_spd(&a).unwrap());
        let prod = a.matmul(&inv).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!(close(prod[(i, j)], e, 1e-12));
            }
        }
        let l = cholesky_spd(&a).unwrap();
        assert!(close(cholesky_logdet(&l), 8f64.ln(), 1e-12));
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(close(ln_gamma(1.0), 0.0, 1e-13));
        assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-13));
        assert!(close(ln_gamma(10.0), 362_880f64.ln(), 1e-11));
    }

    #[test]
    fn t_p_value_examples() {
        assert_eq!(student_t_two_sided_p(0.0, 3.0), 1.0);
        // Cauchy: 2·(1 − (0.5 + atan(1)/π)) = 0.5
        assert!(close(student_t_two_sided_p(1.0, 1.0), 0.5, 1e-12));
        assert!(close(student_t_two_sided_p(-1.0, 1.0), 0.5, 1e-12));
        let p = student_t_two_sided_p(1.96, 1e6);
        assert!(close(p, 0.05, 5e-4), "p = {p}");
    }

    #[test]
    fn t_p_value_clamps_underflow() {
        let p = student_t_two_sided_p(1e200, 50.0);
        assert!(p > 0.0 && p <= 1e-300);
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(permutation(1, &mut RandomStream::new(9)), vec![0]);
        let a = permutation(30, &mut RandomStream::new(42));
        let b = permutation(30, &mut RandomStream::new(42));
        assert_eq!(a, b);
        let mut p = permutation(5, &mut RandomStream::new(7));
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn uniforms_in_unit_interval() {
        let mut s = RandomStream::new(1);
        for _ in 0..10_000 {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn child_streams_differ_and_are_stable() {
        let root = RandomStream::new(5);
        let mut a = root.child("mean/lda");
        let mut b = root.child("mean/svm");
        let mut a2 = root.child("mean/lda");
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_eq!(x, a2.next_u64());
        assert_eq!(root, RandomStream::new(5));
    }
}
