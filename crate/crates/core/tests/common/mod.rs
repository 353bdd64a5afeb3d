//! Test-only oracles and fixtures, independent of the library code paths
//! they check.
#![allow(dead_code)]

use mdpipe::dataset::Dataset;
use mdpipe::numerics::{Matrix, RandomStream};

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `P(|T| ≥ |t|)` by quadrature. Substituting `t = √ν·tan θ` maps the t
/// density onto `cos^{ν−1} θ` over `(−π/2, π/2)`, so both the tail mass and
/// the normalizer are finite integrals of a smooth function.
pub fn t_two_sided_quadrature(t: f64, df: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta = (t.abs() / df.sqrt()).atan();
    let kernel = |x: f64| x.cos().powf(df - 1.0);
    let n = 20_000;
    let total = simpson(kernel, 0.0, half_pi, n);
    let tail = simpson(kernel, theta, half_pi, n);
    tail / total
}

/// Standard normal two-sided tail by quadrature of the density.
pub fn normal_two_sided_quadrature(z: f64) -> f64 {
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - 2.0 * simpson(density, 0.0, z.abs(), 20_000)
}

/// Multivariate normal draws via a hand-rolled Cholesky of `sigma`.
pub fn mvn_sample(n: usize, mu: &[f64], sigma: &[Vec<f64>], stream: &mut RandomStream) -> Matrix {
    let d = mu.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j { (sigma[i][i] - s).sqrt() } else { (sigma[i][j] - s) / l[j][j] };
        }
    }
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        let z: Vec<f64> = (0..d).map(|_| stream.next_normal()).collect();
        for i in 0..d {
            out[(r, i)] = mu[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>();
        }
    }
    out
}

pub fn alternating_labels(n: usize) -> Vec<u8> {
    (0..n).map(|i| (i % 2) as u8).collect()
}

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

/// Removes each cell independently with probability `rate`, keeping at
/// least one observed cell per row.
pub fn mcar_mask(n: usize, d: usize, rate: f64, stream: &mut RandomStream) -> Vec<bool> {
    let mut mask = vec![true; n * d];
    for i in 0..n {
        for j in 0..d {
            mask[i * d + j] = stream.next_f64() >= rate;
        }
        if (0..d).all(|j| !mask[i * d + j]) {
            mask[i * d + (i % d)] = true;
        }
    }
    mask
}

/// Random `n × d` MCAR dataset with every column observed at least twice.
pub fn random_mcar_dataset(n: usize, d: usize, rate: f64, stream: &mut RandomStream) -> Dataset {
    let mut values = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            values[(i, j)] = stream.next_normal() * (1.0 + j as f64) + j as f64;
        }
    }
    let mut mask = mcar_mask(n, d, rate, stream);
    for j in 0..d {
        mask[j] = true;
        mask[d + j] = true;
    }
    Dataset::new(values, mask, alternating_labels(n), names(d)).unwrap()
}
