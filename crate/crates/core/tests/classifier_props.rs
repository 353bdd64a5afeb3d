#![allow(clippy::needless_range_loop)]

use mdpipe::classifiers::{
    logistic_gradient, logistic_objective, predict_label, predict_score, smo_solve, svm_dual_objective, svm_kkt_violations,
    train_gaussian_nb, train_lda, train_logistic, train_svm_smo, ClassifierError, ClassifierSpec, Kernel, LdaOptions, LogisticOptions,
    NaiveBayesOptions, SvmOptions, TrainedClassifier,
};
use mdpipe::dataset::synthetic_two_gaussian;
use mdpipe::numerics::{Matrix, RandomStream};
use proptest::prelude::*;

fn two_gaussian(n_pos: usize, n_neg: usize, d: usize, shift: f64, seed: u64) -> (Matrix, Vec<u8>) {
    let ds = synthetic_two_gaussian(n_pos, n_neg, d, shift, &mut RandomStream::new(seed)).unwrap();
    (ds.raw_values().clone(), ds.labels().to_vec())
}

fn signs(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

fn unwrap_model(r: Result<TrainedClassifier, ClassifierError>) -> TrainedClassifier {
    match r {
        Ok(m) => m,
        Err(ClassifierError::DidNotConverge { model, .. }) => *model,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let (x, y) = two_gaussian(15, 12, 3, 0.7, 1);
    let mut s = RandomStream::new(2);
    for _ in 0..20 {
        let w: Vec<f64> = (0..3).map(|_| s.next_normal()).collect();
        let b = s.next_normal();
        let l2 = 0.3;
        let (gw, gb) = logistic_gradient(&x, &y, &w, b, l2);
        let h = 1e-5;
        for j in 0..3 {
            let mut up = w.clone();
            let mut dn = w.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic_objective(&x, &y, &up, b, l2) - logistic_objective(&x, &y, &dn, b, l2)) / (2.0 * h);
            assert!((fd - gw[j]).abs() <= 1e-6 * fd.abs().max(1.0), "w{j}: {fd} vs {}", gw[j]);
        }
        let fd = (logistic_objective(&x, &y, &w, b + h, l2) - logistic_objective(&x, &y, &w, b - h, l2)) / (2.0 * h);
        assert!((fd - gb).abs() <= 1e-6 * fd.abs().max(1.0));
    }
}

#[test]
fn logistic_objective_non_decreasing_per_newton_step() {
    let (x, y) = two_gaussian(30, 25, 4, 0.5, 3);
    let l2 = 1e-4;
    let mut prev = logistic_objective(&x, &y, &[0.0; 4], 0.0, l2);
    for max_iter in 1..15 {
        let opts = LogisticOptions { l2, tol: 1e-10, max_iter };
        let TrainedClassifier::Logistic { weights, intercept, .. } = unwrap_model(train_logistic(&x, &y, &opts)) else { unreachable!() };
        let obj = logistic_objective(&x, &y, &weights, intercept, l2);
        assert!(obj >= prev - 1e-12 * prev.abs(), "step {max_iter}: {obj} < {prev}");
        prev = obj;
    }
}

#[test]
fn logistic_converges_with_small_gradient() {
    let (x, y) = two_gaussian(40, 40, 3, 0.8, 5);
    let m = train_logistic(&x, &y, &LogisticOptions::default()).unwrap();
    let TrainedClassifier::Logistic { weights, intercept, gradient_norm, .. } = &m else { unreachable!() };
    assert!(*gradient_norm <= 1e-8);
    let (gw, gb) = logistic_gradient(&x, &y, weights, *intercept, 1e-4);
    assert!(gw.iter().all(|g| g.abs() <= 1e-8) && gb.abs() <= 1e-8);
}

/// Exact optimum of the SVM dual for tiny problems: each α is at 0, at C, or
/// free, and the free ones solve the KKT equality system.
fn svm_dual_oracle(k: &Matrix, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            let m = free.len();
            // rows: stationarity on free coordinates, then Σ αᵢyᵢ = 0
            let mut a = vec![vec![0.0; m + 2]; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (q, &j) in free.iter().enumerate() {
                    a[r][q] = y[i] * y[j] * k[(i, j)];
                }
                a[r][m] = y[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| y[i] * y[j] * k[(i, j)] * c).sum();
                a[r][m + 1] = 1.0 - fixed;
            }
            for (q, &j) in free.iter().enumerate() {
                a[m][q] = y[j];
            }
            a[m][m + 1] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = gauss_solve(a) else { continue };
            let mut ok = true;
            for (q, &i) in free.iter().enumerate() {
                if !(-1e-12..=c + 1e-12).contains(&sol[q]) {
                    ok = false;
                }
                alpha[i] = sol[q].clamp(0.0, c);
            }
            if !ok {
                continue;
            }
        }
        let eq: f64 = (0..n).map(|i| alpha[i] * y[i]).sum();
        if eq.abs() > 1e-9 {
            continue;
        }
        best = best.max(svm_dual_objective(k, y, &alpha));
    }
    best
}

fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for q in col..=m {
                    a[r][q] -= f * a[col][q];
                }
            }
        }
    }
    Some((0..m).map(|r| a[r][m] / a[r][r]).collect())
}

#[test]
fn smo_matches_exact_dual_on_tiny_problems() {
    let mut s = RandomStream::new(17);
    for case in 0..60 {
        let n = 2 + case % 3;
        let mut x = Matrix::zeros(n, 2);
        for i in 0..n {
            for j in 0..2 {
                x[(i, j)] = s.next_normal() * 2.0;
            }
        }
        let mut y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        if s.next_f64() < 0.5 {
            y.reverse();
        }
        let kernel = if case % 2 == 0 { Kernel::Linear } else { Kernel::Rbf { gamma: 0.5 } };
        let k = kernel.gram(&x);
        let c = [0.1, 1.0, 10.0][case % 3];
        let sol = smo_solve(&k, &y, c, 1e-9, 10);
        let oracle = svm_dual_oracle(&k, &y, c);
        assert!(sol.converged);
        assert!(
            (sol.dual_objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "case {case}: smo {} oracle {oracle}",
            sol.dual_objective
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn smo_solution_satisfies_constraints(seed in any::<u64>(), n in 6usize..40, c in 0.05f64..20.0, rbf in any::<bool>()) {
        let (x, y) = two_gaussian(n / 2, n - n / 2, 2, 0.6, seed);
        let y = signs(&y);
        let kernel = if rbf { Kernel::Rbf { gamma: 0.5 } } else { Kernel::Linear };
        let k = kernel.gram(&x);
        let tol = 1e-3;
        let sol = smo_solve(&k, &y, c, tol, 10);
        prop_assert!(sol.converged);
        let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        prop_assert!(eq.abs() <= 1e-9 * (1.0 + c * n as f64));
        for &a in &sol.alpha {
            prop_assert!((0.0..=c).contains(&a));
        }
        for v in svm_kkt_violations(&k, &y, &sol.alpha, sol.bias, c) {
            prop_assert!(v <= tol, "violation {}", v);
        }
        for w in sol.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn labels_follow_score_sign(seed in any::<u64>()) {
        let (x, y) = two_gaussian(20, 14, 3, 0.4, seed);
        for spec in ClassifierSpec::all_default() {
            let model = unwrap_model(spec.train(&x, &y));
            let scores = predict_score(&model, &x).unwrap();
            let labels = predict_label(&model, &x).unwrap();
            for (s, l) in scores.iter().zip(&labels) {
                prop_assert_eq!(*l, u8::from(*s >= 0.0));
            }
        }
    }

    #[test]
    fn nb_and_lda_ignore_row_order(seed in any::<u64>()) {
        let (x, y) = two_gaussian(18, 11, 3, 0.5, seed);
        let perm = mdpipe::numerics::permutation(x.rows(), &mut RandomStream::new(seed ^ 1));
        let xp = x.select_rows(&perm);
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let probe = two_gaussian(5, 5, 3, 0.5, seed.wrapping_add(7)).0;
        for spec in [ClassifierSpec::NaiveBayes(NaiveBayesOptions::default()), ClassifierSpec::Lda(LdaOptions::default())] {
            let a = predict_score(&spec.train(&x, &y).unwrap(), &probe).unwrap();
            let b = predict_score(&spec.train(&xp, &yp).unwrap(), &probe).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn flipping_labels_negates_nb_and_lda_scores(seed in any::<u64>()) {
        let (x, y) = two_gaussian(16, 12, 2, 0.5, seed);
        let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
        for spec in [ClassifierSpec::NaiveBayes(NaiveBayesOptions::default()), ClassifierSpec::Lda(LdaOptions::default())] {
            let a = predict_score(&spec.train(&x, &y).unwrap(), &x).unwrap();
            let b = predict_score(&spec.train(&x, &flipped).unwrap(), &x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u + v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }
}

#[test]
fn lda_with_isotropic_classes_picks_nearest_mean() {
    // each class is its centre plus (±1, 0) and (0, ±1): pooled covariance ∝ I
    let centres = [[0.0, 0.0], [3.0, 1.0]];
    let offsets = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (label, c) in centres.iter().enumerate() {
        for o in offsets {
            rows.push(vec![c[0] + o[0], c[1] + o[1]]);
            y.push(label as u8);
        }
    }
    let x = Matrix::from_rows(&rows);
    let model = train_lda(&x, &y, &LdaOptions { ridge: 0.0 }).unwrap();
    let mut s = RandomStream::new(21);
    for _ in 0..500 {
        let p = [s.next_normal() * 3.0 + 1.5, s.next_normal() * 3.0 + 0.5];
        let d0 = (p[0] - centres[0][0]).powi(2) + (p[1] - centres[0][1]).powi(2);
        let d1 = (p[0] - centres[1][0]).powi(2) + (p[1] - centres[1][1]).powi(2);
        if (d0 - d1).abs() < 1e-6 {
            continue;
        }
        let label = predict_label(&model, &Matrix::from_rows(&[p.to_vec()])).unwrap()[0];
        assert_eq!(label, u8::from(d1 < d0));
    }
}

#[test]
fn lda_unequal_priors_shift_the_threshold() {
    let (x, y) = two_gaussian(30, 10, 2, 0.6, 9);
    let TrainedClassifier::Lda { coef, intercept, means, priors, .. } = train_lda(&x, &y, &LdaOptions::default()).unwrap() else {
        unreachable!()
    };
    assert_eq!(priors, [0.25, 0.75]);
    let midpoint: f64 = coef.iter().zip(means[0].iter().zip(&means[1])).map(|(c, (a, b))| c * (a + b) / 2.0).sum();
    assert!((intercept - (-midpoint + 3.0_f64.ln())).abs() <= 1e-12);
}

#[test]
fn nb_zero_variance_feature_stays_finite() {
    let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0], vec![4.0, 5.0]]);
    let y = vec![0, 0, 1, 1];
    let model = train_gaussian_nb(&x, &y, &NaiveBayesOptions::default()).unwrap();
    let scores = predict_score(&model, &x).unwrap();
    assert!(scores.iter().all(|s| s.is_finite()));
    assert_eq!(predict_label(&model, &x).unwrap(), y);
}

#[test]
fn separable_data_is_classified_perfectly() {
    let (x, y) = two_gaussian(25, 25, 2, 5.0, 4);
    for spec in ClassifierSpec::all_default() {
        let model = unwrap_model(spec.train(&x, &y));
        assert_eq!(predict_label(&model, &x).unwrap(), y, "{}", spec.name());
    }
    let linear = SvmOptions { kernel: mdpipe::classifiers::KernelKind::Linear, ..SvmOptions::default() };
    let model = train_svm_smo(&x, &y, &linear).unwrap();
    assert_eq!(predict_label(&model, &x).unwrap(), y);
}

#[test]
fn single_class_training_is_rejected() {
    let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
    for spec in ClassifierSpec::all_default() {
        assert!(matches!(spec.train(&x, &[1, 1]), Err(ClassifierError::SingleClass)));
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let (x, y) = two_gaussian(5, 5, 3, 1.0, 1);
    let model = train_lda(&x, &y, &LdaOptions::default()).unwrap();
    let bad = Matrix::zeros(2, 2);
    assert!(matches!(predict_score(&model, &bad), Err(ClassifierError::DimensionMismatch(_))));
}
