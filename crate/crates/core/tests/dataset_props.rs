use mdpipe::dataset::{ampute_mcar, heatmap_pgm, read_csv, summarize_missingness, write_csv, Dataset, DatasetError, LoadOptions};
use mdpipe::numerics::{Matrix, RandomStream};
use proptest::prelude::*;

mod common;

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (2usize..12, 1usize..6).prop_flat_map(|(n, d)| {
        (prop::collection::vec(-1e6f64..1e6, n * d), prop::collection::vec(any::<bool>(), n * d), prop::collection::vec(0u8..2, n))
            .prop_map(move |(vals, mask, mut labels)| {
                labels[0] = 0;
                labels[1] = 1;
                let values = Matrix::from_vec(n, d, vals).unwrap();
                Dataset::new(values, mask, labels, common::names(d)).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf, "NA").unwrap();
        let back = read_csv(buf.as_slice(), &LoadOptions::new("label", "1")).unwrap();
        prop_assert_eq!(back.mask(), ds.mask());
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.feature_names(), ds.feature_names());
        for i in 0..ds.n() {
            for j in 0..ds.d() {
                prop_assert_eq!(back.value(i, j), ds.value(i, j));
            }
        }
    }

    #[test]
    fn heatmap_counts_match_mask(ds in dataset_strategy()) {
        let pgm = heatmap_pgm(&ds);
        let mut lines = pgm.lines();
        prop_assert_eq!(lines.next(), Some("P2"));
        prop_assert_eq!(lines.next().unwrap(), format!("{} {}", ds.d(), ds.n()));
        prop_assert_eq!(lines.next(), Some("255"));
        let pixels: Vec<Vec<u32>> = lines
            .map(|l| l.split(' ').map(|p| p.parse().unwrap()).collect())
            .collect();
        prop_assert_eq!(pixels.len(), ds.n());
        let white = pixels.iter().flatten().filter(|&&p| p == 255).count();
        prop_assert_eq!(white, ds.mask().iter().filter(|&&m| !m).count());
        for (i, row) in pixels.iter().enumerate() {
            let missing = (0..ds.d()).filter(|&j| !ds.is_observed(i, j)).count();
            prop_assert_eq!(row.iter().filter(|&&p| p == 255).count(), missing);
        }
        let summary = summarize_missingness(&ds);
        prop_assert_eq!(summary.total_missing(), white);
        // columns are sorted by descending missing count
        let order = summary.heatmap_column_order();
        for w in order.windows(2) {
            prop_assert!(summary.per_feature_missing[w[0]] >= summary.per_feature_missing[w[1]]);
        }
    }

    #[test]
    fn amputation_removes_exact_count(seed in any::<u64>(), n in 3usize..30, d in 2usize..8, rate in 0.0f64..0.6) {
        let mut s = RandomStream::new(seed);
        let mut values = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                values[(i, j)] = s.next_normal();
            }
        }
        let ds = Dataset::complete(values, common::alternating_labels(n), common::names(d)).unwrap();
        let target = (rate * (n * d) as f64).floor() as usize;
        match ampute_mcar(&ds, rate, &mut s) {
            Ok(out) => {
                prop_assert_eq!(out.missing_count(), target);
                for i in 0..n {
                    prop_assert!((0..d).any(|j| out.is_observed(i, j)));
                }
                for j in 0..d {
                    prop_assert!((0..n).any(|i| out.is_observed(i, j)));
                }
                for i in 0..n {
                    for j in 0..d {
                        if out.is_observed(i, j) {
                            prop_assert_eq!(out.value(i, j), ds.value(i, j));
                        }
                    }
                }
            }
            Err(DatasetError::AmputationInfeasible(msg)) => {
                prop_assert!(n * d - target < n.max(d) || msg.contains("attempts"), "{}", msg);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

#[test]
fn amputation_is_deterministic_per_seed() {
    let mut s = RandomStream::new(1);
    let mut values = Matrix::zeros(40, 5);
    for i in 0..40 {
        for j in 0..5 {
            values[(i, j)] = s.next_normal();
        }
    }
    let ds = Dataset::complete(values, common::alternating_labels(40), common::names(5)).unwrap();
    let a = ampute_mcar(&ds, 0.2, &mut RandomStream::new(9)).unwrap();
    let b = ampute_mcar(&ds, 0.2, &mut RandomStream::new(9)).unwrap();
    let c = ampute_mcar(&ds, 0.2, &mut RandomStream::new(10)).unwrap();
    assert_eq!(a.mask(), b.mask());
    assert_ne!(a.mask(), c.mask());
}

#[test]
fn amputation_cells_are_roughly_uniform() {
    // each of the 12 cells should be picked in about rate of the draws
    let values = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0], vec![1.0, 1.0, 1.0]]);
    let ds = Dataset::complete(values, vec![0, 1, 0, 1], common::names(3)).unwrap();
    let mut s = RandomStream::new(3);
    let mut hits = [0usize; 12];
    let draws = 6000;
    for _ in 0..draws {
        let out = ampute_mcar(&ds, 2.0 / 12.0, &mut s).unwrap();
        for (c, &m) in out.mask().iter().enumerate() {
            if !m {
                hits[c] += 1;
            }
        }
    }
    let expected = draws as f64 * 2.0 / 12.0;
    for h in hits {
        assert!((h as f64 - expected).abs() < 0.1 * expected, "{hits:?}");
    }
}

#[test]
fn amputation_refuses_partially_observed_input() {
    let ds =
        Dataset::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]), vec![true, false, true, true], vec![0, 1], common::names(2))
            .unwrap();
    assert!(matches!(ampute_mcar(&ds, 0.1, &mut RandomStream::new(0)), Err(DatasetError::NotFullyObserved(1))));
}

#[test]
fn amputation_infeasible_when_too_many_cells() {
    let ds = Dataset::complete(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]), vec![0, 1], common::names(2)).unwrap();
    assert!(matches!(ampute_mcar(&ds, 0.75, &mut RandomStream::new(0)), Err(DatasetError::AmputationInfeasible(_))));
}

#[test]
fn complete_dataset_heatmap_is_black() {
    let ds = Dataset::complete(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]), vec![0, 1], common::names(2)).unwrap();
    assert_eq!(heatmap_pgm(&ds), "P2\n2 2\n255\n0 0\n0 0\n");
    assert_eq!(summarize_missingness(&ds).overall_rate, 0.0);
}
