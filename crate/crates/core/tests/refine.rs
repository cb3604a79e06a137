mod common;

use anchorlex_core::evalkit::{precision_at_k, OovPolicy};
use anchorlex_core::lexicon::DictPair;
use anchorlex_core::refine::{average_plain, average_weighted, meemi_fit, meemi_transform, FrequencyMode};
use anchorlex_core::Retrieval;
use anchorlex_core::{BilingualDictionary, CrossLingualSpace, Error, Matrix, TestDictionary};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn random_space(seed: u64, n: usize, m: usize, d: usize) -> CrossLingualSpace {
    let mut r = rng(seed);
    let fs: Vec<u64> = (0..n).map(|_| r.random_range(1..1000)).collect();
    let ft: Vec<u64> = (0..m).map(|_| r.random_range(1..1000)).collect();
    let s = space_with_freqs("s", unit(gaussian(&mut r, n, d)), &fs);
    let t = space_with_freqs("t", unit(gaussian(&mut r, m, d)), &ft);
    CrossLingualSpace::new(s, t).unwrap()
}

/// A one-to-one dictionary between random distinct rows.
fn simple_dict(space: &CrossLingualSpace, seed: u64, k: usize) -> BilingualDictionary {
    let mut r = rng(seed);
    let mut src: Vec<usize> = (0..space.src.len()).collect();
    let mut tgt: Vec<usize> = (0..space.tgt.len()).collect();
    use rand::seq::SliceRandom;
    src.shuffle(&mut r);
    tgt.shuffle(&mut r);
    let idx: Vec<(usize, usize)> = src.into_iter().zip(tgt).take(k).collect();
    pairs(&space.src, &space.tgt, &idx)
}

#[test]
fn midpoint_example() {
    let s = space("a", Matrix::from_rows(&[[1.0, 0.0], [0.3, 0.4]]).unwrap());
    let t = space("b", Matrix::from_rows(&[[0.0, 1.0]]).unwrap());
    let cs = CrossLingualSpace::new(s, t).unwrap();
    let d = pairs(&cs.src, &cs.tgt, &[(0, 0)]);
    let out = average_plain(&cs, &d).unwrap();
    assert_eq!(out.src.vector(0), &[0.5, 0.5]);
    assert_eq!(out.tgt.vector(0), &[0.5, 0.5]);
    assert_eq!(out.src.vector(1), cs.src.vector(1));
}

#[test]
fn weighted_example() {
    let s = space_with_freqs("a", Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), &[3]);
    let t = space_with_freqs("b", Matrix::from_rows(&[[0.0, 1.0]]).unwrap(), &[1]);
    let cs = CrossLingualSpace::new(s, t).unwrap();
    let d = pairs(&cs.src, &cs.tgt, &[(0, 0)]);
    let out = average_weighted(&cs, &d, FrequencyMode::Absolute).unwrap();
    assert_eq!(out.src.vector(0), &[0.75, 0.25]);
    assert_eq!(out.tgt.vector(0), &[0.75, 0.25]);
}

#[test]
fn equation_matches_direct_evaluation_on_1000_pairs() {
    let cs = random_space(1, 1200, 1300, 16);
    let d = simple_dict(&cs, 2, 1000);
    let out = average_weighted(&cs, &d, FrequencyMode::Absolute).unwrap();
    for p in &d {
        let (f1, f2) = (p.f_src as f64, p.f_tgt as f64);
        let (v1, v2) = (cs.src.vector(p.src), cs.tgt.vector(p.tgt));
        for k in 0..16 {
            let mu = (f1 * v1[k] + f2 * v2[k]) / (f1 + f2);
            assert!((out.src.vector(p.src)[k] - mu).abs() <= 1e-12);
            assert!((out.tgt.vector(p.tgt)[k] - mu).abs() <= 1e-12);
        }
    }
}

#[test]
fn relative_frequencies_divide_by_vocabulary_totals() {
    let cs = random_space(3, 50, 60, 4);
    let d = simple_dict(&cs, 4, 20);
    let out = average_weighted(&cs, &d, FrequencyMode::Relative).unwrap();
    let (ns, nt) = (
        cs.src.vocab().total_frequency() as f64,
        cs.tgt.vocab().total_frequency() as f64,
    );
    for p in &d {
        let (f1, f2) = (p.f_src as f64 / ns, p.f_tgt as f64 / nt);
        for k in 0..4 {
            let mu = (f1 * cs.src.vector(p.src)[k] + f2 * cs.tgt.vector(p.tgt)[k]) / (f1 + f2);
            assert!((out.src.vector(p.src)[k] - mu).abs() <= 1e-12);
        }
    }
}

#[test]
fn dominant_frequency_pins_the_average() {
    let s = space_with_freqs("a", unit(Matrix::from_rows(&[[0.3, -0.9, 0.2]]).unwrap()), &[1_000_000]);
    let t = space_with_freqs("b", unit(Matrix::from_rows(&[[-0.5, 0.1, 0.8]]).unwrap()), &[1]);
    let cs = CrossLingualSpace::new(s, t).unwrap();
    let d = pairs(&cs.src, &cs.tgt, &[(0, 0)]);
    let out = average_weighted(&cs, &d, FrequencyMode::Absolute).unwrap();
    for k in 0..3 {
        assert!((out.tgt.vector(0)[k] - cs.src.vector(0)[k]).abs() < 1e-5);
    }
}

#[test]
fn zero_total_frequency_is_an_error() {
    let cs = random_space(5, 3, 3, 2);
    let d = BilingualDictionary::new(vec![DictPair {
        src: 0,
        tgt: 1,
        class: anchorlex_core::TokenClass::Word,
        f_src: 0,
        f_tgt: 0,
    }]);
    match average_weighted(&cs, &d, FrequencyMode::Absolute) {
        Err(Error::ZeroFrequency { src, tgt }) => assert_eq!((src.as_str(), tgt.as_str()), ("s0", "t1")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_index_is_an_error() {
    let cs = random_space(6, 3, 3, 2);
    let d = BilingualDictionary::new(vec![DictPair {
        src: 7,
        tgt: 0,
        class: anchorlex_core::TokenClass::Word,
        f_src: 1,
        f_tgt: 1,
    }]);
    assert!(average_plain(&cs, &d).is_err());
}

#[test]
fn multi_pair_token_averages_its_whole_neighbourhood() {
    let s = space("a", Matrix::from_rows(&[[1.0, 0.0]]).unwrap());
    let t = space("b", Matrix::from_rows(&[[0.0, 1.0], [0.0, -1.0]]).unwrap());
    let cs = CrossLingualSpace::new(s, t).unwrap();
    let d = pairs(&cs.src, &cs.tgt, &[(0, 0), (0, 1)]);
    let out = average_plain(&cs, &d).unwrap();
    let third = 1.0 / 3.0;
    assert!((out.src.vector(0)[0] - third).abs() < 1e-15 && out.src.vector(0)[1].abs() < 1e-15);
    assert_eq!(out.tgt.vector(0), &[0.5, 0.5]);
    assert_eq!(out.tgt.vector(1), &[0.5, -0.5]);
}

/// Normal equations `(XᵀX) M = XᵀY` solved by Gauss-Jordan elimination.
fn normal_equations(x: &Matrix, y: &Matrix) -> Vec<Vec<f64>> {
    let (n, d, c) = (x.rows(), x.cols(), y.cols());
    let mut a = vec![vec![0.0; d + c]; d];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = (0..n).map(|r| x[(r, i)] * x[(r, j)]).sum();
        }
        for j in 0..c {
            a[i][d + j] = (0..n).map(|r| x[(r, i)] * y[(r, j)]).sum();
        }
    }
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                a[r].iter_mut().zip(&pivot_row).for_each(|(v, q)| *v -= f * q);
            }
        }
    }
    a.into_iter().map(|row| row[d..].to_vec()).collect()
}

fn residual(x: &Matrix, m: &Matrix, y: &Matrix) -> f64 {
    let xm = x.matmul(m).unwrap();
    xm.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum()
}

fn pair_means(cs: &CrossLingualSpace, d: &BilingualDictionary) -> (Matrix, Matrix, Matrix) {
    let xs = cs
        .src
        .matrix()
        .select_rows(&d.iter().map(|p| p.src).collect::<Vec<_>>());
    let ys = cs
        .tgt
        .matrix()
        .select_rows(&d.iter().map(|p| p.tgt).collect::<Vec<_>>());
    let mu: Vec<Vec<f64>> = (0..xs.rows())
        .map(|r| xs.row(r).iter().zip(ys.row(r)).map(|(a, b)| (a + b) / 2.0).collect())
        .collect();
    (xs, ys, Matrix::from_rows(&mu).unwrap())
}

#[test]
fn meemi_matches_normal_equations() {
    let cs = random_space(7, 150, 150, 20);
    let d = simple_dict(&cs, 8, 100);
    let fit = meemi_fit(&cs, &d).unwrap();
    assert_eq!(fit.ridge, 0.0);
    let (xs, ys, mu) = pair_means(&cs, &d);
    for (side, m) in [(&xs, &fit.m_src), (&ys, &fit.m_tgt)] {
        let oracle = Matrix::from_rows(&normal_equations(side, &mu)).unwrap();
        assert!(m.max_abs_diff(&oracle) < 1e-8);
        assert!((residual(side, m, &mu) - residual(side, &oracle, &mu)).abs() < 1e-8);
        assert!(residual(side, m, &mu) <= residual(side, &Matrix::identity(20), &mu) + 1e-12);
    }
}

#[test]
fn meemi_identity_case_leaves_space_unchanged() {
    let mut r = rng(9);
    let m = unit(gaussian(&mut r, 40, 5));
    let cs = CrossLingualSpace::new(space("w", m.clone()), space("w", m)).unwrap();
    let d = pairs(&cs.src, &cs.tgt, &(0..40).map(|i| (i, i)).collect::<Vec<_>>());
    let out = meemi_transform(&cs, &d).unwrap();
    assert!(out.src.matrix().max_abs_diff(cs.src.matrix()) < 1e-9);
    assert!(out.tgt.matrix().max_abs_diff(cs.tgt.matrix()) < 1e-9);
}

#[test]
fn meemi_falls_back_to_ridge_when_underdetermined() {
    let cs = random_space(10, 30, 30, 12);
    let d = simple_dict(&cs, 11, 5);
    let fit = meemi_fit(&cs, &d).unwrap();
    assert!(fit.ridge > 0.0);
    assert!(fit.m_src.is_finite() && fit.m_tgt.is_finite());
}

#[test]
fn meemi_changes_rows_outside_the_dictionary() {
    let cs = random_space(12, 60, 60, 6);
    let d = simple_dict(&cs, 13, 20);
    let out = meemi_transform(&cs, &d).unwrap();
    let in_dict: Vec<usize> = d.iter().map(|p| p.src).collect();
    let outside = (0..60).find(|i| !in_dict.contains(i)).unwrap();
    assert_ne!(out.src.vector(outside), cs.src.vector(outside));
}

#[test]
fn anchored_test_entries_score_at_one() {
    let mut r = rng(14);
    let m = unit(gaussian(&mut r, 30, 5));
    let t = unit(gaussian(&mut r, 30, 5));
    let cs = CrossLingualSpace::new(space("w", m), space("w", t)).unwrap();
    let idx: Vec<(usize, usize)> = (0..15).map(|i| (i, i)).collect();
    let d = pairs(&cs.src, &cs.tgt, &idx);
    let out = average_weighted(&cs, &d, FrequencyMode::Absolute).unwrap();
    let test = TestDictionary::from_pairs((0..15).map(|i| (format!("w{i}"), format!("w{i}"))));
    let rep = precision_at_k(&out, &test, &[1], Retrieval::Cosine, OovPolicy::Skip, false).unwrap();
    assert_eq!(rep.p(1), Some(100.0));
}

#[test]
fn provenance_is_append_only() {
    let cs = random_space(15, 10, 10, 3);
    let d = simple_dict(&cs, 16, 4);
    let a = average_plain(&cs, &d).unwrap();
    let b = average_weighted(&a, &d, FrequencyMode::Absolute).unwrap();
    assert_eq!(&b.provenance()[..a.provenance().len()], a.provenance());
    assert_eq!(b.provenance().len(), a.provenance().len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn anchoring_and_locality(seed in 0u64..10_000, n in 2usize..60, m in 2usize..60, d in 1usize..8, frac in 0.0f64..1.0) {
        let cs = random_space(seed, n, m, d);
        let k = ((n.min(m) as f64) * frac) as usize;
        let dict = simple_dict(&cs, seed + 1, k);
        for weighted in [false, true] {
            let out = if weighted {
                average_weighted(&cs, &dict, FrequencyMode::Absolute).unwrap()
            } else {
                average_plain(&cs, &dict).unwrap()
            };
            for p in &dict {
                prop_assert_eq!(out.src.vector(p.src), out.tgt.vector(p.tgt));
            }
            let src_used: Vec<usize> = dict.iter().map(|p| p.src).collect();
            let tgt_used: Vec<usize> = dict.iter().map(|p| p.tgt).collect();
            for i in (0..n).filter(|i| !src_used.contains(i)) {
                prop_assert_eq!(out.src.vector(i), cs.src.vector(i));
            }
            for j in (0..m).filter(|j| !tgt_used.contains(j)) {
                prop_assert_eq!(out.tgt.vector(j), cs.tgt.vector(j));
            }
        }
    }

    #[test]
    fn plain_is_idempotent(seed in 0u64..10_000, n in 2usize..40, d in 1usize..6) {
        let cs = random_space(seed, n, n, d);
        let dict = simple_dict(&cs, seed + 2, n / 2);
        let once = average_plain(&cs, &dict).unwrap();
        let twice = average_plain(&once, &dict).unwrap();
        prop_assert_eq!(once.src.matrix(), twice.src.matrix());
        prop_assert_eq!(once.tgt.matrix(), twice.tgt.matrix());
    }

    #[test]
    fn equal_frequencies_reduce_to_plain(seed in 0u64..10_000, n in 2usize..40, d in 1usize..6, f in 1u64..10_000) {
        let mut r = rng(seed);
        let s = space_with_freqs("s", unit(gaussian(&mut r, n, d)), &vec![f; n]);
        let t = space_with_freqs("t", unit(gaussian(&mut r, n, d)), &vec![f; n]);
        let cs = CrossLingualSpace::new(s, t).unwrap();
        let dict = simple_dict(&cs, seed + 3, n / 2);
        let a = average_plain(&cs, &dict).unwrap();
        let b = average_weighted(&cs, &dict, FrequencyMode::Absolute).unwrap();
        prop_assert!(a.src.matrix().max_abs_diff(b.src.matrix()) < 1e-15);
        prop_assert!(a.tgt.matrix().max_abs_diff(b.tgt.matrix()) < 1e-15);
    }

    #[test]
    fn meemi_never_worse_than_identity(seed in 0u64..10_000, d in 2usize..8, extra in 0usize..30) {
        let n = d + extra + 1;
        let cs = random_space(seed, n + 5, n + 5, d);
        let dict = simple_dict(&cs, seed + 4, n);
        let fit = meemi_fit(&cs, &dict).unwrap();
        let (xs, ys, mu) = pair_means(&cs, &dict);
        prop_assert!(residual(&xs, &fit.m_src, &mu) <= residual(&xs, &Matrix::identity(d), &mu) + 1e-9);
        prop_assert!(residual(&ys, &fit.m_tgt, &mu) <= residual(&ys, &Matrix::identity(d), &mu) + 1e-9);
    }
}
