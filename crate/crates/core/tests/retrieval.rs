mod common;

use anchorlex_core::evalkit::{precision_at_k, translate_topk, OovPolicy};
use anchorlex_core::retrieval::Retriever;
use anchorlex_core::{CrossLingualSpace, Error, Matrix, Retrieval, TestDictionary};
use common::*;
use proptest::prelude::*;

/// O(n·d) cosine scores of one query against every target.
fn cosines(q: &[f64], t: &Matrix) -> Vec<f64> {
    (0..t.rows()).map(|j| cos(q, t.row(j))).collect()
}

fn mean_top(scores: &[f64], k: usize) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let k = k.min(s.len());
    s[..k].iter().sum::<f64>() / k as f64
}

/// Brute-force ranking with ties to the lower index.
fn oracle(q: &Matrix, t: &Matrix, mode: Retrieval, query: usize, k: usize) -> Vec<(usize, f64)> {
    let base = cosines(q.row(query), t);
    let scores: Vec<f64> = match mode {
        Retrieval::Cosine => base,
        Retrieval::Csls { k: nk } => {
            let rt = mean_top(&cosines(q.row(query), t), nk);
            (0..t.rows())
                .map(|j| 2.0 * base[j] - rt - mean_top(&cosines(t.row(j), q), nk))
                .collect()
        }
    };
    let mut idx: Vec<usize> = (0..t.rows()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|j| (j, scores[j])).collect()
}

fn assert_matches(got: &[(usize, f64)], want: &[(usize, f64)]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert_eq!(g.0, w.0, "{got:?} vs {want:?}");
        assert!((g.1 - w.1).abs() < 1e-12);
    }
}

#[test]
fn cosine_agrees_with_brute_force() {
    let mut r = rng(1);
    let q = gaussian(&mut r, 120, 9);
    let t = gaussian(&mut r, 300, 9);
    let ret = Retriever::new(&q, &t, Retrieval::Cosine).unwrap();
    for i in 0..120 {
        assert_matches(&ret.top_k(i, 10), &oracle(&q, &t, Retrieval::Cosine, i, 10));
    }
}

#[test]
fn csls_agrees_with_brute_force() {
    let mut r = rng(2);
    let q = gaussian(&mut r, 80, 7);
    let t = gaussian(&mut r, 150, 7);
    for k in [1, 3, 10] {
        let mode = Retrieval::Csls { k };
        let ret = Retriever::new(&q, &t, mode).unwrap();
        for i in 0..80 {
            assert_matches(&ret.top_k(i, 5), &oracle(&q, &t, mode, i, 5));
        }
    }
}

#[test]
fn mutual_argmax_agrees_with_brute_force() {
    let mut r = rng(3);
    let q = gaussian(&mut r, 300, 6);
    let t = gaussian(&mut r, 270, 6);
    let ret = Retriever::new(&q, &t, Retrieval::Cosine).unwrap();
    let (fwd, bwd) = ret.mutual_argmax();
    for (i, &f) in fwd.iter().enumerate() {
        assert_eq!(f, oracle(&q, &t, Retrieval::Cosine, i, 1)[0].0);
    }
    for (j, &b) in bwd.iter().enumerate() {
        assert_eq!(b, oracle(&t, &q, Retrieval::Cosine, j, 1)[0].0);
    }
}

#[test]
fn ties_go_to_the_lower_index() {
    let q = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
    let t = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 0.0], [1.0, 0.0]]).unwrap();
    let ret = Retriever::new(&q, &t, Retrieval::Cosine).unwrap();
    let top: Vec<usize> = ret.top_k(0, 4).iter().map(|h| h.0).collect();
    assert_eq!(top, vec![1, 2, 3, 0]);
}

#[test]
fn orthonormal_toy_translation() {
    let s = space("x", Matrix::from_rows(&[[1.0, 0.0]]).unwrap());
    let t = space("y", Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap());
    let cs = CrossLingualSpace::new(s, t).unwrap();
    let out = translate_topk(&cs, "x0", 1, Retrieval::Cosine).unwrap();
    assert_eq!(out, vec![("y0".to_string(), 1.0)]);
    assert!(matches!(
        translate_topk(&cs, "zzz", 1, Retrieval::Cosine),
        Err(Error::OutOfVocabulary { .. })
    ));
}

fn toy_space(seed: u64, n: usize, d: usize) -> CrossLingualSpace {
    let mut r = rng(seed);
    let x = unit(gaussian(&mut r, n, d));
    let mut y = x.clone();
    let e = gaussian(&mut r, n, d);
    for i in 0..n {
        for j in 0..d {
            y.row_mut(i)[j] += 0.4 * e[(i, j)];
        }
    }
    CrossLingualSpace::new(space("w", x), space("w", y)).unwrap()
}

#[test]
fn oov_policies_and_coverage() {
    let cs = toy_space(4, 50, 5);
    let mut entries: Vec<(String, String)> = (0..20).map(|i| (format!("w{i}"), format!("w{i}"))).collect();
    entries.push(("missing".into(), "w1".into()));
    entries.push(("gone".into(), "w2".into()));
    let test = TestDictionary::from_pairs(entries);
    let skip = precision_at_k(&cs, &test, &[1, 5], Retrieval::Cosine, OovPolicy::Skip, false).unwrap();
    let wrong = precision_at_k(&cs, &test, &[1, 5], Retrieval::Cosine, OovPolicy::CountWrong, false).unwrap();
    assert_eq!((skip.total, skip.covered, skip.skipped), (22, 20, 2));
    assert_eq!(skip.covered + skip.skipped, skip.total);
    let (a, b) = (skip.p(1).unwrap(), wrong.p(1).unwrap());
    assert!((b - a * 20.0 / 22.0).abs() < 1e-9);
}

#[test]
fn empty_coverage_is_undefined_not_an_error() {
    let cs = toy_space(5, 10, 3);
    let test = TestDictionary::from_pairs([("nope", "w1")]);
    let rep = precision_at_k(&cs, &test, &[1, 5, 10], Retrieval::Cosine, OovPolicy::Skip, false).unwrap();
    assert_eq!(rep.covered, 0);
    assert!(rep.p_at.iter().all(|p| p.1.is_none()));
}

#[test]
fn any_gold_target_counts() {
    let s = space("q", Matrix::from_rows(&[[1.0, 0.0]]).unwrap());
    let t = space("t", Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.1]]).unwrap());
    let cs = CrossLingualSpace::new(s, t).unwrap();
    let test = TestDictionary::from_pairs([("q0", "t9"), ("q0", "t1")]);
    let rep = precision_at_k(&cs, &test, &[1], Retrieval::Cosine, OovPolicy::Skip, true).unwrap();
    assert_eq!(rep.p(1), Some(100.0));
    assert_eq!(rep.per_query.unwrap()[0].hit_rank, Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn precision_is_monotone_in_k(seed in 0u64..10_000, n in 5usize..80, d in 2usize..8, csls in any::<bool>()) {
        let cs = toy_space(seed, n, d);
        let test = TestDictionary::from_pairs((0..n).map(|i| (format!("w{i}"), format!("w{i}"))));
        let mode = if csls { Retrieval::csls() } else { Retrieval::Cosine };
        let rep = precision_at_k(&cs, &test, &[1, 5, 10], mode, OovPolicy::Skip, false).unwrap();
        let (p1, p5, p10) = (rep.p(1).unwrap(), rep.p(5).unwrap(), rep.p(10).unwrap());
        prop_assert!(0.0 <= p1 && p1 <= p5 && p5 <= p10 && p10 <= 100.0);
    }

    #[test]
    fn precision_ignores_target_order(seed in 0u64..10_000, n in 5usize..60, d in 2usize..6) {
        let cs = toy_space(seed, n, d);
        let perm: Vec<usize> = (0..n).rev().collect();
        let names: Vec<String> = perm.iter().map(|&i| cs.tgt.vocab().token(i).to_string()).collect();
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| cs.tgt.vector(i).to_vec()).collect();
        let vocab = anchorlex_core::Vocabulary::from_entries(names.into_iter().map(|t| (t, 1))).unwrap();
        let tgt = anchorlex_core::EmbeddingSpace::new(vocab, Matrix::from_rows(&rows).unwrap()).unwrap();
        let permuted = CrossLingualSpace::new(cs.src.clone(), tgt).unwrap();
        let test = TestDictionary::from_pairs((0..n).map(|i| (format!("w{i}"), format!("w{i}"))));
        let a = precision_at_k(&cs, &test, &[1, 5], Retrieval::Cosine, OovPolicy::Skip, false).unwrap();
        let b = precision_at_k(&permuted, &test, &[1, 5], Retrieval::Cosine, OovPolicy::Skip, false).unwrap();
        prop_assert_eq!(a.p_at, b.p_at);
    }

    #[test]
    fn scaling_a_row_keeps_its_neighbour_order(seed in 0u64..10_000, n in 3usize..60, d in 2usize..6, c in 0.01f64..100.0) {
        let mut r = rng(seed);
        let mut q = gaussian(&mut r, n, d);
        let t = gaussian(&mut r, n, d);
        let before = Retriever::new(&q, &t, Retrieval::Cosine).unwrap().top_k(0, n);
        q.row_mut(0).iter_mut().for_each(|v| *v *= c);
        let after = Retriever::new(&q, &t, Retrieval::Cosine).unwrap().top_k(0, n);
        for w in before.windows(2) {
            // Only separated neighbours have a defined order.
            if w[0].1 - w[1].1 > 1e-12 {
                let pa = after.iter().position(|h| h.0 == w[0].0).unwrap();
                let pb = after.iter().position(|h| h.0 == w[1].0).unwrap();
                prop_assert!(pa < pb);
            }
        }
    }

    #[test]
    fn top_k_matches_oracle(seed in 0u64..10_000, n in 1usize..40, m in 1usize..40, d in 1usize..6, k in 1usize..8) {
        let mut r = rng(seed);
        let q = gaussian(&mut r, n, d);
        let t = gaussian(&mut r, m, d);
        let ret = Retriever::new(&q, &t, Retrieval::Cosine).unwrap();
        for i in 0..n {
            let got: Vec<usize> = ret.top_k(i, k).iter().map(|h| h.0).collect();
            let want: Vec<usize> = oracle(&q, &t, Retrieval::Cosine, i, k).iter().map(|h| h.0).collect();
            prop_assert_eq!(got, want);
        }
    }
}
