mod common;

use anchorlex_core::evalkit::sentiment::{classification_report, loss_and_gradient};
use anchorlex_core::evalkit::{
    embed_sentence, eval_probe, train_probe, Label, MajorityBaseline, ProbeConfig, Scheme, SentimentDataset,
};
use anchorlex_core::{Error, Matrix};
use common::*;
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn central(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(11);
    let (n, d, c) = (5, 10, 3);
    let x = gaussian(&mut r, n, d);
    let w = gaussian(&mut r, d, c);
    let b = gaussian(&mut r, 1, c).row(0).to_vec();
    let y = [0usize, 2, 1, 2, 0];
    let l2 = 0.01;
    let (_, gw, gb) = loss_and_gradient(&w, &b, &x, &y, l2);
    let h = 1e-5;
    for i in 0..d {
        for j in 0..c {
            let fd = central(
                |e| {
                    let mut w2 = w.clone();
                    w2[(i, j)] += e;
                    loss_and_gradient(&w2, &b, &x, &y, l2).0
                },
                h,
            );
            assert!(rel_err(gw[(i, j)], fd) < 1e-5, "W[{i},{j}]: {} vs {fd}", gw[(i, j)]);
        }
    }
    for j in 0..c {
        let fd = central(
            |e| {
                let mut b2 = b.clone();
                b2[j] += e;
                loss_and_gradient(&w, &b2, &x, &y, l2).0
            },
            h,
        );
        assert!(rel_err(gb[j], fd) < 1e-5);
    }
}

#[test]
fn loss_matches_direct_cross_entropy() {
    let mut r = rng(12);
    let x = gaussian(&mut r, 4, 3);
    let w = gaussian(&mut r, 3, 2);
    let b = vec![0.3, -0.2];
    let y = [0usize, 1, 1, 0];
    let mut want = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let z: Vec<f64> = (0..2)
            .map(|k| (0..3).map(|m| x[(i, m)] * w[(m, k)]).sum::<f64>() + b[k])
            .collect();
        let lse = (z[0].exp() + z[1].exp()).ln();
        want += lse - z[yi];
    }
    want /= 4.0;
    let reg: f64 = (0..3)
        .flat_map(|m| (0..2).map(move |k| (m, k)))
        .map(|p| w[p] * w[p])
        .sum();
    want += 0.5 * 0.1 * reg;
    assert!((loss_and_gradient(&w, &b, &x, &y, 0.1).0 - want).abs() < 1e-12);
}

/// Four tokens on the axes; `p*` lean positive, `n*` negative.
fn toy() -> (anchorlex_core::EmbeddingSpace, SentimentDataset) {
    let m = Matrix::from_rows(&[[1.0, 0.0], [0.8, 0.2], [0.0, 1.0], [0.1, 0.9]]).unwrap();
    let vocab =
        anchorlex_core::Vocabulary::from_entries(["p0", "p1", "n0", "n1"].iter().map(|t| (t.to_string(), 1))).unwrap();
    let space = anchorlex_core::EmbeddingSpace::new(vocab, m).unwrap();
    let ex = |toks: &[&str], l| (toks.iter().map(|t| t.to_string()).collect(), l);
    let data = SentimentDataset::new(
        vec![
            ex(&["p0"], Label::Positive),
            ex(&["p1", "p0"], Label::Positive),
            ex(&["n0"], Label::Negative),
            ex(&["n1", "n0", "zzz"], Label::Negative),
            ex(&["p1"], Label::Positive),
            ex(&["n1"], Label::Negative),
        ],
        Scheme::TwoClass,
    )
    .unwrap();
    (space, data)
}

#[test]
fn training_leaves_embeddings_untouched() {
    let (space, data) = toy();
    let before = space.clone();
    train_probe(&data, &space, &ProbeConfig::default()).unwrap();
    assert_eq!(before, space);
    for i in 0..space.len() {
        for (a, b) in before.vector(i).iter().zip(space.vector(i)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn separable_data_is_fit_and_loss_does_not_increase() {
    let (space, data) = toy();
    let model = train_probe(
        &data,
        &space,
        &ProbeConfig {
            epochs: 300,
            lr: 0.5,
            l2: 0.0,
        },
    )
    .unwrap();
    assert_eq!(eval_probe(&model, &data, &space).unwrap().accuracy, 100.0);
    for w in model.loss_log.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert_eq!(model.loss_log.len(), 301);
}

#[test]
fn duplicated_dataset_gives_the_same_model() {
    let (space, data) = toy();
    let mut doubled = data.examples().to_vec();
    doubled.extend(data.examples().iter().cloned());
    let doubled = SentimentDataset::new(doubled, Scheme::TwoClass).unwrap();
    let cfg = ProbeConfig::default();
    let a = train_probe(&data, &space, &cfg).unwrap();
    let b = train_probe(&doubled, &space, &cfg).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((a.weights[(i, j)] - b.weights[(i, j)]).abs() < 1e-10);
        }
        assert!((a.bias[i] - b.bias[i]).abs() < 1e-10);
    }
}

#[test]
fn missing_class_and_scheme_mismatch_are_errors() {
    let (space, _) = toy();
    let only_pos = SentimentDataset::new(vec![(vec!["p0".into()], Label::Positive)], Scheme::TwoClass).unwrap();
    assert!(matches!(
        train_probe(&only_pos, &space, &ProbeConfig::default()),
        Err(Error::MissingClass { .. })
    ));
    let (_, data) = toy();
    let model = train_probe(&data, &space, &ProbeConfig::default()).unwrap();
    let three = SentimentDataset::new(vec![(vec!["p0".into()], Label::Neutral)], Scheme::ThreeClass).unwrap();
    assert!(matches!(
        eval_probe(&model, &three, &space),
        Err(Error::SchemeMismatch { .. })
    ));
    assert!(SentimentDataset::new(vec![(vec!["p0".into()], Label::Neutral)], Scheme::TwoClass).is_err());
    assert!(SentimentDataset::new(vec![(vec![], Label::Positive)], Scheme::TwoClass).is_err());
}

#[test]
fn sentence_embedding_is_the_in_vocabulary_mean() {
    let (space, _) = toy();
    let (v, oov) = embed_sentence(&space, &["p0", "n0", "zzz"]);
    assert_eq!((v, oov), (vec![0.5, 0.5], false));
    let (v, oov) = embed_sentence(&space, &["zzz"]);
    assert_eq!((v, oov), (vec![0.0, 0.0], true));
}

fn labels(counts: &[(Label, usize)]) -> Vec<Label> {
    counts.iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect()
}

#[test]
fn majority_baseline_on_skewed_test_split() {
    let train = labels(&[(Label::Positive, 3000), (Label::Neutral, 2000), (Label::Negative, 1500)]);
    let base = MajorityBaseline::fit_labels(Scheme::ThreeClass, train).unwrap();
    assert_eq!(base.label, Label::Positive);
    let test = labels(&[(Label::Positive, 642), (Label::Neutral, 216), (Label::Negative, 768)]);
    let data = SentimentDataset::new(
        test.iter().map(|&l| (vec!["x".to_string()], l)).collect(),
        Scheme::ThreeClass,
    )
    .unwrap();
    let rep = base.evaluate(&data).unwrap();
    assert!((rep.accuracy - 39.5).abs() <= 0.5, "{}", rep.accuracy);
    assert!((rep.accuracy - 100.0 * 642.0 / 1626.0).abs() < 1e-9);
}

#[test]
fn macro_f1_counts_empty_classes_as_zero() {
    let gold = [Label::Positive, Label::Negative, Label::Positive];
    let rep = classification_report(Scheme::ThreeClass, &gold, &gold).unwrap();
    assert_eq!(rep.accuracy, 100.0);
    assert!((rep.macro_f1 - 200.0 / 3.0).abs() < 1e-9);
    let rep = classification_report(Scheme::TwoClass, &gold, &gold).unwrap();
    assert_eq!(rep.macro_f1, 100.0);
    assert_eq!(rep.confusion, vec![vec![2, 0], vec![0, 1]]);
}

#[test]
fn per_class_scores_match_hand_counts() {
    use Label::*;
    let gold = [Positive, Positive, Negative, Negative, Neutral];
    let pred = [Positive, Negative, Negative, Negative, Positive];
    let rep = classification_report(Scheme::ThreeClass, &gold, &pred).unwrap();
    // positive: tp 1, predicted 2, support 2.
    let p = rep.per_class[0];
    assert_eq!((p.precision, p.recall, p.f1), (50.0, 50.0, 50.0));
    // negative: tp 2, predicted 3, support 2.
    let n = rep.per_class[2];
    assert!((n.precision - 200.0 / 3.0).abs() < 1e-9 && n.recall == 100.0 && (n.f1 - 80.0).abs() < 1e-9);
    assert_eq!(rep.per_class[1].f1, 0.0);
    assert!((rep.accuracy - 60.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_is_consistent(g in proptest::collection::vec(0usize..3, 1..60), p_seed in 0u64..1000) {
        let classes = Scheme::ThreeClass.classes();
        let gold: Vec<Label> = g.iter().map(|&i| classes[i]).collect();
        let pred: Vec<Label> = g.iter().enumerate().map(|(k, &i)| classes[(i + (k as u64 * p_seed % 3) as usize) % 3]).collect();
        let rep = classification_report(Scheme::ThreeClass, &gold, &pred).unwrap();
        let total: usize = rep.confusion.iter().flatten().sum();
        prop_assert_eq!(total, gold.len());
        let hits = gold.iter().zip(&pred).filter(|(a, b)| a == b).count();
        prop_assert!((rep.accuracy - 100.0 * hits as f64 / gold.len() as f64).abs() < 1e-9);
        for m in &rep.per_class {
            prop_assert!((0.0..=100.0).contains(&m.f1));
        }
        let self_rep = classification_report(Scheme::ThreeClass, &gold, &gold).unwrap();
        prop_assert_eq!(self_rep.accuracy, 100.0);
    }
}
