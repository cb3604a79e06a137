//! Sentence classification with frozen embeddings: mean-embedding features
//! and a multinomial logistic-regression probe.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::space::EmbeddingSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Positive,
    Neutral,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Neutral => "neutral",
            Label::Negative => "negative",
        }
    }

    /// Accepts full names and common short forms, case-insensitively.
    pub fn parse(s: &str) -> Option<Label> {
        let l = s.trim().to_ascii_lowercase();
        match l.as_str() {
            "positive" | "pos" | "p" | "1" => Some(Label::Positive),
            "neutral" | "neu" | "none" | "0" => Some(Label::Neutral),
            "negative" | "neg" | "n" | "-1" => Some(Label::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    TwoClass,
    ThreeClass,
}

impl Scheme {
    /// Classes in model output order.
    pub fn classes(self) -> &'static [Label] {
        match self {
            Scheme::TwoClass => &[Label::Positive, Label::Negative],
            Scheme::ThreeClass => &[Label::Positive, Label::Neutral, Label::Negative],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::TwoClass => "2-class",
            Scheme::ThreeClass => "3-class",
        }
    }

    pub fn index_of(self, label: Label) -> Option<usize> {
        self.classes().iter().position(|&c| c == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentDataset {
    examples: Vec<(Vec<String>, Label)>,
    scheme: Scheme,
}

impl SentimentDataset {
    pub fn new(examples: Vec<(Vec<String>, Label)>, scheme: Scheme) -> Result<Self> {
        for (i, (toks, label)) in examples.iter().enumerate() {
            if toks.is_empty() {
                return Err(Error::EmptyExample { index: i });
            }
            if scheme.index_of(*label).is_none() {
                return Err(Error::LabelOutsideScheme {
                    label: label.as_str(),
                    scheme: scheme.name(),
                });
            }
        }
        Ok(SentimentDataset { examples, scheme })
    }

    pub fn examples(&self) -> &[(Vec<String>, Label)] {
        &self.examples
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.examples.iter().map(|e| e.1)
    }
}

/// Mean of the in-vocabulary token vectors; zero with the flag set when no
/// token is in vocabulary.
pub fn embed_sentence<S: AsRef<str>>(space: &EmbeddingSpace, tokens: &[S]) -> (Vec<f64>, bool) {
    let mut v = vec![0.0; space.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(row) = space.lookup(t.as_ref()) {
            for (a, b) in v.iter_mut().zip(row) {
                *a += b;
            }
            n += 1;
        }
    }
    if n == 0 {
        return (v, true);
    }
    v.iter_mut().for_each(|a| *a /= n as f64);
    (v, false)
}

/// Feature matrix (one mean embedding per example) and the number of
/// all-OOV examples.
pub fn features(data: &SentimentDataset, space: &EmbeddingSpace) -> (Matrix, usize) {
    let d = space.dim();
    let mut m = Matrix::zeros(data.len(), d);
    let mut oov = 0;
    for (i, (toks, _)) in data.examples().iter().enumerate() {
        let (v, flag) = embed_sentence(space, toks);
        oov += flag as usize;
        m.row_mut(i).copy_from_slice(&v);
    }
    (m, oov)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 500,
            lr: 0.1,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub scheme: Scheme,
    /// `d × classes`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Training loss at the start of every epoch, then after the last one.
    pub loss_log: Vec<f64>,
}

/// Row-wise softmax of `x W + b`.
fn probabilities(w: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; b.len()];
    w.vec_mul_into(x, &mut z);
    for (zi, bi) in z.iter_mut().zip(b) {
        *zi += bi;
    }
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for zi in z.iter_mut() {
        *zi = libm::exp(*zi - m);
        s += *zi;
    }
    z.iter_mut().for_each(|zi| *zi /= s);
    z
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` and its gradient with respect to
/// `W` and `b`.
pub fn loss_and_gradient(w: &Matrix, b: &[f64], x: &Matrix, y: &[usize], l2: f64) -> (f64, Matrix, Vec<f64>) {
    let n = x.rows().max(1) as f64;
    let mut loss = 0.0;
    let mut gw = Matrix::zeros(w.rows(), w.cols());
    let mut gb = vec![0.0; b.len()];
    for (i, &yi) in y.iter().enumerate() {
        let xi = x.row(i);
        let mut p = probabilities(w, b, xi);
        loss -= libm::log(p[yi].max(f64::MIN_POSITIVE));
        p[yi] -= 1.0;
        for (k, &xk) in xi.iter().enumerate() {
            for (g, pc) in gw.row_mut(k).iter_mut().zip(&p) {
                *g += xk * pc;
            }
        }
        for (g, pc) in gb.iter_mut().zip(&p) {
            *g += pc;
        }
    }
    loss /= n;
    let mut reg = 0.0;
    for r in 0..w.rows() {
        for c in 0..w.cols() {
            let wv = w[(r, c)];
            gw[(r, c)] = gw[(r, c)] / n + l2 * wv;
            reg += wv * wv;
        }
    }
    gb.iter_mut().for_each(|g| *g /= n);
    (loss + 0.5 * l2 * reg, gw, gb)
}

fn label_indices(data: &SentimentDataset) -> Vec<usize> {
    data.labels()
        .map(|l| data.scheme().index_of(l).expect("validated on construction"))
        .collect()
}

/// Full-batch gradient descent from zero initialization. The embedding
/// space is only read.
pub fn train_probe(train: &SentimentDataset, space: &EmbeddingSpace, config: &ProbeConfig) -> Result<ProbeModel> {
    let scheme = train.scheme();
    for &c in scheme.classes() {
        if !train.labels().any(|l| l == c) {
            return Err(Error::MissingClass { label: c.as_str() });
        }
    }
    let (x, oov) = features(train, space);
    if oov > 0 {
        log::warn!("{oov} training examples have no in-vocabulary token");
    }
    let y = label_indices(train);
    let c = scheme.classes().len();
    let mut w = Matrix::zeros(space.dim(), c);
    let mut b = vec![0.0; c];
    let mut log_ = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..=config.epochs {
        let (loss, gw, gb) = loss_and_gradient(&w, &b, &x, &y, config.l2);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log_.push(loss);
        if epoch == config.epochs {
            break;
        }
        for r in 0..w.rows() {
            for (wv, g) in w.row_mut(r).iter_mut().zip(gw.row(r)) {
                *wv -= config.lr * g;
            }
        }
        for (bv, g) in b.iter_mut().zip(&gb) {
            *bv -= config.lr * g;
        }
    }
    Ok(ProbeModel {
        scheme,
        weights: w,
        bias: b,
        loss_log: log_,
    })
}

impl ProbeModel {
    pub fn predict(&self, x: &[f64]) -> Label {
        let p = probabilities(&self.weights, &self.bias, x);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        self.scheme.classes()[best]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Metrics in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub scheme: Scheme,
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are gold classes, columns predictions, both in scheme order.
    pub confusion: Vec<Vec<usize>>,
}

/// Scores predictions. A class with no gold and no predicted examples has
/// F1 = 0 and still counts in the macro average.
pub fn classification_report(scheme: Scheme, gold: &[Label], pred: &[Label]) -> Result<ClassificationReport> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    let classes = scheme.classes();
    let c = classes.len();
    let mut confusion = vec![vec![0usize; c]; c];
    for (&g, &p) in gold.iter().zip(pred) {
        let gi = scheme.index_of(g).ok_or(Error::LabelOutsideScheme {
            label: g.as_str(),
            scheme: scheme.name(),
        })?;
        let pi = scheme.index_of(p).ok_or(Error::LabelOutsideScheme {
            label: p.as_str(),
            scheme: scheme.name(),
        })?;
        confusion[gi][pi] += 1;
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut per_class = Vec::with_capacity(c);
    let mut correct = 0;
    for (k, &label) in classes.iter().enumerate() {
        let tp = confusion[k][k];
        correct += tp;
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = (0..c).map(|g| confusion[g][k]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            label,
            precision: 100.0 * precision,
            recall: 100.0 * recall,
            f1: 100.0 * f1,
            support,
        });
    }
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / c as f64;
    Ok(ClassificationReport {
        scheme,
        n: gold.len(),
        accuracy: 100.0 * ratio(correct, gold.len()),
        macro_f1,
        per_class,
        confusion,
    })
}

/// Evaluates the probe on a dataset embedded with `space`.
pub fn eval_probe(model: &ProbeModel, test: &SentimentDataset, space: &EmbeddingSpace) -> Result<ClassificationReport> {
    if model.scheme != test.scheme() {
        return Err(Error::SchemeMismatch {
            model: model.scheme.name(),
            data: test.scheme().name(),
        });
    }
    if model.weights.rows() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.rows(),
            found: space.dim(),
        });
    }
    let (x, oov) = features(test, space);
    if oov > 0 {
        log::info!("{oov} test examples have no in-vocabulary token");
    }
    let pred: Vec<Label> = (0..x.rows()).map(|i| model.predict(x.row(i))).collect();
    let gold: Vec<Label> = test.labels().collect();
    classification_report(test.scheme(), &gold, &pred)
}

/// Predicts the most frequent training label (ties in scheme order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorityBaseline {
    pub scheme: Scheme,
    pub label: Label,
}

impl MajorityBaseline {
    pub fn fit(train: &SentimentDataset) -> Result<Self> {
        Self::fit_labels(train.scheme(), train.labels())
    }

    pub fn fit_labels<I: IntoIterator<Item = Label>>(scheme: Scheme, labels: I) -> Result<Self> {
        let mut counts = vec![0usize; scheme.classes().len()];
        for l in labels {
            let i = scheme.index_of(l).ok_or(Error::LabelOutsideScheme {
                label: l.as_str(),
                scheme: scheme.name(),
            })?;
            counts[i] += 1;
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidArgument("no training labels".into()));
        }
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        Ok(MajorityBaseline {
            scheme,
            label: scheme.classes()[best],
        })
    }

    pub fn evaluate(&self, test: &SentimentDataset) -> Result<ClassificationReport> {
        if self.scheme != test.scheme() {
            return Err(Error::SchemeMismatch {
                model: self.scheme.name(),
                data: test.scheme().name(),
            });
        }
        let gold: Vec<Label> = test.labels().collect();
        let pred = vec![self.label; gold.len()];
        classification_report(self.scheme, &gold, &pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Vocabulary;
    use alloc::string::ToString;

    fn space() -> EmbeddingSpace {
        let v = Vocabulary::from_entries([("a".to_string(), 1), ("b".to_string(), 1)]).unwrap();
        EmbeddingSpace::new(v, Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap()).unwrap()
    }

    fn ds(rows: &[(&[&str], Label)], scheme: Scheme) -> SentimentDataset {
        SentimentDataset::new(
            rows.iter()
                .map(|(t, l)| (t.iter().map(|s| s.to_string()).collect(), *l))
                .collect(),
            scheme,
        )
        .unwrap()
    }

    #[test]
    fn sentence_means() {
        let s = space();
        assert_eq!(embed_sentence(&s, &["a"]), (vec![1.0, 0.0], false));
        assert_eq!(embed_sentence(&s, &["a", "b", "zz"]), (vec![0.5, 0.5], false));
        assert_eq!(embed_sentence(&s, &["zz"]), (vec![0.0, 0.0], true));
    }

    #[test]
    fn separable_two_class() {
        let s = space();
        let d = ds(
            &[(&["a"], Label::Positive), (&["b"], Label::Negative)],
            Scheme::TwoClass,
        );
        let m = train_probe(&d, &s, &ProbeConfig::default()).unwrap();
        let r = eval_probe(&m, &d, &s).unwrap();
        assert_eq!(r.accuracy, 100.0);
        assert_eq!(r.macro_f1, 100.0);
        assert!(m.loss_log.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    }

    #[test]
    fn missing_class_and_scheme_mismatch() {
        let s = space();
        let d = ds(&[(&["a"], Label::Positive)], Scheme::TwoClass);
        assert_eq!(
            train_probe(&d, &s, &ProbeConfig::default()),
            Err(Error::MissingClass { label: "negative" })
        );
        let two = ds(
            &[(&["a"], Label::Positive), (&["b"], Label::Negative)],
            Scheme::TwoClass,
        );
        let m = train_probe(&two, &s, &ProbeConfig::default()).unwrap();
        let three = ds(&[(&["a"], Label::Neutral)], Scheme::ThreeClass);
        assert!(matches!(eval_probe(&m, &three, &s), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn dataset_validation() {
        assert_eq!(
            SentimentDataset::new(vec![(vec![], Label::Positive)], Scheme::TwoClass),
            Err(Error::EmptyExample { index: 0 })
        );
        assert!(SentimentDataset::new(vec![(vec!["a".into()], Label::Neutral)], Scheme::TwoClass).is_err());
    }

    #[test]
    fn empty_class_scores_zero_f1() {
        let gold = [Label::Positive, Label::Positive];
        let pred = [Label::Positive, Label::Positive];
        let r = classification_report(Scheme::ThreeClass, &gold, &pred).unwrap();
        assert_eq!(r.accuracy, 100.0);
        assert!((r.macro_f1 - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn majority_baseline() {
        let train = ds(
            &[
                (&["a"], Label::Negative),
                (&["a"], Label::Negative),
                (&["a"], Label::Positive),
            ],
            Scheme::TwoClass,
        );
        let b = MajorityBaseline::fit(&train).unwrap();
        assert_eq!(b.label, Label::Negative);
        assert!((b.evaluate(&train).unwrap().accuracy - 200.0 / 3.0).abs() < 1e-12);
    }
}
