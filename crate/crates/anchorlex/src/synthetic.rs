//! Synthetic bilingual fixtures with known ground truth.
//!
//! All generators are deterministic given their seed. The target language is
//! a noisy rotation of the source language; how much noise a token gets
//! depends on how well it is represented in the target corpus.

use std::path::Path;

use anchorlex_core::evalkit::{Label, Scheme, SentimentDataset};
use anchorlex_core::lexicon::{build_identical_dictionary, BilingualDictionary, TestDictionary};
use anchorlex_core::linalg::{orthogonal_factor, Matrix};
use anchorlex_core::mapper::diagonal_dictionary;
use anchorlex_core::token::{classify_token, tokenize, TokenClass, TokenizerConfig};
use anchorlex_core::{EmbeddingSpace, Vocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AppError, Result};
use crate::formats;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

pub fn normalize_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let r = m.row_mut(i);
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            r.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Haar-random orthogonal matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    orthogonal_factor(&gaussian(rng, d, d)).expect("Gaussian matrices are almost surely invertible")
}

/// `normalize(x Q + σᵢ ε)` with a per-row noise level.
fn noisy_rotation(rng: &mut ChaCha8Rng, x: &Matrix, q: &Matrix, sigma: &[f64]) -> Matrix {
    let mut y = x.matmul(q).expect("square rotation");
    for (i, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            for v in y.row_mut(i) {
                *v += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    normalize_rows(&mut y);
    y
}

/// The first `k` single-code-point emoji from U+1F300 upward that the
/// tokenizer keeps as one token.
pub fn emoji_tokens(k: usize) -> Vec<String> {
    let cfg = TokenizerConfig::default();
    (0x1F300u32..0x1FAFF)
        .filter_map(char::from_u32)
        .map(String::from)
        .filter(|s| classify_token(s) == TokenClass::Emoji && tokenize(s, &cfg) == [s.clone()])
        .take(k)
        .collect()
}

/// Builds a space whose vocabulary is sorted by frequency, permuting rows to match.
fn space_from(rows: Vec<(String, u64, Vec<f64>)>) -> EmbeddingSpace {
    let mut rows = rows;
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let d = rows.first().map_or(1, |r| r.2.len());
    let data: Vec<f64> = rows.iter().flat_map(|r| r.2.iter().copied()).collect();
    let matrix = Matrix::from_vec(rows.len(), d, data).expect("sized");
    let vocab = Vocabulary::from_entries(rows.into_iter().map(|r| (r.0, r.1))).expect("unique tokens");
    EmbeddingSpace::new(vocab, matrix).expect("finite")
}

// ---------------------------------------------------------------------------
// Rotation task

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationConfig {
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub seeds: usize,
    pub held_out: usize,
    pub seed: u64,
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig {
            n: 5000,
            d: 50,
            noise: 0.0,
            seeds: 500,
            held_out: 200,
            seed: 0,
        }
    }
}

/// Identical token strings on both sides; target rows are the rotated
/// source rows.
pub struct RotationTask {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    pub rotation: Matrix,
    pub seed_dict: BilingualDictionary,
    pub test: TestDictionary,
}

pub fn rotation_task(cfg: &RotationConfig) -> RotationTask {
    let mut r = rng(cfg.seed);
    let mut x = gaussian(&mut r, cfg.n, cfg.d);
    normalize_rows(&mut x);
    let q = random_orthogonal(&mut r, cfg.d);
    let y = noisy_rotation(&mut r, &x, &q, &vec![cfg.noise; cfg.n]);
    let vocab = Vocabulary::from_entries((0..cfg.n).map(|i| (format!("w{i}"), (cfg.n - i) as u64))).expect("unique");
    let src = EmbeddingSpace::new(vocab.clone(), x).expect("finite");
    let tgt = EmbeddingSpace::new(vocab, y).expect("finite");
    let mut perm: Vec<usize> = (0..cfg.n).collect();
    perm.shuffle(&mut r);
    let seed_idx = &perm[..cfg.seeds];
    let test_idx = &perm[cfg.seeds..cfg.seeds + cfg.held_out];
    let seed_dict = diagonal_dictionary(&src, &tgt, seed_idx);
    let test = TestDictionary::from_pairs(test_idx.iter().map(|&i| (format!("w{i}"), format!("w{i}"))));
    RotationTask {
        src,
        tgt,
        rotation: q,
        seed_dict,
        test,
    }
}

// ---------------------------------------------------------------------------
// Translation benchmark with token classes

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationConfig {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    /// Spread of concepts around their cluster centre.
    pub cluster_spread: f64,
    /// Target noise for a fully represented token.
    pub noise: f64,
    pub numerals: usize,
    pub emoji: usize,
    /// Identical tokens in total (numerals + emoji + shared words).
    pub identical: usize,
    /// Fraction of shared words that are rare in the target corpus.
    pub under_fraction: f64,
    /// Range of target/source frequency ratios for rare shared words.
    pub under_ratio: (f64, f64),
    pub test_identical: usize,
    pub test_other: usize,
    pub seed: u64,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            n: 3000,
            d: 50,
            clusters: 300,
            cluster_spread: 0.05,
            noise: 0.05,
            numerals: 25,
            emoji: 25,
            identical: 1000,
            under_fraction: 0.5,
            under_ratio: (0.01, 0.1),
            test_identical: 80,
            test_other: 320,
            seed: 0,
        }
    }
}

impl TranslationConfig {
    /// Defaults with every count scaled to a vocabulary of `n` tokens.
    pub fn scaled(n: usize) -> Self {
        let base = TranslationConfig::default();
        let scale = |k: usize| (k * n / base.n).max(1);
        TranslationConfig {
            n,
            clusters: scale(base.clusters),
            numerals: scale(base.numerals),
            emoji: scale(base.emoji),
            identical: scale(base.identical),
            test_identical: scale(base.test_identical),
            test_other: scale(base.test_other),
            ..base
        }
    }

    /// Checks that the requested counts fit in the vocabulary.
    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(AppError::Config(m));
        if self.n == 0 || self.d == 0 || self.clusters == 0 {
            return fail("n, d and clusters must be positive".into());
        }
        if self.numerals + self.emoji > self.identical {
            return fail(format!(
                "numerals + emoji ({}) exceed identical tokens ({})",
                self.numerals + self.emoji,
                self.identical
            ));
        }
        if self.identical + self.test_other > self.n || self.test_identical > self.identical {
            return fail(format!(
                "identical ({}) plus other test tokens ({}) exceed the vocabulary ({})",
                self.identical, self.test_other, self.n
            ));
        }
        Ok(())
    }
}

pub struct TranslationBenchmark {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    /// All identical-token pairs between the two vocabularies.
    pub dictionary: BilingualDictionary,
    pub test: TestDictionary,
}

/// Concepts are clustered unit vectors. Target vectors get noise
/// `σ/√r` where `r` is the token's target/source frequency ratio, so rare
/// target tokens are poorly estimated.
pub fn translation_benchmark(cfg: &TranslationConfig) -> TranslationBenchmark {
    let mut r = rng(cfg.seed);
    let mut centres = gaussian(&mut r, cfg.clusters, cfg.d);
    normalize_rows(&mut centres);
    let mut x = Matrix::zeros(cfg.n, cfg.d);
    for i in 0..cfg.n {
        let c = r.random_range(0..cfg.clusters);
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            *v = centres[(c, j)] + cfg.cluster_spread * r.sample::<f64, _>(StandardNormal);
        }
    }
    normalize_rows(&mut x);
    let q = random_orthogonal(&mut r, cfg.d);

    let mut perm: Vec<usize> = (0..cfg.n).collect();
    perm.shuffle(&mut r);
    let emoji = emoji_tokens(cfg.emoji);
    let mut names: Vec<(String, String)> = (0..cfg.n).map(|i| (format!("en{i}"), format!("es{i}"))).collect();
    let mut ratio = vec![1.0; cfg.n];
    for (k, &i) in perm[..cfg.identical].iter().enumerate() {
        let name = if k < cfg.numerals {
            format!("{}", 10 * i + 7)
        } else if k < cfg.numerals + cfg.emoji {
            emoji[k - cfg.numerals].clone()
        } else {
            if r.random::<f64>() < cfg.under_fraction {
                ratio[i] = r.random_range(cfg.under_ratio.0..cfg.under_ratio.1);
            }
            format!("shared{i}")
        };
        names[i] = (name.clone(), name);
    }
    let sigma: Vec<f64> = ratio.iter().map(|&p| cfg.noise / p.sqrt()).collect();
    let y = noisy_rotation(&mut r, &x, &q, &sigma);

    let f_src: Vec<u64> = (0..cfg.n).map(|i| (1e6 / (i as f64 + 10.0)).round() as u64).collect();
    let f_tgt: Vec<u64> = (0..cfg.n)
        .map(|i| ((f_src[i] as f64 * ratio[i]).round() as u64).max(1))
        .collect();
    let src = space_from(
        (0..cfg.n)
            .map(|i| (names[i].0.clone(), f_src[i], x.row(i).to_vec()))
            .collect(),
    );
    let tgt = space_from(
        (0..cfg.n)
            .map(|i| (names[i].1.clone(), f_tgt[i], y.row(i).to_vec()))
            .collect(),
    );

    let mut ident = perm[..cfg.identical].to_vec();
    ident.shuffle(&mut r);
    let test_pairs = ident[..cfg.test_identical]
        .iter()
        .chain(&perm[cfg.identical..cfg.identical + cfg.test_other])
        .map(|&i| (names[i].0.clone(), names[i].1.clone()));
    let test = TestDictionary::from_pairs(test_pairs);
    let dictionary = build_identical_dictionary(src.vocab(), tgt.vocab());
    TranslationBenchmark {
        src,
        tgt,
        dictionary,
        test,
    }
}

// ---------------------------------------------------------------------------
// Sentiment transfer fixture

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentConfig {
    pub d: usize,
    /// Emoji shared by both languages; the first half is positive.
    pub emoji: usize,
    pub numerals: usize,
    /// Language-specific words per language.
    pub words: usize,
    pub words_per_sentence: usize,
    pub train: usize,
    pub test: usize,
    /// Per-component spread of emoji around their polarity direction.
    pub emoji_spread: f64,
    pub noise: f64,
    /// Frequency of the emoji in language B relative to language A.
    pub emoji_ratio_b: f64,
    pub emoji_freq_a: u64,
    pub seed: u64,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            d: 50,
            emoji: 100,
            numerals: 300,
            words: 1000,
            words_per_sentence: 8,
            train: 500,
            test: 500,
            emoji_spread: 0.098,
            noise: 0.05,
            emoji_ratio_b: 1e-4,
            emoji_freq_a: 200_000,
            seed: 0,
        }
    }
}

pub struct SentimentFixture {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    /// Identical tokens: emoji and numerals.
    pub dictionary: BilingualDictionary,
    pub train: SentimentDataset,
    pub test: SentimentDataset,
    /// Raw `label<TAB>text` lines.
    pub train_lines: Vec<String>,
    pub test_lines: Vec<String>,
}

/// Two languages with disjoint words and a shared emoji set whose polarity
/// decides the label. Words carry no signal. The emoji are frequent in
/// language A and rare (hence noisy) in language B.
pub fn sentiment_fixture(cfg: &SentimentConfig) -> SentimentFixture {
    let mut r = rng(cfg.seed);
    let d = cfg.d;
    let mut p = gaussian(&mut r, 1, d);
    normalize_rows(&mut p);
    let q = random_orthogonal(&mut r, d);
    let half = cfg.emoji / 2;
    let mut ea = Matrix::zeros(cfg.emoji, d);
    for k in 0..cfg.emoji {
        let s = if k < half { 1.0 } else { -1.0 };
        for (j, v) in ea.row_mut(k).iter_mut().enumerate() {
            *v = s * p[(0, j)] + cfg.emoji_spread * r.sample::<f64, _>(StandardNormal);
        }
    }
    normalize_rows(&mut ea);
    let eb = noisy_rotation(&mut r, &ea, &q, &vec![cfg.noise / cfg.emoji_ratio_b.sqrt(); cfg.emoji]);
    let mut na = gaussian(&mut r, cfg.numerals, d);
    normalize_rows(&mut na);
    let nb = noisy_rotation(&mut r, &na, &q, &vec![cfg.noise; cfg.numerals]);
    let mut wa = gaussian(&mut r, cfg.words, d);
    normalize_rows(&mut wa);
    let mut wb = gaussian(&mut r, cfg.words, d);
    normalize_rows(&mut wb);

    let emoji = emoji_tokens(cfg.emoji);
    let f_b = ((cfg.emoji_freq_a as f64 * cfg.emoji_ratio_b).round() as u64).max(1);
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    for (k, e) in emoji.iter().enumerate() {
        rows_a.push((e.clone(), cfg.emoji_freq_a, ea.row(k).to_vec()));
        rows_b.push((e.clone(), f_b, eb.row(k).to_vec()));
    }
    for k in 0..cfg.numerals {
        rows_a.push((format!("{k}"), 1000, na.row(k).to_vec()));
        rows_b.push((format!("{k}"), 1000, nb.row(k).to_vec()));
    }
    for k in 0..cfg.words {
        rows_a.push((format!("alfa{k}"), 100, wa.row(k).to_vec()));
        rows_b.push((format!("beta{k}"), 100, wb.row(k).to_vec()));
    }
    let src = space_from(rows_a);
    let tgt = space_from(rows_b);
    let dictionary = build_identical_dictionary(src.vocab(), tgt.vocab());

    let mut sentences = |n: usize, prefix: &str| -> Vec<String> {
        (0..n)
            .map(|_| {
                let positive = r.random::<bool>();
                let e = if positive {
                    r.random_range(0..half)
                } else {
                    r.random_range(half..cfg.emoji)
                };
                let mut words: Vec<String> = (0..cfg.words_per_sentence)
                    .map(|_| format!("{prefix}{}", r.random_range(0..cfg.words)))
                    .collect();
                words.push(emoji[e].clone());
                let label = if positive { Label::Positive } else { Label::Negative };
                format!("{}\t{}", label, words.join(" "))
            })
            .collect()
    };
    let train_lines = sentences(cfg.train, "alfa");
    let test_lines = sentences(cfg.test, "beta");
    let tok = TokenizerConfig::default();
    let parse = |lines: &[String]| {
        let ex = lines
            .iter()
            .map(|l| {
                let (lab, text) = l.split_once('\t').expect("generated with a tab");
                (tokenize(text, &tok), Label::parse(lab).expect("generated label"))
            })
            .collect();
        SentimentDataset::new(ex, Scheme::TwoClass).expect("valid by construction")
    };
    SentimentFixture {
        train: parse(&train_lines),
        test: parse(&test_lines),
        src,
        tgt,
        dictionary,
        train_lines,
        test_lines,
    }
}

// ---------------------------------------------------------------------------
// On-disk fixtures

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut body = lines.join("\n");
    body.push('\n');
    std::fs::write(path, body).map_err(|e| AppError::io(path, e))
}

fn write_pair(dir: &Path, src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<()> {
    formats::save_embeddings(&dir.join("src.vec"), src)?;
    formats::save_embeddings(&dir.join("tgt.vec"), tgt)?;
    formats::save_vocab(&dir.join("src.vocab.tsv"), src.vocab())?;
    formats::save_vocab(&dir.join("tgt.vocab.tsv"), tgt.vocab())
}

/// Writes the translation benchmark (embeddings, frequency sidecars and
/// the test dictionary) plus a matching pipeline config.
pub fn write_translation_fixture(dir: &Path, cfg: &TranslationConfig) -> Result<()> {
    cfg.check()?;
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let b = translation_benchmark(cfg);
    write_pair(dir, &b.src, &b.tgt)?;
    let test = dir.join("test.txt");
    let mut f = formats::create(&test)?;
    formats::write_test_dictionary(&mut f, &b.test).map_err(|e| AppError::io(&test, e))?;
    write_lines(
        &dir.join("pipeline.toml"),
        &[
            "seed = 7".into(),
            String::new(),
            "[paths]".into(),
            "src_embeddings = \"src.vec\"".into(),
            "tgt_embeddings = \"tgt.vec\"".into(),
            "src_vocab = \"src.vocab.tsv\"".into(),
            "tgt_vocab = \"tgt.vocab.tsv\"".into(),
            "test_dictionary = \"test.txt\"".into(),
            String::new(),
            "[dictionary]".into(),
            "mode = \"identical\"".into(),
            String::new(),
            "[refine]".into(),
            "mode = \"weighted\"".into(),
            String::new(),
            "[output]".into(),
            "dir = \"runs\"".into(),
        ],
    )
}

/// Writes the sentiment fixture (embeddings, sidecars, train/test TSV) plus
/// a matching pipeline config.
pub fn write_sentiment_fixture(dir: &Path, cfg: &SentimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let f = sentiment_fixture(cfg);
    write_pair(dir, &f.src, &f.tgt)?;
    write_lines(&dir.join("train.tsv"), &f.train_lines)?;
    write_lines(&dir.join("test.tsv"), &f.test_lines)?;
    write_lines(
        &dir.join("pipeline.toml"),
        &[
            "seed = 7".into(),
            String::new(),
            "[paths]".into(),
            "src_embeddings = \"src.vec\"".into(),
            "tgt_embeddings = \"tgt.vec\"".into(),
            "src_vocab = \"src.vocab.tsv\"".into(),
            "tgt_vocab = \"tgt.vocab.tsv\"".into(),
            "sentiment_train = \"train.tsv\"".into(),
            "sentiment_test = \"test.tsv\"".into(),
            String::new(),
            "[dictionary]".into(),
            "mode = \"identical\"".into(),
            String::new(),
            "[refine]".into(),
            "mode = \"weighted\"".into(),
            "classes = [\"emoji\"]".into(),
            String::new(),
            "[output]".into(),
            "dir = \"runs\"".into(),
        ],
    )
}
