//! Text file formats: word2vec embeddings, vocabulary TSV, dictionaries,
//! alignment models and sentiment datasets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anchorlex_core::evalkit::{Label, Scheme, SentimentDataset};
use anchorlex_core::lexicon::{BilingualDictionary, DictPair, TestDictionary};
use anchorlex_core::mapper::{AlignmentModel, Reweighting};
use anchorlex_core::token::{tokenize, TokenClass, TokenizerConfig};
use anchorlex_core::{EmbeddingSpace, Matrix, Vocabulary};

use crate::error::{AppError, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| AppError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::io(path, e))
}

/// Lines with 1-based numbers; invalid UTF-8 is replaced.
fn lines<'a, R: BufRead + 'a>(mut reader: R, path: &'a Path) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    let mut buf = Vec::new();
    let mut n = 0;
    std::iter::from_fn(move || {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                n += 1;
                let mut s = String::from_utf8_lossy(&buf).into_owned();
                while s.ends_with('\n') || s.ends_with('\r') {
                    s.pop();
                }
                Some(Ok((n, s)))
            }
            Err(e) => Some(Err(AppError::io(path, e))),
        }
    })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> AppError + '_ {
    move |e| AppError::io(path, e)
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split([' ', '\t']).filter(|f| !f.is_empty())
}

// ---------------------------------------------------------------------------
// Vocabulary TSV

pub fn write_vocab<W: Write>(mut w: W, vocab: &Vocabulary) -> std::io::Result<()> {
    for (t, f, c) in vocab.iter() {
        writeln!(w, "{t}\t{f}\t{c}")?;
    }
    w.flush()
}

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    write_vocab(create(path)?, vocab).map_err(write_err(path))
}

/// Reads `token<TAB>count[<TAB>class]`, keeping file order. The class column
/// is checked against the built-in classifier.
pub fn read_vocab<R: BufRead>(reader: R, path: &Path) -> Result<Vocabulary> {
    let mut entries = Vec::new();
    for item in lines(reader, path) {
        let (n, line) = item?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 || cols[0].is_empty() {
            return Err(AppError::parse(path, n, "expected token<TAB>count<TAB>class"));
        }
        let count: u64 = cols[1]
            .parse()
            .map_err(|_| AppError::parse(path, n, format!("invalid count {:?}", cols[1])))?;
        if let Some(c) = cols.get(2) {
            if TokenClass::parse(c).is_none() {
                return Err(AppError::parse(path, n, format!("unknown token class {c:?}")));
            }
        }
        entries.push((cols[0].to_string(), count));
    }
    Vocabulary::from_entries(entries).map_err(AppError::from)
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    read_vocab(open(path)?, path)
}

/// Token counts from a vocabulary file, for use as embedding frequencies.
pub fn load_frequencies(path: &Path) -> Result<HashMap<String, u64>> {
    let v = load_vocab(path)?;
    Ok(v.iter().map(|(t, f, _)| (t.to_string(), f)).collect())
}

// ---------------------------------------------------------------------------
// word2vec text embeddings

/// Parses word2vec text. Frequencies come from `freqs` when given; tokens
/// without one get `n − rank`. Duplicate tokens keep their first row.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    path: &Path,
    expected_dim: Option<usize>,
    freqs: Option<&HashMap<String, u64>>,
) -> Result<EmbeddingSpace> {
    let mut it = lines(reader, path);
    let (hn, header) = it
        .next()
        .transpose()?
        .ok_or_else(|| AppError::parse(path, 1, "missing header"))?;
    let h: Vec<&str> = fields(&header).collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (n, d) = match h.as_slice() {
        [a, b] => match (parse_usize(a), parse_usize(b)) {
            (Some(n), Some(d)) => (n, d),
            _ => return Err(AppError::parse(path, hn, "malformed header: expected `<rows> <dim>`")),
        },
        _ => return Err(AppError::parse(path, hn, "malformed header: expected `<rows> <dim>`")),
    };
    if d == 0 {
        return Err(AppError::parse(path, hn, "dimension must be at least 1"));
    }
    if let Some(e) = expected_dim {
        if e != d {
            return Err(AppError::parse(
                path,
                hn,
                format!("dimension {d} does not match expected {e}"),
            ));
        }
    }

    let mut tokens: Vec<String> = Vec::with_capacity(n);
    let mut data: Vec<f64> = Vec::with_capacity(n * d);
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(n);
    let mut rows = 0usize;
    let mut last = hn;
    for item in it {
        let (ln, line) = item?;
        last = ln;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let mut f = fields(&line);
        let token = f.next().expect("non-blank line has a field");
        let start = data.len();
        let mut count = 0;
        for v in f {
            count += 1;
            if count > d {
                continue;
            }
            let x: f64 = v
                .parse()
                .map_err(|_| AppError::parse(path, ln, format!("invalid number {v:?}")))?;
            if !x.is_finite() {
                return Err(AppError::parse(path, ln, format!("non-finite value {v:?}")));
            }
            data.push(x);
        }
        if count != d {
            return Err(AppError::parse(path, ln, format!("expected {d} values, found {count}")));
        }
        if seen.contains_key(token) {
            log::warn!(
                "{}:{ln}: duplicate token {token:?}, keeping the first row",
                path.display()
            );
            data.truncate(start);
            continue;
        }
        seen.insert(token.to_string(), tokens.len());
        tokens.push(token.to_string());
    }
    if rows != n {
        return Err(AppError::parse(
            path,
            last,
            format!("header declares {n} rows, found {rows}"),
        ));
    }

    let kept = tokens.len();
    let mut proxied = 0;
    let entries: Vec<(String, u64)> = tokens
        .into_iter()
        .enumerate()
        .map(|(rank, t)| {
            let f = match freqs.and_then(|m| m.get(&t)) {
                Some(&f) => f,
                None => {
                    proxied += 1;
                    (kept - rank) as u64
                }
            };
            (t, f)
        })
        .collect();
    if freqs.is_some() && proxied > 0 {
        log::warn!(
            "{}: {proxied} tokens missing from the frequency file use the rank proxy",
            path.display()
        );
    }
    let vocab = Vocabulary::from_entries(entries)?;
    let matrix = Matrix::from_vec(kept, d, data)?;
    Ok(EmbeddingSpace::new(vocab, matrix)?)
}

pub fn load_embeddings(path: &Path, expected_dim: Option<usize>, sidecar: Option<&Path>) -> Result<EmbeddingSpace> {
    let freqs = sidecar.map(load_frequencies).transpose()?;
    read_embeddings(open(path)?, path, expected_dim, freqs.as_ref())
}

/// Writes word2vec text with six decimals per value.
pub fn write_embeddings<W: Write>(mut w: W, space: &EmbeddingSpace) -> std::io::Result<()> {
    writeln!(w, "{} {}", space.len(), space.dim())?;
    let mut line = String::new();
    for (i, tok) in space.vocab().tokens().iter().enumerate() {
        line.clear();
        line.push_str(tok);
        for v in space.vector(i) {
            use std::fmt::Write as _;
            write!(line, " {v:.6}").expect("writing to a String");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn save_embeddings(path: &Path, space: &EmbeddingSpace) -> Result<()> {
    write_embeddings(create(path)?, space).map_err(write_err(path))
}

// ---------------------------------------------------------------------------
// Dictionaries

/// Writes `src<TAB>tgt<TAB>class<TAB>f_src<TAB>f_tgt`.
pub fn write_dictionary<W: Write>(
    mut w: W,
    dict: &BilingualDictionary,
    src: &Vocabulary,
    tgt: &Vocabulary,
) -> std::io::Result<()> {
    for p in dict {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            src.token(p.src),
            tgt.token(p.tgt),
            p.class,
            p.f_src,
            p.f_tgt
        )?;
    }
    w.flush()
}

pub fn save_dictionary(path: &Path, dict: &BilingualDictionary, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
    write_dictionary(create(path)?, dict, src, tgt).map_err(write_err(path))
}

/// Reads a seed dictionary: either whitespace-separated pairs or the
/// five-column synthetic format. Pairs with a token outside either
/// vocabulary are skipped with a warning.
pub fn read_dictionary<R: BufRead>(
    reader: R,
    path: &Path,
    src: &Vocabulary,
    tgt: &Vocabulary,
) -> Result<BilingualDictionary> {
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for item in lines(reader, path) {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let tabs: Vec<&str> = line.split('\t').collect();
        let (s, t, class, fs, ft) = if tabs.len() == 5 {
            let class = TokenClass::parse(tabs[2])
                .ok_or_else(|| AppError::parse(path, n, format!("unknown token class {:?}", tabs[2])))?;
            let num = |x: &str| {
                x.parse::<u64>()
                    .map_err(|_| AppError::parse(path, n, format!("invalid frequency {x:?}")))
            };
            (tabs[0], tabs[1], Some(class), Some(num(tabs[3])?), Some(num(tabs[4])?))
        } else {
            let f: Vec<&str> = fields(&line).collect();
            if f.len() != 2 {
                return Err(AppError::parse(
                    path,
                    n,
                    format!("expected 2 or 5 fields, found {}", f.len()),
                ));
            }
            (f[0], f[1], None, None, None)
        };
        match (src.get(s), tgt.get(t)) {
            (Some(i), Some(j)) => pairs.push(DictPair {
                src: i,
                tgt: j,
                class: class.unwrap_or_else(|| anchorlex_core::token::classify_token(s)),
                f_src: fs.unwrap_or_else(|| src.freq(i)),
                f_tgt: ft.unwrap_or_else(|| tgt.freq(j)),
            }),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!(
            "{}: skipped {skipped} pairs with out-of-vocabulary tokens",
            path.display()
        );
    }
    Ok(BilingualDictionary::new(pairs))
}

pub fn load_dictionary(path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<BilingualDictionary> {
    read_dictionary(open(path)?, path, src, tgt)
}

/// Reads `src<whitespace>tgt` lines, merging repeated sources.
pub fn read_test_dictionary<R: BufRead>(reader: R, path: &Path) -> Result<TestDictionary> {
    let mut pairs = Vec::new();
    for item in lines(reader, path) {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(AppError::parse(
                path,
                n,
                format!("expected `src tgt`, found {} fields", f.len()),
            ));
        }
        pairs.push((f[0].to_string(), f[1].to_string()));
    }
    Ok(TestDictionary::from_pairs(pairs))
}

pub fn load_test_dictionary(path: &Path) -> Result<TestDictionary> {
    read_test_dictionary(open(path)?, path)
}

pub fn write_test_dictionary<W: Write>(mut w: W, test: &TestDictionary) -> std::io::Result<()> {
    for e in test.entries() {
        for g in &e.gold {
            writeln!(w, "{} {}", e.src, g)?;
        }
    }
    w.flush()
}

// ---------------------------------------------------------------------------
// Alignment model
//
//   d s            s is the re-weighting exponent, or `none`
//   d rows of W
//   when re-weighted: one row of singular values, d rows of U, d rows of V
//
// Values use the shortest representation that parses back exactly.

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> std::io::Result<()> {
    let s: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
    writeln!(w, "{}", s.join(" "))
}

pub fn write_model<W: Write>(mut w: W, model: &AlignmentModel) -> std::io::Result<()> {
    let d = model.dim();
    match &model.reweight {
        None => writeln!(w, "{d} none")?,
        Some(r) => writeln!(w, "{d} {:?}", r.s)?,
    }
    for row in model.w.iter_rows() {
        write_row(&mut w, row)?;
    }
    if let Some(r) = &model.reweight {
        write_row(&mut w, &r.sigma)?;
        for row in r.u.iter_rows() {
            write_row(&mut w, row)?;
        }
        for row in r.v.iter_rows() {
            write_row(&mut w, row)?;
        }
    }
    w.flush()
}

pub fn save_model(path: &Path, model: &AlignmentModel) -> Result<()> {
    write_model(create(path)?, model).map_err(write_err(path))
}

pub fn read_model<R: BufRead>(reader: R, path: &Path) -> Result<AlignmentModel> {
    let all: Vec<(usize, String)> = lines(reader, path)
        .filter(|l| !matches!(l, Ok((_, s)) if s.trim().is_empty()))
        .collect::<Result<_>>()?;
    let (hn, header) = all
        .first()
        .ok_or_else(|| AppError::parse(path, 1, "empty model file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || AppError::parse(path, *hn, "malformed header: expected `<dim> <exponent|none>`");
    if h.len() != 2 {
        return Err(bad_header());
    }
    let d: usize = h[0].parse().map_err(|_| bad_header())?;
    let s: Option<f64> = match h[1] {
        "none" => None,
        x => Some(x.parse().map_err(|_| bad_header())?),
    };
    let expected = 1 + d + if s.is_some() { 1 + 2 * d } else { 0 };
    if all.len() != expected {
        let last = all.last().map_or(1, |l| l.0);
        return Err(AppError::parse(
            path,
            last,
            format!("expected {expected} lines, found {}", all.len()),
        ));
    }
    let row = |k: usize| -> Result<Vec<f64>> {
        let (n, line) = &all[k];
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|_| AppError::parse(path, *n, format!("invalid number {x:?}")))
            })
            .collect::<Result<_>>()?;
        if v.len() != d {
            return Err(AppError::parse(
                path,
                *n,
                format!("expected {d} values, found {}", v.len()),
            ));
        }
        Ok(v)
    };
    let block = |from: usize| -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = (from..from + d).map(row).collect::<Result<_>>()?;
        Ok(Matrix::from_rows(&rows)?)
    };
    let w = block(1)?;
    let reweight = match s {
        None => None,
        Some(s) => Some(Reweighting {
            s,
            sigma: row(1 + d)?,
            u: block(2 + d)?,
            v: block(2 + 2 * d)?,
        }),
    };
    Ok(AlignmentModel {
        w,
        reweight,
        diagnostics: Default::default(),
    })
}

pub fn load_model(path: &Path) -> Result<AlignmentModel> {
    read_model(open(path)?, path)
}

// ---------------------------------------------------------------------------
// Sentiment datasets

/// Reads `label<TAB>text` lines and tokenizes the text. Without an explicit
/// scheme, any neutral label makes the dataset 3-class.
pub fn read_sentiment<R: BufRead>(
    reader: R,
    path: &Path,
    scheme: Option<Scheme>,
    tokenizer: &TokenizerConfig,
) -> Result<SentimentDataset> {
    let mut examples = Vec::new();
    for item in lines(reader, path) {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| AppError::parse(path, n, "expected label<TAB>text"))?;
        let label = Label::parse(label).ok_or_else(|| AppError::parse(path, n, format!("unknown label {label:?}")))?;
        let toks = tokenize(text, tokenizer);
        if toks.is_empty() {
            return Err(AppError::parse(path, n, "text has no tokens"));
        }
        examples.push((toks, label, n));
    }
    let scheme = scheme.unwrap_or(if examples.iter().any(|e| e.1 == Label::Neutral) {
        Scheme::ThreeClass
    } else {
        Scheme::TwoClass
    });
    if let Some(e) = examples.iter().find(|e| scheme.index_of(e.1).is_none()) {
        return Err(AppError::parse(
            path,
            e.2,
            format!("label {} is not part of the {} scheme", e.1, scheme.name()),
        ));
    }
    Ok(SentimentDataset::new(
        examples.into_iter().map(|(t, l, _)| (t, l)).collect(),
        scheme,
    )?)
}

pub fn load_sentiment(path: &Path, scheme: Option<Scheme>, tokenizer: &TokenizerConfig) -> Result<SentimentDataset> {
    read_sentiment(open(path)?, path, scheme, tokenizer)
}
