//! Token frequency tables and frequency-ordered vocabularies.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::token::{classify_token, TokenClass};

/// Raw counts accumulated over a tweet stream. Merging is commutative, so
/// shards can be counted independently.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounts {
    counts: BTreeMap<String, u64>,
    tweets: u64,
    tokens: u64,
}

/// Corpus-level statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub tweets: u64,
    pub tokens: u64,
    pub unique: u64,
}

impl TokenCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts a flat token stream, treating it as a single tweet.
    pub fn from_stream<I, S>(stream: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut c = TokenCounts::new();
        c.tweets = 1;
        for t in stream {
            c.add_token(t.into());
        }
        c
    }

    pub fn add_tweet<I, S>(&mut self, tokens: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tweets += 1;
        for t in tokens {
            self.add_token(t.into());
        }
    }

    fn add_token(&mut self, t: String) {
        self.tokens += 1;
        *self.counts.entry(t).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: TokenCounts) {
        self.tweets += other.tweets;
        self.tokens += other.tokens;
        for (t, n) in other.counts {
            *self.counts.entry(t).or_insert(0) += n;
        }
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            tweets: self.tweets,
            tokens: self.tokens,
            unique: self.counts.len() as u64,
        }
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.counts.iter().map(|(t, &n)| (t.as_str(), n))
    }
}

/// Ordered, unique token list with per-token frequency and class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    freqs: Vec<u64>,
    classes: Vec<TokenClass>,
    index: BTreeMap<String, usize>,
}

/// What `build_vocabulary` kept and dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VocabReport {
    pub corpus: CorpusStats,
    pub retained_types: u64,
    pub retained_tokens: u64,
    pub dropped_types: u64,
    pub dropped_tokens: u64,
}

impl Vocabulary {
    pub fn empty() -> Self {
        Vocabulary {
            tokens: Vec::new(),
            freqs: Vec::new(),
            classes: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    /// Keeps the given order. Fails on duplicate tokens.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut v = Vocabulary::empty();
        for (t, f) in entries {
            if v.index.contains_key(&t) {
                return Err(Error::DuplicateToken { token: t });
            }
            v.index.insert(t.clone(), v.tokens.len());
            v.classes.push(classify_token(&t));
            v.tokens.push(t);
            v.freqs.push(f);
        }
        Ok(v)
    }

    /// Sorts by descending frequency, ties by token, then builds.
    pub fn from_counts<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut e: Vec<(String, u64)> = entries.into_iter().collect();
        e.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Vocabulary::from_entries(e)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    #[inline]
    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    #[inline]
    pub fn freq(&self, i: usize) -> u64 {
        self.freqs[i]
    }

    #[inline]
    pub fn class(&self, i: usize) -> TokenClass {
        self.classes[i]
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    pub fn classes(&self) -> &[TokenClass] {
        &self.classes
    }

    pub fn total_frequency(&self) -> u64 {
        self.freqs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64, TokenClass)> + '_ {
        self.tokens
            .iter()
            .zip(&self.freqs)
            .zip(&self.classes)
            .map(|((t, &f), &c)| (t.as_str(), f, c))
    }
}

/// Builds the vocabulary of all tokens occurring at least `min_count` times.
pub fn build_vocabulary(counts: &TokenCounts, min_count: u64) -> Result<(Vocabulary, VocabReport)> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    let corpus = counts.stats();
    if corpus.tokens == 0 {
        log::warn!("empty corpus: vocabulary is empty");
    }
    let mut report = VocabReport {
        corpus,
        ..VocabReport::default()
    };
    let mut kept = Vec::new();
    for (t, n) in counts.iter() {
        if n >= min_count {
            report.retained_types += 1;
            report.retained_tokens += n;
            kept.push((String::from(t), n));
        } else {
            report.dropped_types += 1;
            report.dropped_tokens += n;
        }
    }
    Ok((Vocabulary::from_counts(kept)?, report))
}
