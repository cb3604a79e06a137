//! Corpus streaming: one tweet per line, deduplicated, tokenized and counted.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use anchorlex_core::token::{tokenize, TokenizerConfig};
use anchorlex_core::vocab::TokenCounts;
use rayon::prelude::*;

use crate::error::{AppError, Result};
use crate::formats::open;

const CHUNK: usize = 4096;

/// Distinct non-empty tweets in first-seen order. Lines are trimmed before
/// comparison and invalid UTF-8 is replaced.
pub fn unique_tweets<R: BufRead>(mut reader: R, path: &Path, seen: &mut HashSet<String>) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| AppError::io(path, e))?;
        if n == 0 {
            break;
        }
        let line = String::from_utf8_lossy(&buf);
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if seen.insert(t.to_string()) {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

/// Counts tokens over the tweets. Chunks are counted in parallel and merged;
/// the merge is commutative so the result is independent of scheduling.
pub fn count_tweets(tweets: &[String], tokenizer: &TokenizerConfig) -> TokenCounts {
    tweets
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut c = TokenCounts::new();
            for t in chunk {
                c.add_tweet(tokenize(t, tokenizer));
            }
            c
        })
        .reduce(TokenCounts::new, |mut a, b| {
            a.merge(b);
            a
        })
}

/// Reads and counts one or more corpus files, deduplicating across all of them.
pub fn count_files(paths: &[&Path], tokenizer: &TokenizerConfig) -> Result<TokenCounts> {
    let mut seen = HashSet::new();
    let mut tweets = Vec::new();
    for p in paths {
        tweets.extend(unique_tweets(open(p)?, p, &mut seen)?);
    }
    let counts = count_tweets(&tweets, tokenizer);
    let s = counts.stats();
    log::info!("{} tweets, {} tokens, {} unique", s.tweets, s.tokens, s.unique);
    Ok(counts)
}
