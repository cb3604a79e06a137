//! Bilingual dictionaries: identical-token seed dictionaries, class filters
//! for ablations, gold test dictionaries and small external seeds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::token::{classify_token, TokenClass};
use crate::vocab::Vocabulary;

/// One dictionary entry, indices into the source and target vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictPair {
    pub src: usize,
    pub tgt: usize,
    pub class: TokenClass,
    pub f_src: u64,
    pub f_tgt: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    pairs: Vec<DictPair>,
}

impl BilingualDictionary {
    /// Keeps the first occurrence of each `(src, tgt)` pair.
    pub fn new(pairs: Vec<DictPair>) -> Self {
        let mut seen = BTreeSet::new();
        let pairs = pairs.into_iter().filter(|p| seen.insert((p.src, p.tgt))).collect();
        BilingualDictionary { pairs }
    }

    /// Builds pairs from token strings, skipping pairs with a token missing
    /// from either vocabulary. Returns the dictionary and the skip count.
    pub fn from_tokens<'a, I>(src: &Vocabulary, tgt: &Vocabulary, pairs: I) -> (Self, usize)
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut out = Vec::new();
        let mut skipped = 0;
        for (s, t) in pairs {
            match (src.get(s), tgt.get(t)) {
                (Some(i), Some(j)) => out.push(DictPair {
                    src: i,
                    tgt: j,
                    class: classify_token(s),
                    f_src: src.freq(i),
                    f_tgt: tgt.freq(j),
                }),
                _ => skipped += 1,
            }
        }
        (BilingualDictionary::new(out), skipped)
    }

    pub fn pairs(&self) -> &[DictPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, DictPair> {
        self.pairs.iter()
    }

    /// Checks every index against the two vocabulary sizes.
    pub fn validate(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        for p in &self.pairs {
            if p.src >= src_len {
                return Err(Error::IndexOutOfRange {
                    side: "source",
                    index: p.src,
                    len: src_len,
                });
            }
            if p.tgt >= tgt_len {
                return Err(Error::IndexOutOfRange {
                    side: "target",
                    index: p.tgt,
                    len: tgt_len,
                });
            }
        }
        Ok(())
    }

    /// Swaps the roles of source and target.
    pub fn mirrored(&self) -> Self {
        BilingualDictionary {
            pairs: self
                .pairs
                .iter()
                .map(|p| DictPair {
                    src: p.tgt,
                    tgt: p.src,
                    class: p.class,
                    f_src: p.f_tgt,
                    f_tgt: p.f_src,
                })
                .collect(),
        }
    }

    /// Pair counts per class.
    pub fn class_counts(&self) -> BTreeMap<TokenClass, usize> {
        let mut m = BTreeMap::new();
        for p in &self.pairs {
            *m.entry(p.class).or_insert(0) += 1;
        }
        m
    }
}

impl<'a> IntoIterator for &'a BilingualDictionary {
    type Item = &'a DictPair;
    type IntoIter = core::slice::Iter<'a, DictPair>;
    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// One pair per token string present in both vocabularies, sorted by
/// `min(f_src, f_tgt)` descending and then by token.
pub fn build_identical_dictionary(src: &Vocabulary, tgt: &Vocabulary) -> BilingualDictionary {
    let mut pairs: Vec<DictPair> = src
        .iter()
        .enumerate()
        .filter_map(|(i, (tok, f_src, class))| {
            tgt.get(tok).map(|j| DictPair {
                src: i,
                tgt: j,
                class,
                f_src,
                f_tgt: tgt.freq(j),
            })
        })
        .collect();
    pairs.sort_by(|a, b| {
        let ma = a.f_src.min(a.f_tgt);
        let mb = b.f_src.min(b.f_tgt);
        mb.cmp(&ma).then_with(|| src.token(a.src).cmp(src.token(b.src)))
    });
    if pairs.is_empty() {
        log::warn!("no token occurs in both vocabularies: identical dictionary is empty");
    }
    BilingualDictionary { pairs }
}

/// Keeps pairs whose class is in `keep`.
pub fn filter_by_class(dict: &BilingualDictionary, keep: &[TokenClass]) -> BilingualDictionary {
    BilingualDictionary {
        pairs: dict.pairs.iter().filter(|p| keep.contains(&p.class)).copied().collect(),
    }
}

/// Dictionary variants compared in the ablation. Emoticons ride with emoji.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AblationGroup {
    All,
    Numerals,
    Emoji,
    Words,
}

impl AblationGroup {
    pub const ROWS: [AblationGroup; 4] = [
        AblationGroup::All,
        AblationGroup::Numerals,
        AblationGroup::Emoji,
        AblationGroup::Words,
    ];

    pub fn classes(self) -> &'static [TokenClass] {
        match self {
            AblationGroup::All => &TokenClass::ALL,
            AblationGroup::Numerals => &[TokenClass::Numeral],
            AblationGroup::Emoji => &[TokenClass::Emoji, TokenClass::Emoticon],
            AblationGroup::Words => &[TokenClass::Word],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AblationGroup::All => "All",
            AblationGroup::Numerals => "Numerals",
            AblationGroup::Emoji => "Emoji",
            AblationGroup::Words => "Words",
        }
    }

    pub fn filter(self, dict: &BilingualDictionary) -> BilingualDictionary {
        filter_by_class(dict, self.classes())
    }
}

/// A source token with every acceptable translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestEntry {
    pub src: String,
    pub gold: Vec<String>,
}

/// Gold translation pairs, merged per source token in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestDictionary {
    entries: Vec<TestEntry>,
}

/// Coverage of a test dictionary against vocabularies and a seed dictionary.
/// Counts are per merged entry.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoverageStats {
    pub entries: usize,
    /// Source token in the source vocabulary.
    pub src_in_vocab: usize,
    /// Some gold target equals the source string.
    pub identical: usize,
    /// Some (source, gold) pair occurs in the given dictionary.
    pub in_dictionary: usize,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl CoverageStats {
    pub fn src_in_vocab_rate(&self) -> f64 {
        ratio(self.src_in_vocab, self.entries)
    }
    pub fn identical_rate(&self) -> f64 {
        ratio(self.identical, self.entries)
    }
    pub fn in_dictionary_rate(&self) -> f64 {
        ratio(self.in_dictionary, self.entries)
    }
}

impl TestDictionary {
    pub fn from_pairs<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut entries: Vec<TestEntry> = Vec::new();
        let mut slot: BTreeMap<String, usize> = BTreeMap::new();
        for (s, t) in pairs {
            let (s, t) = (s.into(), t.into());
            match slot.get(&s) {
                Some(&k) => {
                    if !entries[k].gold.contains(&t) {
                        entries[k].gold.push(t);
                    }
                }
                None => {
                    slot.insert(s.clone(), entries.len());
                    entries.push(TestEntry {
                        src: s,
                        gold: alloc::vec![t],
                    });
                }
            }
        }
        TestDictionary { entries }
    }

    pub fn entries(&self) -> &[TestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn coverage(&self, src: &Vocabulary, tgt: &Vocabulary, dict: Option<&BilingualDictionary>) -> CoverageStats {
        let pairs: BTreeSet<(&str, &str)> = dict
            .map(|d| d.iter().map(|p| (src.token(p.src), tgt.token(p.tgt))).collect())
            .unwrap_or_default();
        let mut c = CoverageStats {
            entries: self.entries.len(),
            ..CoverageStats::default()
        };
        for e in &self.entries {
            if src.contains(&e.src) {
                c.src_in_vocab += 1;
            }
            if e.gold.contains(&e.src) {
                c.identical += 1;
            }
            if e.gold.iter().any(|g| pairs.contains(&(e.src.as_str(), g.as_str()))) {
                c.in_dictionary += 1;
            }
        }
        c
    }

    /// Drops gold targets identical to their source, and entries left empty.
    pub fn without_identical(&self) -> Self {
        TestDictionary {
            entries: self
                .entries
                .iter()
                .filter_map(|e| {
                    let gold: Vec<String> = e.gold.iter().filter(|g| **g != e.src).cloned().collect();
                    (!gold.is_empty()).then(|| TestEntry {
                        src: e.src.clone(),
                        gold,
                    })
                })
                .collect(),
        }
    }
}

/// Uniformly samples `k` entries whose source and some gold target are in
/// vocabulary. The chosen target is the lowest-index in-vocabulary gold.
pub fn sample_seed(
    test: &TestDictionary,
    src: &Vocabulary,
    tgt: &Vocabulary,
    k: usize,
    rng_seed: u64,
) -> Result<BilingualDictionary> {
    let eligible: Vec<DictPair> = test
        .entries()
        .iter()
        .filter_map(|e| {
            let i = src.get(&e.src)?;
            let j = e.gold.iter().filter_map(|g| tgt.get(g)).min()?;
            Some(DictPair {
                src: i,
                tgt: j,
                class: classify_token(&e.src),
                f_src: src.freq(i),
                f_tgt: tgt.freq(j),
            })
        })
        .collect();
    if k > eligible.len() {
        return Err(Error::InsufficientEntries {
            requested: k,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, eligible.len(), k).into_vec();
    picked.sort_unstable();
    Ok(BilingualDictionary::new(
        picked.into_iter().map(|i| eligible[i]).collect(),
    ))
}
