//! Word translation by cross-lingual nearest-neighbour retrieval and P@k.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexicon::TestDictionary;
use crate::refine::CrossLingualSpace;
use crate::retrieval::{Retrieval, Retriever};

/// Scores source tokens against every target row.
#[derive(Debug, Clone)]
pub struct Translator<'a> {
    space: &'a CrossLingualSpace,
    retriever: Retriever,
}

impl<'a> Translator<'a> {
    pub fn new(space: &'a CrossLingualSpace, retrieval: Retrieval) -> Result<Self> {
        let retriever = Retriever::new(space.src.matrix(), space.tgt.matrix(), retrieval)?;
        Ok(Translator { space, retriever })
    }

    pub fn retriever(&self) -> &Retriever {
        &self.retriever
    }

    /// Ranked `(target token, score)` candidates for a source token.
    pub fn translate(&self, query: &str, k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let q = self
            .space
            .src
            .vocab()
            .get(query)
            .ok_or_else(|| Error::OutOfVocabulary {
                side: "source",
                token: query.into(),
            })?;
        Ok(self.named(self.retriever.top_k(q, k)))
    }

    fn named(&self, hits: Vec<(usize, f64)>) -> Vec<(String, f64)> {
        let v = self.space.tgt.vocab();
        hits.into_iter().map(|(j, s)| (String::from(v.token(j)), s)).collect()
    }
}

/// One-off translation of a single source token.
pub fn translate_topk(
    space: &CrossLingualSpace,
    query: &str,
    k: usize,
    retrieval: Retrieval,
) -> Result<Vec<(String, f64)>> {
    Translator::new(space, retrieval)?.translate(query, k)
}

/// Treatment of test entries whose source token is out of vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Leave them out of the denominator.
    #[default]
    Skip,
    /// Count them as incorrect.
    CountWrong,
}

/// Ranked candidates for one test entry.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub src: String,
    pub gold: Vec<String>,
    pub candidates: Vec<(String, f64)>,
    /// 1-based rank of the first gold target among the candidates.
    pub hit_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReport {
    /// `(k, P@k in percent)`; `None` when no entry could be scored.
    pub p_at: Vec<(usize, Option<f64>)>,
    pub total: usize,
    pub covered: usize,
    pub skipped: usize,
    pub oov_policy: OovPolicy,
    pub per_query: Option<Vec<QueryResult>>,
}

impl TranslationReport {
    pub fn p(&self, k: usize) -> Option<f64> {
        self.p_at.iter().find(|x| x.0 == k).and_then(|x| x.1)
    }
}

/// P@k over a test dictionary. An entry is correct at `k` when any of its
/// in-vocabulary gold targets is among the top `k` candidates.
pub fn precision_at_k(
    space: &CrossLingualSpace,
    test: &TestDictionary,
    ks: &[usize],
    retrieval: Retrieval,
    oov: OovPolicy,
    keep_per_query: bool,
) -> Result<TranslationReport> {
    if ks.contains(&0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let kmax = ks.last().copied().unwrap_or(1);

    let (sv, tv) = (space.src.vocab(), space.tgt.vocab());
    let covered: Vec<(usize, usize)> = test
        .entries()
        .iter()
        .enumerate()
        .filter_map(|(e, entry)| sv.get(&entry.src).map(|q| (e, q)))
        .collect();
    let translator = Translator::new(space, retrieval)?;
    let queries: Vec<usize> = covered.iter().map(|c| c.1).collect();
    let hits = translator.retriever.top_k_many(&queries, kmax);

    let mut correct = alloc::vec![0usize; ks.len()];
    let mut per_query = Vec::new();
    for (&(e, _), cands) in covered.iter().zip(hits) {
        let entry = &test.entries()[e];
        let gold: Vec<usize> = entry.gold.iter().filter_map(|g| tv.get(g)).collect();
        let hit_rank = cands.iter().position(|c| gold.contains(&c.0)).map(|r| r + 1);
        if let Some(r) = hit_rank {
            for (c, &k) in correct.iter_mut().zip(&ks) {
                if r <= k {
                    *c += 1;
                }
            }
        }
        if keep_per_query {
            per_query.push(QueryResult {
                src: entry.src.clone(),
                gold: entry.gold.clone(),
                candidates: translator.named(cands),
                hit_rank,
            });
        }
    }

    let total = test.len();
    let denom = match oov {
        OovPolicy::Skip => covered.len(),
        OovPolicy::CountWrong => total,
    };
    let p_at = ks
        .iter()
        .zip(&correct)
        .map(|(&k, &c)| (k, (denom > 0).then(|| 100.0 * c as f64 / denom as f64)))
        .collect();
    Ok(TranslationReport {
        p_at,
        total,
        covered: covered.len(),
        skipped: total - covered.len(),
        oov_policy: oov,
        per_query: keep_per_query.then_some(per_query),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::space::EmbeddingSpace;
    use crate::vocab::Vocabulary;

    fn space(src: &[(&str, [f64; 2])], tgt: &[(&str, [f64; 2])]) -> CrossLingualSpace {
        let mk = |rows: &[(&str, [f64; 2])]| {
            let v = Vocabulary::from_entries(rows.iter().map(|r| (r.0.into(), 1u64))).unwrap();
            let m = Matrix::from_rows(&rows.iter().map(|r| r.1).collect::<Vec<_>>()).unwrap();
            EmbeddingSpace::new(v, m).unwrap()
        };
        CrossLingualSpace::new(mk(src), mk(tgt)).unwrap()
    }

    #[test]
    fn toy_translation() {
        let s = space(&[("a", [1.0, 0.0])], &[("x", [1.0, 0.0]), ("y", [0.0, 1.0])]);
        let t = translate_topk(&s, "a", 2, Retrieval::Cosine).unwrap();
        assert_eq!(t[0], ("x".into(), 1.0));
        assert!(translate_topk(&s, "zz", 1, Retrieval::Cosine).is_err());
    }

    #[test]
    fn p_at_k_and_oov() {
        let s = space(
            &[("a", [1.0, 0.0]), ("b", [0.0, 1.0])],
            &[("x", [1.0, 0.1]), ("y", [0.1, 1.0]), ("z", [1.0, 0.0])],
        );
        let test = TestDictionary::from_pairs([("a", "x"), ("b", "x"), ("c", "y")]);
        let r = precision_at_k(&s, &test, &[1, 5, 10], Retrieval::Cosine, OovPolicy::Skip, true).unwrap();
        assert_eq!((r.covered, r.skipped, r.total), (2, 1, 3));
        // a -> z first, x second; b -> y first, x second.
        assert_eq!(r.p(1), Some(0.0));
        assert_eq!(r.p(5), Some(100.0));
        let w = precision_at_k(&s, &test, &[1, 5], Retrieval::Cosine, OovPolicy::CountWrong, false).unwrap();
        assert!((w.p(5).unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert!(w.per_query.is_none());
    }

    #[test]
    fn nothing_covered_is_undefined() {
        let s = space(&[("a", [1.0, 0.0])], &[("x", [1.0, 0.0])]);
        let test = TestDictionary::from_pairs([("q", "x")]);
        let r = precision_at_k(&s, &test, &[1], Retrieval::Cosine, OovPolicy::Skip, false).unwrap();
        assert_eq!(r.covered, 0);
        assert_eq!(r.p(1), None);
    }
}
