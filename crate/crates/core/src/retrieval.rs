//! Exhaustive cross-lingual nearest-neighbour retrieval.
//!
//! Scores are computed with a fixed summation order and ties go to the lower
//! target index, so results do not depend on the number of threads.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::par::map_range;

/// Scoring rule for cross-lingual retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retrieval {
    #[default]
    Cosine,
    /// Cross-domain similarity local scaling over `k` neighbours.
    Csls { k: usize },
}

impl Retrieval {
    pub const DEFAULT_CSLS_K: usize = 10;

    pub fn csls() -> Self {
        Retrieval::Csls {
            k: Self::DEFAULT_CSLS_K,
        }
    }
}

/// Copy of `m` with unit rows; zero rows stay zero.
pub fn unit_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

#[inline]
fn better(a: (usize, f64), b: (usize, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Keeps the best `k` (index, score) pairs in descending order.
struct TopK {
    k: usize,
    items: Vec<(usize, f64)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn push(&mut self, idx: usize, score: f64) {
        if self.k == 0 {
            return;
        }
        if self.items.len() == self.k && !better((idx, score), self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|&it| better(it, (idx, score)));
        self.items.insert(pos, (idx, score));
        self.items.truncate(self.k);
    }
}

/// Mean cosine of each row of `a` to its `k` nearest rows of `b` (both unit).
fn knn_mean(a: &Matrix, b: &Matrix, k: usize) -> Vec<f64> {
    let k = k.min(b.rows());
    map_range(a.rows(), |i| {
        if k == 0 {
            return 0.0;
        }
        let q = a.row(i);
        let mut top = TopK::new(k);
        for j in 0..b.rows() {
            top.push(j, dot(q, b.row(j)));
        }
        top.items.iter().map(|x| x.1).sum::<f64>() / k as f64
    })
}

/// Retrieval index over already-mapped query and target rows.
#[derive(Debug, Clone)]
pub struct Retriever {
    queries: Matrix,
    targets: Matrix,
    mode: Retrieval,
    /// Per-query CSLS penalty r_T(x).
    q_pen: Vec<f64>,
    /// Per-target CSLS penalty r_S(y).
    t_pen: Vec<f64>,
}

impl Retriever {
    pub fn new(queries: &Matrix, targets: &Matrix, mode: Retrieval) -> Result<Self> {
        if queries.cols() != targets.cols() {
            return Err(Error::DimensionMismatch {
                expected: queries.cols(),
                found: targets.cols(),
            });
        }
        let queries = unit_rows(queries);
        let targets = unit_rows(targets);
        let (q_pen, t_pen) = match mode {
            Retrieval::Cosine => (Vec::new(), Vec::new()),
            Retrieval::Csls { k } => {
                if k == 0 {
                    return Err(Error::InvalidArgument(
                        "CSLS neighbourhood size must be at least 1".into(),
                    ));
                }
                (knn_mean(&queries, &targets, k), knn_mean(&targets, &queries, k))
            }
        };
        Ok(Retriever {
            queries,
            targets,
            mode,
            q_pen,
            t_pen,
        })
    }

    pub fn mode(&self) -> Retrieval {
        self.mode
    }

    pub fn num_queries(&self) -> usize {
        self.queries.rows()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.rows()
    }

    #[inline]
    pub fn score(&self, q: usize, t: usize) -> f64 {
        let c = dot(self.queries.row(q), self.targets.row(t));
        match self.mode {
            Retrieval::Cosine => c,
            Retrieval::Csls { .. } => 2.0 * c - self.q_pen[q] - self.t_pen[t],
        }
    }

    /// The `k` best targets for query row `q`, best first.
    pub fn top_k(&self, q: usize, k: usize) -> Vec<(usize, f64)> {
        let mut top = TopK::new(k.min(self.targets.rows()));
        for t in 0..self.targets.rows() {
            top.push(t, self.score(q, t));
        }
        top.items
    }

    /// Top-k for every query row, computed in parallel.
    pub fn top_k_all(&self, k: usize) -> Vec<Vec<(usize, f64)>> {
        map_range(self.queries.rows(), |q| self.top_k(q, k))
    }

    /// Top-k for the listed query rows, computed in parallel.
    pub fn top_k_many(&self, queries: &[usize], k: usize) -> Vec<Vec<(usize, f64)>> {
        map_range(queries.len(), |i| self.top_k(queries[i], k))
    }

    /// Top-k for an arbitrary (already mapped) query vector.
    pub fn top_k_vector(&self, v: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        if v.len() != self.targets.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.targets.cols(),
                found: v.len(),
            });
        }
        let n = norm(v);
        let q: Vec<f64> = if n > 0.0 {
            v.iter().map(|x| x / n).collect()
        } else {
            v.to_vec()
        };
        let cos: Vec<f64> = (0..self.targets.rows()).map(|t| dot(&q, self.targets.row(t))).collect();
        let pen = match self.mode {
            Retrieval::Cosine => 0.0,
            Retrieval::Csls { k: kk } => {
                let mut top = TopK::new(kk.min(cos.len()));
                cos.iter().enumerate().for_each(|(t, &c)| top.push(t, c));
                if top.items.is_empty() {
                    0.0
                } else {
                    top.items.iter().map(|x| x.1).sum::<f64>() / top.items.len() as f64
                }
            }
        };
        let mut top = TopK::new(k.min(cos.len()));
        for (t, &c) in cos.iter().enumerate() {
            let s = match self.mode {
                Retrieval::Cosine => c,
                Retrieval::Csls { .. } => 2.0 * c - pen - self.t_pen[t],
            };
            top.push(t, s);
        }
        Ok(top.items)
    }

    /// Best target for every query and best query for every target, from one
    /// pass over the score matrix.
    pub fn mutual_argmax(&self) -> (Vec<usize>, Vec<usize>) {
        const BLOCK: usize = 128;
        let nq = self.queries.rows();
        let nt = self.targets.rows();
        let blocks = nq.div_ceil(BLOCK);
        let partial = map_range(blocks, |b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(nq);
            let mut row_best = Vec::with_capacity(hi - lo);
            let mut col_best: Vec<(usize, f64)> = alloc::vec![(usize::MAX, f64::NEG_INFINITY); nt];
            for q in lo..hi {
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for (t, cb) in col_best.iter_mut().enumerate() {
                    let s = self.score(q, t);
                    if better((t, s), best) {
                        best = (t, s);
                    }
                    if better((q, s), *cb) {
                        *cb = (q, s);
                    }
                }
                row_best.push(best.0);
            }
            (row_best, col_best)
        });
        let mut fwd = Vec::with_capacity(nq);
        let mut col: Vec<(usize, f64)> = alloc::vec![(usize::MAX, f64::NEG_INFINITY); nt];
        for (rows, cols) in partial {
            fwd.extend(rows);
            for (c, p) in col.iter_mut().zip(cols) {
                if better(p, *c) {
                    *c = p;
                }
            }
        }
        (fwd, col.into_iter().map(|c| c.0).collect())
    }
}
