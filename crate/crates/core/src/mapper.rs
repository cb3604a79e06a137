//! Orthogonal mapping between two embedding spaces.
//!
//! Source rows are mapped as `x ↦ xW`. The self-learning loop alternates a
//! Procrustes solve with dictionary re-induction over the most frequent
//! tokens of each side.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexicon::{BilingualDictionary, DictPair};
use crate::linalg::{add_outer, dot, norm, svd, Matrix};
use crate::retrieval::{Retrieval, Retriever};
use crate::space::EmbeddingSpace;

/// Correlation re-weighting applied on top of the orthogonal map.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweighting {
    pub s: f64,
    /// Singular values of the dictionary cross-covariance in the aligned space.
    pub sigma: Vec<f64>,
    /// Left singular vectors (source side).
    pub u: Matrix,
    /// Right singular vectors (target side).
    pub v: Matrix,
}

/// One self-learning iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean cosine over the dictionary induced with this iteration's map.
    pub objective: f64,
    pub dict_size: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub best_iteration: usize,
    pub history: Vec<IterationRecord>,
}

impl Diagnostics {
    /// Objectives of accepted iterations, in order.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        self.history
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.objective)
            .collect()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.history.iter().rev().find(|r| r.accepted).map(|r| r.objective)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    pub w: Matrix,
    pub reweight: Option<Reweighting>,
    pub diagnostics: Diagnostics,
}

impl AlignmentModel {
    pub fn identity(d: usize) -> Self {
        AlignmentModel {
            w: Matrix::identity(d),
            reweight: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    /// Full linear map applied to source rows.
    pub fn source_transform(&self) -> Matrix {
        match &self.reweight {
            None => self.w.clone(),
            Some(r) => scale_cols(&self.w.matmul(&r.u).expect("square"), &r.sigma, r.s),
        }
    }

    /// Linear map applied to target rows (`None` when the target is left as is).
    pub fn target_transform(&self) -> Option<Matrix> {
        self.reweight.as_ref().map(|r| scale_cols(&r.v, &r.sigma, r.s))
    }

    /// Maps source rows.
    pub fn apply_mapping(&self, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
        check_dim(self.dim(), space.dim())?;
        space.with_matrix(space.matrix().matmul(&self.source_transform())?)
    }

    /// Maps target rows; the identity unless re-weighting is enabled.
    pub fn apply_target(&self, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
        check_dim(self.dim(), space.dim())?;
        match self.target_transform() {
            None => Ok(space.clone()),
            Some(t) => space.with_matrix(space.matrix().matmul(&t)?),
        }
    }
}

fn scale_cols(m: &Matrix, sigma: &[f64], s: f64) -> Matrix {
    let mut out = m.clone();
    let f: Vec<f64> = sigma.iter().map(|&x| libm::pow(x, s)).collect();
    for i in 0..out.rows() {
        for (v, fj) in out.row_mut(i).iter_mut().zip(&f) {
            *v *= fj;
        }
    }
    out
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_inputs(src: &EmbeddingSpace, tgt: &EmbeddingSpace, dict: &BilingualDictionary) -> Result<()> {
    check_dim(src.dim(), tgt.dim())?;
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    dict.validate(src.len(), tgt.len())
}

/// `Σ xᵢᵀ yᵢ` over index pairs, with an optional map applied to each `x`.
fn cross_covariance(src: &Matrix, tgt: &Matrix, pairs: &[(usize, usize)], map: Option<&Matrix>) -> Matrix {
    let d = src.cols();
    let mut m = Matrix::zeros(d, d);
    let mut buf = alloc::vec![0.0; d];
    for &(i, j) in pairs {
        let x = match map {
            Some(w) => {
                w.vec_mul_into(src.row(i), &mut buf);
                &buf[..]
            }
            None => src.row(i),
        };
        add_outer(&mut m, x, tgt.row(j), 1.0);
    }
    m
}

fn procrustes_pairs(src: &Matrix, tgt: &Matrix, pairs: &[(usize, usize)]) -> Result<Matrix> {
    let m = cross_covariance(src, tgt, pairs, None);
    let s = svd(&m)?;
    s.u.matmul(&s.v.transpose())
}

fn mean_cosine(src: &Matrix, tgt: &Matrix, w: &Matrix, pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut buf = alloc::vec![0.0; w.cols()];
    let mut total = 0.0;
    for &(i, j) in pairs {
        w.vec_mul_into(src.row(i), &mut buf);
        let y = tgt.row(j);
        let n = norm(&buf) * norm(y);
        if n > 0.0 {
            total += dot(&buf, y) / n;
        }
    }
    total / pairs.len() as f64
}

fn index_pairs(dict: &BilingualDictionary) -> Vec<(usize, usize)> {
    dict.iter().map(|p| (p.src, p.tgt)).collect()
}

/// Orthogonal `W` minimizing `‖XW − Y‖_F` over the dictionary rows.
pub fn solve_procrustes(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &BilingualDictionary,
) -> Result<AlignmentModel> {
    check_inputs(src, tgt, dict)?;
    if !src.norm_state().unit_rows || !tgt.norm_state().unit_rows {
        log::debug!("solving Procrustes on spaces without unit-row normalization");
    }
    let pairs = index_pairs(dict);
    let w = procrustes_pairs(src.matrix(), tgt.matrix(), &pairs)?;
    let objective = mean_cosine(src.matrix(), tgt.matrix(), &w, &pairs);
    Ok(AlignmentModel {
        w,
        reweight: None,
        diagnostics: Diagnostics {
            iterations: 1,
            best_iteration: 1,
            history: alloc::vec![IterationRecord {
                iteration: 1,
                objective,
                dict_size: pairs.len(),
                accepted: true,
            }],
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfLearnConfig {
    /// Number of most frequent tokens per side considered during induction.
    pub induce_vocab_cutoff: usize,
    pub retrieval: Retrieval,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SelfLearnConfig {
    fn default() -> Self {
        SelfLearnConfig {
            induce_vocab_cutoff: 20_000,
            retrieval: Retrieval::Cosine,
            max_iters: 50,
            tol: 1e-6,
        }
    }
}

/// Indices of the `k` most frequent tokens (ties by index), in index order.
fn top_frequent(space: &EmbeddingSpace, k: usize) -> Vec<usize> {
    let v = space.vocab();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v.freq(b).cmp(&v.freq(a)).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Nearest-neighbour pairs in both directions among the candidate rows.
fn induce(
    src: &Matrix,
    tgt: &Matrix,
    w: &Matrix,
    s_idx: &[usize],
    t_idx: &[usize],
    retrieval: Retrieval,
) -> Result<BTreeSet<(usize, usize)>> {
    let xs = src.select_rows(s_idx).matmul(w)?;
    let ys = tgt.select_rows(t_idx);
    let r = Retriever::new(&xs, &ys, retrieval)?;
    let (fwd, bwd) = r.mutual_argmax();
    let mut out = BTreeSet::new();
    for (qi, &tj) in fwd.iter().enumerate() {
        out.insert((s_idx[qi], t_idx[tj]));
    }
    for (tj, &qi) in bwd.iter().enumerate() {
        out.insert((s_idx[qi], t_idx[tj]));
    }
    Ok(out)
}

/// Best model so far: mapping, objective and the dictionary it was fit on.
type Best = (Matrix, f64, Vec<(usize, usize)>);

/// Iterative self-learning from a seed dictionary. Returns the model with
/// the best objective; the first iteration is always accepted.
pub fn self_learn(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    seed: &BilingualDictionary,
    config: &SelfLearnConfig,
) -> Result<AlignmentModel> {
    self_learn_with_dictionary(src, tgt, seed, config).map(|(m, _)| m)
}

/// As [`self_learn`], also returning the dictionary induced by the best model.
pub fn self_learn_with_dictionary(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    seed: &BilingualDictionary,
    config: &SelfLearnConfig,
) -> Result<(AlignmentModel, BilingualDictionary)> {
    check_inputs(src, tgt, seed)?;
    if config.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let cutoff = config.induce_vocab_cutoff.min(src.len()).min(tgt.len());
    if cutoff < config.induce_vocab_cutoff {
        log::info!(
            "induction cutoff {} clamped to the smaller vocabulary size {}",
            config.induce_vocab_cutoff,
            cutoff
        );
    }
    let s_idx = top_frequent(src, cutoff);
    let t_idx = top_frequent(tgt, cutoff);
    let seed_pairs = index_pairs(seed);
    let (x, y) = (src.matrix(), tgt.matrix());

    let mut pairs = seed_pairs.clone();
    let mut best: Option<Best> = None;
    let mut diag = Diagnostics::default();
    for it in 1..=config.max_iters {
        let w = procrustes_pairs(x, y, &pairs)?;
        let mut induced = induce(x, y, &w, &s_idx, &t_idx, config.retrieval)?;
        induced.extend(seed_pairs.iter().copied());
        let next: Vec<(usize, usize)> = induced.into_iter().collect();
        let objective = mean_cosine(x, y, &w, &next);
        diag.iterations = it;
        let prev = best.as_ref().map(|b| b.1);
        let accepted = prev.is_none_or(|p| objective >= p);
        diag.history.push(IterationRecord {
            iteration: it,
            objective,
            dict_size: next.len(),
            accepted,
        });
        log::debug!(
            "self-learning iteration {it}: objective {objective:.9}, dictionary {}",
            next.len()
        );
        if !accepted {
            break;
        }
        best = Some((w, objective, next.clone()));
        diag.best_iteration = it;
        if prev.is_some_and(|p| objective - p < config.tol) {
            break;
        }
        pairs = next;
    }
    let (w, _, induced) = best.expect("first iteration is always accepted");
    let model = AlignmentModel {
        w,
        reweight: None,
        diagnostics: diag,
    };
    Ok((model, pairs_to_dictionary(src, tgt, &induced)))
}

fn pairs_to_dictionary(src: &EmbeddingSpace, tgt: &EmbeddingSpace, pairs: &[(usize, usize)]) -> BilingualDictionary {
    BilingualDictionary::new(
        pairs
            .iter()
            .map(|&(i, j)| DictPair {
                src: i,
                tgt: j,
                class: src.vocab().class(i),
                f_src: src.vocab().freq(i),
                f_tgt: tgt.vocab().freq(j),
            })
            .collect(),
    )
}

/// Adds correlation re-weighting with exponent `s` to a solved model, using
/// the SVD of the dictionary cross-covariance in the aligned space.
pub fn reweight(
    model: &AlignmentModel,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &BilingualDictionary,
    s: f64,
) -> Result<AlignmentModel> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidExponent(s));
    }
    check_inputs(src, tgt, dict)?;
    check_dim(model.dim(), src.dim())?;
    let pairs = index_pairs(dict);
    let m = cross_covariance(src.matrix(), tgt.matrix(), &pairs, Some(&model.w));
    let dec = svd(&m)?;
    Ok(AlignmentModel {
        w: model.w.clone(),
        reweight: Some(Reweighting {
            s,
            sigma: dec.sigma,
            u: dec.u,
            v: dec.v,
        }),
        diagnostics: model.diagnostics.clone(),
    })
}

/// How a seed dictionary is turned into a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapperConfig {
    /// `None` solves Procrustes once on the seed dictionary.
    pub self_learn: Option<SelfLearnConfig>,
    /// Re-weighting exponent, if enabled.
    pub reweight: Option<f64>,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            self_learn: Some(SelfLearnConfig::default()),
            reweight: None,
        }
    }
}

/// Solves the mapping for `dict` as configured. Re-weighting uses the final
/// induced dictionary when self-learning, the seed dictionary otherwise.
pub fn fit(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &BilingualDictionary,
    config: &MapperConfig,
) -> Result<AlignmentModel> {
    let (model, final_dict) = match &config.self_learn {
        Some(c) => self_learn_with_dictionary(src, tgt, dict, c)?,
        None => (solve_procrustes(src, tgt, dict)?, dict.clone()),
    };
    match config.reweight {
        Some(s) => reweight(&model, src, tgt, &final_dict, s),
        None => Ok(model),
    }
}

/// Convenience: both sides mapped by `model`.
pub fn map_spaces(
    model: &AlignmentModel,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
    Ok((model.apply_mapping(src)?, model.apply_target(tgt)?))
}

/// Dictionary of `(i, i)` pairs for two spaces sharing token order.
pub fn diagonal_dictionary(src: &EmbeddingSpace, tgt: &EmbeddingSpace, indices: &[usize]) -> BilingualDictionary {
    BilingualDictionary::new(
        indices
            .iter()
            .map(|&i| DictPair {
                src: i,
                tgt: i,
                class: src.vocab().class(i),
                f_src: src.vocab().freq(i),
                f_tgt: tgt.vocab().freq(i),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Vocabulary;

    fn space2(rows: &[[f64; 2]]) -> EmbeddingSpace {
        let vocab = Vocabulary::from_entries((0..rows.len()).map(|i| (alloc::format!("w{i}"), 1u64))).unwrap();
        EmbeddingSpace::new(vocab, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn rot(theta: f64) -> Matrix {
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        Matrix::from_rows(&[[c, s], [-s, c]]).unwrap()
    }

    fn circle(n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let a = i as f64 * 0.37 + 0.1;
                [libm::cos(a), libm::sin(a)]
            })
            .collect()
    }

    #[test]
    fn identity_when_spaces_equal() {
        let s = space2(&circle(10));
        let all: Vec<usize> = (0..10).collect();
        let m = solve_procrustes(&s, &s, &diagonal_dictionary(&s, &s, &all)).unwrap();
        assert!(m.w.max_abs_diff(&Matrix::identity(2)) < 1e-6);
    }

    #[test]
    fn recovers_thirty_degrees() {
        let pts = circle(50);
        let src = space2(&pts);
        let r = rot(30f64.to_radians());
        let tgt = src.with_matrix(src.matrix().matmul(&r).unwrap()).unwrap();
        let all: Vec<usize> = (0..50).collect();
        let m = solve_procrustes(&src, &tgt, &diagonal_dictionary(&src, &tgt, &all)).unwrap();
        let resid = m.apply_mapping(&src).unwrap().matrix().max_abs_diff(tgt.matrix());
        assert!(resid < 1e-12);
        assert!(m.w.max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn empty_dictionary_rejected() {
        let s = space2(&circle(3));
        let e = BilingualDictionary::default();
        assert_eq!(solve_procrustes(&s, &s, &e), Err(Error::EmptyDictionary));
        assert_eq!(
            self_learn(&s, &s, &e, &SelfLearnConfig::default()),
            Err(Error::EmptyDictionary)
        );
    }

    #[test]
    fn exponent_range_checked() {
        let s = space2(&circle(3));
        let d = diagonal_dictionary(&s, &s, &[0, 1]);
        let m = AlignmentModel::identity(2);
        assert_eq!(reweight(&m, &s, &s, &d, 1.5), Err(Error::InvalidExponent(1.5)));
    }

    #[test]
    fn zero_exponent_keeps_cosines() {
        let pts = circle(20);
        let src = space2(&pts);
        let tgt = src.with_matrix(src.matrix().matmul(&rot(0.4)).unwrap()).unwrap();
        let d = diagonal_dictionary(&src, &tgt, &(0..20).collect::<Vec<_>>());
        let plain = solve_procrustes(&src, &tgt, &d).unwrap();
        let rw = reweight(&plain, &src, &tgt, &d, 0.0).unwrap();
        let (a, b) = map_spaces(&plain, &src, &tgt).unwrap();
        let (c, e) = map_spaces(&rw, &src, &tgt).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let p = dot(a.vector(i), b.vector(j));
                let q = dot(c.vector(i), e.vector(j));
                assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
