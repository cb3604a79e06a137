//! Post-processing of an aligned pair of spaces: anchoring dictionary pairs
//! to their (weighted) average and the Meemi regression transform.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexicon::BilingualDictionary;
use crate::linalg::{least_squares, Matrix};
use crate::space::EmbeddingSpace;

/// Ridge strength used when the Meemi regression is degenerate.
pub const MEEMI_RIDGE: f64 = 1e-3;

/// One applied transform, in application order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformRecord {
    pub name: String,
    pub detail: String,
}

/// Two aligned spaces of equal dimension plus their transform log.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLingualSpace {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    provenance: Vec<TransformRecord>,
}

impl CrossLingualSpace {
    pub fn new(src: EmbeddingSpace, tgt: EmbeddingSpace) -> Result<Self> {
        if src.dim() != tgt.dim() {
            return Err(Error::DimensionMismatch {
                expected: src.dim(),
                found: tgt.dim(),
            });
        }
        Ok(CrossLingualSpace {
            src,
            tgt,
            provenance: Vec::new(),
        })
    }

    pub fn provenance(&self) -> &[TransformRecord] {
        &self.provenance
    }

    /// Appends a record; the log never shrinks.
    pub fn record(&mut self, name: &str, detail: String) {
        self.provenance.push(TransformRecord {
            name: name.into(),
            detail,
        });
    }

    fn derive(&self, src: EmbeddingSpace, tgt: EmbeddingSpace, name: &str, detail: String) -> Self {
        let mut out = CrossLingualSpace {
            src,
            tgt,
            provenance: self.provenance.clone(),
        };
        out.record(name, detail);
        out
    }
}

/// How pair frequencies enter the weighted average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyMode {
    #[default]
    Absolute,
    /// Frequencies divided by the total frequency of their vocabulary.
    Relative,
}

/// Replaces every dictionary row with the average of its own vector and its
/// counterparts, all computed from the input rows.
fn anchor(
    space: &CrossLingualSpace,
    dict: &BilingualDictionary,
    w_src: &dyn Fn(usize) -> f64,
    w_tgt: &dyn Fn(usize) -> f64,
) -> Result<(Matrix, Matrix)> {
    let (x, y) = (space.src.matrix(), space.tgt.matrix());
    dict.validate(x.rows(), y.rows())?;
    // Counterparts per token, ascending.
    let mut src_nb: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut tgt_nb: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in dict {
        src_nb.entry(p.src).or_default().push(p.tgt);
        tgt_nb.entry(p.tgt).or_default().push(p.src);
    }
    src_nb.values_mut().for_each(|v| v.sort_unstable());
    tgt_nb.values_mut().for_each(|v| v.sort_unstable());

    let d = x.cols();
    let mut acc = alloc::vec![0.0; d];
    // Source-side vectors are always accumulated before target-side ones so
    // both members of a simple pair get bit-identical results.
    let mut average = |src_rows: &[usize], tgt_rows: &[usize]| -> Option<Vec<f64>> {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut total = 0.0;
        for &i in src_rows {
            let w = w_src(i);
            total += w;
            for (a, v) in acc.iter_mut().zip(x.row(i)) {
                *a += w * v;
            }
        }
        for &j in tgt_rows {
            let w = w_tgt(j);
            total += w;
            for (a, v) in acc.iter_mut().zip(y.row(j)) {
                *a += w * v;
            }
        }
        (total > 0.0).then(|| acc.iter().map(|a| a / total).collect())
    };

    let zero = |i: usize, j: usize| Error::ZeroFrequency {
        src: space.src.vocab().token(i).into(),
        tgt: space.tgt.vocab().token(j).into(),
    };
    let mut new_x = x.clone();
    for (&i, nb) in &src_nb {
        let mu = average(&[i], nb).ok_or_else(|| zero(i, nb[0]))?;
        new_x.row_mut(i).copy_from_slice(&mu);
    }
    let mut new_y = y.clone();
    for (&j, nb) in &tgt_nb {
        let mu = average(nb, &[j]).ok_or_else(|| zero(nb[0], j))?;
        new_y.row_mut(j).copy_from_slice(&mu);
    }
    Ok((new_x, new_y))
}

/// Both members of every pair become `(v₁ + v₂) / 2`.
pub fn average_plain(space: &CrossLingualSpace, dict: &BilingualDictionary) -> Result<CrossLingualSpace> {
    let one = |_: usize| 1.0;
    let (x, y) = anchor(space, dict, &one, &one)?;
    Ok(space.derive(
        space.src.with_matrix(x)?,
        space.tgt.with_matrix(y)?,
        "average_plain",
        format!("pairs={}", dict.len()),
    ))
}

/// Both members of every pair become `(f₁v₁ + f₂v₂) / (f₁ + f₂)`.
pub fn average_weighted(
    space: &CrossLingualSpace,
    dict: &BilingualDictionary,
    mode: FrequencyMode,
) -> Result<CrossLingualSpace> {
    dict.validate(space.src.len(), space.tgt.len())?;
    for p in dict {
        if p.f_src + p.f_tgt == 0 {
            return Err(Error::ZeroFrequency {
                src: space.src.vocab().token(p.src).into(),
                tgt: space.tgt.vocab().token(p.tgt).into(),
            });
        }
    }
    let mut f_src: BTreeMap<usize, u64> = BTreeMap::new();
    let mut f_tgt: BTreeMap<usize, u64> = BTreeMap::new();
    for p in dict {
        f_src.insert(p.src, p.f_src);
        f_tgt.insert(p.tgt, p.f_tgt);
    }
    let (ns, nt) = match mode {
        FrequencyMode::Absolute => (1.0, 1.0),
        FrequencyMode::Relative => (
            space.src.vocab().total_frequency().max(1) as f64,
            space.tgt.vocab().total_frequency().max(1) as f64,
        ),
    };
    let ws = |i: usize| f_src[&i] as f64 / ns;
    let wt = |j: usize| f_tgt[&j] as f64 / nt;
    let (x, y) = anchor(space, dict, &ws, &wt)?;
    let mode_name = match mode {
        FrequencyMode::Absolute => "absolute",
        FrequencyMode::Relative => "relative",
    };
    Ok(space.derive(
        space.src.with_matrix(x)?,
        space.tgt.with_matrix(y)?,
        "average_weighted",
        format!("pairs={} frequencies={}", dict.len(), mode_name),
    ))
}

/// The two regression matrices learned by [`meemi_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeemiFit {
    pub m_src: Matrix,
    pub m_tgt: Matrix,
    /// Ridge strength applied (0 when the plain problem was well posed).
    pub ridge: f64,
}

/// Regresses each side's dictionary rows onto the pair averages.
pub fn meemi_fit(space: &CrossLingualSpace, dict: &BilingualDictionary) -> Result<MeemiFit> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let (x, y) = (space.src.matrix(), space.tgt.matrix());
    dict.validate(x.rows(), y.rows())?;
    let xs = x.select_rows(&dict.iter().map(|p| p.src).collect::<Vec<_>>());
    let ys = y.select_rows(&dict.iter().map(|p| p.tgt).collect::<Vec<_>>());
    let mut mu = xs.clone();
    for r in 0..mu.rows() {
        for (m, b) in mu.row_mut(r).iter_mut().zip(ys.row(r)) {
            *m = (*m + b) / 2.0;
        }
    }
    let a = least_squares(&xs, &mu, MEEMI_RIDGE)?;
    let b = least_squares(&ys, &mu, MEEMI_RIDGE)?;
    let ridge = a.ridge.max(b.ridge);
    if ridge > 0.0 {
        log::warn!(
            "regression with {} pairs in dimension {} is degenerate; using ridge {}",
            dict.len(),
            x.cols(),
            ridge
        );
    }
    Ok(MeemiFit {
        m_src: a.solution,
        m_tgt: b.solution,
        ridge,
    })
}

/// Applies the Meemi regression to every row of both sides.
pub fn meemi_transform(space: &CrossLingualSpace, dict: &BilingualDictionary) -> Result<CrossLingualSpace> {
    let fit = meemi_fit(space, dict)?;
    let src = space.src.with_matrix(space.src.matrix().matmul(&fit.m_src)?)?;
    let tgt = space.tgt.with_matrix(space.tgt.matrix().matmul(&fit.m_tgt)?)?;
    Ok(space.derive(src, tgt, "meemi", format!("pairs={} ridge={}", dict.len(), fit.ridge)))
}
