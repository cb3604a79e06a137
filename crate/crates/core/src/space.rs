//! Embedding spaces: a vocabulary plus one row per token.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::vocab::Vocabulary;

/// Tolerance on row norms after unit normalization.
pub const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormStep {
    UnitRows,
    CenterColumns,
}

/// Unit rows, centered columns, unit rows again.
pub const DEFAULT_PIPELINE: [NormStep; 3] = [NormStep::UnitRows, NormStep::CenterColumns, NormStep::UnitRows];

/// Which normalization properties currently hold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormState {
    pub unit_rows: bool,
    pub mean_centered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Arc<Vocabulary>,
    matrix: Matrix,
    norm_state: NormState,
}

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, matrix: Matrix) -> Result<Self> {
        Self::with_shared_vocab(Arc::new(vocab), matrix)
    }

    pub fn with_shared_vocab(vocab: Arc<Vocabulary>, matrix: Matrix) -> Result<Self> {
        if matrix.rows() != vocab.len() {
            return Err(Error::ShapeMismatch {
                rows: matrix.rows(),
                tokens: vocab.len(),
            });
        }
        if matrix.cols() == 0 {
            return Err(Error::ZeroDimension);
        }
        if let Some(i) = (0..matrix.rows()).find(|&i| matrix.row(i).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite {
                what: alloc::format!("embedding row for token {:?}", vocab.token(i)),
            });
        }
        Ok(EmbeddingSpace {
            vocab,
            matrix,
            norm_state: NormState::default(),
        })
    }

    /// Same vocabulary, new matrix. Normalization flags are reset.
    pub fn with_matrix(&self, matrix: Matrix) -> Result<Self> {
        Self::with_shared_vocab(self.vocab.clone(), matrix)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        self.vocab.clone()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn norm_state(&self) -> NormState {
        self.norm_state
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(|i| self.matrix.row(i))
    }

    /// Applies the steps in order and returns a new space.
    pub fn normalize(&self, steps: &[NormStep]) -> Result<Self> {
        let mut m = self.matrix.clone();
        let mut state = self.norm_state;
        for step in steps {
            match step {
                NormStep::UnitRows => {
                    for i in 0..m.rows() {
                        let row = m.row_mut(i);
                        let n = norm(row);
                        if n == 0.0 {
                            return Err(Error::ZeroNorm {
                                token: self.vocab.token(i).into(),
                            });
                        }
                        row.iter_mut().for_each(|v| *v /= n);
                    }
                    state.unit_rows = true;
                    state.mean_centered = false;
                }
                NormStep::CenterColumns => {
                    let n = m.rows();
                    if n > 0 {
                        let mut mean: Vec<f64> = alloc::vec![0.0; m.cols()];
                        for row in m.iter_rows() {
                            for (a, v) in mean.iter_mut().zip(row) {
                                *a += v;
                            }
                        }
                        mean.iter_mut().for_each(|a| *a /= n as f64);
                        for i in 0..n {
                            for (v, a) in m.row_mut(i).iter_mut().zip(&mean) {
                                *v -= a;
                            }
                        }
                    }
                    state.unit_rows = false;
                    state.mean_centered = true;
                }
            }
        }
        Ok(EmbeddingSpace {
            vocab: self.vocab.clone(),
            matrix: m,
            norm_state: state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn space(rows: &[[f64; 2]]) -> EmbeddingSpace {
        let vocab = Vocabulary::from_entries((0..rows.len()).map(|i| (alloc::format!("t{i}"), 1u64))).unwrap();
        EmbeddingSpace::new(vocab, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn unit_rows_three_four_five() {
        let s = space(&[[3.0, 4.0]]).normalize(&[NormStep::UnitRows]).unwrap();
        assert!((s.vector(0)[0] - 0.6).abs() < 1e-15);
        assert!((s.vector(0)[1] - 0.8).abs() < 1e-15);
        assert!(s.norm_state().unit_rows);
    }

    #[test]
    fn centering_symmetric_rows_is_noop() {
        let s = space(&[[1.0, 0.0], [-1.0, 0.0]]);
        let c = s.normalize(&[NormStep::CenterColumns]).unwrap();
        assert_eq!(c.matrix(), s.matrix());
    }

    #[test]
    fn default_pipeline_hand_computed() {
        let s = space(&[[2.0, 0.0], [0.0, 2.0]]).normalize(&DEFAULT_PIPELINE).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let expect = [[h, -h], [-h, h]];
        for (i, row) in expect.iter().enumerate() {
            for (a, b) in s.vector(i).iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_row_names_token() {
        let e = space(&[[1.0, 0.0], [0.0, 0.0]]).normalize(&[NormStep::UnitRows]);
        assert_eq!(
            e,
            Err(Error::ZeroNorm {
                token: String::from("t1")
            })
        );
    }

    #[test]
    fn shape_and_finiteness_checked() {
        let vocab = Vocabulary::from_entries([("a".into(), 1)]).unwrap();
        assert!(EmbeddingSpace::new(vocab.clone(), Matrix::zeros(2, 2)).is_err());
        assert!(EmbeddingSpace::new(vocab.clone(), Matrix::zeros(1, 0)).is_err());
        let m = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(EmbeddingSpace::new(vocab, m).is_err());
    }
}
