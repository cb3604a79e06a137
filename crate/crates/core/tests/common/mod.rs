#![allow(dead_code)]

use anchorlex_core::lexicon::{BilingualDictionary, DictPair};
use anchorlex_core::{EmbeddingSpace, Matrix, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn unit(mut m: Matrix) -> Matrix {
    for i in 0..m.rows() {
        let r = m.row_mut(i);
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.iter_mut().for_each(|v| *v /= n);
    }
    m
}

/// Space with tokens `{prefix}{i}` and frequency `n − i`.
pub fn space(prefix: &str, m: Matrix) -> EmbeddingSpace {
    let n = m.rows();
    let vocab = Vocabulary::from_entries((0..n).map(|i| (format!("{prefix}{i}"), (n - i) as u64))).unwrap();
    EmbeddingSpace::new(vocab, m).unwrap()
}

pub fn space_with_freqs(prefix: &str, m: Matrix, freqs: &[u64]) -> EmbeddingSpace {
    let vocab = Vocabulary::from_entries(freqs.iter().enumerate().map(|(i, &f)| (format!("{prefix}{i}"), f))).unwrap();
    EmbeddingSpace::new(vocab, m).unwrap()
}

pub fn pairs(src: &EmbeddingSpace, tgt: &EmbeddingSpace, idx: &[(usize, usize)]) -> BilingualDictionary {
    BilingualDictionary::new(
        idx.iter()
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

/// 2×2 rotation (det +1) or reflection (det −1) by `deg` degrees.
pub fn planar(deg: f64, reflect: bool) -> Matrix {
    let (s, c) = deg.to_radians().sin_cos();
    let rows = if reflect {
        vec![vec![c, s], vec![s, -c]]
    } else {
        vec![vec![c, s], vec![-s, c]]
    };
    Matrix::from_rows(&rows).unwrap()
}

pub fn frob_err(x: &Matrix, w: &Matrix, y: &Matrix) -> f64 {
    let xw = x.matmul(w).unwrap();
    xw.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix,
/// written independently of the library.
pub fn random_orthogonal(r: &mut ChaCha8Rng, d: usize) -> Matrix {
    let g = gaussian(r, d, d);
    let mut q: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let mut v = g.row(i).to_vec();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        q.push(v);
    }
    Matrix::from_rows(&q).unwrap()
}
