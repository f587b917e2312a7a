//! Pair unfoldings of a fourth-order tensor into an `n^2 x n^2` matrix.
//!
//! For row modes `(a, b)` and column modes `(c, d)` the entry
//! `T[i1, i2, i3, i4]` lands at row `i_b * n + i_a` and column
//! `i_d * n + i_c` (zero-based, first mode of each pair varying fastest).
//! With rows `(1, 2)` this is the square unfolding `M(A)`.

use crate::error::{Error, Result};
use crate::tensor::{CMatrix, CVector, Tensor4};

/// Ordered pair of one-based row modes; the column modes are the remaining
/// two in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModePair {
    rows: (usize, usize),
    cols: (usize, usize),
}

impl ModePair {
    /// `M(A)`: rows `(1, 2)`, columns `(3, 4)`.
    pub const SQUARE: ModePair = ModePair {
        rows: (1, 2),
        cols: (3, 4),
    };
    /// `T_[3,2;1,4]`, the unfolding behind the rank-one equivalence.
    pub const R32_14: ModePair = ModePair {
        rows: (3, 2),
        cols: (1, 4),
    };

    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b || !(1..=4).contains(&a) || !(1..=4).contains(&b) {
            return Err(Error::InvalidModePair(a, b));
        }
        let mut rest = (1..=4).filter(|m| *m != a && *m != b);
        let c = rest.next().unwrap();
        let d = rest.next().unwrap();
        Ok(Self {
            rows: (a, b),
            cols: (c, d),
        })
    }

    pub fn rows(&self) -> (usize, usize) {
        self.rows
    }

    pub fn cols(&self) -> (usize, usize) {
        self.cols
    }

    /// Matrix position of a tensor index.
    #[inline]
    fn position(&self, q: [usize; 4], n: usize) -> (usize, usize) {
        let (a, b) = self.rows;
        let (c, d) = self.cols;
        (q[b - 1] * n + q[a - 1], q[d - 1] * n + q[c - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairUnfolding {
    pub modes: ModePair,
    pub matrix: CMatrix,
}

pub fn unfold(t: &Tensor4, modes: ModePair) -> PairUnfolding {
    let n = t.n();
    let mut matrix = CMatrix::zeros(n * n, n * n);
    for (q, v) in t.indexed() {
        let (r, c) = modes.position(q, n);
        matrix[(r, c)] = v;
    }
    PairUnfolding { modes, matrix }
}

/// Inverse of [`unfold`].
pub fn fold(m: &CMatrix, modes: ModePair) -> Result<Tensor4> {
    let n = square_root_dim(m.nrows(), m.ncols())?;
    Ok(Tensor4::from_fn(n, |q| {
        let (r, c) = modes.position(q, n);
        m[(r, c)]
    }))
}

fn square_root_dim(rows: usize, cols: usize) -> Result<usize> {
    let n = (rows as f64).sqrt().round() as usize;
    if rows != cols || n == 0 || n * n != rows {
        return Err(Error::NotSquareOfSquare { rows, cols });
    }
    Ok(n)
}

/// Column-stacking fold of an `n^2` vector: `E[s, t] = v[t * n + s]`.
pub fn vec_to_matrix(v: &CVector) -> Result<CMatrix> {
    let n = square_root_dim(v.len(), v.len())?;
    Ok(CMatrix::from_fn(n, n, |s, t| v[t * n + s]))
}

/// Column-stacking vectorisation, inverse of [`vec_to_matrix`].
pub fn matrix_to_vec(e: &CMatrix) -> CVector {
    let n = e.nrows();
    CVector::from_fn(n * e.ncols(), |idx, _| e[(idx % n, idx / n)])
}

/// `sum_kl A_ijkl X_kl`, the square unfolding acting on `vec(X)`.
pub fn contract_pairs(a: &Tensor4, x: &CMatrix) -> Result<CMatrix> {
    let n = a.n();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.nrows(),
        });
    }
    let mut out = CMatrix::zeros(n, n);
    for ([i, j, k, l], v) in a.indexed() {
        out[(i, j)] += v * x[(k, l)];
    }
    Ok(out)
}
