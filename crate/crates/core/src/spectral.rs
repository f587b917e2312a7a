//! Dense Hermitian eigendecomposition, SVD, singular value thresholding and
//! numerical rank.
//!
//! Backed by `nalgebra`. Purely real inputs take the real symmetric path,
//! which is several times faster and returns real vectors. Outputs are put
//! into a canonical order with canonical phases so that identical inputs
//! give bit-identical results.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{CMatrix, CVector, C64};

/// Relative Hermitian-deviation tolerance accepted by [`hermitian_eigen`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Entries within this relative window of the largest magnitude count as
/// tied for phase normalization; the lowest index wins.
const PHASE_TIE_WINDOW: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted by descending `|lambda|`, then descending `lambda`.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal, phase-normalized columns matching `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SingularDecomposition {
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns.
    pub u: CMatrix,
    /// Right singular vectors as columns, so `M = U diag(sigma) V^*`.
    pub v: CMatrix,
}

impl SingularDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        scaled_outer_sum(&self.u, &self.v, &self.singular_values)
    }
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// `sum_i w_i a_i b_i^*` over the columns of `a` and `b`, skipping zero weights.
fn scaled_outer_sum(a: &CMatrix, b: &CMatrix, weights: &[f64]) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), b.nrows());
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let ai = a.column(i);
        let bi = b.column(i);
        for c in 0..b.nrows() {
            let bc = bi[c].conj() * w;
            for r in 0..a.nrows() {
                out[(r, c)] += ai[r] * bc;
            }
        }
    }
    out
}

/// Multiplies the vector by a unit phase so that its largest-magnitude entry
/// (lowest index among near-ties) is real and positive. Returns the factor.
pub fn normalize_phase(v: &mut CVector) -> C64 {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return C64::new(1.0, 0.0);
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - PHASE_TIE_WINDOW))
        .expect("max attained");
    let p = v[pivot];
    let phase = p.conj() / p.norm();
    v.apply(|z| *z *= phase);
    v[pivot] = C64::new(v[pivot].norm(), 0.0);
    phase
}

fn canonical_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        y.abs()
            .total_cmp(&x.abs())
            .then_with(|| y.total_cmp(&x))
            .then(a.cmp(&b))
    });
    idx
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as `(M + M^*) / 2` before solving; inputs whose
/// Hermitian deviation exceeds `HERMITIAN_TOL * ||M||_F` are rejected.
pub fn hermitian_eigen(m: &CMatrix) -> Result<EigenDecomposition> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    check_finite(m)?;
    let dim = m.nrows();
    let adj = m.adjoint();
    let deviation = (m - &adj).norm();
    let allowed = HERMITIAN_TOL * m.norm();
    if deviation > allowed {
        return Err(Error::NotHermitian { deviation, allowed });
    }
    let sym = (m + adj) * C64::new(0.5, 0.0);

    if sym.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return Ok(EigenDecomposition {
            eigenvalues: vec![0.0; dim],
            eigenvectors: CMatrix::identity(dim, dim),
        });
    }

    let (values, vectors): (Vec<f64>, CMatrix) = if is_real(&sym) {
        let real = DMatrix::from_fn(dim, dim, |r, c| sym[(r, c)].re);
        let eig = real.symmetric_eigen();
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let eig = sym.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let order = canonical_order(&values);
    let mut eigenvectors = CMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    for (dst, &src) in order.iter().enumerate() {
        let mut v: CVector = vectors.column(src).into_owned();
        let norm = v.norm();
        if norm > 0.0 {
            v /= C64::new(norm, 0.0);
        }
        normalize_phase(&mut v);
        eigenvectors.set_column(dst, &v);
        eigenvalues.push(values[src]);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenpair maximizing `|x^* M x|` over unit `x`.
pub fn leading_eigenpair_abs(m: &CMatrix) -> Result<(f64, CVector)> {
    let eig = hermitian_eigen(m)?;
    if eig.is_empty() {
        return Err(Error::InvalidConfig("empty matrix".into()));
    }
    Ok((eig.eigenvalues[0], eig.vector(0)))
}

pub fn svd(m: &CMatrix) -> Result<SingularDecomposition> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SingularDecomposition {
            singular_values: vec![],
            u: CMatrix::zeros(rows, 0),
            v: CMatrix::zeros(cols, 0),
        });
    }
    let (sigma, u, v): (Vec<f64>, CMatrix, CMatrix) = if is_real(m) {
        let real = DMatrix::from_fn(rows, cols, |r, c| m[(r, c)].re);
        let s = real.svd(true, true);
        let u = s.u.expect("requested").map(|x| C64::new(x, 0.0));
        let v = s
            .v_t
            .expect("requested")
            .transpose()
            .map(|x| C64::new(x, 0.0));
        (s.singular_values.iter().copied().collect(), u, v)
    } else {
        let s = m.clone().svd(true, true);
        let u = s.u.expect("requested");
        let v = s.v_t.expect("requested").adjoint();
        (s.singular_values.iter().copied().collect(), u, v)
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| {
        sigma[b]
            .partial_cmp(&sigma[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut su = CMatrix::zeros(rows, k);
    let mut sv = CMatrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut uc: CVector = u.column(src).into_owned();
        let mut vc: CVector = v.column(src).into_owned();
        // the same phase on both sides leaves u v^* unchanged
        let phase = normalize_phase(&mut uc);
        vc.apply(|z| *z *= phase);
        su.set_column(dst, &uc);
        sv.set_column(dst, &vc);
        singular_values.push(sigma[src].max(0.0));
    }
    Ok(SingularDecomposition {
        singular_values,
        u: su,
        v: sv,
    })
}

pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let mut s: Vec<f64> = if is_real(m) {
        let real = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].re);
        real.singular_values().iter().copied().collect()
    } else {
        m.singular_values().iter().copied().collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn nuclear_norm(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Singular value thresholding `D_tau(M) = U (Sigma - tau I)_+ V^*`.
pub fn svt(m: &CMatrix, tau: f64) -> Result<CMatrix> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    if tau == 0.0 {
        check_finite(m)?;
        return Ok(m.clone());
    }
    let s = svd(m)?;
    let shrunk: Vec<f64> = s
        .singular_values
        .iter()
        .map(|&x| (x - tau).max(0.0))
        .collect();
    Ok(scaled_outer_sum(&s.u, &s.v, &shrunk))
}

/// [`svt`] for Hermitian input through the eigendecomposition: singular
/// values are `|lambda|`, so `D_tau(M) = sum sign(lambda) (|lambda| - tau)_+ v v^*`.
pub fn svt_hermitian(m: &CMatrix, tau: f64) -> Result<CMatrix> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    let eig = hermitian_eigen(m)?;
    let weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.signum() * (l.abs() - tau).max(0.0))
        .collect();
    Ok(scaled_outer_sum(
        &eig.eigenvectors,
        &eig.eigenvectors,
        &weights,
    ))
}

/// Default relative tolerance for a matrix of the given size:
/// `dim * machine epsilon`.
pub fn default_rank_tol(dim: usize) -> f64 {
    dim as f64 * f64::EPSILON
}

/// Number of singular values above `rel_tol * sigma_1`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    Ok(count_above(&s, rel_tol))
}

pub(crate) fn count_above(sorted_desc: &[f64], rel_tol: f64) -> usize {
    match sorted_desc.first() {
        Some(&top) if top > 0.0 => sorted_desc.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}
