//! Matrix outer-product decompositions of CPS / PS tensors.
//!
//! A CPS tensor has a Hermitian square unfolding, so its eigendecomposition
//! folds into `A = sum lambda_i E_i o conj(E_i)` with orthonormal symmetric
//! `E_i`. [`smroa`] finds the same factors greedily, one dominant eigenpair
//! of the residual at a time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::report::{SolverReport, Termination};
use crate::spectral::{self, default_rank_tol, hermitian_eigen, numerical_rank};
use crate::tensor::{
    inner_product, outer_product_mm, require_symmetry, CMatrix, SymmetryReport, SymmetryTag,
    Tensor4, C64, DEFAULT_CLASSIFY_TOL,
};
use crate::unfold::{unfold, vec_to_matrix, ModePair};

/// Relative gap below which two leading `|lambda|` count as tied.
const DEGENERATE_GAP: f64 = 1e-8;

/// Relative singular-value threshold for the matrix rank of a factor `E_i`.
pub const FACTOR_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFactor {
    pub lambda: f64,
    /// Symmetric (`E = E^T`), unit Frobenius norm.
    pub matrix: CMatrix,
}

impl MatrixFactor {
    pub fn symmetry_deviation(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDecomposition {
    pub n: usize,
    pub factors: Vec<MatrixFactor>,
    /// `true`: terms are `lambda E o conj(E)`; `false`: `lambda E o E`.
    pub conjugated_second: bool,
}

impl MatrixDecomposition {
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.lambda).collect()
    }

    /// Largest `|<E_i, E_j> - delta_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.factors.iter().enumerate() {
            for (j, b) in self.factors.iter().enumerate() {
                let ip = a.matrix.dotc(&b.matrix);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// `sum lambda_i E_i o conj(E_i)` (or `E_i o E_i`).
pub fn reconstruct(d: &MatrixDecomposition) -> Tensor4 {
    let mut acc = Tensor4::zeros(d.n);
    for f in &d.factors {
        let second = if d.conjugated_second {
            f.matrix.conjugate()
        } else {
            f.matrix.clone()
        };
        let term =
            outer_product_mm(&f.matrix, &second).expect("factor shape checked at construction");
        acc = acc.axpy(f.lambda, &term);
    }
    acc
}

/// `min_theta ||x - e^{i theta} y||_F`; for real factors this is the
/// distance up to sign.
pub fn phase_aligned_distance(x: &CMatrix, y: &CMatrix) -> f64 {
    let ip = y.dotc(x);
    let phase = if ip.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        ip / ip.norm()
    };
    (x - y * phase).norm()
}

fn require_cps(a: &Tensor4) -> Result<SymmetryReport> {
    require_symmetry(a, SymmetryTag::Cps)
}

#[derive(Debug, Clone, Copy)]
pub struct SmroaOptions {
    /// Maximum number of factors; `None` means `n(n+1)/2`.
    pub max_terms: Option<usize>,
    /// Stop once `||A_j||_F <= tol * ||A||_F`.
    pub tol: f64,
}

impl Default for SmroaOptions {
    fn default() -> Self {
        Self {
            max_terms: None,
            tol: 1e-12,
        }
    }
}

/// Successive matrix outer-product rank-one approximation.
///
/// Each step takes the eigenvector of the residual's square unfolding with
/// the largest `|lambda|`, folds it into `X_j`, sets
/// `lambda_j = <A_{j-1}, X_j o conj(X_j)>` and deflates. The report's
/// `objective` holds `||A_j||_F` after each step.
pub fn smroa(a: &Tensor4, opts: SmroaOptions) -> Result<(MatrixDecomposition, SolverReport)> {
    let sym = require_cps(a)?;
    let n = a.n();
    let max_terms = opts.max_terms.unwrap_or(n * (n + 1) / 2);
    if max_terms == 0 {
        return Err(Error::InvalidConfig("smroa needs at least one term".into()));
    }
    let conjugated_second = !sym.is_real(DEFAULT_CLASSIFY_TOL * a.norm());
    let mut report = SolverReport::new();
    let mut factors = Vec::new();
    let total = a.norm();
    if total == 0.0 {
        report.termination = Termination::ZeroInput;
        return Ok((
            MatrixDecomposition {
                n,
                factors,
                conjugated_second,
            },
            report,
        ));
    }

    let mut residual = a.clone();
    for _ in 0..max_terms {
        let m = unfold(&residual, ModePair::SQUARE).matrix;
        let eig = hermitian_eigen(&m)?;
        let (top, next) = (
            eig.eigenvalues[0].abs(),
            eig.eigenvalues.get(1).map_or(0.0, |l| l.abs()),
        );
        if next > 0.0 && top - next <= DEGENERATE_GAP * top {
            report.degenerate_spectrum = true;
        }
        let x = vec_to_matrix(&eig.vector(0))?;
        let term = outer_product_mm(&x, &x.conjugate())?;
        let lambda = inner_product(&residual, &term)?.re;
        residual = residual.axpy(-lambda, &term);
        let rnorm = residual.norm();
        factors.push(MatrixFactor { lambda, matrix: x });
        report.record(rnorm, rnorm / total);
        if rnorm <= opts.tol * total {
            report.termination = Termination::Converged;
            break;
        }
    }
    Ok((
        MatrixDecomposition {
            n,
            factors,
            conjugated_second,
        },
        report,
    ))
}

/// One-shot decomposition from the eigendecomposition of `M(A)`, keeping
/// eigenpairs with `|lambda| > n^2 * eps * |lambda_max|`.
pub fn full_matrix_decomposition(a: &Tensor4) -> Result<MatrixDecomposition> {
    let sym = require_cps(a)?;
    let n = a.n();
    let conjugated_second = !sym.is_real(DEFAULT_CLASSIFY_TOL * a.norm());
    let eig = hermitian_eigen(&unfold(a, ModePair::SQUARE).matrix)?;
    let top = eig.eigenvalues[0].abs();
    let floor = default_rank_tol(n * n) * top;
    let mut factors = Vec::new();
    if top > 0.0 {
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.abs() <= floor {
                break;
            }
            factors.push(MatrixFactor {
                lambda,
                matrix: vec_to_matrix(&eig.vector(i))?,
            });
        }
    }
    Ok(MatrixDecomposition {
        n,
        factors,
        conjugated_second,
    })
}

/// Rank of the square unfolding.
pub fn rank_m(a: &Tensor4, rel_tol: f64) -> Result<usize> {
    numerical_rank(&unfold(a, ModePair::SQUARE).matrix, rel_tol)
}

pub fn rank_m_default(a: &Tensor4) -> Result<usize> {
    rank_m(a, default_rank_tol(a.n() * a.n()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankBounds {
    pub rank_m: usize,
    /// Largest matrix rank among the factors `E_i`.
    pub max_factor_rank: usize,
    pub cp_lower: usize,
    pub cp_upper: usize,
}

/// `rank_M(A) <= rank_CP(A) <= r^2 rank_M(A)` with `r = max rank(E_i)`.
pub fn cp_rank_bounds(a: &Tensor4) -> Result<RankBounds> {
    let d = full_matrix_decomposition(a)?;
    let rank_m = rank_m_default(a)?;
    let mut r = 0;
    for f in &d.factors {
        r = r.max(numerical_rank(&f.matrix, FACTOR_RANK_TOL)?);
    }
    Ok(RankBounds {
        rank_m,
        max_factor_rank: r,
        cp_lower: rank_m,
        cp_upper: r * r * rank_m,
    })
}

/// `coeff * (p o p o q o q + q o q o p o p)` over real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPairFactor {
    pub coeff: f64,
    pub p: DVector<f64>,
    pub q: DVector<f64>,
}

impl VectorPairFactor {
    pub fn to_tensor(&self) -> Tensor4 {
        let (p, q, c) = (&self.p, &self.q, self.coeff);
        Tensor4::from_real_fn(p.len(), |[i, j, k, l]| {
            c * (p[i] * p[j] * q[k] * q[l] + q[i] * q[j] * p[k] * p[l])
        })
    }
}

/// Rewrites a real PS matrix decomposition as pairs of vector outer products.
///
/// Each `E_i = sum_j beta_j u_j u_j^T`; cross terms `j < k` carry
/// `lambda beta_j beta_k`, diagonal terms `j = k` carry half of
/// `lambda beta_j^2` since both halves of the pair coincide.
pub fn expand_vector_form(d: &MatrixDecomposition) -> Result<Vec<VectorPairFactor>> {
    let mut out = Vec::new();
    for f in &d.factors {
        let scale = f.matrix.norm();
        if f.matrix.iter().any(|z| z.im.abs() > 1e-12 * scale.max(1.0)) {
            return Err(Error::Symmetry {
                expected: "real ps",
                found: SymmetryTag::Cps,
                violated: "factor matrix has imaginary entries".into(),
            });
        }
        let real = DMatrix::from_fn(d.n, d.n, |r, c| f.matrix[(r, c)].re);
        let sym = (&real + real.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let floor = default_rank_tol(d.n) * top;
        let terms: Vec<(f64, DVector<f64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > floor)
            .map(|(j, &b)| (b, eig.eigenvectors.column(j).into_owned()))
            .collect();
        for (j, (bj, uj)) in terms.iter().enumerate() {
            out.push(VectorPairFactor {
                coeff: f.lambda * bj * bj / 2.0,
                p: uj.clone(),
                q: uj.clone(),
            });
            for (bk, uk) in &terms[j + 1..] {
                out.push(VectorPairFactor {
                    coeff: f.lambda * bj * bk,
                    p: uj.clone(),
                    q: uk.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// `coeff * (U o V - V o U)` over real symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewFactor {
    pub coeff: f64,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl SkewFactor {
    pub fn to_tensor(&self) -> Tensor4 {
        let (u, v, c) = (&self.u, &self.v, self.coeff);
        Tensor4::from_real_fn(u.nrows(), |[i, j, k, l]| {
            c * (u[(i, j)] * v[(k, l)] - v[(i, j)] * u[(k, l)])
        })
    }
}

/// Skew-PS decomposition from the skew-symmetric square unfolding.
///
/// `iM` is Hermitian with eigenvalues `±sigma`. For an eigenvector
/// `w = (u + i v) / sqrt(2)` of `+sigma`, `M u = sigma v` and
/// `M v = -sigma u`, so `M = sum sigma (v u^T - u v^T)`.
pub fn decompose_skew_ps(a: &Tensor4) -> Result<Vec<SkewFactor>> {
    require_symmetry(a, SymmetryTag::SkewPs)?;
    let n = a.n();
    if a.norm() == 0.0 {
        return Ok(Vec::new());
    }
    let m = unfold(&a.real_part(), ModePair::SQUARE).matrix;
    let h = m.map(|z| C64::new(-z.im, z.re)); // i * M
    let eig = hermitian_eigen(&h)?;
    let top = eig.eigenvalues[0].abs();
    let floor = default_rank_tol(n * n) * top;

    let mut positive: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > floor)
        .collect();
    let mut negative: Vec<f64> = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l < -floor)
        .map(|l| -l)
        .collect();
    positive.sort_by(|x, y| y.total_cmp(x));
    negative.sort_by(|x, y| y.total_cmp(x));
    let paired = positive.len() == negative.len()
        && positive
            .iter()
            .zip(&negative)
            .all(|(p, q)| (p - q).abs() <= 1e-8 * top);
    if !paired {
        return Err(Error::Symmetry {
            expected: "skew_ps",
            found: SymmetryTag::General,
            violated: "unfolding spectrum is not paired".into(),
        });
    }

    let mut out = Vec::new();
    let root2 = std::f64::consts::SQRT_2;
    for (i, &sigma) in eig.eigenvalues.iter().enumerate() {
        if sigma <= floor {
            continue;
        }
        let w = eig.vector(i);
        let u = w.map(|z| z.re * root2);
        let v = w.map(|z| z.im * root2);
        let fold_real = |x: &DVector<f64>| DMatrix::from_fn(n, n, |s, t| x[t * n + s]);
        out.push(SkewFactor {
            coeff: sigma,
            u: fold_real(&v),
            v: fold_real(&u),
        });
    }
    Ok(out)
}

/// Singular values of `M(A)`, used to check the skew pairing.
pub fn square_unfolding_singular_values(a: &Tensor4) -> Result<Vec<f64>> {
    spectral::singular_values(&unfold(a, ModePair::SQUARE).matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn e(n: usize, s: usize, t: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| c(if i == s && j == t { 1.0 } else { 0.0 }))
    }

    #[test]
    fn zero_tensor_gives_empty_decomposition() {
        let (d, rep) = smroa(&Tensor4::zeros(3), SmroaOptions::default()).unwrap();
        assert!(d.is_empty());
        assert_eq!(rep.termination, Termination::ZeroInput);
        assert!(full_matrix_decomposition(&Tensor4::zeros(3))
            .unwrap()
            .is_empty());
        assert_eq!(reconstruct(&d), Tensor4::zeros(3));
    }

    #[test]
    fn diagonal_full_decomposition() {
        let a1 = outer_product_mm(&e(2, 0, 0), &e(2, 0, 0)).unwrap();
        let a2 = outer_product_mm(&e(2, 1, 1), &e(2, 1, 1)).unwrap();
        let a = a1
            .axpy(3.0, &Tensor4::zeros(2))
            .axpy(1.0, &a2)
            .axpy(2.0, &a1);
        let d = full_matrix_decomposition(&a).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.factors[0].lambda, 3.0);
        assert_eq!(d.factors[0].matrix, e(2, 0, 0));
        assert_eq!(d.factors[1].lambda, 1.0);
        assert_eq!(d.factors[1].matrix, e(2, 1, 1));
        assert!(!d.conjugated_second);
    }

    #[test]
    fn rejects_general_tensor() {
        let t = Tensor4::from_real_fn(2, |[i, j, k, l]| (i + 2 * j + 3 * k + 5 * l) as f64);
        assert!(matches!(
            smroa(&t, SmroaOptions::default()),
            Err(Error::Symmetry { .. })
        ));
        assert!(full_matrix_decomposition(&t).is_err());
        assert!(cp_rank_bounds(&t).is_err());
    }

    #[test]
    fn single_factor_reconstruct_matches_outer_product() {
        let x = CMatrix::from_fn(2, 2, |i, j| {
            C64::new((i + j) as f64 * 0.5 + 0.1, (i * j) as f64)
        });
        let x = &x / C64::new(x.norm(), 0.0);
        let d = MatrixDecomposition {
            n: 2,
            factors: vec![MatrixFactor {
                lambda: 2.5,
                matrix: x.clone(),
            }],
            conjugated_second: true,
        };
        let expected = outer_product_mm(&x, &x.conjugate()).unwrap().scale(2.5);
        assert!(reconstruct(&d).max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn vector_form_of_rank_one_factor() {
        let d = MatrixDecomposition {
            n: 2,
            factors: vec![MatrixFactor {
                lambda: 1.7,
                matrix: e(2, 0, 0),
            }],
            conjugated_second: false,
        };
        let pairs = expand_vector_form(&d).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_abs_diff_eq!(pairs[0].coeff, 0.85, epsilon = 1e-15);
        assert_eq!(pairs[0].p, pairs[0].q);
        assert_abs_diff_eq!(pairs[0].p[0].abs(), 1.0, epsilon = 1e-15);
        let rebuilt = pairs[0].to_tensor();
        assert!(rebuilt.max_abs_diff(&reconstruct(&d)) < 1e-15);
    }

    #[test]
    fn vector_form_of_indefinite_factor() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = CMatrix::from_fn(2, 2, |i, j| {
            c(if i != j {
                0.0
            } else if i == 0 {
                s
            } else {
                -s
            })
        });
        let d = MatrixDecomposition {
            n: 2,
            factors: vec![MatrixFactor {
                lambda: 2.0,
                matrix: m,
            }],
            conjugated_second: false,
        };
        let pairs = expand_vector_form(&d).unwrap();
        assert_eq!(pairs.len(), 3);
        let cross = pairs.iter().find(|p| (&p.p - &p.q).norm() > 0.5).unwrap();
        assert_abs_diff_eq!(cross.coeff, -1.0, epsilon = 1e-14);
        let mut rebuilt = Tensor4::zeros(2);
        for p in &pairs {
            rebuilt = &rebuilt + &p.to_tensor();
        }
        assert!(rebuilt.max_abs_diff(&reconstruct(&d)) < 1e-14);
    }

    #[test]
    fn vector_form_rejects_complex_factor() {
        let m = CMatrix::from_fn(2, 2, |i, j| C64::new(0.5, if i == j { 0.5 } else { 0.0 }));
        let d = MatrixDecomposition {
            n: 2,
            factors: vec![MatrixFactor {
                lambda: 1.0,
                matrix: m,
            }],
            conjugated_second: true,
        };
        assert!(expand_vector_form(&d).is_err());
    }

    #[test]
    fn skew_zero_and_rejection() {
        assert!(decompose_skew_ps(&Tensor4::zeros(2)).unwrap().is_empty());
        let ps = outer_product_mm(&e(2, 0, 0), &e(2, 0, 0)).unwrap();
        assert!(decompose_skew_ps(&ps).is_err());
    }

    #[test]
    fn rank_one_bounds() {
        let x = CMatrix::from_fn(2, 2, |i, j| c([1.0, 2.0][i] * [1.0, 2.0][j]));
        let a = outer_product_mm(&x, &x).unwrap();
        let b = cp_rank_bounds(&a).unwrap();
        assert_eq!((b.cp_lower, b.cp_upper), (1, 1));
    }
}
