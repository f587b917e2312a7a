//! Low-rank PS tensor completion by fixed point continuation.
//!
//! Solves `min mu ||M(X)||_* + 1/2 ||P_Omega(X - A)||^2` for a decreasing
//! sequence of `mu`. Each inner step is a gradient step on the data term
//! followed by singular value thresholding of the square unfolding.

use crate::error::{Error, Result};
use crate::mask::SampleMask;
use crate::spectral::{numerical_rank, singular_values, svt_hermitian};
use crate::tensor::{CMatrix, SymmetryReport, Tensor4, C64, DEFAULT_CLASSIFY_TOL};
use crate::unfold::{fold, unfold, ModePair};

/// Relative singular-value threshold for the reported solution rank.
pub const SOLUTION_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionConfig {
    pub tau: f64,
    /// `None`: `0.25 * sigma_max(M(P_Omega(A)))`.
    pub mu_start: Option<f64>,
    /// `None`: `1e-8 * mu_start`.
    pub mu_end: Option<f64>,
    pub eta: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            mu_start: None,
            mu_end: None,
            eta: 0.25,
            inner_tol: 1e-10,
            max_inner: 500,
        }
    }
}

impl CompletionConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if self.inner_tol.is_nan() || self.inner_tol <= 0.0 {
            return bad("inner_tol must be positive");
        }
        if self.max_inner == 0 {
            return bad("max_inner must be at least 1");
        }
        for mu in [self.mu_start, self.mu_end].into_iter().flatten() {
            if !(mu > 0.0 && mu.is_finite()) {
                return bad("continuation bounds must be positive");
            }
        }
        if let (Some(s), Some(e)) = (self.mu_start, self.mu_end) {
            if e > s {
                return bad("mu_end exceeds mu_start");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionReport {
    /// `||X* - A||_F / ||A||_F`, filled by [`CompletionReport::evaluate`].
    pub relative_error: Option<f64>,
    pub rank_m_solution: usize,
    /// Continuation values actually used.
    pub mus: Vec<f64>,
    pub inner_iterations: Vec<usize>,
    /// `1/2 ||P_Omega(X) - P_Omega(A)||^2` at the end of each stage.
    pub data_fit: Vec<f64>,
    /// The last stage met `inner_tol` before `max_inner`.
    pub converged: bool,
}

impl CompletionReport {
    pub fn total_iterations(&self) -> usize {
        self.inner_iterations.iter().sum()
    }

    pub fn evaluate(&mut self, x: &Tensor4, truth: &Tensor4) -> Result<f64> {
        let e = relative_error(x, truth)?;
        self.relative_error = Some(e);
        Ok(e)
    }
}

pub fn relative_error(x: &Tensor4, a: &Tensor4) -> Result<f64> {
    if x.n() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: x.n(),
        });
    }
    let na = a.norm();
    if na == 0.0 {
        return Err(Error::ZeroTensor);
    }
    Ok(x.distance(a) / na)
}

/// `Y = X - tau P_Omega(X - A)` with `A` already zero off the mask.
fn gradient_step(x: &Tensor4, observed: &Tensor4, mask: &SampleMask, tau: f64) -> Tensor4 {
    Tensor4::from_fn(x.n(), |q| {
        let v = x.get(q);
        if mask.contains(q) {
            v - (v - observed.get(q)) * tau
        } else {
            v
        }
    })
}

/// Orthonormal basis of `vec(S)` over symmetric `S`, stored as the pair
/// each coordinate belongs to and its weight (1 on the diagonal,
/// `1/sqrt 2` off it).
///
/// When the tensor is symmetric within both index pairs, `M(Y)` lives on
/// this `n(n+1)/2`-dimensional subspace and can be shrunk there.
struct SymmetricPairs {
    dim: usize,
    pair_of: Vec<usize>,
    weight: Vec<f64>,
}

impl SymmetricPairs {
    fn new(n: usize) -> Self {
        let mut pair_of = vec![0; n * n];
        let mut weight = vec![0.0; n * n];
        let mut dim = 0;
        for i in 0..n {
            for j in i..n {
                let w = if i == j {
                    1.0
                } else {
                    std::f64::consts::FRAC_1_SQRT_2
                };
                for idx in [j * n + i, i * n + j] {
                    pair_of[idx] = dim;
                    weight[idx] = w;
                }
                dim += 1;
            }
        }
        Self {
            dim,
            pair_of,
            weight,
        }
    }

    /// `Q^T M Q`.
    fn compress(&self, m: &CMatrix) -> CMatrix {
        let mut b = CMatrix::zeros(self.dim, self.dim);
        for c in 0..m.ncols() {
            let (q, wc) = (self.pair_of[c], self.weight[c]);
            for a in 0..m.nrows() {
                b[(self.pair_of[a], q)] += m[(a, c)] * (self.weight[a] * wc);
            }
        }
        b
    }

    /// `Q B Q^T`.
    fn expand(&self, b: &CMatrix) -> CMatrix {
        let size = self.pair_of.len();
        CMatrix::from_fn(size, size, |a, c| {
            b[(self.pair_of[a], self.pair_of[c])] * (self.weight[a] * self.weight[c])
        })
    }
}

fn shrink(y: &Tensor4, threshold: f64, pairs: Option<&SymmetricPairs>) -> Result<Tensor4> {
    let m = unfold(y, ModePair::SQUARE).matrix;
    let shrunk = match pairs {
        Some(p) => p.expand(&svt_hermitian(&p.compress(&m), threshold)?),
        None => svt_hermitian(&m, threshold)?,
    };
    fold(&shrunk, ModePair::SQUARE)
}

/// One inner iteration: gradient step, then shrinkage of `M(Y)` by `tau * mu`.
pub fn fpc_step(
    x: &Tensor4,
    observed: &Tensor4,
    mask: &SampleMask,
    tau: f64,
    mu: f64,
) -> Result<Tensor4> {
    shrink(&gradient_step(x, observed, mask, tau), tau * mu, None)
}

fn data_fit(x: &Tensor4, observed: &Tensor4, mask: &SampleMask) -> f64 {
    let mut s = 0.0;
    for q in mask.indices() {
        s += (x.get(q) - observed.get(q)).norm_sqr();
    }
    0.5 * s
}

fn check_inputs(observed: &Tensor4, mask: &SampleMask) -> Result<()> {
    if observed.n() != mask.n() {
        return Err(Error::DimensionMismatch {
            expected: mask.n(),
            found: observed.n(),
        });
    }
    mask.require_closed()?;
    let zero = C64::new(0.0, 0.0);
    for (q, v) in observed.indexed() {
        if v != zero && !mask.contains(q) {
            return Err(Error::UnmaskedData(q));
        }
    }
    Ok(())
}

/// Completes `observed` (zero off `mask`) to a low M-rank tensor.
pub fn fpc_complete(
    observed: &Tensor4,
    mask: &SampleMask,
    cfg: &CompletionConfig,
) -> Result<(Tensor4, CompletionReport)> {
    cfg.validate()?;
    check_inputs(observed, mask)?;
    let n = observed.n();
    let mut report = CompletionReport {
        relative_error: None,
        rank_m_solution: 0,
        mus: Vec::new(),
        inner_iterations: Vec::new(),
        data_fit: Vec::new(),
        converged: true,
    };
    let mut x = Tensor4::zeros(n);
    let sigma_max = singular_values(&unfold(observed, ModePair::SQUARE).matrix)?
        .first()
        .copied()
        .unwrap_or(0.0);
    if sigma_max == 0.0 {
        return Ok((x, report));
    }
    let mu_start = cfg.mu_start.unwrap_or(0.25 * sigma_max);
    let mu_end = cfg.mu_end.unwrap_or(1e-8 * mu_start);
    if mu_end > mu_start {
        return Err(Error::InvalidConfig("mu_end exceeds mu_start".into()));
    }

    let mut mus = Vec::new();
    let mut mu = mu_start;
    while mu > mu_end {
        mus.push(mu);
        mu *= cfg.eta;
    }
    mus.push(mu_end);

    // Iterates inherit the pair symmetry of the data, so the shrinkage can
    // run on the symmetric subspace.
    let pair_tol = DEFAULT_CLASSIFY_TOL * observed.norm();
    let pairs =
        (SymmetryReport::measure(observed).pair_swap <= pair_tol).then(|| SymmetricPairs::new(n));

    for &mu in &mus {
        let mut iters = 0;
        let mut stage_converged = false;
        while iters < cfg.max_inner {
            let y = gradient_step(&x, observed, mask, cfg.tau);
            let next = shrink(&y, cfg.tau * mu, pairs.as_ref())?;
            iters += 1;
            let change = next.distance(&x) / x.norm().max(1.0);
            x = next;
            if change < cfg.inner_tol {
                stage_converged = true;
                break;
            }
        }
        report.mus.push(mu);
        report.inner_iterations.push(iters);
        report.data_fit.push(data_fit(&x, observed, mask));
        report.converged = stage_converged;
    }
    report.rank_m_solution =
        numerical_rank(&unfold(&x, ModePair::SQUARE).matrix, SOLUTION_RANK_TOL)?;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{apply_mask, gen_ps_mask};
    use crate::tensor::outer_product_mm;

    fn rank_two_ps(n: usize) -> Tensor4 {
        let x = CMatrix::from_fn(n, n, |i, j| {
            C64::new(((i + 1) * (j + 1)) as f64 / 10.0, 0.0)
        });
        let y = CMatrix::from_fn(n, n, |i, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        outer_product_mm(&x, &x)
            .unwrap()
            .axpy(-0.5, &outer_product_mm(&y, &y).unwrap())
    }

    #[test]
    fn relative_error_basics() {
        let a = rank_two_ps(2);
        assert_eq!(relative_error(&a, &a).unwrap(), 0.0);
        assert!((relative_error(&Tensor4::zeros(2), &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_error(&a.scale(1.1), &a).unwrap() - 0.1).abs() < 1e-15);
        assert!(relative_error(&a, &Tensor4::zeros(2)).is_err());
    }

    #[test]
    fn full_observation_recovers_tensor() {
        let a = rank_two_ps(3);
        let (x, mut rep) =
            fpc_complete(&a, &SampleMask::full(3), &CompletionConfig::default()).unwrap();
        assert!(rep.evaluate(&x, &a).unwrap() < 1e-6);
        assert_eq!(rep.rank_m_solution, 2);
    }

    #[test]
    fn empty_mask_returns_zero() {
        let a = rank_two_ps(2);
        let empty = SampleMask::empty(2);
        let (x, mut rep) = fpc_complete(
            &apply_mask(&a, &empty).unwrap(),
            &empty,
            &CompletionConfig::default(),
        )
        .unwrap();
        assert!(x.is_zero());
        assert_eq!(rep.evaluate(&x, &a).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = rank_two_ps(2);
        let open = SampleMask::from_indices(2, [[0, 1, 0, 0]]).unwrap();
        assert!(matches!(
            fpc_complete(
                &apply_mask(&a, &open).unwrap(),
                &open,
                &CompletionConfig::default()
            ),
            Err(Error::MaskNotClosed(_))
        ));
        let mask = gen_ps_mask(2, 0.5, 3).unwrap();
        if mask.len() < 16 {
            assert!(matches!(
                fpc_complete(&a, &mask, &CompletionConfig::default()),
                Err(Error::UnmaskedData(_))
            ));
        }
        let cfg = CompletionConfig {
            eta: 1.0,
            ..Default::default()
        };
        assert!(fpc_complete(&a, &SampleMask::full(2), &cfg).is_err());
        assert!(fpc_complete(
            &rank_two_ps(3),
            &SampleMask::full(2),
            &CompletionConfig::default()
        )
        .is_err());
    }

    #[test]
    fn subspace_shrinkage_matches_full() {
        let a = rank_two_ps(3).axpy(
            0.3,
            &crate::tensor::project_ps(&Tensor4::from_real_fn(3, |[i, j, k, l]| {
                ((i * 7 + j * 3 + k * 5 + l) % 4) as f64 - 1.5
            })),
        );
        let pairs = SymmetricPairs::new(3);
        for th in [0.0, 0.05, 0.5] {
            let fast = shrink(&a, th, Some(&pairs)).unwrap();
            let full = shrink(&a, th, None).unwrap();
            assert!(fast.max_abs_diff(&full) < 1e-12);
        }
    }

    #[test]
    fn step_is_shrinkage_of_gradient_step() {
        let a = rank_two_ps(2);
        let mask = SampleMask::full(2);
        let x = fpc_step(&Tensor4::zeros(2), &a, &mask, 1.0, 0.0).unwrap();
        assert!(x.max_abs_diff(&a) < 1e-13);
    }
}
