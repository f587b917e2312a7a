//! Rank-one CPS tensors: detection, extraction and three approximation
//! schemes (PLMA, convex relaxation by ADMM, nonconvex relaxation by
//! alternating minimization).

use nalgebra::DMatrix;

use crate::decompose::{smroa, SmroaOptions};
use crate::error::{Error, Result};
use crate::report::{SolverReport, Termination};
use crate::spectral::{
    hermitian_eigen, normalize_phase, nuclear_norm, numerical_rank, svt, svt_hermitian,
};
use crate::tensor::{
    inner_product, project_cps, require_symmetry, CMatrix, CVector, SymmetryReport, SymmetryTag,
    Tensor4, C64,
};
use crate::unfold::{fold, unfold, vec_to_matrix, ModePair};

/// Default relative tolerance for the rank of the `[3,2;1,4]` unfolding.
pub const RANK_ONE_TOL: f64 = 1e-8;
/// Tolerance used when certifying a conv1 solution.
pub const CERTIFY_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 60;

/// `lambda * x o x o conj(x) o conj(x)` with `||x|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1CPS {
    pub lambda: f64,
    pub x: CVector,
}

impl Rank1CPS {
    /// Absorbs `||x||^4` into `lambda` and fixes the phase of `x`.
    pub fn new(lambda: f64, x: CVector) -> Result<Self> {
        let nx = x.norm();
        if nx == 0.0 {
            return Err(Error::ZeroTensor);
        }
        let mut x = x.unscale(nx);
        normalize_phase(&mut x);
        Ok(Self {
            lambda: lambda * nx.powi(4),
            x,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn to_tensor(&self) -> Tensor4 {
        let x = &self.x;
        let l = self.lambda;
        Tensor4::from_fn(x.len(), |[i, j, k, m]| {
            x[i] * x[j] * x[k].conj() * x[m].conj() * l
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxConfig {
    /// Penalty weight; `None` selects the solver default (ALM: 1, ADMM:
    /// warm start).
    pub rho: Option<f64>,
    pub tau: f64,
    /// Nuclear-norm weight for PLMA.
    pub lambda_nuc: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// ALM sweeps used to pick `rho` for ADMM.
    pub warm_start_steps: usize,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            rho: None,
            tau: 1.0,
            lambda_nuc: 0.0,
            tol: 1e-8,
            max_iter: 1000,
            warm_start_steps: 5,
        }
    }
}

impl RelaxConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if let Some(r) = self.rho {
            if !(r > 0.0 && r.is_finite()) {
                return bad("rho must be positive");
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.lambda_nuc >= 0.0 && self.lambda_nuc.is_finite()) {
            return bad("lambda_nuc must be nonnegative");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tol must be nonnegative");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }
}

fn require_cps(t: &Tensor4) -> Result<SymmetryReport> {
    require_symmetry(t, SymmetryTag::Cps)
}

/// Rank of the `[3,2;1,4]` unfolding; a CPS tensor is rank-one exactly when
/// this is 1.
pub fn unfolding_rank_3214(t: &Tensor4, rel_tol: f64) -> Result<usize> {
    require_cps(t)?;
    numerical_rank(&unfold(t, ModePair::R32_14).matrix, rel_tol)
}

pub fn is_rank_one_tensor(t: &Tensor4, rel_tol: f64) -> Result<bool> {
    Ok(unfolding_rank_3214(t, rel_tol)? == 1)
}

/// Vector `x` with `w ~ vec(x conj(x)^T)`-structure, read off a unit
/// eigenvector `w` of a CPS `[3,2;1,4]` unfolding. Returns the leading
/// eigenvalue of the aligned Hermitian matrix and the unit vector.
fn vector_from_factor(w: &CVector) -> Result<(f64, CVector)> {
    let e = vec_to_matrix(w)?;
    let n = e.nrows();
    // e is a phase times a Hermitian matrix; undo the phase.
    let mut c = C64::new(0.0, 0.0);
    for s in 0..n {
        for t in 0..n {
            c += (e[(t, s)] * e[(s, t)]).conj();
        }
    }
    let phase = C64::from_polar(1.0, c.arg() / 2.0);
    let aligned = e * phase;
    let h = (&aligned + aligned.adjoint()) * C64::new(0.5, 0.0);
    let eig = hermitian_eigen(&h)?;
    let mut x = eig.vector(0).map(|z| z.conj());
    normalize_phase(&mut x);
    Ok((eig.eigenvalues[0], x))
}

/// Recovers `(lambda, x)` from a rank-one CPS tensor.
pub fn extract_rank1(t: &Tensor4) -> Result<Rank1CPS> {
    let rank = unfolding_rank_3214(t, RANK_ONE_TOL)?;
    if rank != 1 {
        return Err(Error::NotRankOne { rank });
    }
    let eig = hermitian_eigen(&unfold(t, ModePair::R32_14).matrix)?;
    let (_, x) = vector_from_factor(&eig.vector(0))?;
    Ok(Rank1CPS {
        lambda: eig.eigenvalues[0].signum() * t.norm(),
        x,
    })
}

/// Alternating minimization for
/// `min 1/2 ||T - Y||^2 + rho/2 ||X - Y||^2` with `Y` of rank-one
/// `[3,2;1,4]` unfolding and `X` rank-one CPS. Objective values are
/// recorded after each sweep.
pub fn alm_nonconvex(t: &Tensor4, cfg: &RelaxConfig) -> Result<(Rank1CPS, SolverReport)> {
    cfg.validate()?;
    require_cps(t)?;
    let rho = cfg.rho.unwrap_or(1.0);
    let n = t.n();
    let mut report = SolverReport::new();
    if t.is_zero() {
        report.termination = Termination::ZeroInput;
        return Ok((
            Rank1CPS {
                lambda: 0.0,
                x: CVector::from_fn(n, |i, _| C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)),
            },
            report,
        ));
    }
    let mut x = Tensor4::zeros(n);
    let mut current = None;
    for _ in 0..cfg.max_iter {
        let z = t.axpy(rho, &x).scale(1.0 / (1.0 + rho));
        let eig = hermitian_eigen(&unfold(&z, ModePair::R32_14).matrix)?;
        let (lambda, w) = (eig.eigenvalues[0], eig.vector(0));
        let y = fold(
            &(&w * w.adjoint() * C64::new(lambda, 0.0)),
            ModePair::R32_14,
        )?;
        // The closest rank-one CPS tensor to Y keeps the leading
        // eigenvector of Y's Hermitian factor.
        let (sigma, v) = vector_from_factor(&w)?;
        let r1 = Rank1CPS {
            lambda: lambda * sigma * sigma,
            x: v,
        };
        let next = r1.to_tensor();
        let change = next.distance(&x);
        let objective = 0.5 * t.distance(&y).powi(2) + 0.5 * rho * next.distance(&y).powi(2);
        report.record(objective, change);
        x = next;
        current = Some(r1);
        if change < cfg.tol {
            report.termination = Termination::Converged;
            break;
        }
    }
    Ok((current.expect("max_iter >= 1"), report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedGlobal,
    NotCertified,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::CertifiedGlobal => "certified_global",
            Verdict::NotCertified => "not_certified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    pub frob_norm: f64,
    pub nuclear_norm_3214: f64,
    pub objective: f64,
    /// The stricter `|p| > tol` test.
    pub objective_nonzero: bool,
    pub verdict: Verdict,
}

impl Certification {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedGlobal
    }
}

/// Checks `||X||_F = 1` and `||X_[3,2;1,4]||_* = 1` within `tol`, and that
/// the conv1 value `p` is not positive beyond `tol`.
///
/// A minimizer passing the two norm checks is rank-one, and every unit
/// rank-one `Z` has `-<T, Z> + rho >= p = -<T, X> + rho`, so `X` is a
/// global optimizer of the rank-constrained problem whether or not `p`
/// vanishes. `p > 0` cannot occur at a minimizer since `X = 0` gives 0.
pub fn certify_conv1(x: &Tensor4, objective: f64, tol: f64) -> Result<Certification> {
    let frob_norm = x.norm();
    let nuclear_norm_3214 = nuclear_norm(&unfold(x, ModePair::R32_14).matrix)?;
    let ok = (frob_norm - 1.0).abs() <= tol
        && (nuclear_norm_3214 - 1.0).abs() <= tol
        && objective <= tol;
    Ok(Certification {
        frob_norm,
        nuclear_norm_3214,
        objective,
        objective_nonzero: objective.abs() > tol,
        verdict: if ok {
            Verdict::CertifiedGlobal
        } else {
            Verdict::NotCertified
        },
    })
}

/// `-Re<T, X> + rho ||X_[3,2;1,4]||_*`.
pub fn conv1_objective(t: &Tensor4, x: &Tensor4, rho: f64) -> Result<f64> {
    Ok(-inner_product(t, x)?.re + rho * nuclear_norm(&unfold(x, ModePair::R32_14).matrix)?)
}

#[derive(Debug, Clone)]
pub struct Conv1Solution {
    pub x: Tensor4,
    pub rho: f64,
    pub certification: Certification,
    pub report: SolverReport,
}

/// `rho = Re<T, X / ||X||>` from a short ALM run.
pub fn warm_start_rho(t: &Tensor4, steps: usize) -> Result<f64> {
    let cfg = RelaxConfig {
        rho: Some(1.0),
        tol: 0.0,
        max_iter: steps.max(1),
        ..Default::default()
    };
    let (r1, _) = alm_nonconvex(t, &cfg)?;
    let x = r1.to_tensor();
    let nx = x.norm();
    if nx == 0.0 {
        return Err(Error::Degenerate("warm start produced a zero tensor"));
    }
    Ok(inner_product(t, &x)?.re / nx)
}

/// ADMM for `min -Re<T, X> + rho ||X_[3,2;1,4]||_*` over CPS `X` with
/// `||X||_F <= 1`, split as `Y = X`.
pub fn admm_conv1(t: &Tensor4, cfg: &RelaxConfig) -> Result<Conv1Solution> {
    cfg.validate()?;
    require_cps(t)?;
    let nt = t.norm();
    if nt == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let rho = match cfg.rho {
        Some(r) => r,
        None => warm_start_rho(t, cfg.warm_start_steps)?,
    };
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "warm start gave nonpositive rho {rho}"
        )));
    }
    let tau = cfg.tau;
    let n = t.n();
    let mut y = t.scale(1.0 / nt);
    let mut lambda = Tensor4::zeros(n);
    let mut x = y.clone();
    let mut report = SolverReport::new();
    for _ in 0..cfg.max_iter {
        let target = project_cps(&(&y + &(&(t + &lambda) * (1.0 / tau))));
        let norm = target.norm();
        if norm <= f64::EPSILON * nt.max(1.0) {
            return Err(Error::Degenerate("projected iterate vanished"));
        }
        x = target.scale(1.0 / norm);
        let shifted = x.axpy(-1.0 / tau, &lambda);
        let shrunk = svt_hermitian(&unfold(&shifted, ModePair::R32_14).matrix, rho / tau)?;
        y = fold(&shrunk, ModePair::R32_14)?;
        let gap = y.distance(&x);
        lambda = lambda.axpy(tau, &(&y - &x));
        report.record(conv1_objective(t, &x, rho)?, gap);
        if gap <= cfg.tol {
            report.termination = Termination::Converged;
            break;
        }
    }
    let objective = *report.objective.last().expect("max_iter >= 1");
    let certification = certify_conv1(&x, objective, CERTIFY_TOL)?;
    Ok(Conv1Solution {
        x,
        rho,
        certification,
        report,
    })
}

/// Result of the nuclear-regularized matrix outer-product approximation
/// `min ||A - alpha X o X||^2 + lambda ||X||_*` over symmetric unit `X`.
#[derive(Debug, Clone)]
pub struct PlmaSolution {
    pub alpha: f64,
    pub x: DMatrix<f64>,
    pub report: SolverReport,
}

struct PlmaProblem {
    /// Real square unfolding of `A`.
    m: DMatrix<f64>,
    norm_sqr: f64,
    lambda_nuc: f64,
    n: usize,
}

impl PlmaProblem {
    fn vec(&self, x: &DMatrix<f64>) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(x.as_slice())
    }

    /// `<A, X o X>`.
    fn quad(&self, x: &DMatrix<f64>) -> f64 {
        let v = self.vec(x);
        v.dot(&(&self.m * &v))
    }

    /// `(A X)_ij = sum_kl A_ijkl X_kl`.
    fn contract(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let v = &self.m * self.vec(x);
        DMatrix::from_column_slice(self.n, self.n, v.as_slice())
    }

    fn f(&self, alpha: f64, x: &DMatrix<f64>) -> f64 {
        let nx2 = x.norm_squared();
        self.norm_sqr - 2.0 * alpha * self.quad(x) + alpha * alpha * nx2 * nx2
    }

    fn phi(&self, alpha: f64, x: &DMatrix<f64>) -> Result<f64> {
        Ok(self.f(alpha, x) + self.lambda_nuc * real_nuclear_norm(x)?)
    }

    fn gradient(&self, alpha: f64, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * (4.0 * alpha * alpha * x.norm_squared()) - self.contract(x) * (4.0 * alpha)
    }
}

fn to_complex(x: &DMatrix<f64>) -> CMatrix {
    x.map(|v| C64::new(v, 0.0))
}

fn real_nuclear_norm(x: &DMatrix<f64>) -> Result<f64> {
    nuclear_norm(&to_complex(x))
}

fn real_svt(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    Ok(svt(&to_complex(x), tau)?.map(|z| z.re))
}

/// Proximal linearized minimization with backtracking on `t_k`.
///
/// Starting from one greedy step, each iteration takes a gradient step of
/// length `1/t`, shrinks singular values by `lambda/t`, renormalizes, and
/// refits `alpha`. `t` starts at 1 and doubles until the accepted point
/// satisfies `Phi_new <= Phi_old - t/4 ||X_new - X_old||^2`.
pub fn plma_low_rank_approx(a: &Tensor4, cfg: &RelaxConfig) -> Result<PlmaSolution> {
    cfg.validate()?;
    require_symmetry(a, SymmetryTag::Ps)?;
    let n = a.n();
    let mut report = SolverReport::new();
    if a.is_zero() {
        report.termination = Termination::ZeroInput;
        return Ok(PlmaSolution {
            alpha: 0.0,
            x: DMatrix::identity(n, n) / (n as f64).sqrt(),
            report,
        });
    }
    let problem = PlmaProblem {
        m: unfold(a, ModePair::SQUARE).matrix.map(|z| z.re),
        norm_sqr: a.norm_sqr(),
        lambda_nuc: cfg.lambda_nuc,
        n,
    };
    let (init, _) = smroa(
        a,
        SmroaOptions {
            max_terms: Some(1),
            tol: 0.0,
        },
    )?;
    let f0 = &init.factors[0];
    let mut x = f0.matrix.map(|z| z.re);
    x /= x.norm();
    let mut alpha = problem.quad(&x);
    let mut phi = problem.phi(alpha, &x)?;

    for k in 0..cfg.max_iter {
        let grad = problem.gradient(alpha, &x);
        let slack = 1e-12 * phi.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_DOUBLINGS {
            let hat = real_svt(&(&x - &grad / t), cfg.lambda_nuc / t)?;
            let nh = hat.norm();
            if nh == 0.0 {
                report.annihilated_steps += 1;
            } else {
                let mut cand = hat / nh;
                cand = (&cand + cand.transpose()) * 0.5;
                let cand_alpha = problem.quad(&cand);
                let cand_phi = problem.phi(cand_alpha, &cand)?;
                let step = (&cand - &x).norm();
                if cand_phi <= phi - 0.25 * t * step * step + slack {
                    accepted = Some((cand, cand_alpha, cand_phi, step));
                    break;
                }
                report.rejected_steps += 1;
            }
            t *= 2.0;
        }
        let Some((cand, cand_alpha, cand_phi, step)) = accepted else {
            return Err(Error::StepSearch(k));
        };
        x = cand;
        alpha = cand_alpha;
        phi = cand_phi;
        report.step_sizes.push(t);
        report.record(phi, step);
        if step < cfg.tol {
            report.termination = Termination::Converged;
            break;
        }
    }
    Ok(PlmaSolution { alpha, x, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::outer_product_mm;

    fn unit(v: &[C64]) -> CVector {
        let x = CVector::from_column_slice(v);
        let n = x.norm();
        x.unscale(n)
    }

    #[test]
    fn extract_rank_one_complex() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = unit(&[C64::new(s, 0.0), C64::new(0.0, s)]);
        let t = Rank1CPS {
            lambda: 2.0,
            x: x.clone(),
        }
        .to_tensor();
        assert!(is_rank_one_tensor(&t, RANK_ONE_TOL).unwrap());
        let r = extract_rank1(&t).unwrap();
        assert!((r.lambda - 2.0).abs() < 1e-12);
        assert!(r.to_tensor().distance(&t) < 1e-12);
        assert!((x.dotc(&r.x).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_negative_elementary() {
        let e1 = unit(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let t = Rank1CPS {
            lambda: -3.0,
            x: e1.clone(),
        }
        .to_tensor();
        let r = extract_rank1(&t).unwrap();
        assert_eq!(r.lambda, -3.0);
        assert!((&r.x - &e1).norm() < 1e-15);
    }

    #[test]
    fn remark_tensor_is_not_rank_one() {
        let t = Tensor4::from_real_fn(2, |[i, j, k, l]| if i == j && k == l { 1.0 } else { 0.0 });
        assert!(!is_rank_one_tensor(&t, RANK_ONE_TOL).unwrap());
        assert!(matches!(
            extract_rank1(&t),
            Err(Error::NotRankOne { rank: 4 })
        ));
    }

    #[test]
    fn zero_tensor_has_rank_zero() {
        assert!(!is_rank_one_tensor(&Tensor4::zeros(2), RANK_ONE_TOL).unwrap());
        assert!(matches!(
            admm_conv1(&Tensor4::zeros(2), &RelaxConfig::default()),
            Err(Error::ZeroTensor)
        ));
    }

    #[test]
    fn rank1_new_normalizes() {
        let r = Rank1CPS::new(
            1.0,
            CVector::from_column_slice(&[C64::new(0.0, 2.0), C64::new(0.0, 0.0)]),
        )
        .unwrap();
        assert_eq!(r.lambda, 16.0);
        assert_eq!(r.x[0], C64::new(1.0, 0.0));
        assert!(Rank1CPS::new(1.0, CVector::zeros(2)).is_err());
    }

    #[test]
    fn certification_cases() {
        let e1 = unit(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let e2 = unit(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let t1 = Rank1CPS { lambda: 1.0, x: e1 }.to_tensor();
        let t2 = Rank1CPS { lambda: 1.0, x: e2 }.to_tensor();
        let c = certify_conv1(&t1, -0.5, CERTIFY_TOL).unwrap();
        assert!(c.is_certified());
        let mix = (&t1 + &t2).scale(std::f64::consts::FRAC_1_SQRT_2);
        let c = certify_conv1(&mix, -0.5, CERTIFY_TOL).unwrap();
        assert!((c.nuclear_norm_3214 - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(!c.is_certified());
        assert!(!certify_conv1(&Tensor4::zeros(2), 0.0, CERTIFY_TOL)
            .unwrap()
            .is_certified());
        let c = certify_conv1(&t1, 0.0, CERTIFY_TOL).unwrap();
        assert!(c.is_certified() && !c.objective_nonzero);
        assert!(!certify_conv1(&t1, 0.5, CERTIFY_TOL).unwrap().is_certified());
    }

    #[test]
    fn alm_on_rank_one_input() {
        let x = unit(&[C64::new(0.6, 0.1), C64::new(-0.2, 0.7), C64::new(0.3, 0.0)]);
        let truth = Rank1CPS::new(2.5, x).unwrap();
        let t = truth.to_tensor();
        let (r1, rep) = alm_nonconvex(&t, &RelaxConfig::default()).unwrap();
        assert!(rep.converged());
        assert!(r1.to_tensor().distance(&t) < 1e-7);
        assert!((truth.x.dotc(&r1.x).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plma_recovers_single_factor() {
        let e = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.8]);
        let a = outer_product_mm(&to_complex(&e), &to_complex(&e))
            .unwrap()
            .scale(5.0);
        let sol = plma_low_rank_approx(&a, &RelaxConfig::default()).unwrap();
        assert!((sol.alpha - 5.0).abs() < 1e-10);
        assert!((sol.x.abs() - e.abs()).norm() < 1e-10);
    }

    #[test]
    fn plma_rejects_complex_input() {
        let x = unit(&[C64::new(0.6, 0.1), C64::new(-0.2, 0.7)]);
        let t = Rank1CPS { lambda: 1.0, x }.to_tensor();
        assert!(matches!(
            plma_low_rank_approx(&t, &RelaxConfig::default()),
            Err(Error::Symmetry { .. })
        ));
    }

    #[test]
    fn plma_large_weight_annihilates_trials() {
        let e = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.8]);
        let a = outer_product_mm(&to_complex(&e), &to_complex(&e))
            .unwrap()
            .scale(5.0);
        let cfg = RelaxConfig {
            lambda_nuc: 100.0,
            max_iter: 5,
            ..Default::default()
        };
        let sol = plma_low_rank_approx(&a, &cfg).unwrap();
        assert!(sol.report.annihilated_steps > 0);
    }
}
