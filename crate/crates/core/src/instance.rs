//! Seeded random test instances with known structure.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::decompose::{
    reconstruct, MatrixDecomposition, MatrixFactor, SkewFactor, VectorPairFactor,
};
use crate::error::{Error, Result};
use crate::rank_one::Rank1CPS;
use crate::tensor::{outer_product_vvvv, CMatrix, CVector, Tensor4, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceKind {
    /// `sum lambda_i (x o x o y o y + y o y o x o x)`, real.
    PsPairs,
    /// `sum lambda_i E_i o conj(E_i)` with orthonormal complex symmetric `E_i`.
    CpsOrthonormal,
    /// `sum lambda_i E_i o E_i` with orthonormal real symmetric `E_i`.
    PsOrthonormal,
    /// `sum a_i o a_i o conj(a_i) o conj(a_i)`.
    CpsVectorSum,
    /// `sum lambda_i (U_i o V_i - V_i o U_i)`, real.
    SkewPs,
    /// `lambda x o x o conj(x) o conj(x)`.
    Rank1Cps,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 6] = [
        InstanceKind::PsPairs,
        InstanceKind::CpsOrthonormal,
        InstanceKind::PsOrthonormal,
        InstanceKind::CpsVectorSum,
        InstanceKind::SkewPs,
        InstanceKind::Rank1Cps,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InstanceKind::PsPairs => "ps_pairs",
            InstanceKind::CpsOrthonormal => "cps_orthonormal",
            InstanceKind::PsOrthonormal => "ps_orthonormal",
            InstanceKind::CpsVectorSum => "cps_vector_sum",
            InstanceKind::SkewPs => "skew_ps",
            InstanceKind::Rank1Cps => "rank1_cps",
        }
    }

    /// Largest admissible term count for dimension `n`.
    pub fn max_terms(&self, n: usize) -> usize {
        let sym = n * (n + 1) / 2;
        match self {
            InstanceKind::CpsOrthonormal | InstanceKind::PsOrthonormal => sym,
            InstanceKind::SkewPs => sym / 2,
            InstanceKind::Rank1Cps => 1,
            InstanceKind::PsPairs | InstanceKind::CpsVectorSum => usize::MAX,
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown instance kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPolicy {
    /// Magnitudes in `[0.1, 1]` with pairwise gaps of at least 0.05, random
    /// signs.
    DistinctRandom,
    Given(Vec<f64>),
}

/// Entry scale of the `a_i` in [`InstanceKind::CpsVectorSum`].
pub const VECTOR_SUM_SCALE: f64 = 0.4;

/// Number of magnitudes [`LambdaPolicy::DistinctRandom`] can separate.
pub const MAX_DISTINCT: usize = 19;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub lambda_policy: LambdaPolicy,
}

impl InstanceSpec {
    pub fn new(kind: InstanceKind, n: usize, r: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            r,
            seed,
            lambda_policy: LambdaPolicy::DistinctRandom,
        }
    }
}

/// Known factors behind a generated tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Matrix(MatrixDecomposition),
    VectorPairs(Vec<VectorPairFactor>),
    VectorSum(Vec<CVector>),
    Skew(Vec<SkewFactor>),
    Rank1(Rank1CPS),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub tensor: Tensor4,
    pub truth: GroundTruth,
}

/// SplitMix64 finalizer of `seed + trial`, used to derive independent
/// per-trial seeds.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex standard normal: `(g + i h) / sqrt(2)`.
pub fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C64::new(normal(rng) * s, normal(rng) * s)
}

/// `u + i v` with `u, v` uniform on `[0, 1)`.
pub fn complex_uniform(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random(), rng.random())
}

fn unit_real_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| normal(rng));
        let nv = v.norm();
        if nv > 1e-8 {
            return v / nv;
        }
    }
}

/// Random magnitudes with minimum gap 0.05 and maximum at most 1.
pub fn distinct_lambdas(rng: &mut ChaCha8Rng, r: usize) -> Result<Vec<f64>> {
    if r > MAX_DISTINCT {
        return Err(Error::Infeasible(format!(
            "cannot draw {r} values with gaps of 0.05 in [0.1, 1]"
        )));
    }
    let span = 0.9 - (r.saturating_sub(1)) as f64 * 0.05;
    let mut p: Vec<f64> = (0..r).map(|_| rng.random::<f64>() * span).collect();
    p.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(k, pk)| 0.1 + pk + 0.05 * k as f64)
        .collect();
    for v in out.iter_mut() {
        if rng.random_bool(0.5) {
            *v = -*v;
        }
    }
    // shuffle so the generation order carries no magnitude information
    for i in (1..out.len()).rev() {
        let j = rng.random_range(0..=i);
        out.swap(i, j);
    }
    Ok(out)
}

/// `count` symmetric matrices, orthonormal under `<X, Y> = tr(X^* Y)`.
pub fn orthonormal_symmetric(
    rng: &mut ChaCha8Rng,
    n: usize,
    count: usize,
    complex: bool,
) -> Result<Vec<CMatrix>> {
    if count > n * (n + 1) / 2 {
        return Err(Error::Infeasible(format!(
            "{count} orthonormal symmetric {n}x{n} matrices do not exist"
        )));
    }
    let mut basis: Vec<CMatrix> = Vec::with_capacity(count);
    while basis.len() < count {
        let g = CMatrix::from_fn(n, n, |_, _| {
            if complex {
                complex_normal(rng)
            } else {
                C64::new(normal(rng), 0.0)
            }
        });
        let mut m = (&g + g.transpose()) * C64::new(0.5, 0.0);
        // two Gram-Schmidt passes for numerical orthogonality
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&m);
                m -= b * c;
            }
        }
        let nm = m.norm();
        if nm > 1e-6 {
            basis.push(m / C64::new(nm, 0.0));
        }
    }
    Ok(basis)
}

fn lambdas_for(spec: &InstanceSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match &spec.lambda_policy {
        LambdaPolicy::DistinctRandom => distinct_lambdas(rng, spec.r),
        LambdaPolicy::Given(v) if v.len() == spec.r => Ok(v.clone()),
        LambdaPolicy::Given(v) => Err(Error::InvalidConfig(format!(
            "{} coefficients given for r = {}",
            v.len(),
            spec.r
        ))),
    }
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    let (n, r) = (spec.n, spec.r);
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    if r == 0 || r > spec.kind.max_terms(n) {
        return Err(Error::Infeasible(format!(
            "r = {r} outside 1..={} for {} at n = {n}",
            spec.kind.max_terms(n),
            spec.kind
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (tensor, truth) = match spec.kind {
        InstanceKind::PsPairs => {
            let lambdas = lambdas_for(spec, &mut rng)?;
            let pairs: Vec<VectorPairFactor> = lambdas
                .into_iter()
                .map(|coeff| VectorPairFactor {
                    coeff,
                    p: unit_real_vector(&mut rng, n),
                    q: unit_real_vector(&mut rng, n),
                })
                .collect();
            let mut t = Tensor4::zeros(n);
            for f in &pairs {
                t = &t + &f.to_tensor();
            }
            (t, GroundTruth::VectorPairs(pairs))
        }
        InstanceKind::CpsOrthonormal | InstanceKind::PsOrthonormal => {
            let complex = spec.kind == InstanceKind::CpsOrthonormal;
            let lambdas = lambdas_for(spec, &mut rng)?;
            let mats = orthonormal_symmetric(&mut rng, n, r, complex)?;
            let mut factors: Vec<MatrixFactor> = lambdas
                .into_iter()
                .zip(mats)
                .map(|(lambda, matrix)| MatrixFactor { lambda, matrix })
                .collect();
            factors.sort_by(|a, b| b.lambda.abs().total_cmp(&a.lambda.abs()));
            let d = MatrixDecomposition {
                n,
                factors,
                conjugated_second: complex,
            };
            (reconstruct(&d), GroundTruth::Matrix(d))
        }
        InstanceKind::CpsVectorSum => {
            let vectors: Vec<CVector> = (0..r)
                .map(|_| CVector::from_fn(n, |_, _| complex_uniform(&mut rng) * VECTOR_SUM_SCALE))
                .collect();
            let mut t = Tensor4::zeros(n);
            for a in &vectors {
                let ac = a.conjugate();
                t = &t + &outer_product_vvvv(a, a, &ac, &ac)?;
            }
            (t, GroundTruth::VectorSum(vectors))
        }
        InstanceKind::SkewPs => {
            let lambdas = lambdas_for(spec, &mut rng)?;
            let mats = orthonormal_symmetric(&mut rng, n, 2 * r, false)?;
            let factors: Vec<SkewFactor> = lambdas
                .into_iter()
                .enumerate()
                .map(|(i, coeff)| SkewFactor {
                    coeff,
                    u: mats[2 * i].map(|z| z.re),
                    v: mats[2 * i + 1].map(|z| z.re),
                })
                .collect();
            let mut t = Tensor4::zeros(n);
            for f in &factors {
                t = &t + &f.to_tensor();
            }
            (t, GroundTruth::Skew(factors))
        }
        InstanceKind::Rank1Cps => {
            let lambda = lambdas_for(spec, &mut rng)?[0];
            let x = CVector::from_fn(n, |_, _| complex_normal(&mut rng));
            let nx = x.norm();
            let r1 = Rank1CPS::new(lambda, x.unscale(nx))?;
            (r1.to_tensor(), GroundTruth::Rank1(r1))
        }
    };
    Ok(Instance {
        spec: spec.clone(),
        tensor,
        truth,
    })
}
