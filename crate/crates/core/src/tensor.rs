//! Dense fourth-order complex tensors and their symmetry classes.
//!
//! Entries are addressed by zero-based quadruples `[i, j, k, l]` and stored
//! lexicographically with `l` varying fastest. Text file formats use
//! one-based indices; see [`crate::io`].

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance used by [`SymmetryClass::classify_default`].
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Tensor4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor4")
            .field("n", &self.n)
            .field("norm", &self.norm())
            .finish()
    }
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "tensor dimension must be positive");
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n.pow(4)],
        }
    }

    pub fn from_vec(n: usize, data: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "tensor dimension must be positive".into(),
            ));
        }
        let expected = n.pow(4);
        if data.len() != expected {
            return Err(Error::EntryCount {
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut([usize; 4]) -> C64) -> Self {
        let mut t = Self::zeros(n);
        let mut pos = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t.data[pos] = f([i, j, k, l]);
                        pos += 1;
                    }
                }
            }
        }
        t
    }

    /// Builds a real tensor.
    pub fn from_real_fn(n: usize, mut f: impl FnMut([usize; 4]) -> f64) -> Self {
        Self::from_fn(n, |q| C64::new(f(q), 0.0))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, [i, j, k, l]: [usize; 4]) -> usize {
        let n = self.n;
        ((i * n + j) * n + k) * n + l
    }

    #[inline]
    pub fn get(&self, q: [usize; 4]) -> C64 {
        self.data[self.offset(q)]
    }

    /// Iterates `(index, value)` in canonical order.
    pub fn indexed(&self) -> impl Iterator<Item = ([usize; 4], C64)> + '_ {
        let n = self.n;
        self.data.iter().enumerate().map(move |(pos, &v)| {
            let l = pos % n;
            let k = (pos / n) % n;
            let j = (pos / (n * n)) % n;
            let i = pos / (n * n * n);
            ([i, j, k, l], v)
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Tensor4) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch in axpy");
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    pub fn distance(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch in distance");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise real part as a new complex tensor.
    pub fn real_part(&self) -> Self {
        self.map(|z| C64::new(z.re, 0.0))
    }

    fn check_same_n(&self, other: &Tensor4) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

impl Index<[usize; 4]> for Tensor4 {
    type Output = C64;

    fn index(&self, q: [usize; 4]) -> &C64 {
        &self.data[self.offset(q)]
    }
}

impl Add for &Tensor4 {
    type Output = Tensor4;

    fn add(self, rhs: &Tensor4) -> Tensor4 {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Tensor4 {
    type Output = Tensor4;

    fn sub(self, rhs: &Tensor4) -> Tensor4 {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &Tensor4 {
    type Output = Tensor4;

    fn mul(self, s: f64) -> Tensor4 {
        self.scale(s)
    }
}

/// `result[i,j,k,l] = x[i,j] * y[k,l]`.
pub fn outer_product_mm(x: &CMatrix, y: &CMatrix) -> Result<Tensor4> {
    let n = x.nrows();
    for m in [x, y] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidConfig("empty matrix".into()));
    }
    Ok(Tensor4::from_fn(n, |[i, j, k, l]| x[(i, j)] * y[(k, l)]))
}

/// `result[i,j,k,l] = a[i] b[j] c[k] d[l]`.
pub fn outer_product_vvvv(a: &CVector, b: &CVector, c: &CVector, d: &CVector) -> Result<Tensor4> {
    let n = a.len();
    for v in [b, c, d] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidConfig("empty vector".into()));
    }
    Ok(Tensor4::from_fn(n, |[i, j, k, l]| {
        a[i] * b[j] * c[k] * d[l]
    }))
}

/// `<A, B> = sum A_ijkl * conj(B_ijkl)`.
pub fn inner_product(a: &Tensor4, b: &Tensor4) -> Result<C64> {
    a.check_same_n(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y.conj()).sum())
}

/// A bijection on the four modes, written one-based as in `Y_[1,2,4,3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Permutation([usize; 4]);

impl Permutation {
    pub const IDENTITY: Permutation = Permutation([1, 2, 3, 4]);

    pub fn new(p: [usize; 4]) -> Result<Self> {
        let mut seen = [false; 4];
        for &m in &p {
            if !(1..=4).contains(&m) || seen[m - 1] {
                return Err(Error::InvalidPermutation(p));
            }
            seen[m - 1] = true;
        }
        Ok(Self(p))
    }

    pub fn as_array(&self) -> [usize; 4] {
        self.0
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = [0; 4];
        for (pos, &m) in self.0.iter().enumerate() {
            inv[m - 1] = pos + 1;
        }
        Permutation(inv)
    }

    /// Source index in the original tensor for a result index.
    #[inline]
    fn source(&self, q: [usize; 4]) -> [usize; 4] {
        let p = self.0;
        [q[p[0] - 1], q[p[1] - 1], q[p[2] - 1], q[p[3] - 1]]
    }
}

/// `result[i1,i2,i3,i4] = T[i_p(1), i_p(2), i_p(3), i_p(4)]`, conjugated
/// entrywise when `conjugate` is set.
pub fn permute_conjugate(t: &Tensor4, perm: Permutation, conjugate: bool) -> Tensor4 {
    Tensor4::from_fn(t.n(), |q| {
        let v = t.get(perm.source(q));
        if conjugate {
            v.conj()
        } else {
            v
        }
    })
}

/// Symmetry tags in decreasing order of specificity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymmetryTag {
    Symmetric,
    Cps,
    Ps,
    SkewPs,
    Hermitian,
    General,
}

impl SymmetryTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SymmetryTag::Symmetric => "symmetric",
            SymmetryTag::Cps => "cps",
            SymmetryTag::Ps => "ps",
            SymmetryTag::SkewPs => "skew_ps",
            SymmetryTag::Hermitian => "hermitian",
            SymmetryTag::General => "general",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "symmetric" => SymmetryTag::Symmetric,
            "cps" => SymmetryTag::Cps,
            "ps" => SymmetryTag::Ps,
            "skew_ps" => SymmetryTag::SkewPs,
            "hermitian" => SymmetryTag::Hermitian,
            "general" => SymmetryTag::General,
            _ => return None,
        })
    }
}

impl fmt::Display for SymmetryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maximum absolute deviation of each defining index identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    /// `A_ijkl - A_jikl` and `A_ijkl - A_ijlk`.
    pub pair_swap: f64,
    /// `A_ijkl - conj(A_klij)`.
    pub conj_block_swap: f64,
    /// `A_ijkl - A_klij`.
    pub block_swap: f64,
    /// `A_ijkl + A_klij`.
    pub skew_block_swap: f64,
    /// Invariance under every permutation of the four indices.
    pub full: f64,
    pub max_imag: f64,
}

impl SymmetryReport {
    pub fn measure(t: &Tensor4) -> Self {
        let mut r = SymmetryReport {
            pair_swap: 0.0,
            conj_block_swap: 0.0,
            block_swap: 0.0,
            skew_block_swap: 0.0,
            full: 0.0,
            max_imag: t.max_imag(),
        };
        for ([i, j, k, l], v) in t.indexed() {
            let swapped = t.get([k, l, i, j]);
            r.pair_swap = r
                .pair_swap
                .max((v - t.get([j, i, k, l])).norm())
                .max((v - t.get([i, j, l, k])).norm());
            r.conj_block_swap = r.conj_block_swap.max((v - swapped.conj()).norm());
            r.block_swap = r.block_swap.max((v - swapped).norm());
            r.skew_block_swap = r.skew_block_swap.max((v + swapped).norm());
            // adjacent transpositions generate the full symmetric group
            r.full = r
                .full
                .max((v - t.get([j, i, k, l])).norm())
                .max((v - t.get([i, k, j, l])).norm())
                .max((v - t.get([i, j, l, k])).norm());
        }
        r
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.max_imag <= tol
    }

    /// Conjugate partial symmetry, which includes real partial symmetry.
    pub fn is_cps(&self, tol: f64) -> bool {
        self.pair_swap <= tol && self.conj_block_swap <= tol
    }

    pub fn is_real_ps(&self, tol: f64) -> bool {
        self.is_real(tol) && self.pair_swap <= tol && self.block_swap <= tol
    }

    pub fn is_skew_ps(&self, tol: f64) -> bool {
        self.is_real(tol) && self.pair_swap <= tol && self.skew_block_swap <= tol
    }

    pub fn tag(&self, tol: f64) -> SymmetryTag {
        if self.full <= tol {
            SymmetryTag::Symmetric
        } else if self.is_cps(tol) && !self.is_real(tol) {
            SymmetryTag::Cps
        } else if self.is_real_ps(tol) {
            SymmetryTag::Ps
        } else if self.is_skew_ps(tol) {
            SymmetryTag::SkewPs
        } else if self.conj_block_swap <= tol {
            SymmetryTag::Hermitian
        } else {
            SymmetryTag::General
        }
    }

    /// Identities defining `tag`, with their measured deviations.
    pub fn identities(&self, tag: SymmetryTag) -> Vec<(&'static str, f64)> {
        let pair = ("A_ijkl = A_jikl = A_ijlk", self.pair_swap);
        let real = ("A_ijkl real", self.max_imag);
        let conj = ("A_ijkl = conj(A_klij)", self.conj_block_swap);
        match tag {
            SymmetryTag::Symmetric => vec![("A invariant under all index permutations", self.full)],
            SymmetryTag::Cps => vec![pair, conj],
            SymmetryTag::Ps => vec![pair, ("A_ijkl = A_klij", self.block_swap), real],
            SymmetryTag::SkewPs => vec![pair, ("A_ijkl = -A_klij", self.skew_block_swap), real],
            SymmetryTag::Hermitian => vec![conj],
            SymmetryTag::General => vec![],
        }
    }

    /// Whether every identity of `tag` holds. Unlike [`Self::tag`], this is
    /// not exclusive: a real PS tensor satisfies `cps` too.
    pub fn satisfies(&self, tag: SymmetryTag, tol: f64) -> bool {
        self.identities(tag).iter().all(|(_, dev)| *dev <= tol)
    }

    /// Names the identities of `tag` that fail.
    pub fn violations(&self, tag: SymmetryTag, tol: f64) -> String {
        self.identities(tag)
            .iter()
            .filter(|(_, dev)| *dev > tol)
            .map(|(name, dev)| format!("{name} violated by {dev:.3e}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryClass {
    pub tag: SymmetryTag,
    pub tolerance: f64,
}

impl SymmetryClass {
    pub fn classify_default(t: &Tensor4) -> Self {
        classify_symmetry(t, DEFAULT_CLASSIFY_TOL * t.norm())
    }
}

/// Classifies with an absolute tolerance on every index identity.
pub fn classify_symmetry(t: &Tensor4, tol: f64) -> SymmetryClass {
    SymmetryClass {
        tag: SymmetryReport::measure(t).tag(tol),
        tolerance: tol,
    }
}

/// Checks the identities of `tag` at the default relative tolerance.
pub fn require_symmetry(t: &Tensor4, tag: SymmetryTag) -> Result<SymmetryReport> {
    let tol = DEFAULT_CLASSIFY_TOL * t.norm();
    let report = SymmetryReport::measure(t);
    if !report.satisfies(tag, tol) {
        return Err(Error::Symmetry {
            expected: tag.as_str(),
            found: report.tag(tol),
            violated: report.violations(tag, tol),
        });
    }
    Ok(report)
}

/// Orthogonal projection onto CPS tensors (eight-term group average).
pub fn project_cps(y: &Tensor4) -> Tensor4 {
    group_average(y, true)
}

/// Average over the PS group without conjugation. Real inputs land on the
/// real PS tensors.
pub fn project_ps(y: &Tensor4) -> Tensor4 {
    group_average(y, false)
}

fn group_average(y: &Tensor4, conjugate: bool) -> Tensor4 {
    Tensor4::from_fn(y.n(), |[i, j, k, l]| {
        let direct =
            y.get([i, j, k, l]) + y.get([i, j, l, k]) + y.get([j, i, k, l]) + y.get([j, i, l, k]);
        let swapped =
            y.get([k, l, i, j]) + y.get([l, k, i, j]) + y.get([k, l, j, i]) + y.get([l, k, j, i]);
        let swapped = if conjugate { swapped.conj() } else { swapped };
        (direct + swapped) * 0.125
    })
}
