//! Observation masks closed under the partial-symmetry group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tensor4, C64};

/// The eight index maps fixing a PS tensor.
pub fn ps_orbit([i, j, k, l]: [usize; 4]) -> [[usize; 4]; 8] {
    [
        [i, j, k, l],
        [j, i, k, l],
        [i, j, l, k],
        [j, i, l, k],
        [k, l, i, j],
        [l, k, i, j],
        [k, l, j, i],
        [l, k, j, i],
    ]
}

/// Set of observed zero-based quadruples, stored as a dense indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMask {
    n: usize,
    observed: Vec<bool>,
}

impl SampleMask {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            observed: vec![false; n.pow(4)],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            observed: vec![true; n.pow(4)],
        }
    }

    /// Mask from zero-based quadruples. Out-of-range entries are rejected;
    /// closure is not checked here.
    pub fn from_indices<I: IntoIterator<Item = [usize; 4]>>(n: usize, indices: I) -> Result<Self> {
        let mut m = Self::empty(n);
        for q in indices {
            if q.iter().any(|&x| x >= n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: q.iter().copied().max().unwrap_or(0) + 1,
                });
            }
            m.insert(q);
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn offset(&self, [i, j, k, l]: [usize; 4]) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn insert(&mut self, q: [usize; 4]) {
        let o = self.offset(q);
        self.observed[o] = true;
    }

    pub fn contains(&self, q: [usize; 4]) -> bool {
        self.observed[self.offset(q)]
    }

    pub fn len(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fraction of the `n^4` entries observed.
    pub fn ratio(&self) -> f64 {
        if self.observed.is_empty() {
            0.0
        } else {
            self.len() as f64 / self.observed.len() as f64
        }
    }

    /// Observed quadruples in canonical order.
    pub fn indices(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        let n = self.n;
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(o, _)| [o / (n * n * n), (o / (n * n)) % n, (o / n) % n, o % n])
    }

    /// Number of quadruples whose orbit is not fully contained.
    pub fn closure_defects(&self) -> usize {
        self.indices()
            .filter(|&q| ps_orbit(q).iter().any(|&p| !self.contains(p)))
            .count()
    }

    pub fn is_ps_closed(&self) -> bool {
        self.closure_defects() == 0
    }

    /// Smallest PS-closed superset.
    pub fn close(&mut self) {
        let present: Vec<[usize; 4]> = self.indices().collect();
        for q in present {
            for p in ps_orbit(q) {
                self.insert(p);
            }
        }
    }

    pub fn require_closed(&self) -> Result<()> {
        match self.closure_defects() {
            0 => Ok(()),
            d => Err(Error::MaskNotClosed(d)),
        }
    }
}

/// Zeroes every entry outside the mask.
pub fn apply_mask(t: &Tensor4, mask: &SampleMask) -> Result<Tensor4> {
    if t.n() != mask.n() {
        return Err(Error::DimensionMismatch {
            expected: mask.n(),
            found: t.n(),
        });
    }
    let zero = C64::new(0.0, 0.0);
    Ok(Tensor4::from_fn(t.n(), |q| {
        if mask.contains(q) {
            t.get(q)
        } else {
            zero
        }
    }))
}

/// Orbit representatives (lexicographic minimum of each orbit).
pub fn ps_orbit_representatives(n: usize) -> Vec<[usize; 4]> {
    let mut reps = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let q = [i, j, k, l];
                    if ps_orbit(q).iter().all(|p| q <= *p) {
                        reps.push(q);
                    }
                }
            }
        }
    }
    reps
}

/// Random PS-closed mask: every orbit is kept independently with
/// probability `p`.
pub fn gen_ps_mask(n: usize, p: f64, seed: u64) -> Result<SampleMask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "sample ratio {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = SampleMask::empty(n);
    for q in ps_orbit_representatives(n) {
        if rng.random_bool(p) {
            for o in ps_orbit(q) {
                mask.insert(o);
            }
        }
    }
    Ok(mask)
}
