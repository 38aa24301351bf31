//! Exact combinatorial coefficients: Stirling numbers of the first kind
//! (central and non-central), the alpha coefficients of the binomial
//! expansion, harmonic numbers and binomial coefficients.
//!
//! Tables are memoized behind a lock and grown on demand. Out-of-triangle
//! Stirling indices evaluate to zero, matching the generating-function
//! convention.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Default number of rows built when a Stirling table is first touched.
pub const DEFAULT_STIRLING_ROWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StirlingKind {
    Central,
    /// Non-central numbers `S_{j,l}^{(k)}` with shift `l`.
    NonCentral(u64),
}

impl StirlingKind {
    fn shift(self) -> u64 {
        match self {
            StirlingKind::Central => 0,
            StirlingKind::NonCentral(l) => l,
        }
    }
}

/// Triangular table of signed Stirling numbers of the first kind,
/// `entries[j][k]` for `1 <= k <= j <= j_max`.
#[derive(Clone, Debug)]
pub struct StirlingTable {
    kind: StirlingKind,
    // Row 0 is a placeholder so that row index equals j.
    rows: Vec<Vec<BigInt>>,
}

impl StirlingTable {
    pub fn new(kind: StirlingKind, j_max: usize) -> Self {
        let mut table = Self {
            kind,
            rows: vec![Vec::new(), vec![BigInt::zero(), BigInt::one()]],
        };
        table.grow_to(j_max.max(1));
        table
    }

    pub fn kind(&self) -> StirlingKind {
        self.kind
    }

    pub fn j_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// Extends the table through row `j_max` using
    /// `S_{j+1,l}^{(k)} = S_{j,l}^{(k-1)} - (j + l) S_{j,l}^{(k)}`.
    pub fn grow_to(&mut self, j_max: usize) {
        let shift = BigInt::from(self.kind.shift());
        while self.j_max() < j_max {
            let j = self.j_max();
            let prev = &self.rows[j];
            let factor = BigInt::from(j) + &shift;
            let mut next = vec![BigInt::zero(); j + 2];
            for (k, slot) in next.iter_mut().enumerate().skip(1) {
                let left = prev.get(k - 1).cloned().unwrap_or_default();
                let here = prev.get(k).map(|s| s * &factor).unwrap_or_default();
                *slot = left - here;
            }
            self.rows.push(next);
        }
    }

    /// `S_j^{(k)}` (or `S_{j,l}^{(k)}`); zero outside `1 <= k <= j`, and
    /// `None` if `j` lies beyond the built rows.
    pub fn get(&self, j: usize, k: usize) -> Option<BigInt> {
        if j == 0 || k == 0 || k > j {
            return Some(BigInt::zero());
        }
        self.rows.get(j).map(|row| row[k].clone())
    }
}

type StirlingCache = RwLock<HashMap<u64, StirlingTable>>;

fn stirling_cache() -> &'static StirlingCache {
    static CACHE: OnceLock<StirlingCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cached_stirling(shift: u64, j: usize, k: usize) -> BigInt {
    if j == 0 || k == 0 || k > j {
        return BigInt::zero();
    }
    {
        let guard = stirling_cache().read().expect("stirling cache poisoned");
        if let Some(value) = guard.get(&shift).and_then(|t| t.get(j, k)) {
            return value;
        }
    }
    let mut guard = stirling_cache().write().expect("stirling cache poisoned");
    let kind = if shift == 0 {
        StirlingKind::Central
    } else {
        StirlingKind::NonCentral(shift)
    };
    let table = guard
        .entry(shift)
        .or_insert_with(|| StirlingTable::new(kind, DEFAULT_STIRLING_ROWS));
    if table.j_max() < j {
        table.grow_to(j.max(2 * table.j_max()));
    }
    table.get(j, k).expect("row was just built")
}

/// Signed Stirling number of the first kind `S_j^{(k)}`, the coefficient of
/// `x^k` in `x (x - 1) ... (x - j + 1)`.
pub fn stirling_first(j: usize, k: usize) -> BigInt {
    cached_stirling(0, j, k)
}

/// Non-central Stirling number `S_{j,l}^{(k)}`, the coefficient of `x^k` in
/// `x (x - l - 1) ... (x - l - j + 1)`.
pub fn stirling_noncentral(j: usize, l: u64, k: usize) -> BigInt {
    cached_stirling(l, j, k)
}

/// `|S_{r+i}^{(r)}|` for `i = 0..count` as floats: the coefficients of the
/// large-mean asymptotic series of the positive Poisson inverse moments.
pub fn asymptotic_coefficients(r: usize, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            stirling_first(r + i, r)
                .abs()
                .to_f64()
                .unwrap_or(f64::INFINITY)
        })
        .collect()
}

struct AlphaTable {
    // columns[j][l] = alpha_{l,j}
    columns: Vec<Vec<BigRational>>,
    l_max: usize,
}

impl AlphaTable {
    fn build(l_max: usize, j_max: usize) -> Self {
        let mut first = vec![BigRational::zero(); l_max + 1];
        first[0] = BigRational::one();
        let mut columns = vec![first];
        for _ in 0..j_max {
            let prev = columns.last().expect("non-empty");
            let next = (0..=l_max)
                .map(|l| {
                    (0..=l).fold(BigRational::zero(), |acc, k| {
                        acc + &prev[k] / BigInt::from(l - k + 2)
                    })
                })
                .collect();
            columns.push(next);
        }
        Self { columns, l_max }
    }

    fn get(&self, l: usize, j: usize) -> Option<&BigRational> {
        if l > self.l_max {
            return None;
        }
        self.columns.get(j).map(|col| &col[l])
    }
}

fn alpha_cache() -> &'static RwLock<AlphaTable> {
    static CACHE: OnceLock<RwLock<AlphaTable>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(AlphaTable::build(16, 16)))
}

/// Coefficient `alpha_{l,j}` of `x^{2j+l}` in `(sum_{k>=2} x^k / k)^j`.
pub fn alpha(l: usize, j: usize) -> BigRational {
    {
        let guard = alpha_cache().read().expect("alpha cache poisoned");
        if let Some(value) = guard.get(l, j) {
            return value.clone();
        }
    }
    let mut guard = alpha_cache().write().expect("alpha cache poisoned");
    if guard.get(l, j).is_none() {
        let l_max = l.max(guard.l_max);
        let j_max = j.max(guard.columns.len() - 1);
        *guard = AlphaTable::build(l_max, j_max);
    }
    guard.get(l, j).expect("table covers request").clone()
}

/// `H_n = 1 + 1/2 + ... + 1/n`; `H_0 = 0`.
pub fn harmonic(n: u64) -> BigRational {
    (1..=n).fold(BigRational::zero(), |acc, i| {
        acc + BigRational::new(BigInt::one(), BigInt::from(i))
    })
}

/// `C(n, k)`, zero when `k < 0` or `k > n`.
pub fn binomial_coefficient(n: u64, k: i64) -> BigInt {
    if k < 0 || k as u64 > n {
        return BigInt::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}
