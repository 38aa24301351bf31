//! Ground-truth evaluation by direct summation.
//!
//! Everything here is a positive-term sum (or an exact rational sum), so no
//! cancellation is involved; the other modules are validated against these
//! values. Poisson sums are truncated at the first `k >= mu` for which the
//! geometric majorant `pi(k) (k + 1) / (k + 1 - mu)` of the remaining mass
//! drops below the caller's tolerance.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::dd::DoubleDouble;
use crate::error::{check_positive_mean, check_probability, domain, Error, Result};

/// Largest `N` for which binomial inverse moments are summed in exact
/// rational arithmetic; beyond it a compensated float sum is used.
pub const EXACT_RATIONAL_MAX_N: u64 = 1024;

const PDF_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Binomial {
        n: u64,
        p: f64,
    },
    /// `weights[k] = f(k)`; weights beyond the stored length are zero.
    ExplicitPdf(Vec<f64>),
}

impl DistributionSpec {
    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        let spec = DistributionSpec::Binomial { n, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn explicit_pdf(weights: Vec<f64>) -> Result<Self> {
        let spec = DistributionSpec::ExplicitPdf(weights);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Binomial { n, p } => {
                if *n == 0 {
                    return Err(domain("binomial needs at least one trial"));
                }
                check_probability(*p)
            }
            DistributionSpec::ExplicitPdf(weights) => validate_pdf(weights),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Binomial { n, p } => *n as f64 * p,
            DistributionSpec::ExplicitPdf(w) => {
                crate::dd::compensated_sum(w.iter().enumerate().map(|(k, f)| k as f64 * f))
            }
        }
    }

    /// The probability vector `f(0), f(1), ...` up to the last support point.
    pub fn pdf(&self) -> Vec<f64> {
        match self {
            DistributionSpec::Binomial { n, p } => binomial_pmf_vector(*n, *p),
            DistributionSpec::ExplicitPdf(w) => w.clone(),
        }
    }
}

fn validate_pdf(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(domain("empty probability vector"));
    }
    if let Some((k, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
    {
        return Err(domain(format!("weight f({k}) = {w} is not a probability")));
    }
    let total = crate::dd::compensated_sum(weights.iter().copied());
    if (total - 1.0).abs() > PDF_SUM_TOLERANCE {
        return Err(domain(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Result of an infinite sum together with a bound on what was left out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    crate::dd::compensated_sum((1..=k).map(|i| (((n - k + i) as f64) / i as f64).ln()))
}

/// `C(N, k) p^k (1 - p)^(N - k)`, zero outside `0..=N`.
pub fn binomial_pdf(n: u64, p: f64, k: i64) -> Result<f64> {
    if n == 0 {
        return Err(domain("binomial needs at least one trial"));
    }
    check_probability(p)?;
    if k < 0 || k as u64 > n {
        return Ok(0.0);
    }
    let k = k as u64;
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    let log = ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p();
    Ok(log.exp())
}

/// All binomial probabilities `f(0..=N)`, anchored at the mode and filled in
/// by the ratio recurrence so that no intermediate over- or underflows.
pub fn binomial_pmf_vector(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    let mut pmf = vec![0.0; len];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[len - 1] = 1.0;
        return pmf;
    }
    let q = 1.0 - p;
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let anchor =
        (ln_binomial(n, mode) + mode as f64 * p.ln() + (n - mode) as f64 * (-p).ln_1p()).exp();
    pmf[mode as usize] = anchor;
    let odds = p / q;
    for k in mode..n {
        let next = pmf[k as usize] * ((n - k) as f64 / (k + 1) as f64) * odds;
        pmf[k as usize + 1] = next;
    }
    for k in (1..=mode).rev() {
        let prev = pmf[k as usize] * (k as f64 / (n - k + 1) as f64) / odds;
        pmf[k as usize - 1] = prev;
    }
    pmf
}

/// `E+[1/K^r] = sum_{k>=1} f(k) / k^r`.
pub fn exact_inverse_moment(spec: &DistributionSpec, r: u32) -> Result<f64> {
    Ok(exact_inverse_moment_dd(spec, r)?.to_f64())
}

/// Double-double form of [`exact_inverse_moment`]. Binomial moments with
/// `N <= EXACT_RATIONAL_MAX_N` are the exact rational value rounded once.
pub fn exact_inverse_moment_dd(spec: &DistributionSpec, r: u32) -> Result<DoubleDouble> {
    spec.validate()?;
    if r == 0 {
        return Err(domain("inverse moment order must be positive"));
    }
    match spec {
        DistributionSpec::Binomial { n, p } => {
            if *p == 0.0 {
                Ok(DoubleDouble::ZERO)
            } else if *n <= EXACT_RATIONAL_MAX_N {
                Ok(crate::scalar::rational_to_dd(
                    &binomial_inverse_moment_rational(*n, *p, r),
                ))
            } else {
                let pmf = binomial_pmf_vector(*n, *p);
                Ok(weighted_inverse_sum(&pmf, r))
            }
        }
        DistributionSpec::ExplicitPdf(w) => Ok(weighted_inverse_sum(w, r)),
    }
}

fn weighted_inverse_sum(pmf: &[f64], r: u32) -> DoubleDouble {
    pmf.iter()
        .enumerate()
        .skip(1)
        .fold(DoubleDouble::ZERO, |acc, (k, f)| {
            acc + DoubleDouble::from_f64(*f) / DoubleDouble::from_f64(k as f64).powi(r)
        })
}

/// Exact value of `sum_k C(N,k) p^k q^(N-k) / k^r` for the binary rational `p`.
fn binomial_inverse_moment_rational(n: u64, p: f64, r: u32) -> BigRational {
    let p = BigRational::from_float(p).expect("validated probability");
    let denom = p.denom().clone();
    let a = p.numer().clone();
    let b = &denom - &a;

    // Common denominator lcm(1..N)^r for the 1/k^r weights.
    let lcm = (1..=n).fold(BigInt::one(), |acc, k| acc.lcm(&BigInt::from(k)));
    let scale = num_traits::pow(lcm, r as usize);

    let mut b_powers = Vec::with_capacity(n as usize + 1);
    b_powers.push(BigInt::one());
    for i in 1..=n as usize {
        let next = &b_powers[i - 1] * &b;
        b_powers.push(next);
    }

    let mut numerator = BigInt::zero();
    let mut a_power = BigInt::one();
    let mut binom = BigInt::one();
    for k in 1..=n {
        a_power *= &a;
        binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        let weight = &scale / num_traits::pow(BigInt::from(k), r as usize);
        numerator += &binom * &a_power * &b_powers[(n - k) as usize] * weight;
    }
    let denominator = scale * num_traits::pow(denom, n as usize);
    BigRational::new_raw(numerator, denominator)
}

const EXP_CHUNK: f64 = 600.0;

/// Iterator over `(k, pi_mu(k))` in double-double precision, `k = 0, 1, ...`.
///
/// The factor `exp(-mu)` is applied in chunks as the running product
/// `mu^k / k!` grows, so large means neither overflow nor lose the leading
/// terms to underflow. Terms below roughly `1e-110` may come out as zero.
#[derive(Clone, Debug)]
pub struct PoissonPmf {
    mu: f64,
    k: u64,
    scaled: DoubleDouble,
    pending: f64,
}

impl PoissonPmf {
    pub fn new(mu: f64) -> Self {
        let mut pmf = Self {
            mu,
            k: 0,
            scaled: DoubleDouble::ONE,
            pending: mu,
        };
        pmf.absorb();
        pmf
    }

    fn absorb(&mut self) {
        while self.pending > 0.0 && (self.pending <= EXP_CHUNK || self.scaled.hi > 1e150) {
            let chunk = self.pending.min(EXP_CHUNK);
            self.scaled *= DoubleDouble::from_f64(-chunk).exp();
            self.pending -= chunk;
        }
    }
}

impl Iterator for PoissonPmf {
    type Item = (u64, DoubleDouble);

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.k;
        let value = if self.pending > 0.0 {
            DoubleDouble::ZERO
        } else {
            self.scaled
        };
        self.k += 1;
        self.scaled = self.scaled.mul_f64(self.mu).div_f64(self.k as f64);
        self.absorb();
        Some((k, value))
    }
}

/// `sum_{k >= start} pi_mu(k) weight(k)` for weights in `[0, 1]`, truncated
/// by the geometric tail rule. Returns the sum and the tail bound.
pub(crate) fn poisson_weighted_sum(
    mu: f64,
    tol: f64,
    start: u64,
    weight: impl Fn(u64) -> DoubleDouble,
) -> (DoubleDouble, f64) {
    let mut sum = DoubleDouble::ZERO;
    for (k, pk) in PoissonPmf::new(mu) {
        let kf = k as f64;
        if kf >= mu {
            let bound = pk.hi * (kf + 1.0) / (kf + 1.0 - mu);
            if bound < tol {
                return (sum, bound);
            }
        }
        if k >= start {
            sum += pk * weight(k);
        }
    }
    unreachable!("the Poisson iterator is infinite")
}

fn inverse_power(base: u64, r: u32) -> DoubleDouble {
    DoubleDouble::ONE / DoubleDouble::from_f64(base as f64).powi(r)
}

/// Extended-precision form of [`shifted_poisson_moment_direct`].
pub fn shifted_poisson_moment_direct_dd(
    mu: f64,
    a: u64,
    r: u32,
    tol: f64,
) -> Result<(DoubleDouble, f64)> {
    check_positive_mean(mu)?;
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    if a == 0 && r == 0 {
        return Err(domain("E+[1/(Q+a)^r] needs a >= 1 or r >= 1"));
    }
    let start = if a == 0 { 1 } else { 0 };
    Ok(poisson_weighted_sum(mu, tol, start, |k| {
        if r == 0 {
            DoubleDouble::ONE
        } else {
            inverse_power(k + a, r)
        }
    }))
}

/// `f_r(mu) = E+[1/Q^r] = exp(-mu) sum_{k>=1} mu^k / (k! k^r)` for a
/// Poisson variate `Q` with mean `mu`.
pub fn poisson_inverse_moment_direct(mu: f64, r: u32, tol: f64) -> Result<OracleValue> {
    if r == 0 {
        return Err(domain("inverse moment order must be positive"));
    }
    shifted_poisson_moment_direct(mu, 0, r, tol)
}

/// `E[1/(Q+a)^r]` for `a >= 1`, or `E+[1/Q^r]` when `a = 0`.
pub fn shifted_poisson_moment_direct(mu: f64, a: u64, r: u32, tol: f64) -> Result<OracleValue> {
    let (value, tail_bound) = shifted_poisson_moment_direct_dd(mu, a, r, tol)?;
    Ok(OracleValue {
        value: value.to_f64(),
        tail_bound,
    })
}

/// Central moments `mu_i = E[(K - Np)^i]` of `Bin(N, p)` for `i = 0..=max_i`.
/// `N = 0` (the point mass at zero) is allowed.
pub fn central_moments_binomial(n: u64, p: f64, max_i: u32) -> Result<Vec<f64>> {
    check_probability(p)?;
    let pmf = binomial_pmf_vector(n, p);
    let mean = n as f64 * p;
    let mut sums = vec![DoubleDouble::ZERO; max_i as usize + 1];
    for (k, f) in pmf.iter().enumerate() {
        let dev = DoubleDouble::from_f64(k as f64) - DoubleDouble::from_f64(mean);
        let mut power = DoubleDouble::from_f64(*f);
        for slot in sums.iter_mut() {
            *slot += power;
            power *= dev;
        }
    }
    Ok(sums.into_iter().map(DoubleDouble::to_f64).collect())
}

/// `E[(K - Np)^i]` for `K ~ Bin(N, p)`.
pub fn central_moment_binomial(n: u64, p: f64, i: u32) -> Result<f64> {
    Ok(central_moments_binomial(n, p, i)?[i as usize])
}

/// Factorial cumulants `kappa^(1..=max_j)` of a probability vector, read off
/// the formal logarithm of `sum_k f(k) (1 + x)^k`.
///
/// The logarithm amplifies input rounding roughly by `C(N, j) p^j / |kappa^(j)|`;
/// use [`factorial_cumulants_from_pdf_dd`] when the weights are known to
/// better than `f64` precision.
pub fn factorial_cumulants_from_pdf(weights: &[f64], max_j: usize) -> Result<Vec<f64>> {
    validate_pdf(weights)?;
    let weights: Vec<DoubleDouble> = weights.iter().map(|w| DoubleDouble::from_f64(*w)).collect();
    Ok(factorial_cumulants_from_pdf_dd(&weights, max_j)?
        .into_iter()
        .map(DoubleDouble::to_f64)
        .collect())
}

/// Double-double form of [`factorial_cumulants_from_pdf`].
pub fn factorial_cumulants_from_pdf_dd(
    weights: &[DoubleDouble],
    max_j: usize,
) -> Result<Vec<DoubleDouble>> {
    if max_j == 0 {
        return Err(Error::Precondition("need at least one cumulant".into()));
    }
    let total: DoubleDouble = weights.iter().copied().sum();
    if weights.iter().any(|w| !(w.hi >= 0.0)) || (total.to_f64() - 1.0).abs() > PDF_SUM_TOLERANCE {
        return Err(domain("weights do not form a probability vector"));
    }

    // g_n = sum_k f(k) C(k, n): Taylor coefficients of E[(1 + x)^K].
    let mut g = vec![DoubleDouble::ZERO; max_j + 1];
    for (k, f) in weights.iter().enumerate() {
        if f.hi == 0.0 {
            continue;
        }
        // C(k, n) stays an exact integer in f64 for the orders used here.
        let mut choose = DoubleDouble::ONE;
        for (n, slot) in g.iter_mut().enumerate() {
            if n > k {
                break;
            }
            if n > 0 {
                choose = choose.mul_f64((k + 1 - n) as f64).div_f64(n as f64);
            }
            *slot += *f * choose;
        }
    }
    let g0 = g[0];
    let g: Vec<DoubleDouble> = g.into_iter().map(|c| c / g0).collect();

    // log G via n l_n = n g_n - sum_{i=1}^{n-1} i l_i g_{n-i}, with g_0 = 1.
    let mut log = vec![DoubleDouble::ZERO; max_j + 1];
    for n in 1..=max_j {
        let mut acc = g[n].mul_f64(n as f64);
        for i in 1..n {
            acc -= (log[i] * g[n - i]).mul_f64(i as f64);
        }
        log[n] = acc.div_f64(n as f64);
    }

    let mut factorial = DoubleDouble::ONE;
    Ok((1..=max_j)
        .map(|j| {
            factorial = factorial.mul_f64(j as f64);
            log[j] * factorial
        })
        .collect())
}
