//! Poisson-Charlier expansion polynomials and the inverse-moment estimates
//! built from them.
//!
//! A distribution with mean `mu` and factorial cumulants `kappa^(j)` is
//! approximated by `P(nabla) pi_mu`, where `P` is a polynomial in the
//! backward difference operator. Two truncations of the generating
//! exponential are provided:
//!
//! * [`Flavor::Barbour`]: `exp((1/t) sum_{k>=2} kappa^(k) (-t nabla)^k / k!)`
//!   expanded to `t^(m-1)`, of degree `2(m-1)` in `nabla`;
//! * [`Flavor::Taylor`]: `exp(sum_{k>=2} kappa^(k) (-t nabla)^k / k!)`
//!   expanded to `t^(m-1)`.
//!
//! Applied to the shifted Poisson moments, `P_m(-Delta) q_{-r}` at zero
//! estimates `E+[1/K^r]`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::dd::DoubleDouble;
use crate::error::{check_probability, domain, Error, Result};
use crate::exact_oracle::{factorial_cumulants_from_pdf_dd, PoissonPmf};
use crate::poisson_moments::{
    build_q_table, forward_difference_at_zero_dd, y_sequence_dd, ShiftedMomentTable,
};
use crate::scalar::{rational_to_dd, Scalar};
use crate::special_numbers::alpha;

/// Largest expansion order accepted by the binomial entry points.
pub const MAX_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Barbour,
    Taylor,
}

/// Mean and higher factorial cumulants `kappa^(2)..kappa^(J)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantSequence<T> {
    pub mu: T,
    /// `higher[i] = kappa^(i+2)`.
    pub higher: Vec<T>,
}

impl<T: Scalar> CumulantSequence<T> {
    pub fn new(mu: T, higher: Vec<T>) -> Self {
        Self { mu, higher }
    }

    /// Cumulants of `Bin(N, p)` through order `j_max`, converted from their
    /// exact rational values.
    pub fn binomial(n: u64, p: f64, j_max: usize) -> Result<Self> {
        check_probability(p)?;
        let p = BigRational::from_float(p).expect("validated probability");
        let kappa = |j: usize| T::from_rational(&binomial_cumulant_rational(n, &p, j));
        Ok(Self {
            mu: kappa(1),
            higher: (2..=j_max).map(kappa).collect(),
        })
    }

    /// A Poisson distribution: every cumulant above the first vanishes.
    pub fn poisson(mu: T, j_max: usize) -> Self {
        Self {
            mu,
            higher: vec![T::zero(); j_max.saturating_sub(1)],
        }
    }

    /// Cumulants read off a probability vector.
    pub fn from_pdf(weights: &[f64], j_max: usize) -> Result<Self> {
        let weights: Vec<DoubleDouble> =
            weights.iter().map(|w| DoubleDouble::from_f64(*w)).collect();
        let kappa = factorial_cumulants_from_pdf_dd(&weights, j_max.max(1))?;
        let convert = |v: &DoubleDouble| T::from_f64(v.hi) + T::from_f64(v.lo);
        Ok(Self {
            mu: convert(&kappa[0]),
            higher: kappa[1..j_max.max(1)].iter().map(convert).collect(),
        })
    }

    /// Highest cumulant order held.
    pub fn max_order(&self) -> usize {
        self.higher.len() + 1
    }

    /// `kappa^(j)`, `j >= 1`.
    pub fn kappa(&self, j: usize) -> Option<&T> {
        match j {
            0 => None,
            1 => Some(&self.mu),
            _ => self.higher.get(j - 2),
        }
    }
}

fn binomial_cumulant_rational(n: u64, p: &BigRational, j: usize) -> BigRational {
    // -N (j-1)! (-p)^j
    let factorial: BigInt = (1..j as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(i));
    let power = num_traits::pow(-p.clone(), j);
    -BigRational::from_integer(BigInt::from(n) * factorial) * power
}

/// `kappa^(j) = -N (j-1)! (-p)^j` for `Bin(N, p)`.
pub fn binomial_factorial_cumulant(n: u64, p: f64, j: usize) -> Result<f64> {
    check_probability(p)?;
    if j == 0 {
        return Err(domain("factorial cumulants start at order 1"));
    }
    let factorial: f64 = (1..j).map(|i| i as f64).product();
    Ok(-(n as f64) * factorial * (-p).powi(j as i32))
}

/// A polynomial in `nabla`, stored sparsely by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionPolynomial<T> {
    pub coefficients: BTreeMap<usize, T>,
    pub order: usize,
    pub flavor: Flavor,
}

impl<T: Scalar> ExpansionPolynomial<T> {
    fn from_dense(dense: Vec<T>, order: usize, flavor: Flavor) -> Self {
        let coefficients = dense
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Self {
            coefficients,
            order,
            flavor,
        }
    }

    pub fn coefficient(&self, degree: usize) -> T {
        self.coefficients
            .get(&degree)
            .cloned()
            .unwrap_or_else(T::zero)
    }

    /// Highest degree with a non-zero coefficient.
    pub fn degree(&self) -> usize {
        self.coefficients.keys().next_back().copied().unwrap_or(0)
    }

    pub fn is_identity(&self) -> bool {
        self.coefficients.len() == 1 && self.coefficient(0) == T::one()
    }

    pub fn to_dd(&self) -> ExpansionPolynomial<DoubleDouble> {
        ExpansionPolynomial {
            coefficients: self
                .coefficients
                .iter()
                .map(|(d, c)| (*d, c.to_dd()))
                .collect(),
            order: self.order,
            flavor: self.flavor,
        }
    }
}

/// Series in `t` whose coefficients are dense polynomials in `nabla`.
type TSeries<T> = Vec<Vec<T>>;

fn poly_mul_acc<T: Scalar>(acc: &mut Vec<T>, a: &[T], b: &[T], scale: &T) {
    if acc.len() < a.len() + b.len() - 1 {
        acc.resize(a.len() + b.len() - 1, T::zero());
    }
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if y.is_zero() {
                continue;
            }
            acc[i + j] = acc[i + j].clone() + x.clone() * y.clone() * scale.clone();
        }
    }
}

/// `exp(E)` truncated after `t^(m-1)`, for `E` with no constant term, by
/// `n F_n = sum_{k=1}^n k E_k F_{n-k}`.
fn exp_series<T: Scalar>(exponent: &TSeries<T>, m: usize) -> TSeries<T> {
    let mut f: TSeries<T> = vec![vec![T::one()]];
    for n in 1..m {
        let mut next = vec![T::zero()];
        for k in 1..=n {
            let Some(e) = exponent.get(k) else { continue };
            if e.iter().all(Scalar::is_zero) {
                continue;
            }
            poly_mul_acc(&mut next, e, &f[n - k], &T::from_integer(k as i64));
        }
        let n_inv = T::one() / T::from_integer(n as i64);
        f.push(next.into_iter().map(|c| c * n_inv.clone()).collect());
    }
    f
}

fn sum_series<T: Scalar>(series: TSeries<T>) -> Vec<T> {
    let len = series.iter().map(Vec::len).max().unwrap_or(1);
    let mut total = vec![T::zero(); len];
    for poly in series {
        for (d, c) in poly.into_iter().enumerate() {
            total[d] = total[d].clone() + c;
        }
    }
    total
}

/// `(-1)^k kappa^(k) / k!` as the coefficient of `nabla^k`.
fn scaled_cumulant<T: Scalar>(cumulants: &CumulantSequence<T>, k: usize) -> T {
    let factorial: i64 = (1..=k as i64).product();
    let c = cumulants.kappa(k).expect("checked").clone() / T::from_integer(factorial);
    if k % 2 == 1 {
        -c
    } else {
        c
    }
}

fn require_cumulants<T: Scalar>(cumulants: &CumulantSequence<T>, needed: usize) -> Result<()> {
    if needed >= 2 && cumulants.max_order() < needed {
        return Err(Error::Precondition(format!(
            "expansion needs factorial cumulants through order {needed}, got {}",
            cumulants.max_order()
        )));
    }
    Ok(())
}

/// Order-`m` Barbour polynomial `P_m`, of degree at most `2(m-1)`.
///
/// Needs cumulants through order `m`.
pub fn barbour_polynomial<T: Scalar>(
    cumulants: &CumulantSequence<T>,
    m: usize,
) -> Result<ExpansionPolynomial<T>> {
    if m == 0 {
        return Err(domain("expansion order must be at least 1"));
    }
    require_cumulants(cumulants, m)?;
    // t^s carries kappa^(s+1) nabla^(s+1).
    let exponent: TSeries<T> = (0..m)
        .map(|s| {
            if s == 0 {
                return vec![T::zero()];
            }
            let mut poly = vec![T::zero(); s + 2];
            poly[s + 1] = scaled_cumulant(cumulants, s + 1);
            poly
        })
        .collect();
    let dense = sum_series(exp_series(&exponent, m));
    Ok(ExpansionPolynomial::from_dense(dense, m, Flavor::Barbour))
}

/// Order-`m` Taylor polynomial. Needs cumulants through order `m - 1`.
pub fn taylor_polynomial<T: Scalar>(
    cumulants: &CumulantSequence<T>,
    m: usize,
) -> Result<ExpansionPolynomial<T>> {
    if m == 0 {
        return Err(domain("expansion order must be at least 1"));
    }
    require_cumulants(cumulants, m - 1)?;
    // t^s carries kappa^(s) nabla^s, starting at s = 2.
    let exponent: TSeries<T> = (0..m)
        .map(|s| {
            let mut poly = vec![T::zero(); s + 1];
            if s >= 2 {
                poly[s] = scaled_cumulant(cumulants, s);
            }
            poly
        })
        .collect();
    let dense = sum_series(exp_series(&exponent, m));
    Ok(ExpansionPolynomial::from_dense(dense, m, Flavor::Taylor))
}

/// Barbour polynomial of `Bin(N, p)` written through the alpha coefficients:
/// `1 + sum_{k=1}^{m-1} N^-k sum_{j=1}^k ((-1)^j / j!) alpha_{k-j,j} (mu nabla)^(j+k)`.
pub fn binomial_barbour_polynomial<T: Scalar>(
    n: u64,
    mu: T,
    m: usize,
) -> Result<ExpansionPolynomial<T>> {
    if m == 0 {
        return Err(domain("expansion order must be at least 1"));
    }
    if n == 0 {
        return Err(domain("binomial needs at least one trial"));
    }
    let mut dense = vec![T::zero(); 2 * (m - 1) + 1];
    dense[0] = T::one();
    let n_t = T::from_integer(n as i64);
    let mut n_power = T::one();
    for k in 1..m {
        n_power = n_power * n_t.clone();
        let mut j_factorial = BigInt::one();
        for j in 1..=k {
            j_factorial *= BigInt::from(j);
            let mut weight = alpha(k - j, j) / BigRational::from_integer(j_factorial.clone());
            if j % 2 == 1 {
                weight = -weight;
            }
            let mu_power = (0..j + k).fold(T::one(), |acc, _| acc * mu.clone());
            let term = T::from_rational(&weight) * mu_power / n_power.clone();
            dense[j + k] = dense[j + k].clone() + term;
        }
    }
    Ok(ExpansionPolynomial::from_dense(dense, m, Flavor::Barbour))
}

/// Smallest `k >= mu` with `pi_mu(k) < 1e-16`: a cut-off past which the
/// Poisson weights no longer affect a double-precision PDF.
pub fn pdf_support_bound(mu: f64) -> usize {
    PoissonPmf::new(mu)
        .find(|(k, p)| *k as f64 >= mu && p.hi < 1e-16)
        .map(|(k, _)| k as usize)
        .expect("the Poisson iterator is infinite")
}

/// `g(k) = sum_d c_d (nabla^d pi_mu)(k)` for `k = 0..=k_max`, with
/// `pi_mu(k) = 0` for `k < 0`.
pub fn expand_pdf<T: Scalar>(
    poly: &ExpansionPolynomial<T>,
    mu: f64,
    k_max: usize,
) -> Result<Vec<f64>> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(domain(format!("mean {mu} must be positive and finite")));
    }
    if k_max < pdf_support_bound(mu) {
        return Err(Error::Precondition(format!(
            "k_max = {k_max} truncates Poisson mass above 1e-16 at mean {mu}"
        )));
    }
    let mut column: Vec<DoubleDouble> = PoissonPmf::new(mu)
        .take(k_max + 1)
        .map(|(_, p)| p)
        .collect();
    let mut out = vec![DoubleDouble::ZERO; k_max + 1];
    for d in 0..=poly.degree() {
        if d > 0 {
            for k in (1..=k_max).rev() {
                column[k] = column[k] - column[k - 1];
            }
        }
        let c = poly.coefficient(d);
        if c.is_zero() {
            continue;
        }
        let c = c.to_dd();
        for (g, v) in out.iter_mut().zip(&column) {
            *g += c * *v;
        }
    }
    Ok(out.into_iter().map(DoubleDouble::to_f64).collect())
}

/// `(P(-Delta) q_{-r})(0) = sum_d c_d ((-Delta)^d q_{-r})(0)`.
pub fn inverse_moment_estimate<T: Scalar>(
    poly: &ExpansionPolynomial<T>,
    table: &ShiftedMomentTable,
) -> Result<f64> {
    Ok(inverse_moment_estimate_dd(poly, table)?.to_f64())
}

pub fn inverse_moment_estimate_dd<T: Scalar>(
    poly: &ExpansionPolynomial<T>,
    table: &ShiftedMomentTable,
) -> Result<DoubleDouble> {
    if poly.degree() > table.a_max() {
        return Err(Error::Range(format!(
            "polynomial of degree {} needs shifts up to {}, table stops at {}",
            poly.degree(),
            poly.degree(),
            table.a_max()
        )));
    }
    poly.coefficients
        .iter()
        .try_fold(DoubleDouble::ZERO, |acc, (d, c)| {
            Ok(acc + c.to_dd() * forward_difference_at_zero_dd(table, *d)?)
        })
}

fn check_binomial(n: u64, p: f64, m: usize) -> Result<()> {
    if n == 0 {
        return Err(domain("binomial needs at least one trial"));
    }
    check_probability(p)?;
    if m == 0 || m > MAX_ORDER {
        return Err(domain(format!(
            "expansion order {m} outside 1..={MAX_ORDER}"
        )));
    }
    Ok(())
}

/// First inverse moment of `Bin(N, p)` through the closed-form sequence
/// `y_n`: `y_0 + sum_{k=1}^{m-1} N^-k sum_{j=1}^k ((-1)^j / j!) alpha_{k-j,j} y_{j+k}`.
pub fn first_inverse_moment_binomial(n: u64, p: f64, m: usize) -> Result<f64> {
    check_binomial(n, p, m)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    let mu = n as f64 * p;
    let y = y_sequence_dd(mu, 2 * (m - 1))?;
    let mut total = y[0];
    let mut n_power = DoubleDouble::ONE;
    for k in 1..m {
        n_power = n_power.mul_f64(n as f64);
        let mut inner = DoubleDouble::ZERO;
        let mut j_factorial = BigInt::one();
        for j in 1..=k {
            j_factorial *= BigInt::from(j);
            let weight = alpha(k - j, j) / BigRational::from_integer(j_factorial.clone());
            let term = rational_to_dd(&weight.abs()) * y[j + k];
            if j % 2 == 1 {
                inner -= term;
            } else {
                inner += term;
            }
        }
        total += inner / n_power;
    }
    Ok(total.to_f64())
}

/// Order-`m` estimate of `E+[1/K^r]` for `K ~ Bin(N, p)`: the binomial
/// Barbour polynomial applied to the shifted Poisson moments.
pub fn charlier_inverse_moment(n: u64, p: f64, r: u32, m: usize) -> Result<f64> {
    check_binomial(n, p, m)?;
    if r == 0 {
        return Err(domain("inverse moment order must be positive"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mu = n as f64 * p;
    let poly = binomial_barbour_polynomial(n, DoubleDouble::from_f64(mu), m)?;
    let table = build_q_table(mu, r, 2 * (m - 1))?;
    inverse_moment_estimate(&poly, &table)
}

/// `2^(2m-1) (1 - e^-Np) p^m`, a bound on the order-`m` error for `Bin(N, p)`;
/// informative for `p < 1/4`.
pub fn barbour_error_bound(n: u64, p: f64, m: usize) -> Result<f64> {
    check_probability(p)?;
    if m == 0 {
        return Err(domain("expansion order must be at least 1"));
    }
    let mu = n as f64 * p;
    Ok(2f64.powi(2 * m as i32 - 1) * -(-mu).exp_m1() * p.powi(m as i32))
}
