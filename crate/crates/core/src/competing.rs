//! Earlier expansions of the first inverse moment `E+[1/K]`, `K ~ Bin(N, p)`.
//!
//! * Stephan: `sum_{i=1}^M (i-1)! N! s_i / ((N+i)! p^i)` with
//!   `s_i = P(Bin(N+i, p) > i)`.
//! * Rempala: `(Np)^-1 sum_{i=0}^{M-1} (q/p)^i / C(N-1, i)`, an asymptotic
//!   series that diverges for `p` below about one half.
//! * Znidaric: `Np/(Np+q)^2 sum_{i=0}^{M-1} (-1)^i (i+1) mu_i(N-1) / (Np+q)^i`,
//!   with `mu_i(N-1)` the central moments of `Bin(N-1, p)`.

use std::fmt;
use std::str::FromStr;

use crate::dd::{compensated_sum, DoubleDouble};
use crate::error::{check_probability, domain, Error, Result};
use crate::exact_oracle::central_moments_binomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Stephan,
    Rempala,
    Znidaric,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Stephan, Method::Rempala, Method::Znidaric];

    pub fn name(self) -> &'static str {
        match self {
            Method::Stephan => "stephan",
            Method::Rempala => "rempala",
            Method::Znidaric => "znidaric",
        }
    }

    pub fn evaluate(self, n: u64, p: f64, terms: usize) -> Result<CompetitorResult> {
        match self {
            Method::Stephan => stephan(n, p, terms),
            Method::Rempala => rempala(n, p, terms),
            Method::Znidaric => znidaric(n, p, terms),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| domain(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompetitorResult {
    pub value: f64,
    /// The accumulated sum before rounding to `value`. Stephan's terms are
    /// only formed in double precision, so its low word carries no extra
    /// information.
    pub value_dd: DoubleDouble,
    pub method: Method,
    pub terms: usize,
}

fn check_inputs(n: u64, p: f64, terms: usize) -> Result<()> {
    if n == 0 {
        return Err(domain("binomial needs at least one trial"));
    }
    check_probability(p)?;
    if p == 0.0 {
        return Err(domain("expansion undefined at p = 0"));
    }
    if terms == 0 {
        return Err(domain("need at least one term"));
    }
    Ok(())
}

/// Stephan's `M`-term partial sum.
///
/// With `b(n, j)` the binomial probabilities, the `i`-th term equals
/// `N p q^(N-1) / (i (i+1)) * sum_{j>i} b(N+i, j) / b(N+i, i+1)`, which is
/// summed directly so that no `1 - (...)` cancellation occurs.
pub fn stephan(n: u64, p: f64, terms: usize) -> Result<CompetitorResult> {
    check_inputs(n, p, terms)?;
    let nf = n as f64;
    let value = if p == 1.0 {
        // s_i = 1; (i-1)! N! / (N+i)! by its product form.
        let mut ratio = 1.0 / (nf + 1.0);
        compensated_sum((1..=terms).map(|i| {
            let term = ratio;
            ratio *= i as f64 / (nf + i as f64 + 1.0);
            term
        }))
    } else {
        let q = 1.0 - p;
        let odds = p / q;
        let log_lead = nf.ln() + p.ln() + (nf - 1.0) * (-p).ln_1p();
        compensated_sum((1..=terms).map(|i| {
            let trials = nf + i as f64;
            let mode = (trials + 1.0) * p;
            // sum of b(N+i, j) / b(N+i, i+1) over j = i+1..=N+i, rescaled
            // whenever the ratios grow large.
            let mut rho = 1.0;
            let mut sum = DoubleDouble::ZERO;
            let mut log_scale = 0.0;
            for j in (i + 1)..=(n as usize + i) {
                sum += rho;
                let jf = j as f64;
                if jf >= mode && rho < 1e-18 * sum.hi {
                    break;
                }
                rho *= (trials - jf) / (jf + 1.0) * odds;
                if rho > 1e200 {
                    rho *= 1e-200;
                    sum = sum.mul_f64(1e-200);
                    log_scale += 200.0 * std::f64::consts::LN_10;
                }
            }
            let ifl = i as f64;
            (log_lead - ifl.ln() - (ifl + 1.0).ln() + log_scale + sum.to_f64().ln()).exp()
        }))
    };
    Ok(CompetitorResult {
        value,
        value_dd: DoubleDouble::from_f64(value),
        method: Method::Stephan,
        terms,
    })
}

/// Rempala's `M`-term partial sum; requires `M <= N` because
/// `C(N-1, i)` vanishes for `i >= N`.
pub fn rempala(n: u64, p: f64, terms: usize) -> Result<CompetitorResult> {
    check_inputs(n, p, terms)?;
    if terms as u64 > n {
        return Err(Error::Range(format!(
            "{terms} terms requested but C(N-1, i) = 0 for i >= N = {n}"
        )));
    }
    let q = 1.0 - p;
    let odds = q / p;
    let mut term = DoubleDouble::ONE;
    let mut sum = DoubleDouble::ZERO;
    for i in 0..terms {
        if i > 0 {
            // C(N-1, i) = C(N-1, i-1) (N-i) / i
            term = term
                .mul_f64(odds)
                .mul_f64(i as f64)
                .div_f64((n - i as u64) as f64);
        }
        sum += term;
    }
    let value_dd = sum.div_f64(n as f64 * p);
    Ok(CompetitorResult {
        value: value_dd.to_f64(),
        value_dd,
        method: Method::Rempala,
        terms,
    })
}

/// Znidaric's `M`-term partial sum.
pub fn znidaric(n: u64, p: f64, terms: usize) -> Result<CompetitorResult> {
    check_inputs(n, p, terms)?;
    let q = 1.0 - p;
    let scale = n as f64 * p + q;
    let moments = central_moments_binomial(n - 1, p, terms as u32 - 1)?;
    let mut power = DoubleDouble::ONE;
    let mut sum = DoubleDouble::ZERO;
    for (i, mu_i) in moments.iter().enumerate() {
        let term = power.mul_f64((i + 1) as f64 * mu_i);
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power = power.div_f64(scale);
    }
    let value = sum.mul_f64(n as f64 * p).div_f64(scale).div_f64(scale);
    Ok(CompetitorResult {
        value: value.to_f64(),
        value_dd: value,
        method: Method::Znidaric,
        terms,
    })
}
