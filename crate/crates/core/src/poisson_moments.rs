//! Inverse moments of the Poisson distribution.
//!
//! For a Poisson variate `Q` with mean `mu` this module evaluates
//!
//! * `f_r(mu) = E+[1/Q^r]`, by the ascending series for small `mu` and the
//!   asymptotic series `sum_i |S_{r+i}^{(r)}| / mu^(r+i)` for large `mu`,
//!   switching at a calibrated cross-over point;
//! * the shifted moments `q_{-r}(a) = E[1/(Q+a)^r]`, through their closed
//!   form in Stirling numbers where it is well conditioned;
//! * the forward differences `((-Delta)^n q_{-r})(0)` and the closed-form
//!   sequence `y_n = mu^n ((-Delta)^n q_{-1})(0)`.
//!
//! Alternating sums are carried in double-double precision throughout.

use rayon::prelude::*;

use crate::dd::DoubleDouble;
use crate::error::{check_positive_mean, domain, Error, Result};
use crate::exact_oracle::{poisson_weighted_sum, shifted_poisson_moment_direct_dd};
use crate::scalar::bigint_to_dd;
use crate::special_numbers::{stirling_first, stirling_noncentral};

/// Absolute truncation tolerance for the internal positive-term sums.
const DD_TOL: f64 = 1e-40;

/// Closed forms are trusted while the cancellation they incur, measured as
/// `sum |terms| / |result|`, stays below this.
const MAX_CLOSED_FORM_CONDITION: f64 = 1e15;

/// `Er(mu) = sum_{i>=1} mu^i / (i i!)`, i.e. `Ei(mu) - ln(mu) - gamma`.
pub fn er_function(mu: f64) -> f64 {
    er_function_dd(mu).to_f64()
}

/// Double-double form of [`er_function`].
pub fn er_function_dd(mu: f64) -> DoubleDouble {
    if mu == 0.0 {
        return DoubleDouble::ZERO;
    }
    let mut power = DoubleDouble::ONE;
    let mut sum = DoubleDouble::ZERO;
    for i in 1u64.. {
        power = power.mul_f64(mu).div_f64(i as f64);
        let term = power.div_f64(i as f64);
        sum += term;
        if (i as f64) > mu.abs() && term.hi.abs() <= 1e-34 * sum.hi.abs() {
            break;
        }
        if !sum.is_finite() {
            break;
        }
    }
    sum
}

/// Switching point and term counts for [`positive_poisson_inverse_moment`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossoverProfile {
    pub r: u32,
    pub target_rel_error: f64,
    pub mu_star: f64,
    /// Terms of the ascending series, used for `mu <= mu_star`.
    pub m1: usize,
    /// Terms of the asymptotic series, used for `mu > mu_star`.
    pub m2: usize,
}

const REFERENCE_1E5: [(f64, usize, usize); 6] = [
    (13.671, 31, 10),
    (17.061, 35, 15),
    (20.544, 39, 20),
    (24.775, 44, 26),
    (28.966, 49, 32),
    (32.969, 53, 38),
];

const REFERENCE_1E10: [(f64, usize, usize); 6] = [
    (25.734, 63, 20),
    (29.206, 67, 26),
    (33.998, 74, 33),
    (37.903, 79, 39),
    (42.573, 85, 46),
    (47.068, 90, 53),
];

impl CrossoverProfile {
    /// Reference profiles for `r = 1..=6` and targets `1e-5`, `1e-10`.
    pub fn reference(r: u32, target_rel_error: f64) -> Option<Self> {
        let table = if target_rel_error == 1e-5 {
            &REFERENCE_1E5
        } else if target_rel_error == 1e-10 {
            &REFERENCE_1E10
        } else {
            return None;
        };
        let (mu_star, m1, m2) = *table.get((r as usize).checked_sub(1)?)?;
        Some(Self {
            r,
            target_rel_error,
            mu_star,
            m1,
            m2,
        })
    }
}

/// `e^-mu sum_{k=1}^{m1} mu^k / (k! k^r)`.
fn ascending_series_dd(mu: f64, r: u32, m1: usize) -> DoubleDouble {
    let mut power = DoubleDouble::ONE;
    let mut sum = DoubleDouble::ZERO;
    for k in 1..=m1 {
        power = power.mul_f64(mu).div_f64(k as f64);
        sum += power / DoubleDouble::from_f64(k as f64).powi(r);
    }
    sum * DoubleDouble::from_f64(-mu).exp()
}

/// `sum_{i < coefficients.len()} coefficients[i] / mu^(r+i)`.
fn asymptotic_series_dd(mu: f64, r: u32, coefficients: &[DoubleDouble]) -> DoubleDouble {
    let inv = DoubleDouble::ONE.div_f64(mu);
    let mut power = inv.powi(r);
    let mut sum = DoubleDouble::ZERO;
    for c in coefficients {
        sum += *c * power;
        power *= inv;
    }
    sum
}

fn asymptotic_coefficients_dd(r: u32, count: usize) -> Vec<DoubleDouble> {
    let r = r as usize;
    (0..count)
        .map(|i| bigint_to_dd(&stirling_first(r + i, r)).abs())
        .collect()
}

fn positive_moment_dd(mu: f64, r: u32) -> DoubleDouble {
    poisson_weighted_sum(mu, DD_TOL, 1, |k| {
        DoubleDouble::ONE / DoubleDouble::from_f64(k as f64).powi(r)
    })
    .0
}

/// `f_r(mu) = E+[1/Q^r]` by the truncated ascending series below the
/// profile's cross-over point and the truncated asymptotic series above it.
pub fn positive_poisson_inverse_moment(mu: f64, r: u32, profile: &CrossoverProfile) -> Result<f64> {
    check_positive_mean(mu)?;
    if profile.r != r {
        return Err(Error::Precondition(format!(
            "profile calibrated for r = {}, requested r = {r}",
            profile.r
        )));
    }
    if r == 0 {
        return Err(domain("inverse moment order must be positive"));
    }
    let value = if mu <= profile.mu_star {
        ascending_series_dd(mu, r, profile.m1)
    } else {
        asymptotic_series_dd(mu, r, &asymptotic_coefficients_dd(r, profile.m2))
    };
    Ok(value.to_f64())
}

/// Value of the closed form for `E[1/(Q+a)^r]` and the cancellation it
/// suffered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormValue {
    pub value: DoubleDouble,
    /// `sum |terms| / |value|`; roughly the factor by which rounding errors
    /// in the individual terms are amplified.
    pub condition: f64,
}

/// Closed form of `E[1/(Q+a)^r]`, `a, r >= 1`, in central and non-central
/// Stirling numbers:
///
/// `mu^-a ( S_a^(r) (1 - e^-mu) + sum_{k<r} S_a^(r-k) f_k(mu) + sum_{k<a} S_{a-k,k}^(r) mu^k )`.
///
/// For `r = 1` the bracket is an alternating exponential tail and is summed
/// as `(a-1)! sum_{i>=0} (-mu)^i / (a+i)!` instead.
pub fn shifted_closed_form_dd(mu: f64, a: u64, r: u32) -> Result<ClosedFormValue> {
    check_positive_mean(mu)?;
    if a == 0 || r == 0 {
        return Err(domain("closed form needs a >= 1 and r >= 1"));
    }
    if r == 1 {
        return Ok(first_shifted_tail_form(mu, a));
    }

    let au = a as usize;
    let ru = r as usize;
    let mut terms = Vec::with_capacity(ru + au);
    let one_minus_exp = DoubleDouble::ONE - DoubleDouble::from_f64(-mu).exp();
    terms.push(bigint_to_dd(&stirling_first(au, ru)) * one_minus_exp);
    for k in 1..ru {
        let s = stirling_first(au, ru - k);
        if s.sign() != num_bigint::Sign::NoSign {
            terms.push(bigint_to_dd(&s) * positive_moment_dd(mu, k as u32));
        }
    }
    let mut mu_power = DoubleDouble::ONE;
    for k in 1..au {
        mu_power = mu_power.mul_f64(mu);
        let s = stirling_noncentral(au - k, k as u64, ru);
        terms.push(bigint_to_dd(&s) * mu_power);
    }

    let bracket: DoubleDouble = terms.iter().copied().sum();
    let magnitude: f64 = terms.iter().map(|t| t.hi.abs()).sum();
    let scale = DoubleDouble::from_f64(mu).powi(a as u32);
    let value = bracket / scale;
    Ok(ClosedFormValue {
        value,
        condition: magnitude / bracket.hi.abs(),
    })
}

fn first_shifted_tail_form(mu: f64, a: u64) -> ClosedFormValue {
    let mut term = DoubleDouble::ONE.div_f64(a as f64);
    let mut sum = term;
    let mut magnitude = term.hi;
    for i in 1u64.. {
        term = term.mul_f64(-mu).div_f64((a + i) as f64);
        sum += term;
        magnitude += term.hi.abs();
        if (i as f64) > mu && term.hi.abs() <= 1e-34 * sum.hi.abs() {
            break;
        }
    }
    ClosedFormValue {
        value: sum,
        condition: magnitude / sum.hi.abs(),
    }
}

/// `E[1/(Q+a)^r]` built from `E[1/(Q+1)] = (1 - e^-mu)/mu`,
/// `E[1/(Q+1)^r] = f_{r-1}(mu)/mu` and the upward recurrence
/// `E[1/(Q+a)^r] = (E[1/(Q+a-1)^(r-1)] - (a-1) E[1/(Q+a-1)^r]) / mu`,
/// with `E[1/(Q+a)^0] = 1`.
pub fn shifted_by_recurrence_dd(mu: f64, a: u64, r: u32) -> Result<DoubleDouble> {
    check_positive_mean(mu)?;
    if a == 0 || r == 0 {
        return Err(domain("recurrence needs a >= 1 and r >= 1"));
    }
    let ru = r as usize;
    // row[s] = E[1/(Q+b)^s] for the current shift b, s = 0..=r.
    let mut row = vec![DoubleDouble::ONE; ru + 1];
    row[1] = (DoubleDouble::ONE - DoubleDouble::from_f64(-mu).exp()).div_f64(mu);
    for s in 2..=ru {
        row[s] = positive_moment_dd(mu, s as u32 - 1).div_f64(mu);
    }
    for b in 2..=a {
        let mut next = vec![DoubleDouble::ONE; ru + 1];
        for s in 1..=ru {
            next[s] = (row[s - 1] - row[s].mul_f64((b - 1) as f64)).div_f64(mu);
        }
        row = next;
    }
    Ok(row[ru])
}

/// Double-double form of [`shifted_inverse_moment`].
pub fn shifted_inverse_moment_dd(mu: f64, a: u64, r: u32) -> Result<DoubleDouble> {
    check_positive_mean(mu)?;
    if r == 0 {
        return Err(domain("inverse moment order must be positive"));
    }
    if a == 0 {
        return Ok(positive_moment_dd(mu, r));
    }
    if mu <= a as f64 + 5.0 {
        let closed = shifted_closed_form_dd(mu, a, r)?;
        if closed.value.is_finite() && closed.condition <= MAX_CLOSED_FORM_CONDITION {
            return Ok(closed.value);
        }
    }
    Ok(shifted_poisson_moment_direct_dd(mu, a, r, DD_TOL)?.0)
}

/// `E[1/(Q+a)^r]` for `a >= 1`, and `E+[1/Q^r]` for `a = 0`.
///
/// Uses the Stirling-number closed form for `mu <= a + 5` when it is well
/// conditioned and direct summation otherwise.
pub fn shifted_inverse_moment(mu: f64, a: u64, r: u32) -> Result<f64> {
    Ok(shifted_inverse_moment_dd(mu, a, r)?.to_f64())
}

/// `q_{-r}(a) = E[1/(Q+a)^r]` for `a = 0..=a_max`, with `q_{-r}(0) = E+[1/Q^r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedMomentTable {
    mu: f64,
    r: u32,
    values: Vec<DoubleDouble>,
}

impl ShiftedMomentTable {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Largest shift `A` held by the table.
    pub fn a_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, a: usize) -> Option<f64> {
        self.values.get(a).map(|v| v.to_f64())
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }

    pub fn values_dd(&self) -> &[DoubleDouble] {
        &self.values
    }
}

pub fn build_q_table(mu: f64, r: u32, a_max: usize) -> Result<ShiftedMomentTable> {
    let values = (0..=a_max as u64)
        .map(|a| shifted_inverse_moment_dd(mu, a, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftedMomentTable { mu, r, values })
}

/// `nu_{-r,n} = ((-Delta)^n q_{-r})(0) = sum_a C(n,a) (-1)^a q_{-r}(a)`.
pub fn forward_difference_at_zero(table: &ShiftedMomentTable, n: usize) -> Result<f64> {
    Ok(forward_difference_at_zero_dd(table, n)?.to_f64())
}

pub fn forward_difference_at_zero_dd(table: &ShiftedMomentTable, n: usize) -> Result<DoubleDouble> {
    if n > table.a_max() {
        return Err(Error::Range(format!(
            "difference of order {n} needs shifts up to {n}, table stops at {}",
            table.a_max()
        )));
    }
    let mut choose = DoubleDouble::ONE;
    let mut sum = DoubleDouble::ZERO;
    for a in 0..=n {
        if a > 0 {
            choose = choose.mul_f64((n + 1 - a) as f64).div_f64(a as f64);
        }
        let term = choose * table.values[a];
        if a % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum)
}

/// `y_n = mu^n e^-mu Er(mu) + sum_{l=1}^n (l-1)! (e^-mu C(n,l) - 1) mu^(n-l)`.
pub fn y_sequence(mu: f64, n: usize) -> Result<f64> {
    Ok(y_sequence_dd(mu, n)?[n].to_f64())
}

/// `y_0, ..., y_{n_max}` in double-double precision.
pub fn y_sequence_dd(mu: f64, n_max: usize) -> Result<Vec<DoubleDouble>> {
    check_positive_mean(mu)?;
    let base = positive_moment_dd(mu, 1);
    let damping = DoubleDouble::from_f64(-mu).exp();
    let mut out = Vec::with_capacity(n_max + 1);
    let mut mu_n = DoubleDouble::ONE;
    for n in 0..=n_max {
        if n > 0 {
            mu_n = mu_n.mul_f64(mu);
        }
        let mut sum = mu_n * base;
        // l-th term: (l-1)! (e^-mu C(n,l) - 1) mu^(n-l)
        let mut factorial = DoubleDouble::ONE;
        let mut choose = DoubleDouble::ONE;
        for l in 1..=n {
            if l > 1 {
                factorial = factorial.mul_f64((l - 1) as f64);
            }
            choose = choose.mul_f64((n + 1 - l) as f64).div_f64(l as f64);
            let power = DoubleDouble::from_f64(mu).powi((n - l) as u32);
            sum += factorial * (damping * choose - DoubleDouble::ONE) * power;
        }
        out.push(sum);
    }
    Ok(out)
}

/// Grid on which a calibrated profile is validated: `mu = step, 2 step, ...`
/// up to `upper`, or up to twice the calibrated cross-over point when `upper`
/// is `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuGrid {
    pub step: f64,
    pub upper: Option<f64>,
}

impl Default for MuGrid {
    fn default() -> Self {
        Self {
            step: 0.05,
            upper: None,
        }
    }
}

impl MuGrid {
    fn points(&self, mu_star: f64) -> Vec<f64> {
        let upper = self.upper.unwrap_or(2.0 * mu_star);
        let count = (upper / self.step + 1e-9).floor() as usize;
        (1..=count).map(|k| k as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub profile: CrossoverProfile,
    /// Largest relative error of the profile over the validation grid.
    pub max_rel_error: f64,
    pub grid_points: usize,
}

const MAX_M1: usize = 2000;
const MAX_M2: usize = 160;
const MAX_MU: f64 = 5000.0;

/// Overflowed partial sums count as infinitely wrong.
fn rel_error(approx: DoubleDouble, exact: DoubleDouble) -> f64 {
    let err = (DoubleDouble::ONE - approx / exact).abs().to_f64();
    if err.is_nan() {
        f64::INFINITY
    } else {
        err
    }
}

struct Calibrator {
    r: u32,
    target: f64,
    coefficients: Vec<DoubleDouble>,
}

impl Calibrator {
    fn asymptotic_error(&self, mu: f64, m2: usize) -> f64 {
        let approx = asymptotic_series_dd(mu, self.r, &self.coefficients[..m2]);
        rel_error(approx, positive_moment_dd(mu, self.r))
    }

    fn ascending_error(&self, mu: f64, m1: usize) -> f64 {
        rel_error(
            ascending_series_dd(mu, self.r, m1),
            positive_moment_dd(mu, self.r),
        )
    }

    /// Lowest `mu` above which the `m2`-term asymptotic series meets the
    /// target, found by scanning down from a point where it does.
    fn lowest_valid_mu(&self, m2: usize) -> Option<f64> {
        const SCAN: f64 = 0.5;
        let mut hi = (4.0 * (self.r as f64 + m2 as f64)).max(60.0);
        while self.asymptotic_error(hi, m2) >= self.target {
            hi *= 2.0;
            if hi > MAX_MU {
                return None;
            }
        }
        while hi > SCAN && self.asymptotic_error(hi - SCAN, m2) < self.target {
            hi -= SCAN;
        }
        if hi <= SCAN {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (hi - SCAN, hi);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.asymptotic_error(mid, m2) >= self.target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    /// The point where the two truncation errors are equal.
    fn balance_point(&self, m1: usize, m2: usize, start: f64) -> f64 {
        let gap = |mu: f64| self.ascending_error(mu, m1) - self.asymptotic_error(mu, m2);
        let mut lo = start;
        let mut width = 0.5;
        let mut hi = lo + width;
        while gap(hi) < 0.0 && hi < MAX_MU {
            lo = hi;
            width *= 2.0;
            hi = lo + width;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn validate(&self, profile: &CrossoverProfile, grid: &MuGrid) -> (f64, usize) {
        let points = grid.points(profile.mu_star);
        let asymptotic = &self.coefficients[..profile.m2];
        let errors: Vec<f64> = points
            .par_iter()
            .map(|&mu| {
                let approx = if mu <= profile.mu_star {
                    ascending_series_dd(mu, self.r, profile.m1)
                } else {
                    asymptotic_series_dd(mu, self.r, asymptotic)
                };
                rel_error(approx, positive_moment_dd(mu, self.r))
            })
            .collect();
        let max = errors.iter().copied().fold(0.0, f64::max);
        (max, points.len())
    }
}

/// Chooses `M2` to minimise the lowest mean at which the asymptotic series
/// still meets `target_rel_error`, `M1` as the fewest ascending terms for
/// which the combined evaluator meets the target on `grid`, and `mu*` where
/// the two truncation errors balance.
pub fn calibrate_crossover(r: u32, target_rel_error: f64, grid: &MuGrid) -> Result<Calibration> {
    if r == 0 {
        return Err(domain("inverse moment order must be positive"));
    }
    if !(1e-14..=1e-2).contains(&target_rel_error) {
        return Err(domain(format!(
            "target relative error {target_rel_error:e} outside [1e-14, 1e-2]"
        )));
    }
    if !(grid.step > 0.0) || grid.upper.is_some_and(|u| !(u > grid.step)) {
        return Err(domain(
            "validation grid must have a positive step and extent",
        ));
    }

    let cal = Calibrator {
        r,
        target: target_rel_error,
        coefficients: asymptotic_coefficients_dd(r, MAX_M2),
    };
    let failure = |best_error: f64| Error::Calibration {
        r,
        target: target_rel_error,
        best_error,
    };

    let mut best: Option<(usize, f64)> = None;
    for m2 in 1..=MAX_M2 {
        let Some(mu_low) = cal.lowest_valid_mu(m2) else {
            continue;
        };
        match best {
            Some((_, b)) if mu_low >= b => {}
            _ => best = Some((m2, mu_low)),
        }
        let (best_m2, best_mu) = best.expect("just set");
        if m2 > best_m2 + 10 && mu_low > best_mu + 5.0 {
            break;
        }
    }
    let (m2, mu_low) = best.ok_or_else(|| failure(f64::INFINITY))?;

    // Fewest ascending terms that are good up to the last grid point below
    // the asymptotic regime.
    let g_lo = ((mu_low / grid.step).floor() * grid.step).max(grid.step);
    let exact = positive_moment_dd(g_lo, r);
    let mut power = DoubleDouble::ONE;
    let mut partial = DoubleDouble::ZERO;
    let damping = DoubleDouble::from_f64(-g_lo).exp();
    let mut m1 = 0;
    for k in 1..=MAX_M1 {
        power = power.mul_f64(g_lo).div_f64(k as f64);
        partial += power / DoubleDouble::from_f64(k as f64).powi(r);
        if rel_error(partial * damping, exact) < target_rel_error {
            m1 = k;
            break;
        }
    }
    if m1 == 0 {
        return Err(failure(rel_error(partial * damping, exact)));
    }

    let mut best_error = f64::INFINITY;
    for m1 in m1..=MAX_M1 {
        let mu_star = cal.balance_point(m1, m2, g_lo);
        let profile = CrossoverProfile {
            r,
            target_rel_error,
            mu_star,
            m1,
            m2,
        };
        let (max_rel_error, grid_points) = cal.validate(&profile, grid);
        if max_rel_error < target_rel_error {
            return Ok(Calibration {
                profile,
                max_rel_error,
                grid_points,
            });
        }
        if max_rel_error >= best_error {
            // More ascending terms no longer help: the asymptotic side fails.
            return Err(failure(best_error));
        }
        best_error = max_rel_error;
    }
    Err(failure(best_error))
}

/// Largest relative error of `profile` against direct summation on `grid`.
pub fn validate_profile(profile: &CrossoverProfile, grid: &MuGrid) -> Result<f64> {
    if profile.r == 0 || profile.m2 > MAX_M2 {
        return Err(domain("profile outside the supported range"));
    }
    let cal = Calibrator {
        r: profile.r,
        target: profile.target_rel_error,
        coefficients: asymptotic_coefficients_dd(profile.r, profile.m2),
    };
    Ok(cal.validate(profile, grid).0)
}
