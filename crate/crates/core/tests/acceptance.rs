//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;

use invmom::charlier_expansion::{
    barbour_polynomial, binomial_barbour_polynomial, charlier_inverse_moment, expand_pdf,
    first_inverse_moment_binomial, inverse_moment_estimate, pdf_support_bound, taylor_polynomial,
    CumulantSequence,
};
use invmom::cli::{run_sweep, ErrorKind, PGrid, SweepConfig, SweepMethod};
use invmom::competing::rempala;
use invmom::exact_oracle::{
    exact_inverse_moment, exact_inverse_moment_dd, poisson_inverse_moment_direct,
    shifted_poisson_moment_direct, DistributionSpec,
};
use invmom::poisson_moments::{
    build_q_table, calibrate_crossover, er_function, shifted_by_recurrence_dd,
    shifted_closed_form_dd, validate_profile, MuGrid,
};
use invmom::special_numbers::alpha;
use invmom::DoubleDouble;

const ALPHA_TIME_LIMIT: Duration = Duration::from_secs(1);
const CALIBRATION_TIME_LIMIT: Duration = Duration::from_secs(60);
const MU_STAR_TOLERANCE: f64 = 0.5;
const REMPALA_CONVERGED: f64 = 1e-6;
const TWO_PATH_TOLERANCE: f64 = 1e-9;
const FIXED_POINT_TOLERANCE: f64 = 1e-12;
const SHIFTED_TOLERANCE: f64 = 1e-8;
const MASS_TOLERANCE: f64 = 1e-10;
const ORACLE_TOLERANCE: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: summary,
        }
    } else {
        let shown: Vec<_> = failures.iter().take(6).cloned().collect();
        let more = failures.len().saturating_sub(shown.len());
        let mut detail = shown.join("; ");
        if more > 0 {
            detail.push_str(&format!("; and {more} more"));
        }
        Outcome {
            pass: false,
            detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (1.0 - a / b).abs()
}

// (l, j, numerator, denominator) for j + l <= 7.
#[rustfmt::skip]
const TABLE_ONE: [(usize, usize, i64, i64); 36] = [
    (0, 0, 1, 1), (0, 1, 1, 2), (0, 2, 1, 4), (0, 3, 1, 8), (0, 4, 1, 16), (0, 5, 1, 32),
    (0, 6, 1, 64), (0, 7, 1, 128),
    (1, 0, 0, 1), (1, 1, 1, 3), (1, 2, 1, 3), (1, 3, 1, 4), (1, 4, 1, 6), (1, 5, 5, 48),
    (1, 6, 1, 16),
    (2, 0, 0, 1), (2, 1, 1, 4), (2, 2, 13, 36), (2, 3, 17, 48), (2, 4, 7, 24), (2, 5, 125, 576),
    (3, 0, 0, 1), (3, 1, 1, 5), (3, 2, 11, 30), (3, 3, 59, 135), (3, 4, 229, 540),
    (4, 0, 0, 1), (4, 1, 1, 6), (4, 2, 29, 80), (4, 3, 241, 480),
    (5, 0, 0, 1), (5, 1, 1, 7), (5, 2, 223, 630),
    (6, 0, 0, 1), (6, 1, 1, 8),
    (7, 0, 0, 1),
];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for &(l, j, num, den) in &TABLE_ONE {
        let expected = BigRational::new(BigInt::from(num), BigInt::from(den));
        let got = alpha(l, j);
        if got != expected {
            failures.push(format!("alpha({l},{j}) = {got}, expected {expected}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= ALPHA_TIME_LIMIT {
        failures.push(format!("took {elapsed:?}"));
    }
    let nonzero = TABLE_ONE.iter().filter(|e| e.2 != 0).count();
    outcome(
        failures,
        format!(
            "{} entries ({nonzero} non-zero) exact in {elapsed:?}",
            TABLE_ONE.len()
        ),
    )
}

// (r, mu*, M1, M2) at 1e-5 and 1e-10.
const TABLE_TWO: [(u32, f64, usize, usize); 6] = [
    (1, 13.671, 31, 10),
    (2, 17.061, 35, 15),
    (3, 20.544, 39, 20),
    (4, 24.775, 44, 26),
    (5, 28.966, 49, 32),
    (6, 32.969, 53, 38),
];
const TABLE_THREE: [(u32, f64, usize, usize); 6] = [
    (1, 25.734, 63, 20),
    (2, 29.206, 67, 26),
    (3, 33.998, 74, 33),
    (4, 37.903, 79, 39),
    (5, 42.573, 85, 46),
    (6, 47.068, 90, 53),
];

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let grid = MuGrid::default();
    let mut failures = Vec::new();
    for (target, table) in [(1e-5, &TABLE_TWO), (1e-10, &TABLE_THREE)] {
        for &(r, mu_star, m1, m2) in table.iter() {
            let cal = match calibrate_crossover(r, target, &grid) {
                Ok(cal) => cal,
                Err(e) => {
                    failures.push(format!("r={r} target={target:e}: {e}"));
                    continue;
                }
            };
            let p = cal.profile;
            if p.m1 != m1 || p.m2 != m2 || (p.mu_star - mu_star).abs() > MU_STAR_TOLERANCE {
                failures.push(format!(
                    "r={r} target={target:e}: got mu*={:.3} M1={} M2={}, expected mu*={mu_star} M1={m1} M2={m2}",
                    p.mu_star, p.m1, p.m2
                ));
            }
            match validate_profile(&p, &grid) {
                Ok(err) if err < target => {}
                Ok(err) => {
                    failures.push(format!("r={r} target={target:e}: validated error {err:e}"))
                }
                Err(e) => failures.push(format!("r={r} target={target:e}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= CALIBRATION_TIME_LIMIT {
        failures.push(format!("took {elapsed:?}"));
    }
    outcome(
        failures,
        format!("12 profiles reproduced and validated in {elapsed:?}"),
    )
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for n in [10u64, 100] {
        for m in 1..=4usize {
            for p in [0.01, 0.05, 0.1, 0.2, 0.25] {
                let exact =
                    exact_inverse_moment(&DistributionSpec::binomial(n, p).unwrap(), 1).unwrap();
                let approx = charlier_inverse_moment(n, p, 1, m).unwrap();
                let bound = 2f64.powi(2 * m as i32 - 1)
                    * (1.0 - (-(n as f64) * p).exp())
                    * p.powi(m as i32);
                let err = (approx - exact).abs();
                worst = worst.max(err / bound);
                if !(err <= bound) {
                    failures.push(format!(
                        "N={n} m={m} p={p}: error {err:e} > bound {bound:e}"
                    ));
                }
            }
        }
    }
    outcome(
        failures,
        format!("40 cases, largest error/bound ratio {worst:.3e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for n in [10u64, 100] {
        let config = SweepConfig {
            n,
            r: 1,
            orders: (1..=6).collect(),
            terms: Vec::new(),
            methods: vec![SweepMethod::Charlier],
            grid: PGrid::default(),
            error_kind: ErrorKind::Abs,
        };
        let report = match run_sweep(&config) {
            Ok(report) => report,
            Err(e) => {
                failures.push(format!("N={n}: {e}"));
                continue;
            }
        };
        let maxima: Vec<f64> = (0..6).map(|c| report.max_abs_error(c)).collect();
        for m in 1..6 {
            if !(maxima[m] < maxima[m - 1]) {
                failures.push(format!(
                    "N={n}: max error m={} is {:e}, m={} is {:e}",
                    m + 1,
                    maxima[m],
                    m,
                    maxima[m - 1]
                ));
            }
        }
        let order_six_finite = report
            .rows
            .iter()
            .all(|row| row.values[5].is_finite() && row.exact.is_finite());
        let last = report.rows.last().expect("non-empty grid");
        if !order_six_finite || last.p != 1.0 {
            failures.push(format!(
                "N={n}: order-6 values not finite over the grid up to p = 1"
            ));
        }
        summary.push(format!(
            "N={n} maxima {:.2e} .. {:.2e}",
            maxima[0], maxima[5]
        ));
    }
    outcome(failures, summary.join(", "))
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let exact =
        |p: f64| exact_inverse_moment_dd(&DistributionSpec::binomial(100, p).unwrap(), 1).unwrap();
    let at_60 = rempala(100, 0.6, 100).unwrap();
    let rel_60 = rel(at_60.value, exact(0.6).to_f64());
    if !(rel_60 < REMPALA_CONVERGED) {
        failures.push(format!("p=0.60: relative error {rel_60:e}"));
    }
    // At p = 1/2 the excess over 1 is about 4e-28, so the ratio is formed in
    // double-double.
    let at_50 = rempala(100, 0.5, 100).unwrap();
    let rel_50 = (DoubleDouble::ONE - at_50.value_dd / exact(0.5)).abs();
    let excess = rel_50 - DoubleDouble::ONE;
    if !(excess.hi > 0.0) {
        failures.push(format!("p=0.50: relative error 1 + {:e}", excess.hi));
    }
    outcome(
        failures,
        format!("p=0.60 rel {rel_60:.2e}, p=0.50 rel 1 + {:.2e}", excess.hi),
    )
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for n in [10u64, 100] {
        for m in 1..=6 {
            for p in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
                let closed = first_inverse_moment_binomial(n, p, m).unwrap();
                let poly = charlier_inverse_moment(n, p, 1, m).unwrap();
                let d = rel(poly, closed);
                worst = worst.max(d);
                if !(d < TWO_PATH_TOLERANCE) {
                    failures.push(format!("N={n} m={m} p={p}: {closed} vs {poly}"));
                }
            }
        }
    }
    outcome(
        failures,
        format!("72 cases, largest relative gap {worst:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for mu in [0.5, 5.0, 20.0] {
        let cumulants = CumulantSequence::<f64>::poisson(mu, 8);
        for r in 1..=3u32 {
            let exact = poisson_inverse_moment_direct(mu, r, 1e-300).unwrap().value;
            for m in 1..=6 {
                for (name, poly) in [
                    ("barbour", barbour_polynomial(&cumulants, m).unwrap()),
                    ("taylor", taylor_polynomial(&cumulants, m).unwrap()),
                ] {
                    let table = build_q_table(mu, r, poly.degree()).unwrap();
                    let estimate = inverse_moment_estimate(&poly, &table).unwrap();
                    let d = rel(estimate, exact);
                    worst = worst.max(d);
                    if !(d < FIXED_POINT_TOLERANCE) {
                        failures.push(format!("{name} mu={mu} r={r} m={m}: {estimate} vs {exact}"));
                    }
                }
            }
        }
    }
    outcome(
        failures,
        format!("108 cases, largest relative gap {worst:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for mu in [0.5, 2.0, 5.0] {
        for a in 1..=6u64 {
            for r in 1..=4u32 {
                let closed = shifted_closed_form_dd(mu, a, r).unwrap().value.to_f64();
                let recurrence = shifted_by_recurrence_dd(mu, a, r).unwrap().to_f64();
                let direct = shifted_poisson_moment_direct(mu, a, r, 1e-300)
                    .unwrap()
                    .value;
                let d = rel(closed, direct)
                    .max(rel(recurrence, direct))
                    .max(rel(closed, recurrence));
                worst = worst.max(d);
                if !(d < SHIFTED_TOLERANCE) {
                    failures.push(format!(
                        "mu={mu} a={a} r={r}: closed {closed}, recurrence {recurrence}, direct {direct}"
                    ));
                }
            }
        }
    }
    outcome(
        failures,
        format!("72 cases, largest relative gap {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for n in [10u64, 100] {
        for m in 1..=6 {
            for k in 1..=9 {
                let p = k as f64 / 10.0;
                let mu = n as f64 * p;
                let poly = binomial_barbour_polynomial(n, mu, m).unwrap();
                let pdf = expand_pdf(&poly, mu, pdf_support_bound(mu) + 2 * m).unwrap();
                let mass: f64 = pdf.iter().sum();
                worst = worst.max((mass - 1.0).abs());
                if !((mass - 1.0).abs() <= MASS_TOLERANCE) {
                    failures.push(format!("N={n} m={m} p={p}: mass {mass}"));
                }
            }
        }
    }
    outcome(
        failures,
        format!("108 polynomials, largest mass defect {worst:.2e}"),
    )
}

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();
    let spec = DistributionSpec::binomial(2, 0.5).unwrap();
    let v = exact_inverse_moment(&spec, 1).unwrap();
    if v != 0.625 {
        failures.push(format!("Bin(2, 1/2) inverse moment {v}"));
    }
    let shifted = shifted_poisson_moment_direct(1.0, 1, 1, 1e-300)
        .unwrap()
        .value;
    let expected = 1.0 - (-1f64).exp();
    if !((shifted - expected).abs() < ORACLE_TOLERANCE) {
        failures.push(format!("E[1/(Q+1)] at mu=1: {shifted} vs {expected}"));
    }
    let mut series = 0.0;
    let mut factorial = 1.0;
    for i in 1..40 {
        factorial *= i as f64;
        series += 1.0 / (i as f64 * factorial);
    }
    let er = er_function(1.0);
    if !((er - series).abs() < ORACLE_TOLERANCE) {
        failures.push(format!("Er(1) = {er}, series {series}"));
    }
    outcome(
        failures,
        "binomial, shifted Poisson and Er(1) checks agree".into(),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("alpha table", criterion_1),
        ("cross-over profiles", criterion_2),
        ("Barbour error bound", criterion_3),
        ("error decreasing in order", criterion_4),
        ("Rempala divergence", criterion_5),
        ("two-path identity", criterion_6),
        ("Poisson fixed point", criterion_7),
        ("shifted moment consistency", criterion_8),
        ("mass conservation", criterion_9),
        ("oracle cross-checks", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!("criterion {:>2} {status}: {name}: {}", i + 1, result.detail);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
