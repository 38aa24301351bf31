//! Error sweeps, calibration reports and table emitters behind the `invmom`
//! binary.
//!
//! Every command renders to a `String` so that output can be compared
//! byte for byte; the binary only prints it and maps errors to exit codes.
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64`.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::charlier_expansion::{barbour_error_bound, charlier_inverse_moment, MAX_ORDER};
use crate::competing::Method;
use crate::error::Error;
use crate::exact_oracle::{exact_inverse_moment, poisson_inverse_moment_direct, DistributionSpec};
use crate::poisson_moments::{
    calibrate_crossover, positive_poisson_inverse_moment, Calibration, CrossoverProfile, MuGrid,
};
use crate::special_numbers::alpha;

/// Failure of a command, carrying the process exit status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for usage and parse errors, 2 for domain errors, 3 when calibration
    /// fails, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(Error::Calibration { .. }) => 3,
            CliError::Lib(_) => 2,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Approximation method of a sweep column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepMethod {
    Charlier,
    Stephan,
    Rempala,
    Znidaric,
}

impl SweepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Charlier => "charlier",
            SweepMethod::Stephan => "stephan",
            SweepMethod::Rempala => "rempala",
            SweepMethod::Znidaric => "znidaric",
        }
    }

    fn competitor(self) -> Option<Method> {
        match self {
            SweepMethod::Charlier => None,
            SweepMethod::Stephan => Some(Method::Stephan),
            SweepMethod::Rempala => Some(Method::Rempala),
            SweepMethod::Znidaric => Some(Method::Znidaric),
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMethod {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "charlier" => Ok(SweepMethod::Charlier),
            "stephan" => Ok(SweepMethod::Stephan),
            "rempala" => Ok(SweepMethod::Rempala),
            "znidaric" => Ok(SweepMethod::Znidaric),
            other => Err(usage(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ErrorKind {
    Abs,
    Rel,
    #[default]
    Both,
}

impl ErrorKind {
    fn abs(self) -> bool {
        matches!(self, ErrorKind::Abs | ErrorKind::Both)
    }

    fn rel(self) -> bool {
        matches!(self, ErrorKind::Rel | ErrorKind::Both)
    }
}

impl FromStr for ErrorKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abs" => Ok(ErrorKind::Abs),
            "rel" => Ok(ErrorKind::Rel),
            "both" => Ok(ErrorKind::Both),
            other => Err(usage(format!("unknown error kind '{other}'"))),
        }
    }
}

/// `count` equally spaced points from `lo` to `hi`, both included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PGrid {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for PGrid {
    /// `p = k/500` for `k = 1..=500`.
    fn default() -> Self {
        Self {
            count: 500,
            lo: 0.002,
            hi: 1.0,
        }
    }
}

impl PGrid {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi <= 1.0) {
            return Err(Error::Domain(format!(
                "p grid needs 0 < lo < hi <= 1, got lo = {}, hi = {}",
                self.lo, self.hi
            ))
            .into());
        }
        if self.count < 2 {
            return Err(Error::Domain("p grid needs at least two points".into()).into());
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let steps = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * k as f64 / steps
                }
            })
            .collect()
    }
}

impl FromStr for PGrid {
    type Err = CliError;

    /// `lo:hi:count`.
    fn from_str(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(usage(format!("grid '{s}' is not of the form lo:hi:count")));
        };
        let bad = |what: &str| usage(format!("grid '{s}': cannot parse {what}"));
        Ok(PGrid {
            lo: lo.trim().parse().map_err(|_| bad("lo"))?,
            hi: hi.trim().parse().map_err(|_| bad("hi"))?,
            count: count.trim().parse().map_err(|_| bad("count"))?,
        })
    }
}

/// Parses `1,3,5` or inclusive ranges `1-6`, or a mix of both.
pub fn parse_index_list(s: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("cannot parse list '{s}'"));
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match item.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// One value column of a sweep: a method with its order or term count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepColumn {
    pub method: SweepMethod,
    /// Expansion order `m` for Charlier, number of terms `M` otherwise.
    pub param: usize,
}

impl SweepColumn {
    pub fn label(&self) -> String {
        format!("{}_m{}", self.method, self.param)
    }

    fn parse_label(label: &str) -> Option<Self> {
        let (method, param) = label.rsplit_once("_m")?;
        Some(Self {
            method: method.parse().ok()?,
            param: param.parse().ok()?,
        })
    }

    fn evaluate(&self, n: u64, p: f64, r: u32) -> crate::Result<f64> {
        match self.method.competitor() {
            None => charlier_inverse_moment(n, p, r, self.param),
            Some(method) => method.evaluate(n, p, self.param).map(|c| c.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub n: u64,
    pub r: u32,
    /// Charlier orders.
    pub orders: Vec<usize>,
    /// Term counts for the competing expansions.
    pub terms: Vec<usize>,
    pub methods: Vec<SweepMethod>,
    pub grid: PGrid,
    pub error_kind: ErrorKind,
}

impl SweepConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(Error::Domain("N must be positive".into()).into());
        }
        if self.r == 0 {
            return Err(Error::Domain("r must be positive".into()).into());
        }
        if self.methods.is_empty() {
            return Err(usage("no methods selected"));
        }
        self.grid.validate()?;
        let competitors = self.methods.iter().any(|m| m.competitor().is_some());
        if self.methods.contains(&SweepMethod::Charlier) {
            if self.orders.is_empty() {
                return Err(usage("charlier needs at least one order"));
            }
            if let Some(&m) = self.orders.iter().find(|&&m| m == 0 || m > MAX_ORDER) {
                return Err(Error::Domain(format!("order {m} outside 1..={MAX_ORDER}")).into());
            }
        }
        if competitors {
            if self.r != 1 {
                return Err(Error::Domain(
                    "stephan, rempala and znidaric only approximate r = 1".into(),
                )
                .into());
            }
            if self.terms.is_empty() {
                return Err(usage("competing methods need --terms"));
            }
            if self.terms.contains(&0) {
                return Err(Error::Domain("term counts must be positive".into()).into());
            }
        }
        if self.methods.contains(&SweepMethod::Rempala) {
            if let Some(&m) = self.terms.iter().find(|&&m| m as u64 > self.n) {
                return Err(Error::Domain(format!("rempala needs M <= N, got M = {m}")).into());
            }
        }
        Ok(())
    }

    /// Value columns in output order: methods as given, then orders or terms.
    pub fn columns(&self) -> Vec<SweepColumn> {
        let mut columns = Vec::new();
        for &method in &self.methods {
            let params = if method == SweepMethod::Charlier {
                &self.orders
            } else {
                &self.terms
            };
            columns.extend(params.iter().map(|&param| SweepColumn { method, param }));
        }
        columns
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub exact: f64,
    pub values: Vec<f64>,
}

impl SweepRow {
    pub fn abs_errors(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.exact).abs()).collect()
    }

    pub fn rel_errors(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| (1.0 - v / self.exact).abs())
            .collect()
    }
}

/// Values of every column at every grid point; errors are derived on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSweepReport {
    pub columns: Vec<SweepColumn>,
    pub error_kind: ErrorKind,
    pub rows: Vec<SweepRow>,
}

impl ErrorSweepReport {
    pub fn header(&self) -> Vec<String> {
        let labels: Vec<String> = self.columns.iter().map(SweepColumn::label).collect();
        let mut header = vec!["p".to_string(), "exact".to_string()];
        header.extend(labels.iter().cloned());
        if self.error_kind.abs() {
            header.extend(labels.iter().map(|l| format!("abs_{l}")));
        }
        if self.error_kind.rel() {
            header.extend(labels.iter().map(|l| format!("rel_{l}")));
        }
        header
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer
            .write_record(self.header())
            .expect("writing to memory");
        for row in &self.rows {
            let mut fields = vec![fmt_num(row.p), fmt_num(row.exact)];
            fields.extend(row.values.iter().copied().map(fmt_num));
            if self.error_kind.abs() {
                fields.extend(row.abs_errors().into_iter().map(fmt_num));
            }
            if self.error_kind.rel() {
                fields.extend(row.rel_errors().into_iter().map(fmt_num));
            }
            writer.write_record(&fields).expect("writing to memory");
        }
        let bytes = writer.into_inner().expect("flushing to memory");
        String::from_utf8(bytes).expect("ascii output")
    }

    /// Parses a file written by [`Self::to_csv`], rejecting it unless every
    /// stored error equals the one recomputed from the value columns.
    pub fn from_csv(text: &str) -> CliResult<Self> {
        let bad = |msg: String| usage(format!("malformed sweep csv: {msg}"));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header_record = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let header: Vec<&str> = header_record.iter().collect();
        if header.len() < 3 || header[0] != "p" || header[1] != "exact" {
            return Err(bad("header must start with p,exact".into()));
        }
        let mut columns = Vec::new();
        let mut idx = 2;
        while idx < header.len()
            && !header[idx].starts_with("abs_")
            && !header[idx].starts_with("rel_")
        {
            let column = SweepColumn::parse_label(header[idx])
                .ok_or_else(|| bad(format!("unknown column '{}'", header[idx])))?;
            columns.push(column);
            idx += 1;
        }
        let k = columns.len();
        let error_kind = match header.len() - 2 - k {
            n if n == 2 * k => ErrorKind::Both,
            n if n == k && header[idx].starts_with("abs_") => ErrorKind::Abs,
            n if n == k => ErrorKind::Rel,
            _ => return Err(bad("error columns do not match value columns".into())),
        };
        let report_shell = ErrorSweepReport {
            columns,
            error_kind,
            rows: Vec::new(),
        };
        if report_shell.header() != header {
            return Err(bad("header is not in canonical order".into()));
        }

        let mut rows = Vec::new();
        for (lineno, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let fields: Vec<f64> = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("row {}: {e}", lineno + 1)))?;
            if fields.len() != header.len() {
                return Err(bad(format!(
                    "row {} has {} fields",
                    lineno + 1,
                    fields.len()
                )));
            }
            let row = SweepRow {
                p: fields[0],
                exact: fields[1],
                values: fields[2..2 + k].to_vec(),
            };
            let mut stored = &fields[2 + k..];
            let mut check = |recomputed: Vec<f64>, what: &str| -> CliResult<()> {
                let (head, rest) = stored.split_at(k);
                stored = rest;
                if head
                    .iter()
                    .zip(&recomputed)
                    .any(|(a, b)| a.to_bits() != b.to_bits())
                {
                    return Err(bad(format!(
                        "row {}: {what} errors inconsistent",
                        lineno + 1
                    )));
                }
                Ok(())
            };
            if error_kind.abs() {
                check(row.abs_errors(), "abs")?;
            }
            if error_kind.rel() {
                check(row.rel_errors(), "rel")?;
            }
            rows.push(row);
        }
        Ok(ErrorSweepReport {
            rows,
            ..report_shell
        })
    }

    /// Largest absolute error of column `c` over the grid.
    pub fn max_abs_error(&self, c: usize) -> f64 {
        self.rows
            .iter()
            .map(|row| (row.values[c] - row.exact).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates every column at every grid point. Rows are computed in
/// parallel and returned in ascending `p`.
pub fn run_sweep(config: &SweepConfig) -> CliResult<ErrorSweepReport> {
    config.validate()?;
    let columns = config.columns();
    let rows = config
        .grid
        .points()
        .into_par_iter()
        .map(|p| -> crate::Result<SweepRow> {
            let exact = exact_inverse_moment(&DistributionSpec::binomial(config.n, p)?, config.r)?;
            let values = columns
                .iter()
                .map(|c| c.evaluate(config.n, p, config.r))
                .collect::<crate::Result<_>>()?;
            Ok(SweepRow { p, exact, values })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(ErrorSweepReport {
        columns,
        error_kind: config.error_kind,
        rows,
    })
}

/// Runs the sweep and writes its CSV to `out`.
pub fn cmd_sweep(config: &SweepConfig, out: &Path) -> CliResult<ErrorSweepReport> {
    let report = run_sweep(config)?;
    std::fs::write(out, report.to_csv()).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    Ok(report)
}

/// Exact value, order-`m` estimate and its errors for `Bin(N, p)`.
pub fn cmd_compute(n: u64, p: f64, r: u32, m: usize) -> CliResult<String> {
    let spec = DistributionSpec::binomial(n, p)?;
    let exact = exact_inverse_moment(&spec, r)?;
    let approx = charlier_inverse_moment(n, p, r, m)?;
    let mut out = String::new();
    let _ = writeln!(out, "N = {n}");
    let _ = writeln!(out, "p = {}", fmt_num(p));
    let _ = writeln!(out, "r = {r}");
    let _ = writeln!(out, "m = {m}");
    let _ = writeln!(out, "exact = {}", fmt_num(exact));
    let _ = writeln!(out, "approx = {}", fmt_num(approx));
    if p < 0.25 {
        let _ = writeln!(out, "bound = {}", fmt_num(barbour_error_bound(n, p, m)?));
    }
    let _ = writeln!(out, "abs_error = {}", fmt_num((approx - exact).abs()));
    let _ = writeln!(out, "rel_error = {}", fmt_num((1.0 - approx / exact).abs()));
    Ok(out)
}

pub fn render_calibration(cal: &Calibration) -> String {
    let p = &cal.profile;
    let mut out = String::new();
    let _ = writeln!(out, "r = {}", p.r);
    let _ = writeln!(out, "target = {:e}", p.target_rel_error);
    let _ = writeln!(out, "mu_star = {:.3}", p.mu_star);
    let _ = writeln!(out, "M1 = {}", p.m1);
    let _ = writeln!(out, "M2 = {}", p.m2);
    let _ = writeln!(out, "max_rel_error = {:e}", cal.max_rel_error);
    let _ = writeln!(out, "grid_points = {}", cal.grid_points);
    out
}

/// Calibrates the cross-over profile for `f_r` and summarises the
/// validation sweep over `(0, 2 mu*]`.
pub fn cmd_calibrate(r: u32, target: f64) -> CliResult<String> {
    let cal = calibrate_crossover(r, target, &MuGrid::default())?;
    Ok(render_calibration(&cal))
}

/// `alpha_{l,j}` for `j + l <= max` as exact fractions, rows indexed by `l`
/// and columns by `j`.
pub fn cmd_alpha_table(max: usize) -> CliResult<String> {
    if max == 0 {
        return Err(Error::Domain("alpha table needs max >= 1".into()).into());
    }
    let cells: Vec<Vec<String>> = (0..=max)
        .map(|l| {
            (0..=max)
                .map(|j| {
                    if j + l <= max {
                        alpha(l, j).to_string()
                    } else {
                        String::new()
                    }
                })
                .collect()
        })
        .collect();
    let width = cells
        .iter()
        .flatten()
        .map(String::len)
        .chain([3])
        .max()
        .unwrap_or(3);
    let mut out = String::new();
    let _ = write!(out, "{:<4}|", "l\\j");
    for j in 0..=max {
        let _ = write!(out, " {j:>width$}");
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{}+{}",
        "-".repeat(4),
        "-".repeat((width + 1) * (max + 1))
    );
    for (l, row) in cells.iter().enumerate() {
        let _ = write!(out, "{l:<4}|");
        for cell in row {
            let _ = write!(out, " {cell:>width$}");
        }
        let trimmed = out.trim_end_matches(' ').len();
        out.truncate(trimmed);
        out.push('\n');
    }
    Ok(out)
}

/// The reference `1e-10` profile when there is one, a fresh calibration
/// otherwise.
fn profile_for(r: u32) -> CliResult<CrossoverProfile> {
    match CrossoverProfile::reference(r, 1e-10) {
        Some(profile) => Ok(profile),
        None => Ok(calibrate_crossover(r, 1e-10, &MuGrid::default())?.profile),
    }
}

/// CSV of `mu, f_r(mu), f_r(mu)/mu, e^-mu`.
pub fn cmd_poisson_table(r: u32, mu_list: &[f64]) -> CliResult<String> {
    if let Some(mu) = mu_list.iter().find(|&&mu| !(mu > 0.0 && mu.is_finite())) {
        return Err(Error::Domain(format!("mean {mu} must be positive and finite")).into());
    }
    let profile = profile_for(r)?;
    let mut out = String::from("mu,f_r,f_r_over_mu,exp_neg_mu\n");
    for &mu in mu_list {
        let f = positive_poisson_inverse_moment(mu, r, &profile)?;
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(mu),
            fmt_num(f),
            fmt_num(f / mu),
            fmt_num((-mu).exp())
        );
    }
    Ok(out)
}

/// `f_r(mu)` by the dual-regime evaluator next to direct summation.
pub fn cmd_poisson_inverse(mu: f64, r: u32) -> CliResult<String> {
    let profile = profile_for(r)?;
    let value = positive_poisson_inverse_moment(mu, r, &profile)?;
    let direct = poisson_inverse_moment_direct(mu, r, 1e-300)?.value;
    let mut out = String::new();
    let _ = writeln!(out, "mu = {}", fmt_num(mu));
    let _ = writeln!(out, "r = {r}");
    let _ = writeln!(
        out,
        "profile = mu_star {:.3}, M1 {}, M2 {}",
        profile.mu_star, profile.m1, profile.m2
    );
    let _ = writeln!(out, "f_r = {}", fmt_num(value));
    let _ = writeln!(out, "direct = {}", fmt_num(direct));
    let _ = writeln!(out, "rel_error = {}", fmt_num((1.0 - value / direct).abs()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson_moments::er_function;

    fn field(out: &str, key: &str) -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("no {key} in {out}"))
            .parse()
            .unwrap()
    }

    #[test]
    fn default_grid_is_k_over_500() {
        let points = PGrid::default().points();
        assert_eq!(points.len(), 500);
        for (k, p) in points.iter().enumerate() {
            assert!((p - (k + 1) as f64 / 500.0).abs() < 1e-15);
        }
        assert_eq!(points[499], 1.0);
    }

    #[test]
    fn grid_validation() {
        assert!("0:1:10".parse::<PGrid>().unwrap().validate().is_err());
        assert!("0.5:0.4:10".parse::<PGrid>().unwrap().validate().is_err());
        assert!("0.1:1.1:10".parse::<PGrid>().unwrap().validate().is_err());
        assert!("0.1:0.9:1".parse::<PGrid>().unwrap().validate().is_err());
        assert!("0.1:0.9".parse::<PGrid>().is_err());
        assert!("0.1:0.9:10".parse::<PGrid>().unwrap().validate().is_ok());
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("1-3,5").unwrap(), vec![1, 2, 3, 5]);
        assert_eq!(parse_index_list("7").unwrap(), vec![7]);
        assert!(parse_index_list("3-1").is_err());
        assert!(parse_index_list("").is_err());
    }

    #[test]
    fn compute_leading_term_is_er() {
        let out = cmd_compute(10, 0.5, 1, 1).unwrap();
        let expected = (-5f64).exp() * er_function(5.0);
        assert!((field(&out, "approx") / expected - 1.0).abs() < 1e-14);
        assert!(!out.contains("bound"));
    }

    #[test]
    fn compute_at_p_one() {
        let out = cmd_compute(10, 1.0, 1, 6).unwrap();
        assert!((field(&out, "exact") - 0.1).abs() < 1e-15);
    }

    #[test]
    fn compute_higher_order_is_better() {
        let low = field(&cmd_compute(10, 0.5, 1, 1).unwrap(), "abs_error");
        let high = field(&cmd_compute(10, 0.5, 1, 6).unwrap(), "abs_error");
        assert!(high < low);
    }

    #[test]
    fn compute_prints_bound_for_small_p() {
        let out = cmd_compute(100, 0.05, 1, 2).unwrap();
        assert!(field(&out, "abs_error") <= field(&out, "bound"));
    }

    #[test]
    fn alpha_table_entries() {
        let out = cmd_alpha_table(7).unwrap();
        let rows: Vec<Vec<&str>> = out
            .lines()
            .skip(2)
            .map(|l| l.split('|').nth(1).unwrap().split_whitespace().collect())
            .collect();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[5][2], "223/630");
        assert_eq!(rows[7], vec!["0"]);
        assert_eq!(rows[0][7], "1/128");
        assert_eq!(rows[3][3], "59/135");
        for (l, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), 8 - l);
        }
    }

    #[test]
    fn alpha_table_rejects_zero() {
        assert_eq!(cmd_alpha_table(0).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn calibrate_loose_target() {
        let out = cmd_calibrate(1, 1e-2).unwrap();
        assert!(field(&out, "max_rel_error") < 1e-2);
    }

    #[test]
    fn calibrate_rejects_bad_target() {
        assert_eq!(cmd_calibrate(1, 0.5).unwrap_err().exit_code(), 2);
    }

    fn table_rows(out: &str) -> Vec<Vec<f64>> {
        out.lines()
            .skip(1)
            .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
            .collect()
    }

    #[test]
    fn poisson_table_limits() {
        let small = table_rows(&cmd_poisson_table(3, &[1e-4]).unwrap());
        assert!((small[0][2] / small[0][3] - 1.0).abs() < 1e-3);
        let large = table_rows(&cmd_poisson_table(2, &[2000.0]).unwrap());
        assert!((large[0][1] * 2000f64.powi(2) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn poisson_table_decreasing_in_r() {
        let mus = [0.5, 3.0, 15.0, 40.0];
        let tables: Vec<_> = (1..=4)
            .map(|r| table_rows(&cmd_poisson_table(r, &mus).unwrap()))
            .collect();
        for r in 1..4 {
            for i in 0..mus.len() {
                assert!(tables[r][i][1] < tables[r - 1][i][1]);
            }
        }
    }

    #[test]
    fn poisson_inverse_agrees_with_direct() {
        let out = cmd_poisson_inverse(12.5, 2).unwrap();
        assert!(field(&out, "rel_error") < 1e-10);
    }

    fn small_config(methods: Vec<SweepMethod>) -> SweepConfig {
        SweepConfig {
            n: 10,
            r: 1,
            orders: vec![1, 2, 3],
            terms: vec![5, 10],
            methods,
            grid: PGrid {
                count: 21,
                lo: 0.05,
                hi: 1.0,
            },
            error_kind: ErrorKind::Both,
        }
    }

    #[test]
    fn sweep_header_and_order() {
        let report = run_sweep(&small_config(vec![
            SweepMethod::Charlier,
            SweepMethod::Rempala,
        ]))
        .unwrap();
        let header = report.header().join(",");
        assert!(header.starts_with(
            "p,exact,charlier_m1,charlier_m2,charlier_m3,rempala_m5,rempala_m10,abs_charlier_m1"
        ));
        assert!(header.ends_with("rel_rempala_m10"));
        assert!(report.rows.windows(2).all(|w| w[0].p < w[1].p));
    }

    #[test]
    fn sweep_exact_column_matches_oracle() {
        let report = run_sweep(&small_config(vec![SweepMethod::Charlier])).unwrap();
        for row in &report.rows {
            let exact =
                exact_inverse_moment(&DistributionSpec::binomial(10, row.p).unwrap(), 1).unwrap();
            assert_eq!(row.exact, exact);
        }
    }

    #[test]
    fn csv_round_trip() {
        for kind in [ErrorKind::Abs, ErrorKind::Rel, ErrorKind::Both] {
            let mut config = small_config(vec![SweepMethod::Charlier, SweepMethod::Stephan]);
            config.error_kind = kind;
            let report = run_sweep(&config).unwrap();
            let text = report.to_csv();
            let parsed = ErrorSweepReport::from_csv(&text).unwrap();
            assert_eq!(parsed, report);
            assert_eq!(parsed.to_csv(), text);
        }
    }

    #[test]
    fn csv_rejects_tampered_errors() {
        let report = run_sweep(&small_config(vec![SweepMethod::Charlier])).unwrap();
        let text = report.to_csv();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[3].split(',').map(String::from).collect();
        let last = fields.len() - 1;
        fields[last] = fmt_num(fields[last].parse::<f64>().unwrap() * 2.0 + 1e-3);
        lines[3] = fields.join(",");
        assert!(ErrorSweepReport::from_csv(&lines.join("\n")).is_err());
    }

    #[test]
    fn config_validation() {
        let mut config = small_config(vec![SweepMethod::Rempala]);
        config.terms = vec![11];
        assert_eq!(config.validate().unwrap_err().exit_code(), 2);
        let mut config = small_config(vec![SweepMethod::Stephan]);
        config.r = 2;
        assert!(config.validate().is_err());
        let mut config = small_config(vec![SweepMethod::Charlier]);
        config.orders = vec![0];
        assert!(config.validate().is_err());
        let config = small_config(vec![]);
        assert_eq!(config.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn rempala_cliff() {
        let config = SweepConfig {
            n: 100,
            r: 1,
            orders: vec![],
            terms: vec![100],
            methods: vec![SweepMethod::Rempala],
            grid: PGrid {
                count: 2,
                lo: 0.5,
                hi: 0.55,
            },
            error_kind: ErrorKind::Rel,
        };
        let report = run_sweep(&config).unwrap();
        let rel = |i: usize| report.rows[i].rel_errors()[0];
        // At p = 1/2 the true relative error exceeds 1 by about 4e-28.
        assert!(rel(0) >= 1.0);
        assert!(rel(1) < 1e-8);
    }

    #[test]
    fn stephan_slow_at_small_p() {
        let config = SweepConfig {
            n: 100,
            r: 1,
            orders: vec![],
            terms: (1..=10).collect(),
            methods: vec![SweepMethod::Stephan],
            grid: PGrid {
                count: 2,
                lo: 0.01,
                hi: 0.5,
            },
            error_kind: ErrorKind::Rel,
        };
        let report = run_sweep(&config).unwrap();
        let small = report.rows[0].rel_errors();
        // Ten terms gain less than one decimal digit at p = 0.01.
        assert!(small[9] > 0.1 * small[0]);
        assert!(small[9] > 1e-3);
    }

    #[test]
    fn sweep_identical_across_thread_counts() {
        let config = SweepConfig {
            n: 100,
            r: 2,
            orders: (1..=6).collect(),
            terms: Vec::new(),
            methods: vec![SweepMethod::Charlier],
            grid: PGrid {
                count: 64,
                lo: 0.01,
                hi: 1.0,
            },
            error_kind: ErrorKind::Both,
        };
        let csv_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_sweep(&config).unwrap().to_csv())
        };
        let single = csv_with(1);
        for threads in [2, 3, 8] {
            assert_eq!(csv_with(threads), single);
        }
    }
}
