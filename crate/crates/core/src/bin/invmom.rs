use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

use invmom::cli::{
    cmd_alpha_table, cmd_calibrate, cmd_compute, cmd_poisson_inverse, cmd_poisson_table, cmd_sweep,
    parse_index_list, CliError, CliResult, ErrorKind, PGrid, SweepConfig, SweepMethod,
};

/// Inverse moments of binomial and Poisson variates.
#[derive(Parser, Debug)]
#[command(name = "invmom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact value and order-m Charlier estimate of E+[1/K^r], K ~ Bin(N, p).
    Compute {
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Error sweep over a p grid, written as CSV.
    Sweep(SweepArgs),
    /// Cross-over point and term counts for the Poisson inverse moment f_r.
    Calibrate {
        #[arg(long)]
        r: u32,
        #[arg(long)]
        target: f64,
    },
    /// The alpha_{l,j} coefficients for j + l <= max as exact fractions.
    AlphaTable {
        #[arg(long, default_value_t = 7)]
        max: usize,
    },
    /// f_r(mu), f_r(mu)/mu and e^-mu for a list of means, as CSV.
    PoissonTable {
        #[arg(long)]
        r: u32,
        /// Comma-separated means.
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
    },
    /// f_r(mu) by the dual-regime evaluator, checked against direct summation.
    PoissonInverse {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        r: u32,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long = "N")]
    n: u64,
    #[arg(long, default_value_t = 1)]
    r: u32,
    /// Charlier orders, e.g. `1-6` or `1,3,5`.
    #[arg(long, alias = "order", default_value = "1-6")]
    orders: String,
    /// Comma-separated subset of charlier, stephan, rempala, znidaric.
    #[arg(long, default_value = "charlier")]
    method: String,
    /// Term counts for stephan, rempala and znidaric, e.g. `100` or `1-10`.
    #[arg(long)]
    terms: Option<String>,
    /// `lo:hi:count`; defaults to p = k/500, k = 1..500.
    #[arg(long)]
    grid: Option<String>,
    /// abs, rel or both.
    #[arg(long, default_value = "both")]
    errors: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
}

impl SweepArgs {
    fn config(&self) -> CliResult<SweepConfig> {
        if self.format != "csv" {
            return Err(CliError::Usage(format!(
                "unsupported format '{}'",
                self.format
            )));
        }
        let methods = self
            .method
            .split(',')
            .map(str::parse)
            .collect::<CliResult<Vec<SweepMethod>>>()?;
        let terms = match &self.terms {
            Some(t) => parse_index_list(t)?,
            None => Vec::new(),
        };
        let grid = match &self.grid {
            Some(g) => g.parse()?,
            None => PGrid::default(),
        };
        Ok(SweepConfig {
            n: self.n,
            r: self.r,
            orders: parse_index_list(&self.orders)?,
            terms,
            methods,
            grid,
            error_kind: self.errors.parse::<ErrorKind>()?,
        })
    }
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Compute { n, p, r, order } => cmd_compute(n, p, r, order),
        Command::Sweep(args) => {
            let config = args.config()?;
            let report = cmd_sweep(&config, &args.out)?;
            Ok(format!(
                "wrote {} rows to {}\n",
                report.rows.len(),
                args.out.display()
            ))
        }
        Command::Calibrate { r, target } => cmd_calibrate(r, target),
        Command::AlphaTable { max } => cmd_alpha_table(max),
        Command::PoissonTable { r, mu } => cmd_poisson_table(r, &mu),
        Command::PoissonInverse { mu, r } => cmd_poisson_inverse(mu, r),
    }
}

/// Parses `args`, runs the command and returns the exit status with the
/// text destined for stdout and stderr.
fn execute<I, T>(args: I) -> (u8, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                    (0, text, String::new())
                }
                _ => (1, String::new(), text),
            };
        }
    };
    match run(cli.command) {
        Ok(out) => (0, out, String::new()),
        Err(e) => (e.exit_code() as u8, String::new(), format!("invmom: {e}\n")),
    }
}

fn main() -> ExitCode {
    let (code, out, err) = execute(std::env::args_os());
    print!("{out}");
    eprint!("{err}");
    ExitCode::from(code)
}
