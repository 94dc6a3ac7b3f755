use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_t::baselines::{fit_garch_mle, fit_sigma_mle, garch_filter};
use adaptive_t::data::{self, ColumnRef, ColumnSpec, PriceSeries, ReturnSeries, Scenario};
use adaptive_t::evaluation::{self, Normalization, ParamSource};
use adaptive_t::moments::{
    self, MuPolicy, NuInversionTable, DEFAULT_GRID_SIZE, DEFAULT_NU_MIN_MARGIN,
};
use adaptive_t::{AdaptiveConfig, AdaptiveEstimator, Error, Init, StudentTParams, GAUSSIAN_NU};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser, Serialize)]
#[command(
    name = "adaptive-t",
    version,
    about = "Adaptive Student's t estimation for return series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Convert prices to log returns, or pass returns through.
    Returns {
        #[command(flatten)]
        io: InputArgs,
    },
    /// Run the moving estimator and write the per-step trajectory.
    FitAdaptive {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Fit one (μ, σ, ν) to the whole series.
    FitStatic {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        fit: StaticArgs,
        /// Leading points excluded from scoring.
        #[arg(long, default_value_t = 0)]
        warmup: usize,
        #[arg(long, value_enum, default_value_t = SigmaMethod::Moments)]
        method: SigmaMethod,
    },
    /// Static vs adaptive log-likelihood across a grid of fixed ν, plus GARCH(1,1).
    Sweep {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Comma-separated 1/ν values in [0, 1]; 0 is the Gaussian limit.
        #[arg(long, value_delimiter = ',', default_value = DEFAULT_GRID)]
        inv_nu_grid: Vec<f64>,
    },
    /// Observed vs expected counts of |x - μ| > kσ for k = 1..10.
    TailTable {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, value_enum, default_value_t = NormalizationArg::Static)]
        normalization: NormalizationArg,
        /// Comma-separated ν values for the expected columns ("inf" for Gaussian).
        #[arg(long, value_delimiter = ',', value_parser = parse_nu, default_value = "1,2,3,4,5,10,inf")]
        nu_labels: Vec<f64>,
    },
    /// Fit GARCH(1,1) by Gaussian maximum likelihood.
    Garch {
        #[command(flatten)]
        io: InputArgs,
        /// Leading points excluded from scoring.
        #[arg(long, default_value_t = 300)]
        warmup: usize,
    },
    /// Generate a synthetic return series from a JSON scenario file.
    Synth {
        /// Scenario JSON: {"kind":"segments","segments":[{"n":..,"mu":..,"sigma":..,"nu":..}]}
        /// or {"kind":"garch","n":..,"params":{"omega":..,"alpha":..,"beta":..,"initial_var":..}}.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

const DEFAULT_GRID: &str =
    "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1";

#[derive(Args, Serialize)]
#[group(required = true, multiple = false, id = "kind")]
struct KindArgs {
    /// Input column holds prices; convert to log returns.
    #[arg(long)]
    prices: bool,
    /// Input column already holds returns.
    #[arg(long)]
    returns: bool,
}

#[derive(Args, Serialize)]
struct InputArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    kind: KindArgs,
    /// Value column, by header name or zero-based index [default: last column].
    #[arg(long)]
    column: Option<String>,
    /// Date column, by header name or zero-based index [default: 0 when distinct from the value column].
    #[arg(long)]
    date_column: Option<String>,
    /// Ignore date labels.
    #[arg(long)]
    no_date: bool,
}

#[derive(Args, Serialize)]
struct EstimatorArgs {
    /// EMA rate for μ.
    #[arg(long, default_value_t = 0.003)]
    eta1: f64,
    /// EMA rate for the σ moment.
    #[arg(long, default_value_t = 0.05)]
    eta2: f64,
    /// EMA rate for the ν moments.
    #[arg(long, default_value_t = 0.005)]
    eta3: f64,
    /// Moment power used for σ.
    #[arg(long, default_value_t = 1.0)]
    p_sigma: f64,
    /// First moment power used for ν.
    #[arg(long, default_value_t = 1.0)]
    p1: f64,
    /// Second moment power used for ν.
    #[arg(long, default_value_t = 0.5)]
    p2: f64,
    /// Hold ν at this value instead of tracking it ("inf" for Gaussian).
    #[arg(long, value_parser = parse_nu)]
    nu_fixed: Option<f64>,
    /// Additive correction applied to each ν estimate.
    #[arg(long, default_value_t = moments::DEFAULT_NU_ADJUSTMENT, allow_negative_numbers = true)]
    nu_adjust: f64,
    /// Lower clamp for tracked ν.
    #[arg(long, default_value_t = 1.1)]
    nu_min: f64,
    /// Upper clamp for ν.
    #[arg(long, default_value_t = moments::DEFAULT_NU_CAP)]
    nu_cap: f64,
    /// Leading points excluded from scoring.
    #[arg(long, default_value_t = 300)]
    warmup: usize,
    /// Number of leading points used to seed the moment state.
    #[arg(long, default_value_t = 300)]
    init_prefix: usize,
}

impl EstimatorArgs {
    fn config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            eta1: self.eta1,
            eta2: self.eta2,
            eta3: self.eta3,
            p_sigma: self.p_sigma,
            p1: self.p1,
            p2: self.p2,
            nu_fixed: self.nu_fixed,
            nu_adjustment: self.nu_adjust,
            nu_min: self.nu_min,
            nu_cap: self.nu_cap,
            warmup: self.warmup,
            ..AdaptiveConfig::default()
        }
    }

    fn static_args(&self) -> StaticArgs {
        StaticArgs {
            p_sigma: self.p_sigma,
            p1: self.p1,
            p2: self.p2,
            nu_fixed: self.nu_fixed,
            nu_adjust: self.nu_adjust,
            nu_cap: self.nu_cap,
        }
    }
}

#[derive(Args, Serialize)]
struct StaticArgs {
    /// Moment power used for σ.
    #[arg(long, default_value_t = 1.0)]
    p_sigma: f64,
    /// First moment power used for ν.
    #[arg(long, default_value_t = 1.0)]
    p1: f64,
    /// Second moment power used for ν.
    #[arg(long, default_value_t = 0.5)]
    p2: f64,
    /// Use this ν instead of estimating it ("inf" for Gaussian).
    #[arg(long, value_parser = parse_nu)]
    nu_fixed: Option<f64>,
    /// Additive correction applied to the ν estimate.
    #[arg(long, default_value_t = moments::DEFAULT_NU_ADJUSTMENT, allow_negative_numbers = true)]
    nu_adjust: f64,
    /// Upper clamp for ν.
    #[arg(long, default_value_t = moments::DEFAULT_NU_CAP)]
    nu_cap: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SigmaMethod {
    /// σ from the p_sigma absolute moment.
    Moments,
    /// σ by maximum likelihood at the chosen ν.
    Mle,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormalizationArg {
    /// One (μ, σ) for the whole series.
    Static,
    /// Per-step (μ_t, σ_t) from the moving estimator.
    Adaptive,
}

fn parse_nu(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "gauss" | "gaussian" => Ok(GAUSSIAN_NU),
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(format!(
                "expected a positive number or \"inf\", got {other:?}"
            )),
        },
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_)
            | Error::Domain(_)
            | Error::DivergentMoment { .. }
            | Error::InvalidScenario(_)
            | Error::Io(_) => 2,
            Error::DegenerateData(_)
            | Error::EmptyInput
            | Error::SeriesTooShort { .. }
            | Error::LengthMismatch { .. }
            | Error::Parse { .. }
            | Error::NonPositivePrice { .. } => 3,
            Error::NonConvergence { .. } | Error::NonMonotone { .. } => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Loaded {
    series: ReturnSeries,
    digest: String,
}

fn column_spec(io: &InputArgs) -> ColumnSpec {
    let parse = |s: &Option<String>| {
        s.as_deref()
            .map(|c| c.parse::<ColumnRef>().unwrap_or_else(|e| match e {}))
    };
    ColumnSpec {
        value: parse(&io.column),
        date: parse(&io.date_column),
        no_date: io.no_date,
    }
}

fn load(io: &InputArgs) -> Result<Loaded, Failure> {
    let bytes = fs::read(&io.input).map_err(|e| io_failure(&io.input, e))?;
    let raw = data::read_column_from(bytes.as_slice(), &column_spec(io))?;
    let source = io.input.display().to_string();
    let series = if io.kind.prices {
        data::to_log_returns(&PriceSeries::new(raw.values, raw.labels, source)?)
    } else {
        ReturnSeries::new(raw.values, raw.labels, source)?
    };
    Ok(Loaded {
        series,
        digest: sha256_hex(&bytes),
    })
}

fn manifest(cli: &Cli, command: &str, digest: &str, output: &Path) -> Vec<String> {
    let config = serde_json::to_string(&cli.command).expect("arguments serialize");
    vec![
        format!("adaptive-t {}", env!("CARGO_PKG_VERSION")),
        format!("command: {command}"),
        format!("config: {config}"),
        format!("input_sha256: {digest}"),
        format!("output: {}", output.display()),
    ]
}

fn write_output<F>(path: &Path, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> adaptive_t::Result<()>,
{
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush().map_err(|e| io_failure(path, e))
}

struct StaticFit {
    mu: f64,
    sigma: f64,
    nu: f64,
    nu_raw: Option<f64>,
}

fn static_fit(xs: &[f64], args: &StaticArgs, method: SigmaMethod) -> Result<StaticFit, Failure> {
    let mut powers = vec![args.p_sigma, args.p1, args.p2];
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    let summary = moments::compute_moments(xs, &powers, MuPolicy::SampleMean)?;
    let (nu, nu_raw) = match args.nu_fixed {
        Some(nu) => (nu, None),
        None => {
            let nu_min = args.p1.max(args.p2) + DEFAULT_NU_MIN_MARGIN;
            let table =
                NuInversionTable::build(args.p1, args.p2, nu_min, args.nu_cap, DEFAULT_GRID_SIZE)?;
            let raw = moments::estimate_nu_raw(&summary, &table)?;
            (
                moments::estimate_nu_adjusted(raw, args.nu_adjust, args.nu_cap),
                Some(raw),
            )
        }
    };
    let sigma = match method {
        SigmaMethod::Moments => moments::estimate_sigma(&summary, nu, args.p_sigma)?,
        SigmaMethod::Mle => fit_sigma_mle(xs, summary.mu_hat, nu)?.sigma,
    };
    Ok(StaticFit {
        mu: summary.mu_hat,
        sigma,
        nu,
        nu_raw,
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Returns { io } => {
            let loaded = load(io)?;
            let m = manifest(cli, "returns", &loaded.digest, &io.output);
            write_output(&io.output, |w| data::write_returns(w, &loaded.series, &m))?;
            println!(
                "wrote {} returns to {}",
                loaded.series.len(),
                io.output.display()
            );
        }
        Command::FitAdaptive { io, est } => {
            let loaded = load(io)?;
            let xs = loaded.series.values();
            let traj =
                AdaptiveEstimator::new(est.config())?.run(xs, Init::FromPrefix(est.init_prefix))?;
            let ll = evaluation::mean_log_likelihood(
                ParamSource::Trajectory(&traj),
                xs,
                traj.score_start,
            )?;
            let m = manifest(cli, "fit-adaptive", &loaded.digest, &io.output);
            write_output(&io.output, |w| {
                data::write_trajectory(w, &traj, loaded.series.labels(), &m)
            })?;
            println!("scored points: {}", xs.len() - traj.score_start);
            println!("mean log-likelihood: {}", data::fmt_f64(ll));
        }
        Command::FitStatic {
            io,
            fit,
            warmup,
            method,
        } => {
            let loaded = load(io)?;
            let xs = loaded.series.values();
            let f = static_fit(xs, fit, *method)?;
            let params = StudentTParams::new(f.mu, f.sigma, f.nu)?;
            let ll = evaluation::mean_log_likelihood(ParamSource::Fixed(params), xs, *warmup)?;
            let m = manifest(cli, "fit-static", &loaded.digest, &io.output);
            write_output(&io.output, |w| {
                for line in &m {
                    writeln!(w, "# {line}")?;
                }
                writeln!(w, "mu,sigma,nu,nu_raw,mean_loglik")?;
                let raw = f.nu_raw.map(data::fmt_f64).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    data::fmt_f64(f.mu),
                    data::fmt_f64(f.sigma),
                    data::fmt_f64(f.nu),
                    raw,
                    data::fmt_f64(ll)
                )?;
                Ok(())
            })?;
            println!("mu={} sigma={} nu={}", f.mu, f.sigma, f.nu);
            println!("mean log-likelihood: {}", data::fmt_f64(ll));
        }
        Command::Sweep {
            io,
            est,
            inv_nu_grid,
        } => {
            let loaded = load(io)?;
            let report = evaluation::nu_sweep(
                loaded.series.source_id(),
                loaded.series.values(),
                inv_nu_grid,
                &est.config(),
                Init::FromPrefix(est.init_prefix),
            )?;
            let m = manifest(cli, "sweep", &loaded.digest, &io.output);
            write_output(&io.output, |w| data::write_sweep(w, &report, &m))?;
            println!(
                "rows: {}, garch mean log-likelihood: {}",
                report.rows.len(),
                data::fmt_f64(report.garch_loglik)
            );
        }
        Command::TailTable {
            io,
            est,
            normalization,
            nu_labels,
        } => {
            let loaded = load(io)?;
            let xs = loaded.series.values();
            let table = match normalization {
                NormalizationArg::Static => {
                    let f = static_fit(xs, &est.static_args(), SigmaMethod::Moments)?;
                    evaluation::tail_table(
                        xs,
                        Normalization::Static {
                            mu: f.mu,
                            sigma: f.sigma,
                        },
                        nu_labels,
                    )?
                }
                NormalizationArg::Adaptive => {
                    let traj = AdaptiveEstimator::new(est.config())?
                        .run(xs, Init::FromPrefix(est.init_prefix))?;
                    evaluation::tail_table(xs, Normalization::Adaptive(&traj), nu_labels)?
                }
            };
            let m = manifest(cli, "tail-table", &loaded.digest, &io.output);
            write_output(&io.output, |w| data::write_tail_table(w, &table, &m))?;
            println!("n_effective: {}", table.n_effective);
        }
        Command::Garch { io, warmup } => {
            let loaded = load(io)?;
            let xs = loaded.series.values();
            let fit = fit_garch_mle(xs)?;
            let ll = garch_filter(xs, &fit.params, *warmup)?.mean_loglik;
            let p = fit.params;
            let m = manifest(cli, "garch", &loaded.digest, &io.output);
            write_output(&io.output, |w| {
                for line in &m {
                    writeln!(w, "# {line}")?;
                }
                writeln!(w, "omega,alpha,beta,initial_var,mean_loglik")?;
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    data::fmt_f64(p.omega),
                    data::fmt_f64(p.alpha),
                    data::fmt_f64(p.beta),
                    data::fmt_f64(p.initial_var),
                    data::fmt_f64(ll)
                )?;
                Ok(())
            })?;
            println!("omega={} alpha={} beta={}", p.omega, p.alpha, p.beta);
            println!("mean log-likelihood: {}", data::fmt_f64(ll));
        }
        Command::Synth {
            scenario,
            seed,
            output,
        } => {
            let bytes = fs::read(scenario).map_err(|e| io_failure(scenario, e))?;
            let spec: Scenario = serde_json::from_slice(&bytes).map_err(|e| Failure {
                code: 2,
                message: format!("{}: {e}", scenario.display()),
            })?;
            let series = data::generate_synthetic(&spec, *seed)?;
            let m = manifest(cli, "synth", &sha256_hex(&bytes), output);
            write_output(output, |w| data::write_returns(w, &series, &m))?;
            println!("wrote {} returns to {}", series.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
