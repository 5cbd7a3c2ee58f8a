//! Command-line front end behind the `onesided` binary.
//!
//! Commands: `test` (smoothed test on a CSV sample), `gms` (comparison
//! tests on the same input), `simulate` (campaign from a JSON config) and
//! `power` (closed-form local power). Reports are JSON by default and
//! embed the resolved configuration. Exit codes: 0 success, 2 input or
//! parse error, 3 numeric or domain error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gms::{run_gms_tests, GmsInput, GmsResult, GmsStatistic, Resample};
use crate::moments::{resolve_weights, sample_moments, toeplitz_cov, DataMatrix, WeightPolicy};
use crate::montecarlo::{aggregate, format_summary, AggregateMode, CampaignSpec, SummaryRow};
use crate::numerics::SymMatrix;
use crate::power::{local_power, np_bound, LocalAlternative};
use crate::smoothers::{Smoother, Tuner};
use crate::statistic::{compute_statistic, decide, TestInput};

#[derive(Debug, Parser)]
#[command(name = "onesided", version, about = "Smoothed one-sided tests of moment inequalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smoothed test of H0: mu >= 0 on a CSV sample.
    Test(TestArgs),
    /// GMS comparison tests on a CSV sample.
    Gms(GmsArgs),
    /// Monte Carlo campaign from a JSON config.
    Simulate(SimulateArgs),
    /// Closed-form local power along given drifts.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// 1/sqrt(v_jj)
    InverseStd,
    /// 1/sqrt(v_jj), coordinate --perturb-index scaled by 1 + --perturb-eps
    Perturbed,
    /// --theta
    Fixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightArgs {
    #[arg(long = "weights", value_enum, default_value_t = WeightKind::InverseStd)]
    pub kind: WeightKind,
    /// Zero-based coordinate for the perturbed policy.
    #[arg(long)]
    pub perturb_index: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub perturb_eps: Option<f64>,
    /// Comma-separated weights for the fixed policy.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
}

impl WeightArgs {
    fn policy(&self) -> Result<WeightPolicy> {
        let usage = |m: &str| Error::Schema {
            pointer: "/weights".into(),
            message: m.into(),
        };
        match self.kind {
            WeightKind::InverseStd => Ok(WeightPolicy::InverseStd),
            WeightKind::Perturbed => match (self.perturb_index, self.perturb_eps) {
                (Some(index), Some(eps)) => Ok(WeightPolicy::InverseStdPerturbed { index, eps }),
                _ => Err(usage("perturbed weights need --perturb-index and --perturb-eps")),
            },
            WeightKind::Fixed => match &self.theta {
                Some(theta) => Ok(WeightPolicy::Fixed {
                    theta: theta.clone(),
                }),
                None => Err(usage("fixed weights need --theta")),
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    /// T x p comma-separated sample, optional header line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = Smoother::Step)]
    pub smoother: Smoother,
    #[arg(long, default_value_t = Tuner::Sic)]
    pub tuner: Tuner,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GmsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Statistic(s) to run; all four when absent.
    #[arg(long, value_delimiter = ',')]
    pub stat: Vec<GmsStatistic>,
    #[arg(long, default_value_t = Tuner::Sic)]
    pub tuner: Tuner,
    /// Critical-value draws.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value = "parametric")]
    pub resample: Resample,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON campaign config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for rejections.csv, summary.txt and report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the worker-thread count of the config.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerArgs {
    /// Drift vector; repeat for several rows.
    #[arg(long = "c", allow_hyphen_values = true, value_parser = parse_vector)]
    pub drifts: Vec<Vec<f64>>,
    /// Adds the drift c = -delta V theta; repeatable.
    #[arg(long)]
    pub delta: Vec<f64>,
    /// Covariance rows separated by ';', entries by ','.
    #[arg(long, allow_hyphen_values = true)]
    pub cov: Option<String>,
    /// Toeplitz covariance of dimension --p with parameter --rho.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Weights; ones when absent.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vector)]
    pub theta: Option<Vector>,
    /// Boundary point; zeros when absent.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vector)]
    pub gamma: Option<Vector>,
    /// Adds the Neyman-Pearson bound column.
    #[arg(long)]
    pub np_bound: bool,
    #[command(flatten)]
    pub common: Common,
}

/// One comma-separated vector argument (the alias keeps clap from treating it as multi-valued).
type Vector = Vec<f64>;

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| format!("{x:?} is not a number: {e}"))
        })
        .collect()
}

fn parse_matrix(s: &str) -> Result<SymMatrix> {
    let rows = s
        .split(';')
        .enumerate()
        .map(|(i, row)| {
            parse_vector(row).map_err(|message| Error::Parse {
                row: i + 1,
                column: 0,
                message,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SymMatrix::from_rows(&rows)
}

/// Reads a comma-separated `T × p` sample.
///
/// The first line is a header when none of its cells parses as a number.
/// Every data row must have the same number of cells, and every cell must
/// be a finite number. Rows and columns in errors are 1-based file
/// positions.
pub fn read_data_csv(path: &Path) -> Result<DataMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_data_csv(&text)
}

/// [`read_data_csv`] on an in-memory string.
pub fn parse_data_csv(text: &str) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(k + 1, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} cells, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(x) if x.is_finite() => row.push(x),
                _ => {
                    return Err(Error::Parse {
                        row: line,
                        column: j + 1,
                        message: format!("{cell:?} is not a finite number"),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: 0,
            message: "no data rows".into(),
        });
    }
    DataMatrix::from_rows(&rows)
}

#[derive(Serialize)]
struct TestReport<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a TestArgs,
    weight_policy: WeightPolicy,
    t_obs: usize,
    p: usize,
    mu_hat: Vec<f64>,
    theta_hat: Vec<f64>,
    q1: f64,
    q2: f64,
    q: f64,
    psi_hat: Vec<f64>,
    lambda_hat: Vec<f64>,
    degenerate: bool,
    reject: bool,
}

#[derive(Serialize)]
struct GmsReport<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a GmsArgs,
    weight_policy: WeightPolicy,
    t_obs: usize,
    p: usize,
    results: Vec<GmsResult>,
}

#[derive(Serialize)]
struct PowerRow {
    c: Vec<f64>,
    tau: f64,
    kappa: f64,
    power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    np_bound: Option<f64>,
}

#[derive(Serialize)]
struct PowerReport<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a PowerArgs,
    v: SymMatrix,
    theta: Vec<f64>,
    gamma: Vec<f64>,
    rows: Vec<PowerRow>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a CampaignSpec,
    scenarios: usize,
    failed_cells: usize,
    summary: Vec<SummaryRow>,
}

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn emit(common: &Common, json: impl Serialize, csv_text: impl FnOnce() -> Result<String>, stdout: &mut dyn Write) -> Result<()> {
    let body = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json)
                .map_err(|e| Error::Numeric(format!("cannot serialize report: {e}")))?;
            s.push('\n');
            s
        }
        Format::Csv => csv_text()?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn csv_from_records(header: &[&str], records: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Numeric(format!("cannot write CSV: {e}"));
    w.write_record(header).map_err(io)?;
    for r in records {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numeric(format!("cannot flush CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn cmd_test(args: &TestArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = read_data_csv(&args.input)?;
    let policy = args.weights.policy()?;
    policy.validate(data.dim())?;
    let (mu_hat, v_hat) = sample_moments(&data)?;
    let theta_hat = resolve_weights(&policy, &v_hat)?;
    let outcome = compute_statistic(&TestInput {
        mu_hat: mu_hat.clone(),
        v_hat,
        t_obs: data.t_obs() as u64,
        theta_hat: theta_hat.clone(),
        smoother: args.smoother,
        tuner: args.tuner,
    })?;
    let reject = decide(&outcome, args.common.alpha)?;
    let csv_text = || {
        csv_from_records(
            &["q1", "q2", "q", "reject", "psi_hat", "lambda_hat"],
            vec![vec![
                outcome.q1.to_string(),
                outcome.q2.to_string(),
                outcome.q.to_string(),
                reject.to_string(),
                join(&outcome.psi_hat),
                join(&outcome.lambda_hat),
            ]],
        )
    };
    let report = TestReport {
        command: "test",
        version: VERSION,
        config: args,
        weight_policy: policy.clone(),
        t_obs: data.t_obs(),
        p: data.dim(),
        mu_hat,
        theta_hat,
        q1: outcome.q1,
        q2: outcome.q2,
        q: outcome.q,
        psi_hat: outcome.psi_hat.clone(),
        lambda_hat: outcome.lambda_hat.clone(),
        degenerate: outcome.degenerate,
        reject,
    };
    emit(&args.common, report, csv_text, stdout)
}

fn cmd_gms(args: &GmsArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = read_data_csv(&args.input)?;
    let policy = args.weights.policy()?;
    policy.validate(data.dim())?;
    let (mu_hat, v_hat) = sample_moments(&data)?;
    let theta_hat = resolve_weights(&policy, &v_hat)?;
    let kinds: Vec<GmsStatistic> = if args.stat.is_empty() {
        GmsStatistic::ALL.to_vec()
    } else {
        args.stat.clone()
    };
    let input = GmsInput {
        mu_hat: &mu_hat,
        v_hat: &v_hat,
        theta_hat: &theta_hat,
        t_obs: data.t_obs() as u64,
        data: Some(&data),
    };
    let results = run_gms_tests(
        &kinds,
        args.tuner,
        args.reps,
        args.common.alpha,
        args.resample,
        args.seed,
        &input,
    )?;
    let csv_text = || {
        csv_from_records(
            &["stat", "statistic", "critical_value", "reject"],
            results
                .iter()
                .map(|r| {
                    vec![
                        r.stat.to_string(),
                        r.statistic.to_string(),
                        r.critical_value.to_string(),
                        r.reject.to_string(),
                    ]
                })
                .collect(),
        )
    };
    let report = GmsReport {
        command: "gms",
        version: VERSION,
        config: args,
        weight_policy: policy.clone(),
        t_obs: data.t_obs(),
        p: data.dim(),
        results: results.clone(),
    };
    emit(&args.common, report, csv_text, stdout)
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut spec = CampaignSpec::from_json(&text)?;
    if args.threads.is_some() {
        spec.threads = args.threads;
        spec.validate()?;
    }
    let scenarios = spec.scenarios()?;
    let table = spec.run()?;
    let mut summary = Vec::new();
    let failed_cells = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed_cells == 0 {
        if !spec.lambda.is_empty() {
            summary.extend(aggregate(&table, AggregateMode::Mnrp, &spec.null_grid())?);
        }
        if spec.power.is_some() {
            summary.extend(aggregate(&table, AggregateMode::Ap, &spec.power_grid())?);
        }
    }
    std::fs::create_dir_all(&args.out)?;
    table.write_csv(&args.out.join("rejections.csv"))?;
    std::fs::write(args.out.join("summary.txt"), format_summary(&summary))?;
    // the thread count does not affect results, so it is not echoed
    let mut echoed = spec.clone();
    echoed.threads = None;
    let report = SimulateReport {
        command: "simulate",
        version: VERSION,
        config: &echoed,
        scenarios: scenarios.len(),
        failed_cells,
        summary,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Numeric(format!("cannot serialize report: {e}")))?;
    std::fs::write(args.out.join("report.json"), json + "\n")?;
    write!(stdout, "{}", format_summary(&report.summary))?;
    if failed_cells > 0 {
        return Err(Error::Numeric(format!(
            "{failed_cells} cells failed; see the error column of rejections.csv"
        )));
    }
    Ok(())
}

fn cmd_power(args: &PowerArgs, stdout: &mut dyn Write) -> Result<()> {
    let v = match (&args.cov, args.rho, args.p) {
        (Some(cov), None, None) => parse_matrix(cov)?,
        (None, Some(rho), Some(p)) => toeplitz_cov(p, rho)?,
        _ => {
            return Err(Error::Schema {
                pointer: "/cov".into(),
                message: "give either --cov or both --rho and --p".into(),
            })
        }
    };
    let p = v.dim();
    let theta = args.theta.clone().unwrap_or_else(|| vec![1.0; p]);
    let gamma = args.gamma.clone().unwrap_or_else(|| vec![0.0; p]);
    let mut drifts = args.drifts.clone();
    if theta.len() == p {
        let v_theta = v.mul_vec(&theta);
        for &d in &args.delta {
            drifts.push(v_theta.iter().map(|x| -d * x).collect());
        }
    }
    if drifts.is_empty() {
        return Err(Error::Schema {
            pointer: "/c".into(),
            message: "give at least one --c or --delta".into(),
        });
    }
    let mut rows = Vec::with_capacity(drifts.len());
    for c in drifts {
        let alt = LocalAlternative {
            gamma: gamma.clone(),
            c: c.clone(),
            theta: theta.clone(),
            v: v.clone(),
        };
        let (tau, kappa) = alt.drift_and_variance()?;
        let power = local_power(&alt, args.common.alpha)?;
        let bound = if args.np_bound {
            Some(np_bound(&c, &v, args.common.alpha)?)
        } else {
            None
        };
        rows.push(PowerRow {
            c,
            tau,
            kappa,
            power,
            np_bound: bound,
        });
    }
    let csv_text = || {
        let mut header = vec!["c", "tau", "kappa", "power"];
        if args.np_bound {
            header.push("np_bound");
        }
        csv_from_records(
            &header,
            rows.iter()
                .map(|r| {
                    let mut rec = vec![
                        join(&r.c),
                        r.tau.to_string(),
                        r.kappa.to_string(),
                        r.power.to_string(),
                    ];
                    if let Some(b) = r.np_bound {
                        rec.push(b.to_string());
                    }
                    rec
                })
                .collect(),
        )
    };
    let csv_text = csv_text()?;
    let report = PowerReport {
        command: "power",
        version: VERSION,
        config: args,
        v,
        theta,
        gamma,
        rows,
    };
    emit(&args.common, report, || Ok(csv_text), stdout)
}

/// Runs a parsed command, writing reports to `stdout` unless redirected.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Test(a) => cmd_test(a, stdout),
        Command::Gms(a) => cmd_gms(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Power(a) => cmd_power(a, stdout),
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        3
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
