//! `tailcomb`: command-line front end.
//!
//! Single results are printed as JSON on standard output, tables as CSV.
//! Diagnostics go to standard error. Exit status is 0 on success, 2 for
//! usage and input errors, and 3 for numerical or method-level failures.

mod input;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use tailcomb::guidance::{
    alpha_rate_check, optimal_logpareto_gamma_default, optimal_weibull_k, recommend_gamma, WeightRegime, TABLE_ALPHA,
    TABLE_N,
};
use tailcomb::simulate::{
    estimate_rejection, format_sig, power_table, size_table, tail_equivalence_check, write_table_csv, Dependence,
    MeanSpec, Method, SimulationScenario, TableGrid,
};
use tailcomb::stable_dist::landau_tail_ratio;
use tailcomb::{critical_value, ln_critical_value, Calibrator, CombinationSpec, Family, Statistic, WeightVector};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (format 1)");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] tailcomb::Error),
    #[error("{0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(tailcomb::Error::Numerical { .. } | tailcomb::Error::Unsupported(_)) => 3,
            CliError::Failure(_) => 3,
            CliError::Io(_) => 3,
            _ => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

#[derive(Parser)]
#[command(name = "tailcomb", version = VERSION, about = "Heavy-tailed calibrator p-value combination tests")]
struct Cli {
    /// Worker threads for simulations (0 = all cores).
    #[arg(long, global = true, env = "TAILCOMB_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Combine p-values and test the global null.
    Combine(CombineArgs),
    /// Critical value t_{α,n} of the combined statistic.
    CriticalValue(CriticalArgs),
    /// Map p-values to calibrated values F̄⁻¹(p).
    Calibrate(CalibrateArgs),
    /// Optimal Weibull shape and log-Pareto index under perfect correlation.
    OptimalParams(OptimalArgs),
    /// Pareto index advice for a sum test.
    Advise(AdviseArgs),
    /// Landau tail ratios P(Landau > 1/α)/α.
    LandauTable(LandauArgs),
    /// Empirical size (rate/α) under the global null.
    SimulateSize(SimulateArgs),
    /// Empirical power under the sparse alternative.
    SimulatePower(SimulateArgs),
    /// Monte Carlo tail probability against the sum of marginal tails.
    TailCheck(TailCheckArgs),
}

#[derive(Args)]
struct CalibratorArgs {
    /// Calibrator family: pareto, cauchy, truncated-cauchy, weibull, log-pareto.
    #[arg(long)]
    calibrator: Family,
    /// Calibrator parameter as name=value (gamma, delta or k); repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

impl CalibratorArgs {
    fn build(&self) -> Result<Calibrator, CliError> {
        Ok(Calibrator::from_params(
            self.calibrator,
            self.params.iter().map(|(k, v)| (k.as_str(), *v)),
        )?)
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Args)]
struct InputArgs {
    /// P-value file (one per line or CSV); standard input when omitted or `-`.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// 1-based CSV column holding the p-values.
    #[arg(long, default_value_t = 1)]
    column: usize,
    /// Skip the first line.
    #[arg(long)]
    header: bool,
}

impl InputArgs {
    fn read(&self) -> Result<Vec<f64>, CliError> {
        if self.column == 0 {
            return Err(CliError::Usage("--column is 1-based".into()));
        }
        input::read_pvalues(self.input.as_deref(), self.column - 1, self.header)
    }
}

#[derive(Args)]
struct CombineArgs {
    #[command(flatten)]
    cal: CalibratorArgs,
    /// Statistic: sum, cumsum or max.
    #[arg(long, default_value = "sum")]
    stat: Statistic,
    /// `equal` or a file with one weight per line.
    #[arg(long, default_value = "equal")]
    weights: String,
    #[arg(long)]
    alpha: f64,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct CriticalArgs {
    #[command(flatten)]
    cal: CalibratorArgs,
    /// Number of tests (with equal weights).
    #[arg(long)]
    n: Option<usize>,
    /// File with one weight per line, instead of --n.
    #[arg(long, conflicts_with = "n")]
    weights: Option<PathBuf>,
    #[arg(long)]
    alpha: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    cal: CalibratorArgs,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamFamily {
    Weibull,
    LogPareto,
}

#[derive(Args)]
struct OptimalArgs {
    /// Restrict to one family; with a single n and α the result is JSON.
    #[arg(long)]
    family: Option<ParamFamily>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AdviseArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    n: u64,
}

#[derive(Args)]
struct LandauArgs {
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON scenario file for a single cell; flags override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DependenceKind {
    Iid,
    Equicorrelated,
    PerfectBlock,
}

#[derive(Args)]
struct TailCheckArgs {
    #[command(flatten)]
    cal: CalibratorArgs,
    #[arg(long, default_value = "sum")]
    stat: Statistic,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "iid")]
    dependence: DependenceKind,
    /// Correlation for `equicorrelated`.
    #[arg(long)]
    rho: Option<f64>,
    /// Number of free tests for `perfect-block`.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.001,0.0001")]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

const DEFAULT_REPS: u64 = 100_000;
const DEFAULT_SEED: u64 = 1;

/// Optional-field mirror of [`SimulationScenario`] for scenario files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    n: Option<usize>,
    rho: Option<f64>,
    alpha: Option<f64>,
    replications: Option<u64>,
    seed: Option<u64>,
    mean_spec: Option<MeanSpec>,
    methods: Option<Vec<Method>>,
}

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(io::BufWriter::new(File::create(p)?)),
        _ => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn weights_from(spec: &str, n: usize) -> Result<WeightVector, CliError> {
    if spec == "equal" {
        return Ok(WeightVector::equal(n)?);
    }
    let w = input::read_weights(Path::new(spec))?;
    if w.len() != n {
        return Err(CliError::Usage(format!("{} weights for {n} p-values", w.len())));
    }
    Ok(WeightVector::fixed(w)?)
}

fn combine_cmd(a: &CombineArgs) -> Result<(), CliError> {
    let cal = a.cal.build()?;
    let p = a.input.read()?;
    let weights = weights_from(&a.weights, p.len())?;
    let spec = CombinationSpec::new(a.stat, cal, weights);
    let outcome = spec.test(&p, a.alpha)?;
    print_json(&json!({
        "calibrator": cal,
        "statistic_kind": a.stat,
        "n": p.len(),
        "statistic": outcome.statistic,
        "ln_statistic": outcome.ln_statistic,
        "critical_value": outcome.critical_value,
        "ln_critical_value": outcome.ln_critical_value,
        "combined_p": outcome.combined_p,
        "alpha": outcome.alpha,
        "reject": outcome.reject,
    }))
}

fn critical_cmd(a: &CriticalArgs) -> Result<(), CliError> {
    let cal = a.cal.build()?;
    let weights = match (&a.weights, a.n) {
        (Some(path), _) => WeightVector::fixed(input::read_weights(path)?)?,
        (None, Some(n)) => WeightVector::equal(n)?,
        (None, None) => return Err(CliError::Usage("give --n or --weights".into())),
    };
    let t = critical_value(a.alpha, &cal, &weights)?;
    let ln_t = if cal.has_positive_support() {
        Some(ln_critical_value(a.alpha, &cal, &weights)?)
    } else {
        None
    };
    print_json(&json!({
        "calibrator": cal,
        "n": weights.len(),
        "alpha": a.alpha,
        "critical_value": t,
        "ln_critical_value": ln_t,
    }))
}

fn calibrate_cmd(a: &CalibrateArgs) -> Result<(), CliError> {
    let cal = a.cal.build()?;
    let p = a.input.read()?;
    let values = p
        .iter()
        .map(|&x| cal.inverse_survival(x))
        .collect::<Result<Vec<_>, _>>()?;
    let ln_values = if cal.has_positive_support() {
        Some(
            p.iter()
                .map(|&x| cal.ln_inverse_survival(x))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    print_json(&json!({
        "calibrator": cal,
        "tail": cal.classify(),
        "values": values,
        "ln_values": ln_values,
    }))
}

fn optimal_cmd(a: &OptimalArgs) -> Result<(), CliError> {
    let ns = if a.n.is_empty() { TABLE_N.to_vec() } else { a.n.clone() };
    let alphas = if a.alpha.is_empty() {
        TABLE_ALPHA.to_vec()
    } else {
        a.alpha.clone()
    };
    let param = |fam: ParamFamily, n: u64, alpha: f64| match fam {
        ParamFamily::Weibull => optimal_weibull_k(n, alpha),
        ParamFamily::LogPareto => optimal_logpareto_gamma_default(n, alpha),
    };
    if let (Some(fam), [n], [alpha]) = (a.family, ns.as_slice(), alphas.as_slice()) {
        let name = match fam {
            ParamFamily::Weibull => "weibull",
            ParamFamily::LogPareto => "log_pareto",
        };
        return print_json(&json!({
            "family": name,
            "n": n,
            "alpha": alpha,
            "parameter": param(fam, *n, *alpha)?,
        }));
    }
    let families: Vec<ParamFamily> = match a.family {
        Some(f) => vec![f],
        None => vec![ParamFamily::Weibull, ParamFamily::LogPareto],
    };
    let mut w = csv::Writer::from_writer(out_writer(a.output.as_deref())?);
    let mut header = vec!["n".to_string(), "alpha".to_string()];
    for f in &families {
        header.push(
            match f {
                ParamFamily::Weibull => "weibull_k",
                ParamFamily::LogPareto => "log_pareto_gamma",
            }
            .to_string(),
        );
    }
    w.write_record(&header)?;
    for &n in &ns {
        for &alpha in &alphas {
            let mut rec = vec![n.to_string(), format_sig(alpha)];
            for &f in &families {
                rec.push(param(f, n, alpha)?.to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn advise_cmd(a: &AdviseArgs) -> Result<(), CliError> {
    let advice = recommend_gamma(a.alpha, a.n)?;
    let rate = alpha_rate_check(advice.recommended_gamma, a.n, a.alpha, WeightRegime::EqualWeights)?;
    print_json(&json!({
        "alpha": a.alpha,
        "n": a.n,
        "recommended_gamma": advice.recommended_gamma,
        "use_landau": advice.use_landau,
        "rationale": advice.rationale,
        "rate_check": rate,
    }))
}

const LANDAU_N: [u64; 12] = [
    10,
    25,
    50,
    100,
    1_000,
    10_000,
    100_000,
    1_000_000,
    10_000_000,
    100_000_000,
    1_000_000_000,
    10_000_000_000,
];
const LANDAU_ALPHA: [f64; 6] = [0.1, 0.05, 0.01, 0.001, 0.0001, 0.00001];

fn landau_cmd(a: &LandauArgs) -> Result<(), CliError> {
    let ns = if a.n.is_empty() { LANDAU_N.to_vec() } else { a.n.clone() };
    let alphas = if a.alpha.is_empty() {
        LANDAU_ALPHA.to_vec()
    } else {
        a.alpha.clone()
    };
    let mut w = csv::Writer::from_writer(out_writer(a.output.as_deref())?);
    w.write_record(["n", "alpha", "ratio"])?;
    for &n in &ns {
        for &alpha in &alphas {
            let r = landau_tail_ratio(alpha, n)?;
            w.write_record([n.to_string(), format_sig(alpha), format_sig(r)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("scenario needs `{name}`")))
}

fn single<T: Copy>(values: &[T], flag: &str) -> Result<Option<T>, CliError> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(CliError::Usage(format!(
            "--{flag} takes a single value with --scenario"
        ))),
    }
}

fn simulate_cmd(a: &SimulateArgs, mean_spec: MeanSpec, threads: usize) -> Result<(), CliError> {
    let reps = a.reps.unwrap_or(DEFAULT_REPS);
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let Some(path) = &a.scenario else {
        let defaults = TableGrid::default();
        let grid = TableGrid {
            rhos: if a.rho.is_empty() { defaults.rhos } else { a.rho.clone() },
            ns: if a.n.is_empty() { defaults.ns } else { a.n.clone() },
            alphas: if a.alpha.is_empty() {
                defaults.alphas
            } else {
                a.alpha.clone()
            },
        };
        let rows = match mean_spec {
            MeanSpec::Null => size_table(&grid, reps, seed, threads)?,
            MeanSpec::SparseAlternative => power_table(&grid, reps, seed, threads)?,
        };
        let mut out = out_writer(a.output.as_deref())?;
        write_table_csv(&rows, &mut out)?;
        out.flush()?;
        let missing = rows.iter().flat_map(|r| &r.cells).filter(|c| c.is_none()).count();
        if missing > 0 {
            return Err(CliError::Failure(format!(
                "{missing} table cells could not be computed (written as NA)"
            )));
        }
        return Ok(());
    };

    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if file.mean_spec.is_some_and(|m| m != mean_spec) {
        return Err(CliError::Usage(
            "the scenario's mean_spec does not match the command".into(),
        ));
    }
    let mut scenario = SimulationScenario::new(
        need(single(&a.n, "n")?.or(file.n), "n")?,
        need(single(&a.rho, "rho")?.or(file.rho), "rho")?,
        need(single(&a.alpha, "alpha")?.or(file.alpha), "alpha")?,
        a.reps.or(file.replications).unwrap_or(DEFAULT_REPS),
        a.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
    )
    .with_mean(mean_spec);
    if let Some(m) = file.methods {
        scenario = scenario.with_methods(m);
    }
    let report = estimate_rejection(&scenario, threads)?;

    let mut w = csv::Writer::from_writer(out_writer(a.output.as_deref())?);
    let mut header = vec!["rho".to_string(), "n".to_string(), "alpha".to_string()];
    header.extend(report.results.iter().map(|r| r.label.clone()));
    w.write_record(&header)?;
    let mut rec = vec![
        format_sig(scenario.rho),
        scenario.n.to_string(),
        format_sig(scenario.alpha),
    ];
    rec.extend(report.results.iter().map(|r| {
        let v = match mean_spec {
            MeanSpec::Null => r.ratio_to_alpha,
            MeanSpec::SparseAlternative => r.rate,
        };
        v.map_or_else(|| "NA".to_string(), format_sig)
    }));
    w.write_record(&rec)?;
    w.flush()?;
    let failed: Vec<String> = report
        .results
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.label)))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Failure(failed.join("; ")));
    }
    Ok(())
}

fn tail_check_cmd(a: &TailCheckArgs, threads: usize) -> Result<(), CliError> {
    let cal = a.cal.build()?;
    let dependence = match a.dependence {
        DependenceKind::Iid => Dependence::Iid,
        DependenceKind::Equicorrelated => Dependence::Equicorrelated {
            rho: a
                .rho
                .ok_or_else(|| CliError::Usage("equicorrelated dependence needs --rho".into()))?,
        },
        DependenceKind::PerfectBlock => Dependence::PerfectBlock {
            m: a.m
                .ok_or_else(|| CliError::Usage("perfect-block dependence needs --m".into()))?,
        },
    };
    let rows = tail_equivalence_check(&cal, a.stat, a.n, dependence, &a.alpha, a.reps, a.seed, threads)?;
    let mut w = csv::Writer::from_writer(out_writer(a.output.as_deref())?);
    w.write_record(["alpha", "mc_tail", "mc_standard_error", "theoretical", "ratio"])?;
    for r in rows {
        w.write_record([
            format_sig(r.alpha),
            format_sig(r.mc_tail),
            format_sig(r.mc_standard_error),
            format_sig(r.theoretical),
            format_sig(r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Combine(a) => combine_cmd(a),
        Command::CriticalValue(a) => critical_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::OptimalParams(a) => optimal_cmd(a),
        Command::Advise(a) => advise_cmd(a),
        Command::LandauTable(a) => landau_cmd(a),
        Command::SimulateSize(a) => simulate_cmd(a, MeanSpec::Null, cli.threads),
        Command::SimulatePower(a) => simulate_cmd(a, MeanSpec::SparseAlternative, cli.threads),
        Command::TailCheck(a) => tail_check_cmd(a, cli.threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tailcomb: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
