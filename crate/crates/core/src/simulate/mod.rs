//! Monte Carlo size and power engine.
//!
//! Test statistics are `Y ~ N(μ, Σ)` with equicorrelated `Σ` (unit
//! variances, correlation `ρ ≥ 0`), generated through one common factor:
//! `Y_i = μ_i + √ρ Z₀ + √(1-ρ) Z_i`. P-values are two-sided,
//! `U_i = 2 - 2Φ(|Y_i|)`.

mod methods;
mod rng;
mod tables;

use std::time::Instant;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibrators::Calibrator;
use crate::combine::{critical_value, CombinationSpec, Statistic, WeightVector};
use crate::error::{Error, Result};
use crate::normal;
use crate::stable_dist::gclt_normalize;

pub use methods::{Method, TableColumn, M1_TABLE_SCALES};
pub use tables::{format_sig, power_table, size_table, write_table_csv, TableGrid, TableKind, TableRow};

use methods::Plan;
use rng::{count_parallel, map_parallel, StreamFactory};

/// Mean vector of the test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanSpec {
    /// Global null, `μ = 0`.
    #[default]
    Null,
    /// The first `s = ⌊0.05 n⌋` means equal `√(4 log n)/s^{0.1}`, the rest 0.
    SparseAlternative,
}

impl MeanSpec {
    pub fn means(self, n: usize) -> Result<Vec<f64>> {
        match self {
            MeanSpec::Null => Ok(vec![0.0; n]),
            MeanSpec::SparseAlternative => {
                let s = (0.05 * n as f64).floor() as usize;
                if s == 0 {
                    return Err(Error::Usage(format!(
                        "the sparse alternative needs ⌊0.05 n⌋ ≥ 1, i.e. n ≥ 20 (got n = {n})"
                    )));
                }
                let mu = (4.0 * (n as f64).ln()).sqrt() / (s as f64).powf(0.1);
                let mut m = vec![0.0; n];
                m[..s].fill(mu);
                Ok(m)
            }
        }
    }
}

fn default_methods() -> Vec<Method> {
    TableColumn::ALL
        .iter()
        .map(|&column| Method::Column { column })
        .collect()
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub replications: u64,
    pub seed: u64,
    #[serde(default)]
    pub mean_spec: MeanSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

impl SimulationScenario {
    /// A null scenario running every table column.
    pub fn new(n: usize, rho: f64, alpha: f64, replications: u64, seed: u64) -> Self {
        SimulationScenario {
            n,
            rho,
            alpha,
            replications,
            seed,
            mean_spec: MeanSpec::Null,
            methods: default_methods(),
        }
    }

    pub fn with_mean(mut self, mean_spec: MeanSpec) -> Self {
        self.mean_spec = mean_spec;
        self
    }

    pub fn with_methods(mut self, methods: Vec<Method>) -> Self {
        self.methods = methods;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Usage("number of tests must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::param("rho", self.rho, "must lie in [0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("significance level must lie in (0, 1)", self.alpha));
        }
        if self.replications == 0 {
            return Err(Error::Usage("replications must be at least 1".into()));
        }
        self.mean_spec.means(self.n)?;
        Ok(())
    }
}

/// Draws equicorrelated normal statistics and converts them to p-values.
#[derive(Debug, Clone)]
pub(crate) struct PValueGenerator {
    means: Vec<f64>,
    common: f64,
    own: f64,
}

impl PValueGenerator {
    pub fn new(n: usize, rho: f64, mean_spec: MeanSpec) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::param("rho", rho, "must lie in [0, 1)"));
        }
        Ok(PValueGenerator {
            means: mean_spec.means(n)?,
            common: rho.sqrt(),
            own: (1.0 - rho).sqrt(),
        })
    }

    #[inline]
    pub fn fill_statistics<R: Rng>(&self, rng: &mut R, y: &mut Vec<f64>) {
        let z0: f64 = rng.sample(StandardNormal);
        let shift = self.common * z0;
        y.clear();
        y.extend(self.means.iter().map(|&m| {
            let z: f64 = rng.sample(StandardNormal);
            m + shift + self.own * z
        }));
    }

    #[inline]
    pub fn fill<R: Rng>(&self, rng: &mut R, p: &mut Vec<f64>) {
        self.fill_statistics(rng, p);
        for v in p.iter_mut() {
            *v = clamp_open(normal::two_sided_p(*v));
        }
    }
}

/// Keeps p-values strictly inside (0, 1); `|Y| = 0` gives exactly 1.
#[inline]
fn clamp_open(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// The p-values of replication `index`.
pub fn gen_pvalues(scenario: &SimulationScenario, index: u64) -> Result<Vec<f64>> {
    scenario.validate()?;
    let g = PValueGenerator::new(scenario.n, scenario.rho, scenario.mean_spec)?;
    let mut rng = StreamFactory::new(scenario.seed).stream(index);
    let mut p = Vec::with_capacity(scenario.n);
    g.fill(&mut rng, &mut p);
    Ok(p)
}

/// The statistics `Y` of replication `index` (before the p-value map).
pub fn gen_statistics(scenario: &SimulationScenario, index: u64) -> Result<Vec<f64>> {
    scenario.validate()?;
    let g = PValueGenerator::new(scenario.n, scenario.rho, scenario.mean_spec)?;
    let mut rng = StreamFactory::new(scenario.seed).stream(index);
    let mut y = Vec::with_capacity(scenario.n);
    g.fill_statistics(&mut rng, &mut y);
    Ok(y)
}

/// Per-method outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub label: String,
    pub alpha: f64,
    pub rejections: Option<u64>,
    pub rate: Option<f64>,
    /// `√(rate (1 - rate) / replications)`.
    pub mc_standard_error: Option<f64>,
    /// `rate / α`.
    pub ratio_to_alpha: Option<f64>,
    pub error: Option<String>,
}

impl MethodResult {
    fn from_count(label: String, alpha: f64, count: u64, reps: u64) -> Self {
        let rate = count as f64 / reps as f64;
        MethodResult {
            label,
            alpha,
            rejections: Some(count),
            rate: Some(rate),
            mc_standard_error: Some((rate * (1.0 - rate) / reps as f64).sqrt()),
            ratio_to_alpha: Some(rate / alpha),
            error: None,
        }
    }

    fn failed(label: String, alpha: f64, error: &Error) -> Self {
        MethodResult {
            label,
            alpha,
            rejections: None,
            rate: None,
            mc_standard_error: None,
            ratio_to_alpha: None,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionReport {
    pub scenario: SimulationScenario,
    pub results: Vec<MethodResult>,
    pub wall_time_secs: f64,
}

impl RejectionReport {
    pub fn result(&self, label: &str) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.label == label)
    }
}

/// Counts rejections of every `(method, α)` pair over common draws.
/// Returns one entry per pair: the count, or the setup error.
pub(crate) fn count_rejections(
    n: usize,
    rho: f64,
    mean_spec: MeanSpec,
    entries: &[(Method, f64)],
    replications: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<std::result::Result<u64, Error>>> {
    let generator = PValueGenerator::new(n, rho, mean_spec)?;
    let (plan, status) = Plan::new(n, entries);
    let streams = StreamFactory::new(seed);
    let counts = count_parallel(
        replications,
        plan.width(),
        threads,
        || (Vec::with_capacity(n), plan.scratch()),
        |(p, scratch), i, counts| {
            let mut rng = streams.stream(i);
            generator.fill(&mut rng, p);
            plan.tally(p, scratch, counts);
        },
    )?;
    Ok(status.into_iter().zip(counts).map(|(s, c)| s.map(|()| c)).collect())
}

/// Rejection rates of every method in the scenario. `threads = 0` uses all
/// available cores. The counts do not depend on `threads`.
pub fn estimate_rejection(scenario: &SimulationScenario, threads: usize) -> Result<RejectionReport> {
    scenario.validate()?;
    let start = Instant::now();
    let entries: Vec<(Method, f64)> = scenario.methods.iter().map(|m| (m.clone(), scenario.alpha)).collect();
    let counts = count_rejections(
        scenario.n,
        scenario.rho,
        scenario.mean_spec,
        &entries,
        scenario.replications,
        scenario.seed,
        threads,
    )?;
    let results = scenario
        .methods
        .iter()
        .zip(counts)
        .map(|(m, c)| match c {
            Ok(count) => MethodResult::from_count(m.label(), scenario.alpha, count, scenario.replications),
            Err(e) => MethodResult::failed(m.label(), scenario.alpha, &e),
        })
        .collect();
    Ok(RejectionReport {
        scenario: scenario.clone(),
        results,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Dependence structure for [`tail_equivalence_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Dependence {
    Iid,
    Equicorrelated {
        rho: f64,
    },
    /// `m` independent p-values followed by `n - m` identical ones.
    PerfectBlock {
        m: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub alpha: f64,
    /// Monte Carlo estimate of `P(S_j > t_{α,n})`.
    pub mc_tail: f64,
    pub mc_standard_error: f64,
    /// Sum over independent components of their marginal tail
    /// probabilities `P(w_i X_i > t)` (a block counts as one component).
    pub theoretical: f64,
    pub ratio: f64,
}

/// Compares the tail of an equal-weight statistic with the sum of the
/// marginal tails of its independent components.
#[allow(clippy::too_many_arguments)]
pub fn tail_equivalence_check(
    cal: &Calibrator,
    statistic: Statistic,
    n: usize,
    dependence: Dependence,
    alpha_grid: &[f64],
    replications: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<TailRow>> {
    if n == 0 || replications == 0 {
        return Err(Error::Usage("need n ≥ 1 and at least one replication".into()));
    }
    let weights = WeightVector::equal(n)?;
    let spec = CombinationSpec::new(statistic, *cal, weights.clone());
    let tests = alpha_grid
        .iter()
        .map(|&a| spec.prepare(a))
        .collect::<Result<Vec<_>>>()?;
    let m = match dependence {
        Dependence::PerfectBlock { m } => {
            if m + 2 > n {
                return Err(Error::Usage(format!(
                    "a perfect block needs n - m ≥ 2 (n = {n}, m = {m})"
                )));
            }
            m
        }
        _ => 0,
    };
    let generator = match dependence {
        Dependence::Equicorrelated { rho } => Some(PValueGenerator::new(n, rho, MeanSpec::Null)?),
        _ => None,
    };
    let streams = StreamFactory::new(seed);
    let counts = count_parallel(
        replications,
        tests.len(),
        threads,
        || Vec::with_capacity(n),
        |p: &mut Vec<f64>, i, counts| {
            let mut rng = streams.stream(i);
            match (&generator, dependence) {
                (Some(g), _) => g.fill(&mut rng, p),
                (None, Dependence::PerfectBlock { .. }) => {
                    p.clear();
                    p.extend((0..m).map(|_| rng.sample::<f64, _>(Open01)));
                    let shared: f64 = rng.sample(Open01);
                    p.resize(n, shared);
                }
                (None, _) => {
                    p.clear();
                    p.extend((0..n).map(|_| rng.sample::<f64, _>(Open01)));
                }
            }
            for (c, t) in counts.iter_mut().zip(&tests) {
                if t.rejects(p) {
                    *c += 1;
                }
            }
        },
    )?;
    let nf = n as f64;
    alpha_grid
        .iter()
        .zip(counts)
        .map(|(&alpha, count)| {
            let t = critical_value(alpha, cal, &weights)?;
            let marginal = alpha / nf;
            let theoretical = match (dependence, statistic) {
                (Dependence::PerfectBlock { .. }, Statistic::Max) => (m as f64 + 1.0) * marginal,
                (Dependence::PerfectBlock { .. }, _) => {
                    // The block contributes P((n-m) X / n > t).
                    m as f64 * marginal + cal.survival(nf * t / (n - m) as f64)
                }
                _ => alpha,
            };
            let rate = count as f64 / replications as f64;
            Ok(TailRow {
                alpha,
                mc_tail: rate,
                mc_standard_error: (rate * (1.0 - rate) / replications as f64).sqrt(),
                theoretical,
                ratio: rate / theoretical,
            })
        })
        .collect()
}

/// Estimate of `P(T_j < ε)` under iid uniform p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformTailEstimate {
    pub epsilon: f64,
    pub count: u64,
    pub rate: f64,
    pub mc_standard_error: f64,
}

/// `P(T_j < ε)` for each spec (all with the same `n`) over iid uniform
/// p-values, sharing draws across specs.
pub fn uniform_tail_probability(
    specs: &[CombinationSpec],
    epsilon: f64,
    replications: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<UniformTailEstimate>> {
    let n = match specs.first() {
        Some(s) => s.n(),
        None => return Ok(Vec::new()),
    };
    if specs.iter().any(|s| s.n() != n) {
        return Err(Error::Usage("all specs must have the same number of tests".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain("ε must lie in (0, 1)", epsilon));
    }
    // Validate once so the per-replication evaluation cannot fail.
    let probe = vec![0.5; n];
    for s in specs {
        s.combining_function(&probe)?;
    }
    let streams = StreamFactory::new(seed);
    let counts = count_parallel(
        replications,
        specs.len(),
        threads,
        || Vec::with_capacity(n),
        |p: &mut Vec<f64>, i, counts| {
            let mut rng = streams.stream(i);
            p.clear();
            p.extend((0..n).map(|_| rng.sample::<f64, _>(Open01)));
            for (c, s) in counts.iter_mut().zip(specs) {
                if s.combining_function(p).is_ok_and(|t| t < epsilon) {
                    *c += 1;
                }
            }
        },
    )?;
    Ok(counts
        .into_iter()
        .map(|count| {
            let rate = count as f64 / replications as f64;
            UniformTailEstimate {
                epsilon,
                count,
                rate,
                mc_standard_error: (epsilon * (1.0 - epsilon) / replications as f64).sqrt(),
            }
        })
        .collect())
}

/// Normalized equal-weight Pareto(γ) sums of iid uniform p-values, one per
/// replication (see [`gclt_normalize`]).
pub fn gclt_samples(n: u64, gamma: f64, replications: u64, seed: u64, threads: usize) -> Result<Vec<f64>> {
    gclt_normalize(1.0, n, gamma)?;
    let inv = 1.0 / gamma;
    let nf = n as f64;
    let streams = StreamFactory::new(seed);
    map_parallel(
        replications,
        threads,
        || (),
        |_, i| {
            let mut rng = streams.stream(i);
            let total: f64 = (0..n)
                .map(|_| {
                    let u: f64 = rng.sample(Open01);
                    if gamma == 1.0 {
                        1.0 / u
                    } else {
                        u.powf(-inv)
                    }
                })
                .sum();
            gclt_normalize(total / nf, n, gamma).expect("validated above")
        },
    )
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if samples.is_empty() {
        return Err(Error::Usage("empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    Ok(d)
}
