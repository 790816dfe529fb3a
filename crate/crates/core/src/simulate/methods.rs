//! Method descriptors and their compilation into per-replication kernels.
//!
//! Many methods reduce to the same aggregate of the p-values (every Pareto
//! sum test and M-family merger with `r = -1/γ` is a function of
//! `Σ p_i^{-1/γ}`), so methods compile to a shared list of kernels plus a
//! threshold rule per method. A replication computes each kernel once and
//! then applies all the rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibrators::Calibrator;
use crate::combine::{
    critical_value, harmonic_mean_precise_scale, m_family_asymptotic_scale, CombinationSpec, PreparedTest, Statistic,
    WeightVector,
};
use crate::error::{Error, Result};
use crate::guidance::{optimal_logpareto_gamma_default, optimal_weibull_k, wilson_adjusted_alpha};

/// Harmonic-mean merging scales used for the `M_1` column at the test
/// counts of the published grid.
pub const M1_TABLE_SCALES: [(u64, f64); 3] = [(25, 5.76), (100, 7.45), (1000, 10.11)];

/// The columns of the size and power tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableColumn {
    #[serde(rename = "W_v")]
    WeibullOptimal,
    #[serde(rename = "T1_F0.5")]
    Pareto05,
    #[serde(rename = "M_0.5")]
    M05,
    #[serde(rename = "T1_F1")]
    Pareto1,
    #[serde(rename = "T1_W")]
    Wilson,
    #[serde(rename = "M_1")]
    M1,
    #[serde(rename = "T1_F1.5")]
    Pareto15,
    #[serde(rename = "M_1.5")]
    M15,
    #[serde(rename = "LP_v")]
    LogParetoOptimal,
    #[serde(rename = "LP_5")]
    LogPareto5,
    #[serde(rename = "Max")]
    Max,
}

impl TableColumn {
    pub const ALL: [TableColumn; 11] = [
        TableColumn::WeibullOptimal,
        TableColumn::Pareto05,
        TableColumn::M05,
        TableColumn::Pareto1,
        TableColumn::Wilson,
        TableColumn::M1,
        TableColumn::Pareto15,
        TableColumn::M15,
        TableColumn::LogParetoOptimal,
        TableColumn::LogPareto5,
        TableColumn::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableColumn::WeibullOptimal => "W_v",
            TableColumn::Pareto05 => "T1_F0.5",
            TableColumn::M05 => "M_0.5",
            TableColumn::Pareto1 => "T1_F1",
            TableColumn::Wilson => "T1_W",
            TableColumn::M1 => "M_1",
            TableColumn::Pareto15 => "T1_F1.5",
            TableColumn::M15 => "M_1.5",
            TableColumn::LogParetoOptimal => "LP_v",
            TableColumn::LogPareto5 => "LP_5",
            TableColumn::Max => "Max",
        }
    }

    /// The concrete method this column runs at `(n, α)`.
    pub fn resolve(self, n: usize, alpha: f64) -> Result<Method> {
        let n64 = n as u64;
        let sum = |cal: Result<Calibrator>| -> Result<Method> {
            Ok(Method::Calibrated {
                calibrator: cal?,
                statistic: Statistic::Sum,
            })
        };
        match self {
            TableColumn::WeibullOptimal => sum(Calibrator::weibull(optimal_weibull_k(n64, alpha)?)),
            TableColumn::Pareto05 => sum(Calibrator::pareto(0.5)),
            TableColumn::Pareto1 => sum(Calibrator::pareto(1.0)),
            TableColumn::Pareto15 => sum(Calibrator::pareto(1.5)),
            TableColumn::Wilson => Ok(Method::Wilson),
            TableColumn::M05 => Ok(Method::MFamily {
                r: -2.0,
                a_tilde: m_family_asymptotic_scale(-2.0, n64)?.value,
            }),
            TableColumn::M1 => {
                let a_tilde = match M1_TABLE_SCALES.iter().find(|(m, _)| *m == n64) {
                    Some(&(_, a)) => a,
                    None => harmonic_mean_precise_scale(n64)?,
                };
                Ok(Method::MFamily { r: -1.0, a_tilde })
            }
            TableColumn::M15 => {
                let r = -1.0 / 1.5;
                Ok(Method::MFamily {
                    r,
                    a_tilde: m_family_asymptotic_scale(r, n64)?.value,
                })
            }
            TableColumn::LogParetoOptimal => sum(Calibrator::log_pareto(optimal_logpareto_gamma_default(n64, alpha)?)),
            TableColumn::LogPareto5 => sum(Calibrator::log_pareto(5.0)),
            TableColumn::Max => Ok(Method::Bonferroni),
        }
    }
}

impl fmt::Display for TableColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableColumn::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown table column `{s}`")))
    }
}

/// A rejection rule evaluated on each simulated p-value vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Equal-weight calibrated statistic against `t_{α,n}`.
    Calibrated {
        calibrator: Calibrator,
        #[serde(default = "default_statistic")]
        statistic: Statistic,
    },
    /// Reject when `ã · M_{r,n}(p) ≤ α`.
    MFamily { r: f64, a_tilde: f64 },
    /// Pareto(1) sum, rejecting when `T₁ < α_wilson(α, n)`.
    Wilson,
    /// Reject when `min p < α/n`.
    Bonferroni,
    /// A table column, resolved at the scenario's `(n, α)`.
    Column { column: TableColumn },
}

fn default_statistic() -> Statistic {
    Statistic::Sum
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Calibrated { calibrator, statistic } => format!("{statistic}:{calibrator}"),
            Method::MFamily { r, a_tilde } => format!("M(r={r}, a={a_tilde})"),
            Method::Wilson => "wilson".into(),
            Method::Bonferroni => "bonferroni".into(),
            Method::Column { column } => column.name().into(),
        }
    }
}

/// Aggregates of one p-value vector.
#[derive(Debug, Clone, PartialEq)]
enum Kernel {
    /// `Σ p_i^r`.
    PowerSum(f64),
    /// `Σ (-log p_i)^{1/k}`.
    WeibullSum(f64),
    /// `log Σ exp(p_i^{-1/γ})`.
    LogParetoLogSum(f64),
    MinP,
    /// Indicator from a general prepared test.
    Generic(Box<PreparedTest>),
}

impl Kernel {
    fn needs_ln(&self) -> bool {
        match self {
            Kernel::PowerSum(r) => *r != -1.0 && *r != -2.0 && *r != 1.0,
            Kernel::WeibullSum(_) | Kernel::LogParetoLogSum(_) => true,
            Kernel::MinP | Kernel::Generic(_) => false,
        }
    }

    #[inline]
    fn eval(&self, p: &[f64], ln_p: &[f64]) -> f64 {
        match self {
            Kernel::PowerSum(r) => {
                if *r == -1.0 {
                    p.iter().map(|&x| 1.0 / x).sum()
                } else if *r == -2.0 {
                    p.iter().map(|&x| 1.0 / (x * x)).sum()
                } else if *r == 1.0 {
                    p.iter().sum()
                } else {
                    ln_p.iter().map(|&l| (r * l).exp()).sum()
                }
            }
            Kernel::WeibullSum(inv_k) => ln_p.iter().map(|&l| (inv_k * (-l).ln()).exp()).sum(),
            Kernel::LogParetoLogSum(inv_gamma) => {
                // ln X_i = p_i^{-1/γ}; log-sum-exp around the largest.
                let m = ln_p.iter().fold(f64::INFINITY, |a, &l| a.min(l));
                let top = (-inv_gamma * m).exp();
                let s: f64 = ln_p.iter().map(|&l| ((-inv_gamma * l).exp() - top).exp()).sum();
                top + s.ln()
            }
            Kernel::MinP => p.iter().copied().fold(f64::INFINITY, f64::min),
            Kernel::Generic(test) => {
                if test.rejects(p) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    Above(f64),
    AtLeast(f64),
    AtMost(f64),
    Below(f64),
    Flag,
}

impl Rule {
    #[inline]
    fn rejects(self, v: f64) -> bool {
        match self {
            Rule::Above(t) => v > t,
            Rule::AtLeast(t) => v >= t,
            Rule::AtMost(t) => v <= t,
            Rule::Below(t) => v < t,
            Rule::Flag => v > 0.5,
        }
    }
}

/// Kernels and rules for a set of (method, level) pairs at one `n`.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    kernels: Vec<Kernel>,
    needs_ln: bool,
    /// `(kernel index, rule)` per decision, or `None` when the method
    /// could not be set up at that level.
    decisions: Vec<Option<(usize, Rule)>>,
}

/// Outcome of compiling one (method, level) pair.
pub(crate) type Compiled = std::result::Result<(), Error>;

impl Plan {
    pub fn new(n: usize, entries: &[(Method, f64)]) -> (Plan, Vec<Compiled>) {
        let mut plan = Plan {
            kernels: Vec::new(),
            needs_ln: false,
            decisions: Vec::with_capacity(entries.len()),
        };
        let mut status = Vec::with_capacity(entries.len());
        for (method, alpha) in entries {
            match compile(method, n, *alpha) {
                Ok((kernel, rule)) => {
                    let idx = plan.intern(kernel);
                    plan.decisions.push(Some((idx, rule)));
                    status.push(Ok(()));
                }
                Err(e) => {
                    plan.decisions.push(None);
                    status.push(Err(e));
                }
            }
        }
        plan.needs_ln = plan.kernels.iter().any(Kernel::needs_ln);
        (plan, status)
    }

    fn intern(&mut self, kernel: Kernel) -> usize {
        if !matches!(kernel, Kernel::Generic(_)) {
            if let Some(i) = self.kernels.iter().position(|k| *k == kernel) {
                return i;
            }
        }
        self.kernels.push(kernel);
        self.kernels.len() - 1
    }

    pub fn width(&self) -> usize {
        self.decisions.len()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            ln_p: Vec::new(),
            values: vec![0.0; self.kernels.len()],
        }
    }

    /// Adds one to `counts[d]` for every rejecting decision `d`.
    #[inline]
    pub fn tally(&self, p: &[f64], scratch: &mut Scratch, counts: &mut [u64]) {
        if self.needs_ln {
            scratch.ln_p.clear();
            scratch.ln_p.extend(p.iter().map(|x| x.ln()));
        }
        for (v, k) in scratch.values.iter_mut().zip(&self.kernels) {
            *v = k.eval(p, &scratch.ln_p);
        }
        for (c, d) in counts.iter_mut().zip(&self.decisions) {
            if let Some((k, rule)) = d {
                if rule.rejects(scratch.values[*k]) {
                    *c += 1;
                }
            }
        }
    }
}

pub(crate) struct Scratch {
    ln_p: Vec<f64>,
    values: Vec<f64>,
}

fn compile(method: &Method, n: usize, alpha: f64) -> Result<(Kernel, Rule)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("significance level must lie in (0, 1)", alpha));
    }
    let nf = n as f64;
    match method {
        Method::Column { column } => compile(&column.resolve(n, alpha)?, n, alpha),
        Method::Bonferroni => Ok((Kernel::MinP, Rule::Below(alpha / nf))),
        Method::Wilson => {
            let a_w = wilson_adjusted_alpha(alpha, n as u64)?;
            // T₁ = n / Σ(1/p) < α_w.
            Ok((Kernel::PowerSum(-1.0), Rule::Above(nf / a_w)))
        }
        Method::MFamily { r, a_tilde } => {
            if *r == 0.0 || !r.is_finite() {
                return Err(Error::domain("power-mean exponent must be finite and nonzero", *r));
            }
            if !(*a_tilde > 0.0 && a_tilde.is_finite()) {
                return Err(Error::param("a_tilde", *a_tilde, "must be positive and finite"));
            }
            // ã ((Σ p^r)/n)^{1/r} ≤ α  ⇔  Σ p^r ≥ n (α/ã)^r for r < 0.
            let c = nf * (alpha / a_tilde).powf(*r);
            let rule = if *r < 0.0 { Rule::AtLeast(c) } else { Rule::AtMost(c) };
            Ok((Kernel::PowerSum(*r), rule))
        }
        Method::Calibrated { calibrator, statistic } => {
            let weights = WeightVector::equal(n)?;
            let positive_sum = *statistic == Statistic::Sum
                || (*statistic == Statistic::CumsumMax && calibrator.has_positive_support());
            if *statistic == Statistic::Max {
                return Ok((Kernel::MinP, Rule::Below(alpha / nf)));
            }
            if positive_sum {
                match *calibrator {
                    Calibrator::Pareto { gamma } => {
                        let t = critical_value(alpha, calibrator, &weights)?;
                        return Ok((Kernel::PowerSum(-1.0 / gamma), Rule::Above(nf * t)));
                    }
                    Calibrator::Weibull { k } => {
                        let t = critical_value(alpha, calibrator, &weights)?;
                        return Ok((Kernel::WeibullSum(1.0 / k), Rule::Above(nf * t)));
                    }
                    Calibrator::LogPareto { gamma } => {
                        // Σ X_i > F̄⁻¹(α/n), compared on the log scale.
                        let y = calibrator.ln_inverse_survival(alpha / nf)?;
                        return Ok((Kernel::LogParetoLogSum(1.0 / gamma), Rule::Above(y)));
                    }
                    _ => {}
                }
            }
            let spec = CombinationSpec::new(*statistic, *calibrator, weights);
            Ok((Kernel::Generic(Box::new(spec.prepare(alpha)?)), Rule::Flag))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_names_round_trip() {
        for c in TableColumn::ALL {
            assert_eq!(c.name().parse::<TableColumn>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
    }

    #[test]
    fn column_resolution() {
        let m = TableColumn::M05.resolve(25, 0.01).unwrap();
        assert_eq!(
            m,
            Method::MFamily {
                r: -2.0,
                a_tilde: 250.0
            }
        );
        let m = TableColumn::M1.resolve(100, 0.01).unwrap();
        assert_eq!(m, Method::MFamily { r: -1.0, a_tilde: 7.45 });
        match TableColumn::M1.resolve(50, 0.01).unwrap() {
            Method::MFamily { a_tilde, .. } => {
                assert!((a_tilde - harmonic_mean_precise_scale(50).unwrap()).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
        match TableColumn::LogParetoOptimal.resolve(25, 0.1).unwrap() {
            Method::Calibrated { calibrator, .. } => assert_eq!(calibrator, Calibrator::log_pareto(3.346).unwrap()),
            other => panic!("{other:?}"),
        }
    }

    /// Every compiled rule agrees with the direct definition of the method.
    #[test]
    fn compiled_rules_match_direct_evaluation() {
        use crate::combine::m_family;
        let n = 12;
        let vectors: Vec<Vec<f64>> = (0..400)
            .map(|s| {
                (0..n)
                    .map(|i| {
                        let u = ((s * 7919 + i * 104_729) % 100_003) as f64 / 100_003.0;
                        (u * u * u).clamp(1e-9, 0.999)
                    })
                    .collect()
            })
            .collect();
        let alpha = 0.05;
        let methods: Vec<Method> = TableColumn::ALL.iter().map(|c| Method::Column { column: *c }).collect();
        let entries: Vec<(Method, f64)> = methods.iter().map(|m| (m.clone(), alpha)).collect();
        let (plan, status) = Plan::new(n, &entries);
        assert!(status.iter().all(|s| s.is_ok()));
        let mut scratch = plan.scratch();
        let a_w = wilson_adjusted_alpha(alpha, n as u64).unwrap();
        let mut disagreements = 0;
        for p in &vectors {
            let mut counts = vec![0u64; plan.width()];
            plan.tally(p, &mut scratch, &mut counts);
            for (j, c) in TableColumn::ALL.iter().enumerate() {
                let direct = match c.resolve(n, alpha).unwrap() {
                    Method::Calibrated { calibrator, statistic } => {
                        CombinationSpec::equal(statistic, calibrator, n)
                            .unwrap()
                            .test(p, alpha)
                            .unwrap()
                            .reject
                    }
                    Method::MFamily { r, a_tilde } => m_family(p, r, a_tilde).unwrap() <= alpha,
                    Method::Wilson => {
                        let spec = CombinationSpec::equal(Statistic::Sum, Calibrator::pareto(1.0).unwrap(), n).unwrap();
                        spec.combining_function(p).unwrap() < a_w
                    }
                    Method::Bonferroni => p.iter().copied().fold(1.0, f64::min) < alpha / n as f64,
                    Method::Column { .. } => unreachable!(),
                };
                if direct != (counts[j] == 1) {
                    disagreements += 1;
                }
            }
        }
        // Rounding can only matter on exact ties, which these inputs avoid.
        assert_eq!(disagreements, 0);
    }
}
