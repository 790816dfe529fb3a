//! Combination statistics, critical values and combining functions.
//!
//! With `X_i = F̄⁻¹(p_i)` and weights `w_i`:
//!
//! - `S₁ = Σ w_i X_i`
//! - `S₂ = max_k Σ_{i≤k} w_i X_i`
//! - `S₃ = max_i w_i X_i`
//!
//! The test rejects the global null when `S_j` exceeds `t_{α,n}`. For
//! regularly varying calibrators (index `γ`) the statistic also maps to a
//! p-value scale, `T_j = F̄(a_{n,γ} S_j)` with `a_{n,γ} = (Σ E w_i^γ)^{-1/γ}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibrators::Calibrator;
use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Which aggregate of the calibrated values to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// `S₁`, the weighted sum.
    Sum,
    /// `S₂`, the largest prefix sum.
    #[serde(alias = "cumsum")]
    CumsumMax,
    /// `S₃`, the weighted maximum.
    Max,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Sum, Statistic::CumsumMax, Statistic::Max];

    /// The index `j` in `S_j`.
    pub fn index(self) -> u8 {
        match self {
            Statistic::Sum => 1,
            Statistic::CumsumMax => 2,
            Statistic::Max => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Sum => "sum",
            Statistic::CumsumMax => "cumsum",
            Statistic::Max => "max",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" | "1" => Ok(Statistic::Sum),
            "cumsum" | "cumsum-max" | "cumsum_max" | "2" => Ok(Statistic::CumsumMax),
            "max" | "3" => Ok(Statistic::Max),
            other => Err(Error::Usage(format!("unknown statistic `{other}`"))),
        }
    }
}

/// Combination weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightVector {
    /// `w_i = 1/n`.
    Equal { n: usize },
    /// Nonrandom weights summing to one.
    Fixed(Vec<f64>),
    /// Random weights: the realization used in the statistic, together with
    /// the means `E w_i` (summing to one) and the moments `E w_i^γ` at a
    /// single order `γ`, which is all the scaling and critical-value
    /// formulas need.
    Random {
        realized: Vec<f64>,
        means: Vec<f64>,
        moment_order: f64,
        moments: Vec<f64>,
    },
}

impl WeightVector {
    pub fn equal(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("at least one p-value is required".into()));
        }
        Ok(WeightVector::Equal { n })
    }

    pub fn fixed(weights: Vec<f64>) -> Result<Self> {
        check_weights("weight", &weights)?;
        check_unit_sum(&weights, "weights")?;
        Ok(WeightVector::Fixed(weights))
    }

    pub fn random(realized: Vec<f64>, means: Vec<f64>, moment_order: f64, moments: Vec<f64>) -> Result<Self> {
        if realized.len() != means.len() || means.len() != moments.len() {
            return Err(Error::Usage(format!(
                "random weights need matching lengths (realized {}, means {}, moments {})",
                realized.len(),
                means.len(),
                moments.len()
            )));
        }
        check_weights("realized weight", &realized)?;
        check_weights("mean weight", &means)?;
        if !(moment_order > 0.0 && moment_order.is_finite()) {
            return Err(Error::param("moment_order", moment_order, "must be positive"));
        }
        if let Some(&m) = moments.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::param("moment", m, "must be positive and finite"));
        }
        check_unit_sum(&means, "mean weights")?;
        Ok(WeightVector::Random {
            realized,
            means,
            moment_order,
            moments,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            WeightVector::Equal { n } => *n,
            WeightVector::Fixed(w) => w.len(),
            WeightVector::Random { realized, .. } => realized.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_equal(&self) -> bool {
        matches!(self, WeightVector::Equal { .. })
    }

    /// The weight applied to the `i`-th calibrated value.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match self {
            WeightVector::Equal { n } => 1.0 / *n as f64,
            WeightVector::Fixed(w) => w[i],
            WeightVector::Random { realized, .. } => realized[i],
        }
    }

    /// `Σ E w_i^γ`.
    pub fn gamma_moment_sum(&self, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain("tail index must be positive", gamma));
        }
        match self {
            WeightVector::Equal { n } => Ok((*n as f64).powf(1.0 - gamma)),
            WeightVector::Fixed(w) => Ok(w.iter().map(|x| x.powf(gamma)).sum()),
            WeightVector::Random {
                moment_order, moments, ..
            } => {
                if *moment_order != gamma {
                    return Err(Error::Usage(format!(
                        "random weights carry moments of order {moment_order}, but order {gamma} is needed"
                    )));
                }
                Ok(moments.iter().sum())
            }
        }
    }

    fn materialize(&self) -> Option<&[f64]> {
        match self {
            WeightVector::Equal { .. } => None,
            WeightVector::Fixed(w) => Some(w),
            WeightVector::Random { realized, .. } => Some(realized),
        }
    }
}

fn check_weights(what: &'static str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Usage("weight vector is empty".into()));
    }
    if let Some(&x) = w.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(Error::domain(
            match what {
                "weight" => "weights must lie in (0, 1]",
                "realized weight" => "realized weights must lie in (0, 1]",
                _ => "mean weights must lie in (0, 1]",
            },
            x,
        ));
    }
    Ok(())
}

fn check_unit_sum(w: &[f64], what: &str) -> Result<()> {
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Usage(format!("{what} sum to {total}, not 1")));
    }
    Ok(())
}

/// `a_{n,γ} = (Σ E w_i^γ)^{-1/γ}`.
pub fn a_n_gamma(weights: &WeightVector, gamma: f64) -> Result<f64> {
    if let WeightVector::Equal { n } = *weights {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain("tail index must be positive", gamma));
        }
        return Ok((n as f64).powf((gamma - 1.0) / gamma));
    }
    Ok(weights.gamma_moment_sum(gamma)?.powf(-1.0 / gamma))
}

/// `S_j` for the given calibrator and weights.
pub fn combine(spec: &CombinationSpec, pvalues: &[f64]) -> Result<f64> {
    spec.statistic_value(pvalues)
}

/// `T_j = F̄(a_{n,γ} S_j)`; defined for regularly varying calibrators only.
pub fn combining_function(spec: &CombinationSpec, pvalues: &[f64]) -> Result<f64> {
    spec.combining_function(pvalues)
}

/// `t_{α,n}`: the statistic threshold for a level-`α` test.
///
/// Equal weights give `F̄⁻¹(α/n)/n` for any calibrator. Other weights need
/// a regularly varying calibrator and give `F̄⁻¹(α / Σ E w_i^γ)`. The value
/// overflows to `+∞` for log-Pareto calibrators at small `α/n`; see
/// [`ln_critical_value`].
pub fn critical_value(alpha: f64, cal: &Calibrator, weights: &WeightVector) -> Result<f64> {
    let q = critical_tail(alpha, cal, weights)?;
    let x = cal.inverse_survival(q)?;
    Ok(match weights {
        WeightVector::Equal { n } => x / *n as f64,
        _ => x,
    })
}

/// `ln t_{α,n}` computed without forming `t_{α,n}`; positive-support
/// calibrators only.
pub fn ln_critical_value(alpha: f64, cal: &Calibrator, weights: &WeightVector) -> Result<f64> {
    let q = critical_tail(alpha, cal, weights)?;
    let y = cal.ln_inverse_survival(q)?;
    Ok(match weights {
        WeightVector::Equal { n } => y - (*n as f64).ln(),
        _ => y,
    })
}

/// The tail probability at which the calibrator is inverted.
fn critical_tail(alpha: f64, cal: &Calibrator, weights: &WeightVector) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("significance level must lie in (0, 1)", alpha));
    }
    if weights.is_empty() {
        return Err(Error::Usage("at least one p-value is required".into()));
    }
    let q = match weights {
        WeightVector::Equal { n } => alpha / *n as f64,
        _ => {
            let gamma = cal.rv_index().ok_or_else(|| {
                Error::Unsupported(format!(
                    "critical values for unequal weights need a regularly varying calibrator; {} is not",
                    cal.family()
                ))
            })?;
            alpha / weights.gamma_moment_sum(gamma)?
        }
    };
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("α / Σ E w^γ must lie in (0, 1)", q));
    }
    Ok(q)
}

/// `ã · M_{r,n}(p)` with `M_{r,n} = {(Σ p_i^r)/n}^{1/r}`. Not truncated at one.
pub fn m_family(pvalues: &[f64], r: f64, a_tilde: f64) -> Result<f64> {
    if r == 0.0 || !r.is_finite() {
        return Err(Error::domain("power-mean exponent must be finite and nonzero", r));
    }
    if !(a_tilde > 0.0 && a_tilde.is_finite()) {
        return Err(Error::param("a_tilde", a_tilde, "must be positive and finite"));
    }
    check_pvalues(pvalues)?;
    Ok(a_tilde * power_mean(pvalues, r))
}

/// Power mean scaled by the extreme p-value that dominates it, so neither
/// `p^r` nor the sum can overflow.
#[inline]
fn power_mean(pvalues: &[f64], r: f64) -> f64 {
    let n = pvalues.len() as f64;
    let pivot = if r < 0.0 {
        pvalues.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        pvalues.iter().copied().fold(0.0, f64::max)
    };
    let s: f64 = pvalues.iter().map(|&p| (p / pivot).powf(r)).sum();
    pivot * (s / n).powf(1.0 / r)
}

/// Asymptotically precise scale `ã_{r,n}` for the M-family with `r < 0`,
/// writing `γ = -1/r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MScale {
    pub value: f64,
    /// Which closed form applies: `"(1-1/gamma)^(-gamma)"` for `r ∈ (-1, 0)`,
    /// `"log n"` for `r = -1`, `"n^(1+gamma)/(1-gamma)"` for `r < -1`.
    pub formula: &'static str,
}

pub fn m_family_asymptotic_scale(r: f64, n: u64) -> Result<MScale> {
    if !(r < 0.0 && r.is_finite()) {
        return Err(Error::Unsupported(format!(
            "asymptotic M-family scales are tabulated for r < 0 only (got {r})"
        )));
    }
    if n == 0 {
        return Err(Error::Usage("number of tests must be at least 1".into()));
    }
    let gamma = -1.0 / r;
    let nf = n as f64;
    Ok(if r == -1.0 {
        MScale {
            value: nf.ln(),
            formula: "log n",
        }
    } else if r > -1.0 {
        MScale {
            value: (1.0 - 1.0 / gamma).powf(-gamma),
            formula: "(1-1/gamma)^(-gamma)",
        }
    } else {
        MScale {
            value: nf.powf(1.0 + gamma) / (1.0 - gamma),
            formula: "n^(1+gamma)/(1-gamma)",
        }
    })
}

/// Exact (finite-`n`) scale making `ã · M_{-1,n}` a precise merging
/// function: `(y + n)² / ((y + 1) n)` where `y > 0` solves
/// `y² = n((y + 1) log(y + 1) - y)`. Defined for `n ≥ 3`.
pub fn harmonic_mean_precise_scale(n: u64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Usage(format!("the harmonic-mean scale needs n ≥ 3 (got {n})")));
    }
    let nf = n as f64;
    // Negative below the root, positive above.
    let f = |y: f64| y * y - nf * ((y + 1.0) * y.ln_1p() - y);
    let mut lo = 1e-6;
    let mut hi = nf;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    Ok((y + nf).powi(2) / ((y + 1.0) * nf))
}

/// `n · min p_i`. Not truncated at one.
pub fn bonferroni_p(pvalues: &[f64]) -> Result<f64> {
    if pvalues.is_empty() {
        return Err(Error::Usage("at least one p-value is required".into()));
    }
    let min = pvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(pvalues.len() as f64 * min)
}

fn check_pvalues(pvalues: &[f64]) -> Result<()> {
    if pvalues.is_empty() {
        return Err(Error::Usage("at least one p-value is required".into()));
    }
    if let Some(&p) = pvalues.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::domain("p-values must lie in (0, 1)", p));
    }
    Ok(())
}

/// A complete combined test: statistic, calibrator and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationSpec {
    pub statistic: Statistic,
    pub calibrator: Calibrator,
    pub weights: WeightVector,
}

/// Result of running a combined test on one p-value vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    /// `ln S_j`, reported for positive-support calibrators (where `S_j` may
    /// overflow).
    pub ln_statistic: Option<f64>,
    pub critical_value: f64,
    pub ln_critical_value: Option<f64>,
    /// `T_j`, for regularly varying calibrators.
    pub combined_p: Option<f64>,
    pub alpha: f64,
    pub reject: bool,
}

impl CombinationSpec {
    pub fn new(statistic: Statistic, calibrator: Calibrator, weights: WeightVector) -> Self {
        CombinationSpec {
            statistic,
            calibrator,
            weights,
        }
    }

    /// Equal-weight test on `n` p-values.
    pub fn equal(statistic: Statistic, calibrator: Calibrator, n: usize) -> Result<Self> {
        Ok(Self::new(statistic, calibrator, WeightVector::equal(n)?))
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, pvalues: &[f64]) -> Result<()> {
        if pvalues.len() != self.weights.len() {
            return Err(Error::Usage(format!(
                "{} p-values given for {} weights",
                pvalues.len(),
                self.weights.len()
            )));
        }
        check_pvalues(pvalues)
    }

    /// `S_j`. May be `+∞` for log-Pareto calibrators; use
    /// [`log_statistic`](Self::log_statistic) there.
    pub fn statistic_value(&self, pvalues: &[f64]) -> Result<f64> {
        self.check(pvalues)?;
        Ok(self.raw_statistic(pvalues))
    }

    /// `ln S_j` for positive-support calibrators, formed in log space.
    pub fn log_statistic(&self, pvalues: &[f64]) -> Result<f64> {
        self.check(pvalues)?;
        if !self.calibrator.has_positive_support() {
            return Err(Error::Unsupported(format!(
                "log statistic needs positive support; {} takes negative values",
                self.calibrator.family()
            )));
        }
        Ok(self.raw_log_statistic(pvalues))
    }

    #[inline]
    fn raw_statistic(&self, pvalues: &[f64]) -> f64 {
        let cal = &self.calibrator;
        let terms = pvalues
            .iter()
            .enumerate()
            .map(|(i, &p)| self.weights.weight(i) * cal.inverse_survival_unchecked(p));
        aggregate(self.statistic, terms)
    }

    fn raw_log_statistic(&self, pvalues: &[f64]) -> f64 {
        let cal = &self.calibrator;
        let logs: Vec<f64> = pvalues
            .iter()
            .enumerate()
            .map(|(i, &p)| self.weights.weight(i).ln() + cal.ln_inverse_survival_unchecked(p))
            .collect();
        match self.statistic {
            // Prefix sums of positive terms are increasing, so S₂ = S₁.
            Statistic::Sum | Statistic::CumsumMax => log_sum_exp(&logs),
            Statistic::Max => logs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `T_j = F̄(a_{n,γ} S_j)`.
    pub fn combining_function(&self, pvalues: &[f64]) -> Result<f64> {
        let gamma = self.calibrator.rv_index().ok_or_else(|| {
            Error::Unsupported(format!(
                "{} is not regularly varying, so there is no combining function; compare the statistic with critical_value instead",
                self.calibrator.family()
            ))
        })?;
        self.check(pvalues)?;
        let a = a_n_gamma(&self.weights, gamma)?;
        Ok(self.raw_combining_function(pvalues, gamma, a))
    }

    fn raw_combining_function(&self, pvalues: &[f64], gamma: f64, a: f64) -> f64 {
        match self.calibrator {
            Calibrator::Pareto { .. } => {
                // F̄(a S) = a^{-γ} S^{-γ} with S = Σ w_i p_i^{-1/γ}; factor out
                // the smallest p-value so nothing overflows.
                let pmin = pvalues.iter().copied().fold(f64::INFINITY, f64::min);
                let inv = -1.0 / gamma;
                let terms = pvalues
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| self.weights.weight(i) * (p / pmin).powf(inv));
                let scaled = aggregate(self.statistic, terms);
                (a.powf(-gamma) * pmin * scaled.powf(-gamma)).min(1.0)
            }
            _ => self.calibrator.survival(a * self.raw_statistic(pvalues)),
        }
    }

    /// Threshold `t_{α,n}` for this spec.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        critical_value(alpha, &self.calibrator, &self.weights)
    }

    /// Runs the level-`α` test.
    pub fn test(&self, pvalues: &[f64], alpha: f64) -> Result<TestOutcome> {
        let prepared = self.prepare(alpha)?;
        self.check(pvalues)?;
        let positive = self.calibrator.has_positive_support();
        let combined_p = match self.calibrator.rv_index() {
            Some(_) => Some(self.combining_function(pvalues)?),
            None => None,
        };
        Ok(TestOutcome {
            statistic: self.raw_statistic(pvalues),
            ln_statistic: positive.then(|| self.raw_log_statistic(pvalues)),
            critical_value: prepared.threshold,
            ln_critical_value: positive.then_some(prepared.ln_threshold),
            combined_p,
            alpha,
            reject: prepared.rejects(pvalues),
        })
    }

    /// Precomputes the threshold for repeated use at level `α`.
    pub fn prepare(&self, alpha: f64) -> Result<PreparedTest> {
        let threshold = self.critical_value(alpha)?;
        let ln_threshold = if self.calibrator.has_positive_support() {
            ln_critical_value(alpha, &self.calibrator, &self.weights)?
        } else {
            f64::NAN
        };
        let n = self.weights.len();
        // With equal weights the max statistic exceeds t_{α,n} exactly when
        // min p < α/n, and with a single test the sum does exactly when
        // p < α. Deciding those in p-space keeps the decision exact even
        // where the floating-point calibrator is flat.
        let rule = if n == 1 && matches!(self.weights, WeightVector::Equal { .. }) {
            Rule::MinP(alpha)
        } else if self.statistic == Statistic::Max && self.weights.is_equal() {
            Rule::MinP(alpha / n as f64)
        } else if self.calibrator.needs_log_space() {
            Rule::LogStatistic
        } else {
            Rule::Statistic
        };
        Ok(PreparedTest {
            spec: self.clone(),
            alpha,
            threshold,
            ln_threshold,
            rule,
        })
    }
}

#[inline]
fn aggregate(statistic: Statistic, terms: impl Iterator<Item = f64>) -> f64 {
    match statistic {
        Statistic::Sum => terms.sum(),
        Statistic::CumsumMax => {
            let mut acc = 0.0;
            let mut best = f64::NEG_INFINITY;
            for t in terms {
                acc += t;
                best = best.max(acc);
            }
            best
        }
        Statistic::Max => terms.fold(f64::NEG_INFINITY, f64::max),
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + logs.iter().map(|&y| (y - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    MinP(f64),
    Statistic,
    LogStatistic,
}

/// A combined test with its threshold computed once, for evaluation over
/// many p-value vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTest {
    spec: CombinationSpec,
    alpha: f64,
    threshold: f64,
    ln_threshold: f64,
    rule: Rule,
}

impl PreparedTest {
    pub fn spec(&self) -> &CombinationSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `ln t_{α,n}`; NaN for calibrators with negative support.
    pub fn ln_threshold(&self) -> f64 {
        self.ln_threshold
    }

    /// Decision on a p-value vector whose length and range the caller has
    /// already checked.
    #[inline]
    pub fn rejects(&self, pvalues: &[f64]) -> bool {
        match self.rule {
            Rule::MinP(cut) => pvalues.iter().any(|&p| p < cut),
            Rule::Statistic => {
                let s = self.spec.raw_statistic(pvalues);
                if s.is_finite() {
                    s > self.threshold
                } else {
                    s > 0.0
                }
            }
            Rule::LogStatistic => {
                let s = self.spec.raw_statistic(pvalues);
                if s.is_finite() && self.threshold.is_finite() {
                    s > self.threshold
                } else {
                    self.spec.raw_log_statistic(pvalues) > self.ln_threshold
                }
            }
        }
    }

    /// [`rejects`](Self::rejects) with input validation.
    pub fn try_rejects(&self, pvalues: &[f64]) -> Result<bool> {
        self.spec.check(pvalues)?;
        Ok(self.rejects(pvalues))
    }

    /// Weights as a slice, when not equal.
    pub fn weights(&self) -> Option<&[f64]> {
        self.spec.weights.materialize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eq(stat: Statistic, cal: Calibrator, n: usize) -> CombinationSpec {
        CombinationSpec::equal(stat, cal, n).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn statistic_examples() {
        let par = Calibrator::pareto(1.0).unwrap();
        let p = [0.01, 0.04];
        assert!(close(combine(&eq(Statistic::Sum, par, 2), &p).unwrap(), 62.5, 1e-15));
        assert!(close(combine(&eq(Statistic::Max, par, 2), &p).unwrap(), 50.0, 1e-15));
        let c = eq(Statistic::Sum, Calibrator::cauchy(), 2);
        assert!(combine(&c, &[0.5, 0.5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        let s = eq(Statistic::Sum, Calibrator::pareto(1.0).unwrap(), 2);
        assert!(matches!(combine(&s, &[0.1]), Err(Error::Usage(_))));
        assert!(matches!(combine(&s, &[0.1, 0.0]), Err(Error::Domain { .. })));
        assert!(matches!(combine(&s, &[0.1, 1.0]), Err(Error::Domain { .. })));
        assert!(matches!(combine(&s, &[0.1, f64::NAN]), Err(Error::Domain { .. })));
        assert!(WeightVector::equal(0).is_err());
        assert!(WeightVector::fixed(vec![0.5, 0.4]).is_err());
        assert!(WeightVector::fixed(vec![]).is_err());
        assert!(WeightVector::fixed(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::fixed(vec![0.25, 0.75]).is_ok());
        assert!(WeightVector::random(vec![0.5, 0.5], vec![0.3, 0.7], 1.0, vec![0.3, 0.7]).is_ok());
        assert!(WeightVector::random(vec![0.5, 0.5], vec![0.3, 0.6], 1.0, vec![0.3, 0.7]).is_err());
    }

    #[test]
    fn scaling_constant() {
        let w = WeightVector::equal(25).unwrap();
        assert_eq!(a_n_gamma(&w, 1.0).unwrap(), 1.0);
        assert!(close(a_n_gamma(&w, 0.5).unwrap(), 0.04, 1e-15));
        let half = WeightVector::fixed(vec![0.5, 0.5]).unwrap();
        assert!(close(a_n_gamma(&half, 2.0).unwrap(), 2f64.sqrt(), 1e-15));
        // Fixed weights that happen to be equal agree with the equal mode.
        let n = 8;
        let f = WeightVector::fixed(vec![0.125; 8]).unwrap();
        for g in [0.5, 1.0, 1.7] {
            let e = a_n_gamma(&WeightVector::equal(n).unwrap(), g).unwrap();
            assert!(close(a_n_gamma(&f, g).unwrap(), e, 1e-14));
        }
        let r = WeightVector::random(vec![0.5, 0.5], vec![0.5, 0.5], 0.5, vec![0.6, 0.6]).unwrap();
        assert!(close(a_n_gamma(&r, 0.5).unwrap(), 1.2f64.powf(-2.0), 1e-15));
        assert!(a_n_gamma(&r, 1.0).is_err());
    }

    #[test]
    fn combining_function_examples() {
        let par1 = Calibrator::pareto(1.0).unwrap();
        let t = combining_function(&eq(Statistic::Sum, par1, 2), &[0.01, 0.04]).unwrap();
        assert!(close(t, 0.016, 1e-14));
        let par_half = Calibrator::pareto(0.5).unwrap();
        let t = combining_function(&eq(Statistic::Sum, par_half, 1), &[0.04]).unwrap();
        assert!(close(t, 0.04, 1e-14));
        let t = combining_function(&eq(Statistic::Sum, par1, 25), &[0.01; 25]).unwrap();
        assert!(close(t, 0.01, 1e-14));
        let w = eq(Statistic::Sum, Calibrator::weibull(0.5).unwrap(), 3);
        assert!(matches!(
            combining_function(&w, &[0.1, 0.2, 0.3]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn combining_function_generic_path_matches_pareto_closed_form() {
        // Cauchy at γ=1 with equal weights: T = F̄(S₁); check against direct
        // evaluation of the arctangent form.
        let c = eq(Statistic::Sum, Calibrator::cauchy(), 3);
        let p = [0.02, 0.3, 0.9];
        let s: f64 = p.iter().map(|&q| ((0.5 - q) * std::f64::consts::PI).tan()).sum::<f64>() / 3.0;
        let expected = 0.5 - s.atan() / std::f64::consts::PI;
        assert!(close(combining_function(&c, &p).unwrap(), expected, 1e-12));
    }

    #[test]
    fn critical_value_examples() {
        let eqw = |n| WeightVector::equal(n).unwrap();
        let par = Calibrator::pareto(1.0).unwrap();
        assert!(close(critical_value(0.01, &par, &eqw(25)).unwrap(), 100.0, 1e-14));
        let wb = Calibrator::weibull(0.5).unwrap();
        let t = critical_value(0.1, &wb, &eqw(10)).unwrap();
        assert!(close(t, 100f64.ln().powi(2) / 10.0, 1e-14));
        assert!((t - 2.12076).abs() < 1e-5);
        let lp = Calibrator::log_pareto(2.0).unwrap();
        let t = critical_value(0.1, &lp, &eqw(10)).unwrap();
        assert!(close(t, 10f64.exp() / 10.0, 1e-13));
        // Pareto closed form n^{1/γ-1}/α^{1/γ}.
        for g in [0.5, 1.5, 3.0] {
            let cal = Calibrator::pareto(g).unwrap();
            let t = critical_value(0.05, &cal, &eqw(40)).unwrap();
            assert!(close(t, 40f64.powf(1.0 / g - 1.0) / 0.05f64.powf(1.0 / g), 1e-13));
        }
        // Log-space agrees and survives overflow.
        let lp = Calibrator::log_pareto(0.5).unwrap();
        assert_eq!(critical_value(1e-4, &lp, &eqw(1000)).unwrap(), f64::INFINITY);
        let y = ln_critical_value(1e-4, &lp, &eqw(1000)).unwrap();
        assert!(close(y, 1e-7f64.powf(-2.0) - 1000f64.ln(), 1e-14));
    }

    #[test]
    fn critical_value_general_weights() {
        let w = WeightVector::fixed(vec![0.5, 0.5]).unwrap();
        let par = Calibrator::pareto(2.0).unwrap();
        // Σ w^γ = 0.5, so t = F̄⁻¹(2α) = (2α)^{-1/2}.
        let t = critical_value(0.01, &par, &w).unwrap();
        assert!(close(t, 0.02f64.powf(-0.5), 1e-14));
        let wb = Calibrator::weibull(0.3).unwrap();
        assert!(matches!(critical_value(0.01, &wb, &w), Err(Error::Unsupported(_))));
        assert!(critical_value(0.0, &par, &w).is_err());
        assert!(critical_value(1.0, &par, &w).is_err());
    }

    #[test]
    fn m_family_examples() {
        assert!(close(m_family(&[0.01, 0.04], -1.0, 1.0).unwrap(), 0.016, 1e-14));
        let v = m_family(&[0.04, 0.04], -2.0, 2f64.sqrt()).unwrap();
        assert!((v - 0.056569).abs() < 1e-6);
        assert!(m_family(&[0.1], 0.0, 1.0).is_err());
        // Positive r is the ordinary power mean.
        assert!(close(m_family(&[0.2, 0.4], 1.0, 1.0).unwrap(), 0.3, 1e-15));
    }

    #[test]
    fn m_family_scale_table() {
        let s = m_family_asymptotic_scale(-0.5, 10).unwrap();
        assert!(close(s.value, 4.0, 1e-15));
        let s = m_family_asymptotic_scale(-1.0, 20).unwrap();
        assert!(close(s.value, 20f64.ln(), 1e-15));
        assert_eq!(s.formula, "log n");
        let s = m_family_asymptotic_scale(-2.0, 4).unwrap();
        assert!(close(s.value, 16.0, 1e-14));
        assert!(m_family_asymptotic_scale(0.5, 4).is_err());
    }

    #[test]
    fn harmonic_scale() {
        // Reference values from an independent root solve.
        for (n, v) in [
            (25, 5.763_796_201_98),
            (100, 7.458_675_454_15),
            (1000, 10.110_735_846_31),
        ] {
            assert!((harmonic_mean_precise_scale(n).unwrap() - v).abs() < 1e-9);
        }
        assert!(harmonic_mean_precise_scale(2).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        assert!(close(bonferroni_p(&[0.001, 0.5, 0.5]).unwrap(), 0.003, 1e-15));
        let n = 7;
        assert!(close(bonferroni_p(&vec![1.0 / n as f64; n]).unwrap(), 1.0, 1e-15));
        assert!(bonferroni_p(&[]).is_err());
    }

    #[test]
    fn cumsum_equals_sum_for_positive_support() {
        let p = [0.3, 0.01, 0.7, 0.2, 0.05];
        for cal in [
            Calibrator::pareto(0.7).unwrap(),
            Calibrator::weibull(0.4).unwrap(),
            Calibrator::truncated_cauchy(0.1).unwrap(),
        ] {
            if !cal.has_positive_support() {
                continue;
            }
            let s1 = combine(&eq(Statistic::Sum, cal, 5), &p).unwrap();
            let s2 = combine(&eq(Statistic::CumsumMax, cal, 5), &p).unwrap();
            assert_eq!(s1, s2);
        }
    }

    #[test]
    fn log_pareto_statistic_in_log_space() {
        let cal = Calibrator::log_pareto(0.5).unwrap();
        let spec = eq(Statistic::Sum, cal, 3);
        let p = [1e-5, 0.5, 0.5];
        assert_eq!(spec.statistic_value(&p).unwrap(), f64::INFINITY);
        let ln_s = spec.log_statistic(&p).unwrap();
        // Dominated by the first term: ln(e^{1e10}/3).
        assert!(close(ln_s, 1e10 - 3f64.ln(), 1e-15));
        let test = spec.test(&p, 0.05).unwrap();
        assert!(test.reject);
        let quiet = spec.test(&[0.5, 0.6, 0.7], 0.05).unwrap();
        assert!(!quiet.reject);
        let c = eq(Statistic::Sum, Calibrator::cauchy(), 3);
        assert!(matches!(c.log_statistic(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn test_outcome_fields() {
        let spec = eq(Statistic::Sum, Calibrator::pareto(1.0).unwrap(), 3);
        let out = spec.test(&[0.001, 0.2, 0.3], 0.01).unwrap();
        assert!(close(out.combined_p.unwrap(), 3.0 / (1000.0 + 5.0 + 10.0 / 3.0), 1e-14));
        assert!(out.reject);
        assert!(close(out.critical_value, 100.0, 1e-14));
    }

    fn cal_strategy() -> impl Strategy<Value = Calibrator> {
        prop_oneof![
            (0.2f64..3.0).prop_map(|g| Calibrator::pareto(g).unwrap()),
            Just(Calibrator::cauchy()),
            (0.01f64..0.49).prop_map(|d| Calibrator::truncated_cauchy(d).unwrap()),
            (0.05f64..0.95).prop_map(|k| Calibrator::weibull(k).unwrap()),
            (0.5f64..8.0).prop_map(|g| Calibrator::log_pareto(g).unwrap()),
        ]
    }

    fn pvec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..0.999_999, 1..30)
    }

    proptest! {
        #[test]
        fn sum_and_max_permutation_invariant(p in pvec(), shift in 0usize..29, g in 0.3f64..2.0) {
            let n = p.len();
            let raw: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let wv = WeightVector::Fixed(w.clone());
            let mut rp = p.clone();
            let mut rw = w.clone();
            rp.rotate_left(shift % n);
            rw.rotate_left(shift % n);
            let cal = Calibrator::pareto(g).unwrap();
            for stat in [Statistic::Sum, Statistic::Max] {
                let a = combine(&CombinationSpec::new(stat, cal, wv.clone()), &p).unwrap();
                let b = combine(&CombinationSpec::new(stat, cal, WeightVector::Fixed(rw.clone())), &rp).unwrap();
                prop_assert!(close(a, b, 1e-12));
            }
        }

        #[test]
        fn t_monotone_in_each_pvalue(p in pvec(), idx in 0usize..30, factor in 0.01f64..1.0) {
            let n = p.len();
            let i = idx % n;
            let mut q = p.clone();
            q[i] *= factor;
            for cal in [Calibrator::pareto(0.5).unwrap(), Calibrator::pareto(1.0).unwrap(), Calibrator::cauchy()] {
                for stat in Statistic::ALL {
                    let spec = eq(stat, cal, n);
                    let before = combining_function(&spec, &p).unwrap();
                    let after = combining_function(&spec, &q).unwrap();
                    prop_assert!(after <= before * (1.0 + 1e-12), "{stat} {cal}: {after} > {before}");
                }
            }
        }

        #[test]
        fn max_decision_is_bonferroni(p in pvec(), cal in cal_strategy(), alpha in 1e-5f64..0.5) {
            let n = p.len();
            let test = eq(Statistic::Max, cal, n).prepare(alpha).unwrap();
            let min = p.iter().copied().fold(1.0, f64::min);
            prop_assert_eq!(test.rejects(&p), min < alpha / n as f64);
            // The statistic comparison agrees wherever the calibrator separates the values.
            let s = combine(&eq(Statistic::Max, cal, n), &p).unwrap();
            let t = test.threshold();
            if (min - alpha / n as f64).abs() > 1e-9 * min && s.is_finite() && t.is_finite() {
                prop_assert_eq!(s > t, min < alpha / n as f64);
            }
        }

        #[test]
        fn single_test_collapses(p in 1e-6f64..0.999_999, cal in cal_strategy(), alpha in 1e-4f64..0.5) {
            for stat in Statistic::ALL {
                let test = eq(stat, cal, 1).prepare(alpha).unwrap();
                prop_assert_eq!(test.rejects(&[p]), p < alpha);
            }
        }

        #[test]
        fn eq21_identity(p in prop::collection::vec(1e-6f64..0.2, 1..40), g in prop::sample::select(vec![0.5, 1.0, 1.5])) {
            let n = p.len();
            let t = combining_function(&eq(Statistic::Sum, Calibrator::pareto(g).unwrap(), n), &p).unwrap();
            let m = m_family(&p, -1.0 / g, (n as f64).powf(1.0 - g)).unwrap().min(1.0);
            prop_assert!(close(t, m, 1e-12), "{t} vs {m}");
        }
    }

    #[test]
    fn cumsum_depends_on_order() {
        let cal = Calibrator::cauchy();
        let spec = eq(Statistic::CumsumMax, cal, 3);
        let a = combine(&spec, &[0.01, 0.99, 0.99]).unwrap();
        let b = combine(&spec, &[0.99, 0.99, 0.01]).unwrap();
        assert!(a > b);
        let s = eq(Statistic::Sum, cal, 3);
        assert!(close(
            combine(&s, &[0.01, 0.99, 0.99]).unwrap(),
            combine(&s, &[0.99, 0.99, 0.01]).unwrap(),
            1e-12
        ));
    }
}
