//! Parameter selection and diagnostics.
//!
//! Most formulas here describe the fully dependent case `U_1 = … = U_n`,
//! where the equal-weight sum test has exact size
//! `F̄(F̄⁻¹(α/n)/n)`. Choosing the calibrator parameter to make that equal
//! to `α` gives the optimal Weibull shape and log-Pareto index.

use serde::{Deserialize, Serialize};

use crate::calibrators::Calibrator;
use crate::error::{Error, Result};
use crate::normal;
use crate::stable_dist;

/// Grid of test counts used for the optimal-parameter table.
pub const TABLE_N: [u64; 5] = [25, 50, 100, 500, 1000];
/// Grid of significance levels used for the optimal-parameter table.
pub const TABLE_ALPHA: [f64; 5] = [0.1, 0.05, 0.01, 0.001, 0.0001];

/// Cutoff for "`1/α` dominates `log n`": `1/α ≥ DOMINANCE_FACTOR · log n`.
pub const DOMINANCE_FACTOR: f64 = 10.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("significance level must lie in (0, 1)", alpha));
    }
    Ok(())
}

fn check_n(n: u64, min: u64) -> Result<()> {
    if n < min {
        return Err(Error::Usage(format!(
            "number of tests must be at least {min} (got {n})"
        )));
    }
    Ok(())
}

/// Weibull shape `k = log(1 - log n / log α) / log n` at which the
/// perfectly correlated sum test has size exactly `α`.
pub fn optimal_weibull_k(n: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_n(n, 2)?;
    let ln_n = (n as f64).ln();
    let k = (-ln_n / alpha.ln()).ln_1p() / ln_n;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Domain {
            what: "no Weibull shape in (0, 1) gives exact size for this (n, α)",
            value: k,
        });
    }
    Ok(k)
}

/// The level `α(n, k) = exp(log n / (1 - n^k))` at which Weibull(k) is exact.
pub fn weibull_exact_alpha(n: u64, k: f64) -> f64 {
    let ln_n = (n as f64).ln();
    (ln_n / -(k * ln_n).exp_m1()).exp()
}

/// `ln α(n, γ)` with `α(n, γ) = ((n^{1/γ} - 1)/log n)^γ`, written so that
/// small `γ` does not overflow `n^{1/γ}`.
pub fn ln_logpareto_exact_alpha(n: u64, gamma: f64) -> f64 {
    let ln_n = (n as f64).ln();
    ln_n + gamma * (-(-ln_n / gamma).exp()).ln_1p() - gamma * ln_n.ln()
}

/// Grid point `γ ∈ {step, 2·step, …, max}` minimizing `|α - α(n, γ)|`.
pub fn optimal_logpareto_gamma(n: u64, alpha: f64, grid_step: f64, grid_max: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_n(n, 2)?;
    if !(grid_step > 0.0 && grid_max >= grid_step && grid_max.is_finite()) {
        return Err(Error::param(
            "grid_step",
            grid_step,
            "must be positive and at most grid_max",
        ));
    }
    let steps = (grid_max / grid_step + 1e-9).floor() as u64;
    // For steps like 0.001, dividing by the integer 1/step yields the
    // correctly rounded decimal grid point.
    let per_unit = (1.0 / grid_step).round();
    let decimal = (per_unit * grid_step - 1.0).abs() < 1e-12;
    let point = |i: u64| {
        if decimal {
            i as f64 / per_unit
        } else {
            i as f64 * grid_step
        }
    };
    let mut best = (f64::INFINITY, point(1));
    for i in 1..=steps {
        let gamma = point(i);
        let dist = (alpha - ln_logpareto_exact_alpha(n, gamma).exp()).abs();
        if dist < best.0 {
            best = (dist, gamma);
        }
    }
    Ok(best.1)
}

/// Default grid: step 0.001 up to 10.
pub fn optimal_logpareto_gamma_default(n: u64, alpha: f64) -> Result<f64> {
    optimal_logpareto_gamma(n, alpha, 0.001, 10.0)
}

/// `n` tests of which `m` have no perfectly correlated partner and the
/// remaining `n - m ≥ 2` are identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectCorrSetting {
    pub n: u64,
    pub m: u64,
    pub gamma: f64,
}

impl PerfectCorrSetting {
    pub fn new(n: u64, m: u64, gamma: f64) -> Result<Self> {
        if n < 2 || m > n - 2 {
            return Err(Error::Usage(format!(
                "a perfectly correlated block needs n - m ≥ 2 (n = {n}, m = {m})"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", gamma, "must be positive"));
        }
        Ok(PerfectCorrSetting { n, m, gamma })
    }
}

/// Limit of `P(S_j > t)/F̄(t)` for equal weights as `t → ∞`:
/// `{m + (n-m)^γ}/n^γ` for the sum (`j = 1`) and `(m+1)/n^γ` for the max
/// (`j = 3`).
pub fn perfect_corr_multiplier(j: u8, setting: &PerfectCorrSetting) -> Result<f64> {
    let setting = PerfectCorrSetting::new(setting.n, setting.m, setting.gamma)?;
    let n = setting.n as f64;
    let m = setting.m as f64;
    let g = setting.gamma;
    match j {
        1 => Ok((m + (n - m).powf(g)) / n.powf(g)),
        3 => Ok((m + 1.0) / n.powf(g)),
        _ => Err(Error::Usage(format!(
            "perfect-correlation multipliers exist for j = 1 or 3, not {j}"
        ))),
    }
}

/// The same multiplier without a correlated block: `n^{1-γ}`.
pub fn independent_multiplier(n: u64, gamma: f64) -> f64 {
    (n as f64).powf(1.0 - gamma)
}

/// Exact size `F̄(F̄⁻¹(α/n)/n)` of the equal-weight sum test when all `n`
/// p-values coincide.
pub fn perfect_corr_size(cal: &Calibrator, n: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_n(n, 1)?;
    let nf = n as f64;
    let q = alpha / nf;
    match *cal {
        Calibrator::Pareto { gamma } => Ok((alpha * nf.powf(gamma - 1.0)).min(1.0)),
        _ if cal.has_positive_support() => {
            let y = cal.ln_inverse_survival(q)?;
            Ok(cal.survival_at_ln(y - nf.ln()))
        }
        _ => Ok(cal.survival(cal.inverse_survival(q)? / nf)),
    }
}

/// Threshold `α_wilson` with `P(Landau(n) > 1/α_wilson) = α`.
pub fn wilson_adjusted_alpha(alpha: f64, n: u64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 / stable_dist::landau_quantile(alpha, n)?)
}

/// Approximate `P(T₁ < α)` for iid p-values via the stable limit:
/// `(1/α - log n)^{-1}` for `γ = 1` and `α` for `γ < 1`.
pub fn gclt_tail_approx(alpha: f64, n: u64, gamma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_n(n, 1)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("tail index must lie in (0, 1]", gamma));
    }
    if gamma < 1.0 {
        return Ok(alpha);
    }
    let d = 1.0 / alpha - (n as f64).ln();
    if d <= 0.0 {
        return Err(Error::Domain {
            what: "approximation needs 1/α > log n",
            value: alpha,
        });
    }
    Ok(1.0 / d)
}

/// Weighting scheme, which determines how fast `α` must shrink with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRegime {
    EqualWeights,
    NonrandomWeights,
    RandomWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateAdvisory {
    pub regime: WeightRegime,
    /// `τ` such that `α_n = o(n^{-τ})` is required.
    pub required_exponent: f64,
    /// `α · n^τ`.
    pub scaled_alpha: f64,
    /// Whether `α · n^τ` is below [`RATE_CUTOFF`].
    pub ok: bool,
}

pub const RATE_CUTOFF: f64 = 0.1;

pub fn required_rate_exponent(gamma: f64, regime: WeightRegime) -> f64 {
    match regime {
        WeightRegime::EqualWeights => {
            if gamma > 1.0 {
                gamma - 1.0
            } else {
                0.0
            }
        }
        WeightRegime::NonrandomWeights => (1.0 - gamma).abs(),
        WeightRegime::RandomWeights => {
            if gamma <= 1.0 {
                1.0 - gamma
            } else {
                2.0 * (gamma - 1.0)
            }
        }
    }
}

pub fn alpha_rate_check(gamma: f64, n: u64, alpha: f64, regime: WeightRegime) -> Result<RateAdvisory> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", gamma, "must be positive"));
    }
    check_alpha(alpha)?;
    check_n(n, 1)?;
    let tau = required_rate_exponent(gamma, regime);
    let scaled = alpha * (n as f64).powf(tau);
    Ok(RateAdvisory {
        regime,
        required_exponent: tau,
        scaled_alpha: scaled,
        ok: scaled < RATE_CUTOFF,
    })
}

/// `[Φ̄((y₁-ρy₂)/√(1-ρ²)) + Φ̄((y₁+ρy₂)/√(1-ρ²))] / (2Φ̄(y₁))`: how much
/// conditioning one of two correlated normal statistics on `|Y₂| = y₂`
/// inflates the tail of `|Y₁|`.
pub fn bvn_conditional_tail_ratio(y1: f64, y2: f64, rho: f64) -> Result<f64> {
    if !(y1 > 0.0 && y1.is_finite()) {
        return Err(Error::domain("y1 must be positive", y1));
    }
    if !(y2 > 0.0 && y2.is_finite()) {
        return Err(Error::domain("y2 must be positive", y2));
    }
    if !(rho > -1.0 && rho < 1.0 && rho != 0.0) {
        return Err(Error::domain("correlation must lie in (-1, 1) and be nonzero", rho));
    }
    let s = (1.0 - rho * rho).sqrt();
    let num = normal::sf((y1 - rho * y2) / s) + normal::sf((y1 + rho * y2) / s);
    Ok(num / (2.0 * normal::sf(y1)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaAdvice {
    pub recommended_gamma: f64,
    pub use_landau: bool,
    pub rationale: &'static str,
}

/// Pareto index advice for an equal-weight sum test.
///
/// With `α ≤ 0.01` and `1/α ≥ 10·log n`, the `γ = 1` test needs no Landau
/// adjustment. Otherwise `γ = 0.5` is recommended (the `γ = 1` test with the
/// Landau adjustment is the conservative alternative).
pub fn recommend_gamma(alpha: f64, n: u64) -> Result<GammaAdvice> {
    check_alpha(alpha)?;
    check_n(n, 1)?;
    let dominates = 1.0 / alpha >= DOMINANCE_FACTOR * (n as f64).ln();
    Ok(if alpha <= 0.01 && dominates {
        GammaAdvice {
            recommended_gamma: 1.0,
            use_landau: false,
            rationale: "small-alpha",
        }
    } else {
        GammaAdvice {
            recommended_gamma: 0.5,
            use_landau: false,
            rationale: if alpha <= 0.01 { "many-tests" } else { "large-alpha" },
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::{critical_value, WeightVector};

    #[test]
    fn weibull_table_examples() {
        assert!((optimal_weibull_k(25, 0.05).unwrap() - 0.2267).abs() < 5e-5);
        assert!((optimal_weibull_k(1000, 0.0001).unwrap() - 0.0810).abs() < 5e-5);
        assert!((optimal_weibull_k(100, 0.01).unwrap() - 0.1505).abs() < 5e-5);
        for &n in &TABLE_N {
            for &a in &TABLE_ALPHA {
                let k = optimal_weibull_k(n, a).unwrap();
                assert!((weibull_exact_alpha(n, k) - a).abs() < 1e-10 * a.max(1e-3));
            }
        }
        assert!(optimal_weibull_k(1, 0.05).is_err());
        assert!(optimal_weibull_k(10, 1.0).is_err());
    }

    #[test]
    fn logpareto_table_examples() {
        assert_eq!(optimal_logpareto_gamma_default(25, 0.1).unwrap(), 3.346);
        assert_eq!(optimal_logpareto_gamma_default(500, 0.001).unwrap(), 5.834);
        assert_eq!(optimal_logpareto_gamma_default(1000, 0.0001).unwrap(), 6.773);
    }

    #[test]
    fn logpareto_alpha_matches_direct_formula() {
        for n in [5u64, 25, 1000] {
            for g in [1.0, 2.5, 6.0] {
                let nf = n as f64;
                let direct = ((nf.powf(1.0 / g) - 1.0) / nf.ln()).powf(g);
                assert!((ln_logpareto_exact_alpha(n, g).exp() - direct).abs() < 1e-12 * direct);
            }
        }
    }

    #[test]
    fn surfaces_are_monotone() {
        for w in TABLE_N.windows(2) {
            for &a in &TABLE_ALPHA {
                assert!(optimal_weibull_k(w[1], a).unwrap() < optimal_weibull_k(w[0], a).unwrap());
                assert!(
                    optimal_logpareto_gamma_default(w[1], a).unwrap()
                        > optimal_logpareto_gamma_default(w[0], a).unwrap()
                );
            }
        }
        for &n in &TABLE_N {
            for w in TABLE_ALPHA.windows(2) {
                // TABLE_ALPHA is decreasing.
                assert!(optimal_weibull_k(n, w[1]).unwrap() < optimal_weibull_k(n, w[0]).unwrap());
                assert!(
                    optimal_logpareto_gamma_default(n, w[1]).unwrap()
                        > optimal_logpareto_gamma_default(n, w[0]).unwrap()
                );
            }
        }
    }

    #[test]
    fn multiplier_examples() {
        let s = |n, m, g| PerfectCorrSetting::new(n, m, g).unwrap();
        assert!((perfect_corr_multiplier(1, &s(10, 0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((perfect_corr_multiplier(3, &s(10, 0, 1.0)).unwrap() - 0.1).abs() < 1e-15);
        let v = perfect_corr_multiplier(1, &s(10, 3, 0.5)).unwrap();
        assert!((v - (3.0 + 7f64.sqrt()) / 10f64.sqrt()).abs() < 1e-15);
        assert!(PerfectCorrSetting::new(10, 9, 1.0).is_err());
        assert!(perfect_corr_multiplier(2, &s(10, 0, 1.0)).is_err());
    }

    #[test]
    fn multiplier_ordering_grid() {
        for n in 5..=100u64 {
            for m in 0..=n - 2 {
                for g in [0.25, 0.5, 1.0, 1.5, 2.0] {
                    let s = PerfectCorrSetting::new(n, m, g).unwrap();
                    let j1 = perfect_corr_multiplier(1, &s).unwrap();
                    let j3 = perfect_corr_multiplier(3, &s).unwrap();
                    let r = independent_multiplier(n, g);
                    assert!(j3 < j1, "n={n} m={m} g={g}");
                    if g < 1.0 {
                        assert!(j1 < r);
                    } else if g == 1.0 {
                        assert!((j1 - r).abs() < 1e-12);
                    } else {
                        assert!(r < j1 && j3 < r);
                    }
                }
            }
        }
    }

    #[test]
    fn perfect_corr_sizes() {
        let p1 = Calibrator::pareto(1.0).unwrap();
        for n in [2, 7, 100, 1000] {
            assert_eq!(perfect_corr_size(&p1, n, 0.01).unwrap(), 0.01);
        }
        let p2 = Calibrator::pareto(2.0).unwrap();
        assert!((perfect_corr_size(&p2, 10, 0.01).unwrap() - 0.1).abs() < 1e-15);
        let k = optimal_weibull_k(25, 0.05).unwrap();
        let wb = Calibrator::weibull(k).unwrap();
        assert!((perfect_corr_size(&wb, 25, 0.05).unwrap() - 0.05).abs() < 1e-9);
        // Generic path agrees with the definition for a moderate case.
        let w = Calibrator::weibull(0.4).unwrap();
        let t = critical_value(0.05, &w, &WeightVector::equal(20).unwrap()).unwrap();
        assert!((perfect_corr_size(&w, 20, 0.05).unwrap() - w.survival(t)).abs() < 1e-13);
        let c = Calibrator::cauchy();
        let t = critical_value(0.05, &c, &WeightVector::equal(20).unwrap()).unwrap();
        assert!((perfect_corr_size(&c, 20, 0.05).unwrap() - c.survival(t)).abs() < 1e-15);
    }

    #[test]
    fn wilson_threshold() {
        let a = wilson_adjusted_alpha(0.05, 25).unwrap();
        assert!(a < 0.05);
        let tail = stable_dist::StableParams::landau(25).unwrap().sf(1.0 / a).unwrap();
        assert!((tail - 0.05).abs() < 1e-6);
        let a = wilson_adjusted_alpha(0.0001, 10).unwrap();
        assert!(((a - 0.0001 / 1.0012) / a).abs() < 1e-3);
        for alpha in [0.05, 0.01] {
            let mut prev = 1.0;
            for n in [2, 10, 100, 1000] {
                let a = wilson_adjusted_alpha(alpha, n).unwrap();
                assert!(a < prev);
                prev = a;
            }
        }
    }

    #[test]
    fn gclt_tail_examples() {
        let v = gclt_tail_approx(0.001, 1000, 1.0).unwrap();
        assert!((v - 1.0 / (1000.0 - 1000f64.ln())).abs() < 1e-15);
        assert!((v - 0.0010070).abs() < 1e-7);
        assert_eq!(gclt_tail_approx(0.01, 50, 0.5).unwrap(), 0.01);
        assert!((gclt_tail_approx(0.1, 1, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(gclt_tail_approx(0.5, 1000, 1.0).is_err());
    }

    #[test]
    fn rate_exponents() {
        use WeightRegime::*;
        assert_eq!(required_rate_exponent(1.0, EqualWeights), 0.0);
        assert_eq!(required_rate_exponent(0.5, EqualWeights), 0.0);
        assert_eq!(required_rate_exponent(1.5, EqualWeights), 0.5);
        assert_eq!(required_rate_exponent(1.5, RandomWeights), 1.0);
        assert_eq!(required_rate_exponent(0.5, RandomWeights), 0.5);
        assert_eq!(required_rate_exponent(0.5, NonrandomWeights), 0.5);
        let r = alpha_rate_check(1.5, 100, 0.05, EqualWeights).unwrap();
        assert!((r.scaled_alpha - 0.5).abs() < 1e-12);
        assert!(!r.ok);
        assert!(alpha_rate_check(1.0, 100, 0.05, EqualWeights).unwrap().ok);
    }

    #[test]
    fn bvn_ratio() {
        let eps = normal::sf(3.0);
        let r = bvn_conditional_tail_ratio(3.0, 100.0, 0.5).unwrap();
        assert!(r > 100.0 && r >= (1.0 - eps) / (2.0 * eps) * 0.99);
        for (y1, y2, rho) in [(1.0, 2.0, 0.3), (4.0, 9.0, 0.8), (2.0, 2.0, 0.999)] {
            let a = bvn_conditional_tail_ratio(y1, y2, rho).unwrap();
            let b = bvn_conditional_tail_ratio(y1, y2, -rho).unwrap();
            assert!((a - b).abs() < 1e-14 * a);
        }
        for y1 in [1.0, 2.0, 5.0] {
            assert!(bvn_conditional_tail_ratio(y1, y1, 0.999).unwrap() >= 1.0);
        }
        assert!(bvn_conditional_tail_ratio(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gamma_advice() {
        let a = recommend_gamma(0.01, 1000).unwrap();
        assert_eq!((a.recommended_gamma, a.use_landau), (1.0, false));
        let a = recommend_gamma(0.05, 1000).unwrap();
        assert!(a.recommended_gamma < 1.0);
        assert!(recommend_gamma(0.5, 10).unwrap().recommended_gamma < 1.0);
        assert!(recommend_gamma(0.001, 25).unwrap().recommended_gamma == 1.0);
    }
}
