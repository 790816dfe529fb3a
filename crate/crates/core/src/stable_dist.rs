//! Distribution function of one-dimensional stable laws in the S0
//! parametrization, evaluated by quadrature of Nolan's single-integral
//! representation, and the Landau-law helpers built on it.
//!
//! With `Z ~ S(α, β, 1, 0; 0)` a standardized variable and `X = σZ + μ`,
//! the representation reads (for `α ≠ 1`, `ζ = -β tan(πα/2)`,
//! `θ₀ = arctan(β tan(πα/2))/α`, and `x > ζ`)
//!
//! ```text
//! F(x) = c₁ + sign(1-α)/π ∫_{-θ₀}^{π/2} exp(-(x-ζ)^{α/(α-1)} V(θ)) dθ
//! ```
//!
//! and for `α = 1`, `β > 0`
//!
//! ```text
//! F(x) = 1/π ∫_{-π/2}^{π/2} exp(-e^{-πx/(2β)} V(θ)) dθ.
//! ```
//!
//! Both the CDF and the survival function are integrated directly (the
//! latter with `-expm1(-g)`), so far-tail probabilities keep their relative
//! accuracy instead of being formed as `1 - F`. The integration variable is
//! `u = π/2 - θ`, which keeps `cos θ = sin u` accurate where the integrand
//! changes fastest.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::{integrate, Tolerance};

/// Location offset of the Landau approximation to `n·S₁` for Pareto(1)
/// calibrated iid p-values: `S(1, 1, π/2, log n + LANDAU_OFFSET; 0)`.
pub const LANDAU_OFFSET: f64 = 0.874367;

/// Absolute accuracy target for CDF values.
pub const CDF_TOLERANCE: f64 = 1e-9;

const QUAD: Tolerance = Tolerance {
    abs: 1e-17,
    rel: 1e-11,
    max_subdivisions: 10_000,
};

/// Parameters `(γ, β, σ, μ)` of `S(γ, β, σ, μ; 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    stability: f64,
    skewness: f64,
    scale: f64,
    location: f64,
}

/// Lower and upper tail probabilities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPair {
    pub cdf: f64,
    pub sf: f64,
}

impl TailPair {
    fn swap(self) -> Self {
        TailPair {
            cdf: self.sf,
            sf: self.cdf,
        }
    }
}

impl StableParams {
    pub fn new(stability: f64, skewness: f64, scale: f64, location: f64) -> Result<Self> {
        if !(stability > 0.0 && stability <= 2.0) {
            return Err(Error::param("stability", stability, "must lie in (0, 2]"));
        }
        if !(-1.0..=1.0).contains(&skewness) {
            return Err(Error::param("skewness", skewness, "must lie in [-1, 1]"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param("scale", scale, "must be positive and finite"));
        }
        if !location.is_finite() {
            return Err(Error::param("location", location, "must be finite"));
        }
        Ok(StableParams {
            stability,
            skewness,
            scale,
            location,
        })
    }

    /// `S(1, 1, π/2, log n + 0.874367; 0)`.
    pub fn landau(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("number of tests must be at least 1".into()));
        }
        StableParams::new(1.0, 1.0, FRAC_PI_2, (n as f64).ln() + LANDAU_OFFSET)
    }

    pub fn stability(&self) -> f64 {
        self.stability
    }
    pub fn skewness(&self) -> f64 {
        self.skewness
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn location(&self) -> f64 {
        self.location
    }

    /// `P(X ≤ x)` and `P(X > x)`, each computed directly.
    pub fn tails(&self, x: f64) -> Result<TailPair> {
        if x.is_nan() {
            return Err(Error::domain("stable CDF argument", x));
        }
        if x == f64::INFINITY {
            return Ok(TailPair { cdf: 1.0, sf: 0.0 });
        }
        if x == f64::NEG_INFINITY {
            return Ok(TailPair { cdf: 0.0, sf: 1.0 });
        }
        let z = (x - self.location) / self.scale;
        standard_tails(self.stability, self.skewness, z)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.tails(x)?.cdf)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(self.tails(x)?.sf)
    }

    /// Upper quantile: the `x` with `P(X > x) = q`, by bracketed bisection
    /// starting from the location parameter.
    pub fn inverse_survival(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain("upper-tail probability must lie in (0, 1)", q));
        }
        let mut lo = self.location;
        let mut hi = self.location;
        let mut step = self.scale;
        let sf_at_location = self.sf(self.location)?;
        if sf_at_location > q {
            loop {
                hi += step;
                if self.sf(hi)? <= q {
                    break;
                }
                lo = hi;
                step *= 2.0;
                if !hi.is_finite() {
                    return Err(bracket_failure(q));
                }
            }
        } else {
            loop {
                lo -= step;
                if self.sf(lo)? > q {
                    break;
                }
                hi = lo;
                step *= 2.0;
                if !lo.is_finite() {
                    return Err(bracket_failure(q));
                }
            }
        }
        // Invariant: sf(lo) > q >= sf(hi).
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = self.sf(mid)?;
            if (s - q).abs() <= 1e-15 + 1e-12 * q {
                return Ok(mid);
            }
            if s > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn bracket_failure(q: f64) -> Error {
    Error::Numerical {
        message: format!("could not bracket the stable quantile for tail probability {q}"),
        estimate: f64::INFINITY,
    }
}

/// `stable_cdf(params, x)`.
pub fn stable_cdf(params: &StableParams, x: f64) -> Result<f64> {
    params.cdf(x)
}

/// `P(Landau(n) > 1/α) / α`.
pub fn landau_tail_ratio(alpha: f64, n: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("significance level must lie in (0, 1)", alpha));
    }
    let landau = StableParams::landau(n)?;
    Ok(landau.sf(1.0 / alpha)? / alpha)
}

/// The `x` with `P(Landau(n) > x) = p`.
pub fn landau_quantile(p: f64, n: u64) -> Result<f64> {
    StableParams::landau(n)?.inverse_survival(p)
}

/// Centers and scales an equal-weight Pareto(γ) sum `S₁` so that, for iid
/// uniform p-values, the result is approximately stable:
///
/// - `γ = 1`: `(n·S₁ - n log n) / (πn/2)`
/// - `γ < 1`: `n·S₁ / (n^{1/γ} {(2/π) Γ(γ) sin(πγ/2)}^{-1/γ})`
pub fn gclt_normalize(sum_value: f64, n: u64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("GCLT index must lie in (0, 1]", gamma));
    }
    if n == 0 {
        return Err(Error::Usage("number of tests must be at least 1".into()));
    }
    let nf = n as f64;
    if gamma == 1.0 {
        Ok((nf * sum_value - nf * nf.ln()) / (PI * nf / 2.0))
    } else {
        let c = (2.0 / PI) * libm::tgamma(gamma) * (PI * gamma / 2.0).sin();
        Ok(nf * sum_value / (nf.powf(1.0 / gamma) * c.powf(-1.0 / gamma)))
    }
}

/// Limit law stated for [`gclt_normalize`]: `S(1, 1, 1, 0; 0)` for `γ = 1`
/// and `S(γ, 1, 1, tan(πγ/2); 0)` for `γ < 1`.
pub fn gclt_limit(gamma: f64) -> Result<StableParams> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("GCLT index must lie in (0, 1]", gamma));
    }
    if gamma == 1.0 {
        StableParams::new(1.0, 1.0, 1.0, 0.0)
    } else {
        StableParams::new(gamma, 1.0, 1.0, (PI * gamma / 2.0).tan())
    }
}

fn standard_tails(alpha: f64, beta: f64, z: f64) -> Result<TailPair> {
    if alpha == 2.0 {
        // Normal with variance 2; skewness has no effect.
        let s = z / std::f64::consts::SQRT_2;
        return Ok(TailPair {
            cdf: normal::cdf(s),
            sf: normal::sf(s),
        });
    }
    if alpha == 1.0 {
        if beta == 0.0 {
            let upper = if z > 0.0 {
                (1.0 / z).atan() / PI
            } else {
                0.5 + (-z).atan() / PI
            };
            let lower = if z < 0.0 {
                (-1.0 / z).atan() / PI
            } else {
                0.5 + z.atan() / PI
            };
            return Ok(TailPair { cdf: lower, sf: upper });
        }
        if beta < 0.0 {
            return Ok(standard_tails(1.0, -beta, -z)?.swap());
        }
        return cauchy_like_tails(beta, z);
    }

    let tan_half = (PI * alpha / 2.0).tan();
    let zeta = -beta * tan_half;
    let theta0 = (beta * tan_half).atan() / alpha;
    if (z - zeta).abs() <= 1e-13 * zeta.abs().max(1.0) {
        let cdf = (FRAC_PI_2 - theta0) / PI;
        return Ok(TailPair { cdf, sf: 1.0 - cdf });
    }
    if z < zeta {
        return Ok(standard_tails(alpha, -beta, -z)?.swap());
    }

    let upper = FRAC_PI_2 + theta0;
    if upper <= 0.0 {
        // Totally skewed to the left with α < 1: no mass above ζ.
        return Ok(TailPair { cdf: 1.0, sf: 0.0 });
    }
    let ln_k = alpha / (alpha - 1.0) * (z - zeta).ln();
    let c0 = (alpha * theta0).cos().ln() / (alpha - 1.0);
    let power = alpha / (alpha - 1.0);
    let ln_g = move |u: f64| {
        let theta = FRAC_PI_2 - u;
        let sin_u = u.sin();
        let s = (alpha * (upper - u)).sin();
        let c = (alpha * theta0 + (alpha - 1.0) * theta).cos();
        ln_k + c0 + power * (sin_u.ln() - s.ln()) + c.ln() - sin_u.ln()
    };
    let (a, b) = integrate_pair(&ln_g, upper)?;
    if alpha < 1.0 {
        Ok(TailPair {
            cdf: (FRAC_PI_2 - theta0) / PI + a / PI,
            sf: b / PI,
        })
    } else {
        Ok(TailPair {
            cdf: (FRAC_PI_2 - theta0) / PI + b / PI,
            sf: a / PI,
        })
    }
}

fn cauchy_like_tails(beta: f64, z: f64) -> Result<TailPair> {
    let ln_k = -PI * z / (2.0 * beta);
    let ln_g = move |u: f64| {
        let sin_u = u.sin();
        let lead = FRAC_PI_2 * (1.0 + beta) - beta * u;
        let tan_theta = u.cos() / sin_u;
        ln_k + (2.0 / PI).ln() + lead.ln() - sin_u.ln() + lead * tan_theta / beta
    };
    let (a, b) = integrate_pair(&ln_g, PI)?;
    Ok(TailPair {
        cdf: a / PI,
        sf: b / PI,
    })
}

/// Integrates `exp(-g)` and `1 - exp(-g)` over `u ∈ (0, upper)` where
/// `ln g` is supplied and monotone in `u`. The interval is split where
/// `g` crosses a few levels around one, which is where both integrands
/// turn over.
fn integrate_pair<G: Fn(f64) -> f64>(ln_g: &G, upper: f64) -> Result<(f64, f64)> {
    let eps = upper * 1e-15;
    let g_lo = ln_g(eps);
    let g_hi = ln_g(upper - eps);
    let mut breaks = Vec::with_capacity(5);
    for level in [-4.0, -1.0, 0.0, 1.0, 3.0] {
        if let Some(u) = crossing(ln_g, level, eps, upper - eps, g_lo, g_hi) {
            breaks.push(u);
        }
    }

    let keep = |v: f64| v.is_finite();
    let lower_integrand = |u: f64| {
        let lg = ln_g(u);
        if !keep(lg) {
            return if lg > 0.0 { 0.0 } else { 1.0 };
        }
        (-lg.exp()).exp()
    };
    let upper_integrand = |u: f64| {
        let lg = ln_g(u);
        if !keep(lg) {
            return if lg > 0.0 { 1.0 } else { 0.0 };
        }
        -(-lg.exp()).exp_m1()
    };
    let a = integrate(lower_integrand, 0.0, upper, &breaks, QUAD);
    let b = integrate(upper_integrand, 0.0, upper, &breaks, QUAD);
    for q in [a, b] {
        if !q.converged && q.error > CDF_TOLERANCE * PI {
            return Err(Error::Numerical {
                message: "stable CDF quadrature did not converge".into(),
                estimate: q.error / PI,
            });
        }
    }
    Ok((a.value.max(0.0), b.value.max(0.0)))
}

/// Bisection for `ln_g(u) = level` on `[lo, hi]` given end values.
fn crossing<G: Fn(f64) -> f64>(ln_g: &G, level: f64, mut lo: f64, mut hi: f64, f_lo: f64, f_hi: f64) -> Option<f64> {
    let increasing = f_hi > f_lo;
    let (below, above) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if !(below < level && above > level) {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let v = ln_g(mid);
        if v.is_nan() {
            return None;
        }
        if (v < level) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
