//! Calibrator distribution families.
//!
//! A calibrator is the inverse survival function `F̄⁻¹` of a heavy-tailed
//! distribution `F`; it maps a p-value `p` to `X = F̄⁻¹(p)`, which under the
//! null has distribution `F`. Five families are provided:
//!
//! | family            | survival `F̄(t)`                   | support        |
//! |-------------------|-----------------------------------|----------------|
//! | Pareto(γ)         | `t^{-γ}`                          | `t ≥ 1`        |
//! | Cauchy            | `1/2 - arctan(t)/π`               | ℝ              |
//! | TruncatedCauchy(δ)| Cauchy, p-values above `1-δ` clamped | `t ≥ tan((δ-1/2)π)` |
//! | Weibull(k), k<1   | `exp(-t^k)`                       | `t ≥ 0`        |
//! | LogPareto(γ)      | `min(1, (log t)^{-γ})`            | `t ≥ e`        |
//!
//! Scales are fixed at one. Parameters are validated at construction and a
//! `Calibrator` is immutable afterwards.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calibrator family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Pareto,
    Cauchy,
    TruncatedCauchy,
    Weibull,
    LogPareto,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Pareto,
        Family::Cauchy,
        Family::TruncatedCauchy,
        Family::Weibull,
        Family::LogPareto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Pareto => "pareto",
            Family::Cauchy => "cauchy",
            Family::TruncatedCauchy => "truncated_cauchy",
            Family::Weibull => "weibull",
            Family::LogPareto => "log_pareto",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pareto" => Ok(Family::Pareto),
            "cauchy" => Ok(Family::Cauchy),
            "truncated_cauchy" | "tcauchy" => Ok(Family::TruncatedCauchy),
            "weibull" => Ok(Family::Weibull),
            "log_pareto" | "logpareto" => Ok(Family::LogPareto),
            other => Err(Error::Usage(format!("unknown calibrator family `{other}`"))),
        }
    }
}

/// A validated calibrator. Construct through [`Calibrator::pareto`] and
/// friends, or [`Calibrator::from_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibratorRepr", into = "CalibratorRepr")]
pub enum Calibrator {
    #[non_exhaustive]
    Pareto { gamma: f64 },
    #[non_exhaustive]
    Cauchy,
    #[non_exhaustive]
    TruncatedCauchy { delta: f64 },
    #[non_exhaustive]
    Weibull { k: f64 },
    #[non_exhaustive]
    LogPareto { gamma: f64 },
}

impl Calibrator {
    pub fn pareto(gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(Calibrator::Pareto { gamma })
    }

    pub fn cauchy() -> Self {
        Calibrator::Cauchy
    }

    pub fn truncated_cauchy(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::param("delta", delta, "must lie in (0, 0.5)"));
        }
        Ok(Calibrator::TruncatedCauchy { delta })
    }

    /// Heavy-tailed Weibull with shape `k ∈ (0, 1)` and unit scale.
    pub fn weibull(k: f64) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::param("k", k, "must lie in (0, 1)"));
        }
        Ok(Calibrator::Weibull { k })
    }

    pub fn log_pareto(gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(Calibrator::LogPareto { gamma })
    }

    /// Builds a calibrator from a family and named parameters
    /// (`gamma`, `delta` or `k`). Unknown or missing names are rejected.
    pub fn from_params<'a, I>(family: Family, params: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let params: BTreeMap<&str, f64> = params.into_iter().collect();
        let expected: &[&str] = match family {
            Family::Pareto | Family::LogPareto => &["gamma"],
            Family::Cauchy => &[],
            Family::TruncatedCauchy => &["delta"],
            Family::Weibull => &["k"],
        };
        if let Some(extra) = params.keys().find(|k| !expected.contains(k)) {
            return Err(Error::Usage(format!(
                "parameter `{extra}` is not defined for the {family} calibrator"
            )));
        }
        let get = |name: &str| {
            params
                .get(name)
                .copied()
                .ok_or_else(|| Error::Usage(format!("{family} calibrator requires `{name}`")))
        };
        match family {
            Family::Pareto => Calibrator::pareto(get("gamma")?),
            Family::Cauchy => Ok(Calibrator::cauchy()),
            Family::TruncatedCauchy => Calibrator::truncated_cauchy(get("delta")?),
            Family::Weibull => Calibrator::weibull(get("k")?),
            Family::LogPareto => Calibrator::log_pareto(get("gamma")?),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Calibrator::Pareto { .. } => Family::Pareto,
            Calibrator::Cauchy => Family::Cauchy,
            Calibrator::TruncatedCauchy { .. } => Family::TruncatedCauchy,
            Calibrator::Weibull { .. } => Family::Weibull,
            Calibrator::LogPareto { .. } => Family::LogPareto,
        }
    }

    /// Named parameters, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Calibrator::Pareto { gamma } | Calibrator::LogPareto { gamma } => vec![("gamma", gamma)],
            Calibrator::Cauchy => vec![],
            Calibrator::TruncatedCauchy { delta } => vec![("delta", delta)],
            Calibrator::Weibull { k } => vec![("k", k)],
        }
    }

    /// Lower end of the support (`-∞` for the Cauchy).
    pub fn support_lower(&self) -> f64 {
        match *self {
            Calibrator::Pareto { .. } => 1.0,
            Calibrator::Cauchy => f64::NEG_INFINITY,
            Calibrator::TruncatedCauchy { delta } => cauchy_inverse_survival(1.0 - delta),
            Calibrator::Weibull { .. } => 0.0,
            Calibrator::LogPareto { .. } => E,
        }
    }

    /// Whether every calibrated value is nonnegative. For such calibrators
    /// the cumulative-sum statistic coincides with the sum.
    pub fn has_positive_support(&self) -> bool {
        self.support_lower() >= 0.0
    }

    /// Whether `F̄⁻¹(p)` grows faster than any power of `1/p`, so that
    /// calibrated values overflow `f64` for moderately small p-values.
    pub fn needs_log_space(&self) -> bool {
        matches!(self, Calibrator::LogPareto { .. })
    }

    /// Regular-variation index `γ` when `F̄ ∈ RV_{-γ}`.
    pub fn rv_index(&self) -> Option<f64> {
        match *self {
            Calibrator::Pareto { gamma } => Some(gamma),
            Calibrator::Cauchy | Calibrator::TruncatedCauchy { .. } => Some(1.0),
            Calibrator::Weibull { .. } | Calibrator::LogPareto { .. } => None,
        }
    }

    /// Survival function `F̄(t)`; equals one below the support.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            Calibrator::Pareto { gamma } => {
                if t <= 1.0 {
                    1.0
                } else {
                    t.powf(-gamma)
                }
            }
            Calibrator::Cauchy => cauchy_survival(t),
            Calibrator::TruncatedCauchy { .. } => {
                if t < self.support_lower() {
                    1.0
                } else {
                    cauchy_survival(t)
                }
            }
            Calibrator::Weibull { k } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-t.powf(k)).exp()
                }
            }
            Calibrator::LogPareto { gamma } => {
                if t <= E {
                    1.0
                } else {
                    t.ln().powf(-gamma).min(1.0)
                }
            }
        }
    }

    /// Survival function evaluated at `t = e^y`, without forming `t`.
    pub fn survival_at_ln(&self, y: f64) -> f64 {
        match *self {
            Calibrator::Pareto { gamma } => {
                if y <= 0.0 {
                    1.0
                } else {
                    (-gamma * y).exp()
                }
            }
            Calibrator::Weibull { k } => (-(k * y).exp()).exp(),
            Calibrator::LogPareto { gamma } => {
                if y <= 1.0 {
                    1.0
                } else {
                    y.powf(-gamma)
                }
            }
            _ => self.survival(y.exp()),
        }
    }

    /// The calibration map `p ↦ F̄⁻¹(p)`.
    ///
    /// `p` must lie strictly inside `(0, 1)`. The truncated Cauchy clamps
    /// `p > 1 - δ` to `1 - δ` first.
    pub fn inverse_survival(&self, p: f64) -> Result<f64> {
        check_open_unit(p)?;
        Ok(self.inverse_survival_unchecked(p))
    }

    /// [`inverse_survival`](Self::inverse_survival) without the domain check.
    #[inline]
    pub fn inverse_survival_unchecked(&self, p: f64) -> f64 {
        match *self {
            Calibrator::Pareto { gamma } => {
                if gamma == 1.0 {
                    1.0 / p
                } else {
                    p.powf(-1.0 / gamma)
                }
            }
            Calibrator::Cauchy => cauchy_inverse_survival(p),
            Calibrator::TruncatedCauchy { delta } => cauchy_inverse_survival(p.min(1.0 - delta)),
            Calibrator::Weibull { k } => (-p.ln()).powf(1.0 / k),
            Calibrator::LogPareto { gamma } => p.powf(-1.0 / gamma).exp(),
        }
    }

    /// `ln F̄⁻¹(p)` for calibrators with positive support.
    pub fn ln_inverse_survival(&self, p: f64) -> Result<f64> {
        check_open_unit(p)?;
        if !self.has_positive_support() {
            return Err(Error::Unsupported(format!(
                "log-scale calibration needs positive support; {} takes negative values",
                self.family()
            )));
        }
        Ok(self.ln_inverse_survival_unchecked(p))
    }

    #[inline]
    pub(crate) fn ln_inverse_survival_unchecked(&self, p: f64) -> f64 {
        match *self {
            Calibrator::Pareto { gamma } => -p.ln() / gamma,
            Calibrator::Weibull { k } => (-p.ln()).ln() / k,
            Calibrator::LogPareto { gamma } => p.powf(-1.0 / gamma),
            _ => self.inverse_survival_unchecked(p).ln(),
        }
    }

    /// Tail-class metadata.
    pub fn classify(&self) -> TailClassification {
        use TailClass::*;
        let heavy_rv = vec![
            LongTailed,
            Subexponential,
            DominatedlyVarying,
            ConsistentlyVarying,
            RegularlyVarying,
        ];
        match *self {
            Calibrator::Pareto { gamma } => TailClassification {
                rv_index: Some(gamma),
                tail_class: heavy_rv,
                left_tail_ok: true,
                balance: Some((1.0, 0.0)),
            },
            Calibrator::Cauchy => TailClassification {
                rv_index: Some(1.0),
                tail_class: heavy_rv,
                left_tail_ok: false,
                balance: Some((0.5, 0.5)),
            },
            Calibrator::TruncatedCauchy { .. } => TailClassification {
                rv_index: Some(1.0),
                tail_class: heavy_rv,
                left_tail_ok: true,
                balance: Some((1.0, 0.0)),
            },
            Calibrator::Weibull { .. } | Calibrator::LogPareto { .. } => TailClassification {
                rv_index: None,
                tail_class: vec![LongTailed, Subexponential],
                left_tail_ok: true,
                balance: None,
            },
        }
    }
}

impl fmt::Display for Calibrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family())?;
        let params = self.params();
        if !params.is_empty() {
            let inner: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", inner.join(", "))?;
        }
        Ok(())
    }
}

/// Heavy-tail classes, ordered from largest to smallest:
/// `RV ⊂ C ⊂ D∩L ⊂ S ⊂ L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    LongTailed,
    Subexponential,
    DominatedlyVarying,
    ConsistentlyVarying,
    RegularlyVarying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailClassification {
    /// `γ` when the right tail is regularly varying with index `-γ`.
    pub rv_index: Option<f64>,
    pub tail_class: Vec<TailClass>,
    /// Whether the left tail is light enough for the max and cumsum
    /// statistics (bounded below here).
    pub left_tail_ok: bool,
    /// Right/left tail mass split `(p_F, q_F)` for regularly varying laws.
    pub balance: Option<(f64, f64)>,
}

impl TailClassification {
    pub fn contains(&self, class: TailClass) -> bool {
        self.tail_class.contains(&class)
    }
}

#[derive(Serialize, Deserialize)]
struct CalibratorRepr {
    family: Family,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

impl TryFrom<CalibratorRepr> for Calibrator {
    type Error = Error;

    fn try_from(repr: CalibratorRepr) -> Result<Self> {
        Calibrator::from_params(repr.family, repr.params.iter().map(|(k, v)| (k.as_str(), *v)))
    }
}

impl From<Calibrator> for CalibratorRepr {
    fn from(cal: Calibrator) -> Self {
        CalibratorRepr {
            family: cal.family(),
            params: cal.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, value, "must be positive and finite"))
    }
}

fn check_open_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("p-value must lie in (0, 1)", p))
    }
}

/// `1/2 - arctan(t)/π`, written to keep relative accuracy in the right tail.
fn cauchy_survival(t: f64) -> f64 {
    if t > 0.0 {
        (1.0 / t).atan() / PI
    } else {
        0.5 + (-t).atan() / PI
    }
}

/// `tan((1/2 - p)π)`, using cotangents away from the median so that tiny
/// p-values keep full relative precision.
fn cauchy_inverse_survival(p: f64) -> f64 {
    if p < 0.25 {
        1.0 / (p * PI).tan()
    } else if p > 0.75 {
        -1.0 / ((1.0 - p) * PI).tan()
    } else {
        ((0.5 - p) * PI).tan()
    }
}
