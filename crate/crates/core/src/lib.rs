//! Global-null tests that combine p-values through heavy-tailed calibrators.
//!
//! Each p-value `p_i` is mapped to `X_i = F̄⁻¹(p_i)` for a heavy-tailed
//! distribution `F` (the calibrator), and the calibrated values are
//! aggregated by a weighted sum, a maximum of cumulative sums, or a weighted
//! maximum. For regularly varying calibrators the combined statistic can be
//! mapped back to a p-value scale (`T_j = F̄(a_{n,γ} S_j)`) whose lower tail
//! matches the uniform distribution.
//!
//! Modules:
//!
//! - [`calibrators`]: calibrator families and their survival maps.
//! - [`stable_dist`]: S0-parametrized stable CDF by quadrature, Landau tail ratios.
//! - [`combine`]: combination statistics, critical values, combining functions.
//! - [`guidance`]: parameter selection and diagnostic formulas.
//! - [`simulate`]: Monte Carlo size and power engine.

pub mod calibrators;
pub mod combine;
mod error;
pub mod guidance;
pub mod normal;
mod quadrature;
pub mod simulate;
pub mod stable_dist;

pub use calibrators::{Calibrator, Family, TailClass, TailClassification};
pub use combine::{
    a_n_gamma, bonferroni_p, combine, combining_function, critical_value, harmonic_mean_precise_scale,
    ln_critical_value, m_family, m_family_asymptotic_scale, CombinationSpec, MScale, PreparedTest, Statistic,
    TestOutcome, WeightVector,
};
pub use error::{Error, Result};
pub use stable_dist::StableParams;
