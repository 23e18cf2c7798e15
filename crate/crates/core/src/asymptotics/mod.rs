//! Normalizers, constants and limits of the minimal energy.

mod fit;
mod zeta;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::quadrature::IntegrationOptions;
use crate::geometry::EmbeddedSet;
use crate::weights::{weighted_hausdorff_total, WeightFn};

pub use fit::{fit_g, FitMethod, ScalingFit};
pub use zeta::{
    lattice_radius, lattice_shell_sum, lattice_tail_bound, lattice_zeta_triangular,
    lattice_zeta_triangular_at, riemann_zeta, LatticeZeta,
};

fn check_regime(s: f64, d: usize) -> Result<()> {
    if d == 0 || !(s >= d as f64) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need s ≥ d ≥ 1, got s={s}, d={d}"
        )));
    }
    Ok(())
}

/// `τ_{s,d}` at a real argument: `x^{1+s/d}` for `s > d`, `x² ln x` for
/// `s = d`.
pub fn tau_real(s: f64, d: usize, x: f64) -> Result<f64> {
    check_regime(s, d)?;
    if s > d as f64 {
        Ok(x.powf(1.0 + s / d as f64))
    } else {
        Ok(x * x * x.ln())
    }
}

/// Energy normalizer `τ_{s,d}(N)`, equal to 1 for `N ∈ {0, 1}`.
pub fn tau_eval(s: f64, d: usize, n: usize) -> Result<f64> {
    check_regime(s, d)?;
    if n <= 1 {
        return Ok(1.0);
    }
    tau_real(s, d, n as f64)
}

/// Volume of the unit ball in `R^d`, with `β_0 = 1`.
pub fn beta(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => beta(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantStatus {
    Exact,
    ConjecturedUpperBound,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownConstant {
    pub s: f64,
    pub d: usize,
    pub status: ConstantStatus,
    /// The exact value, or the upper bound conjectured to be attained.
    pub value: Option<f64>,
}

/// What is known about `C_{s,d}`: `2ζ(s)` on curves, the triangular-lattice
/// upper bound `(√3/2)^{s/2} ζ_L(s)` on surfaces, nothing otherwise.
pub fn known_constant(s: f64, d: usize) -> Result<KnownConstant> {
    if d == 0 || !(s > d as f64) {
        return Err(Error::InvalidParameter(format!(
            "C_(s,d) needs s > d ≥ 1, got s={s}, d={d}"
        )));
    }
    let (status, value) = match d {
        1 => (ConstantStatus::Exact, Some(2.0 * riemann_zeta(s)?)),
        2 => (
            ConstantStatus::ConjecturedUpperBound,
            Some(triangular_bound(s)?),
        ),
        _ => (ConstantStatus::Unknown, None),
    };
    Ok(KnownConstant {
        s,
        d,
        status,
        value,
    })
}

fn triangular_bound(s: f64) -> Result<f64> {
    Ok((3f64.sqrt() / 2.0).powf(s / 2.0) * lattice_zeta_triangular(s)?)
}

/// Limit of `E/τ` given `H = H_d^{s,w}(A)`: `C / H^{s/d}` for `s > d` and
/// `β_d / H` for `s = d`. Zero measure gives `+∞`.
pub fn theoretical_g_from_measure(
    measure: f64,
    s: f64,
    d: usize,
    c_value: Option<f64>,
) -> Result<f64> {
    check_regime(s, d)?;
    if !(measure >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "measure must be nonnegative, got {measure}"
        )));
    }
    let numerator = if s > d as f64 {
        c_value.ok_or_else(|| Error::InvalidParameter("s > d needs a value for C_(s,d)".into()))?
    } else {
        beta(d)
    };
    if measure == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(numerator / measure.powf(s / d as f64))
}

/// `g^w_{s,d}(A)` for a set and weight, integrating `H_d^{s,w}(A)`.
pub fn theoretical_g(
    set: &EmbeddedSet,
    w: &WeightFn,
    s: f64,
    d: usize,
    c_value: Option<f64>,
    opts: &IntegrationOptions,
) -> Result<f64> {
    check_regime(s, d)?;
    let h = weighted_hausdorff_total(set, w, s, d, opts)?;
    theoretical_g_from_measure(h, s, d, c_value)
}
