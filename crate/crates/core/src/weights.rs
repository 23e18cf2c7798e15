//! Weight functions `w(x, y)` for the weighted Riesz energy and the weighted
//! Hausdorff measure `H_d^{s,w}(B) = ∫_B w(x,x)^{-d/s} dH_d(x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_of, dist, EmbeddedSet, IntegrationOptions, Point, RegionPartition};

type PairFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type FieldGradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A declared zero of the weight on the diagonal: `w(x, y) ≥ C |x - a|^t`
/// near `(a, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightZero {
    pub location: Point,
    pub order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightMeta {
    pub label: String,
    pub is_symmetric: bool,
    pub differentiable: bool,
    pub zeros: Vec<WeightZero>,
    /// Lower bound for `w` on a neighborhood of the diagonal; zero when the
    /// weight has declared zeros.
    pub diagonal_infimum_hint: f64,
}

/// Probability density with respect to `H_d` on a set.
#[derive(Clone)]
pub struct Density {
    kind: DensityKind,
    sup: f64,
}

#[derive(Clone)]
enum DensityKind {
    Constant(f64),
    /// `(1 + amplitude·cos(θ - phase)) / (2π·radius)` with θ the polar angle.
    Cosine {
        amplitude: f64,
        phase: f64,
        radius: f64,
    },
    Custom {
        value: FieldFn,
        grad: Option<FieldGradFn>,
    },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DensityKind::Constant(c) => write!(f, "Density::Constant({c})"),
            DensityKind::Cosine {
                amplitude,
                phase,
                radius,
            } => write!(
                f,
                "Density::Cosine {{ amplitude: {amplitude}, phase: {phase}, radius: {radius} }}"
            ),
            DensityKind::Custom { .. } => write!(f, "Density::Custom"),
        }
    }
}

/// Named densities accepted in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `1 / H_d(A)`.
    Uniform,
    /// `(1 + amplitude·cos(θ - phase)) / (2π r)` on a circle of radius `r`.
    Cosine {
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Density {
    pub fn constant(value: f64) -> Self {
        Density {
            kind: DensityKind::Constant(value),
            sup: value,
        }
    }

    pub fn uniform(set: &EmbeddedSet) -> Self {
        Self::constant(1.0 / set.measure())
    }

    /// Cosine-modulated density on the circle of radius `radius` about the origin.
    pub fn cosine(amplitude: f64, phase: f64, radius: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude) || !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cosine density needs 0 ≤ amplitude ≤ 1 and radius > 0 (got {amplitude}, {radius})"
            )));
        }
        Ok(Density {
            kind: DensityKind::Cosine {
                amplitude,
                phase,
                radius,
            },
            sup: (1.0 + amplitude) / (2.0 * PI * radius),
        })
    }

    /// Arbitrary density with an upper bound `sup`; without a gradient the
    /// resulting weight cannot be optimized by gradient descent.
    pub fn custom<F>(value: F, sup: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Density {
            kind: DensityKind::Custom {
                value: Arc::new(value),
                grad: None,
            },
            sup,
        }
    }

    pub fn custom_with_gradient<F, G>(value: F, grad: G, sup: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Density {
            kind: DensityKind::Custom {
                value: Arc::new(value),
                grad: Some(Arc::new(grad)),
            },
            sup,
        }
    }

    pub fn from_spec(spec: &DensitySpec, set: &EmbeddedSet) -> Result<Self> {
        match spec {
            DensitySpec::Uniform => Ok(Self::uniform(set)),
            DensitySpec::Cosine { amplitude, phase } => match set.kind() {
                crate::geometry::SetKind::Circle { radius } => {
                    Self::cosine(*amplitude, *phase, *radius)
                }
                _ => Err(Error::InvalidParameter(
                    "the cosine density is defined on a circle about the origin".into(),
                )),
            },
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Constant(c) => *c,
            DensityKind::Cosine {
                amplitude,
                phase,
                radius,
            } => (1.0 + amplitude * (angle_of(p[0], p[1]) - phase).cos()) / (2.0 * PI * radius),
            DensityKind::Custom { value, .. } => value(p),
        }
    }

    /// Ambient gradient of the density, where one is available.
    pub fn gradient(&self, p: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            DensityKind::Constant(_) => Some(vec![0.0; p.len()]),
            DensityKind::Cosine {
                amplitude,
                phase,
                radius,
            } => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                let dtheta =
                    -amplitude * (angle_of(p[0], p[1]) - phase).sin() / (2.0 * PI * radius);
                if r2 == 0.0 {
                    return Some(vec![0.0, 0.0]);
                }
                Some(vec![-p[1] / r2 * dtheta, p[0] / r2 * dtheta])
            }
            DensityKind::Custom { grad, .. } => grad.as_ref().map(|g| g(p)),
        }
    }

    pub fn has_gradient(&self) -> bool {
        !matches!(&self.kind, DensityKind::Custom { grad: None, .. })
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

#[derive(Clone)]
enum WeightKind {
    Unit,
    Scaled { factor: f64, inner: Box<WeightFn> },
    Density { rho: Density, exponent: f64 },
    PowerZero { a: Vec<f64>, t: f64 },
    Symmetrized(Box<WeightFn>),
    Raw(PairFn),
}

/// A nonnegative weight on `A × A`.
///
/// `diag(x)` is always computed as `eval(x, x)`.
#[derive(Clone)]
pub struct WeightFn {
    kind: WeightKind,
    meta: WeightMeta,
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFn")
            .field("meta", &self.meta)
            .finish()
    }
}

/// Run-config description of a weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Unit,
    Density { rho: DensitySpec },
    PowerZero { a: Vec<f64>, t: f64 },
}

impl WeightSpec {
    pub fn build(&self, set: &EmbeddedSet, s: f64, d: usize) -> Result<WeightFn> {
        match self {
            WeightSpec::Unit => Ok(WeightFn::unit()),
            WeightSpec::Density { rho } => density_weight(set, Density::from_spec(rho, set)?, s, d),
            WeightSpec::PowerZero { a, t } => {
                if a.len() != set.ambient_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: set.ambient_dim(),
                        got: a.len(),
                    });
                }
                power_zero_weight(Point::new(a.clone())?, *t)
            }
        }
    }
}

impl WeightFn {
    /// `w ≡ 1`: the unweighted Riesz energy.
    pub fn unit() -> Self {
        WeightFn {
            kind: WeightKind::Unit,
            meta: WeightMeta {
                label: "unit".into(),
                is_symmetric: true,
                differentiable: true,
                zeros: Vec::new(),
                diagonal_infimum_hint: 1.0,
            },
        }
    }

    /// An arbitrary, possibly non-symmetric weight. It is never differentiable
    /// for the optimizer's purposes.
    pub fn raw<F>(f: F, is_symmetric: bool, diagonal_infimum_hint: f64) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        WeightFn {
            kind: WeightKind::Raw(Arc::new(f)),
            meta: WeightMeta {
                label: "raw".into(),
                is_symmetric,
                differentiable: false,
                zeros: Vec::new(),
                diagonal_infimum_hint,
            },
        }
    }

    /// `c·w` for `c > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let mut meta = self.meta.clone();
        meta.label = format!("{factor}*{}", self.meta.label);
        meta.diagonal_infimum_hint *= factor;
        Ok(WeightFn {
            kind: WeightKind::Scaled {
                factor,
                inner: Box::new(self.clone()),
            },
            meta,
        })
    }

    pub fn meta(&self) -> &WeightMeta {
        &self.meta
    }

    pub fn is_symmetric(&self) -> bool {
        self.meta.is_symmetric
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.kind, WeightKind::Unit)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            WeightKind::Unit => 1.0,
            WeightKind::Scaled { factor, inner } => factor * inner.eval(x, y),
            WeightKind::Density { rho, exponent } => {
                (rho.value(x) * rho.value(y) + dist(x, y)).powf(*exponent)
            }
            WeightKind::PowerZero { a, t } => dist(x, a).powf(*t) + dist(y, a).powf(*t),
            WeightKind::Symmetrized(inner) => (inner.eval(x, y) + inner.eval(y, x)) / 2.0,
            WeightKind::Raw(f) => f(x, y),
        }
    }

    pub fn diag(&self, x: &[f64]) -> f64 {
        self.eval(x, x)
    }

    /// Gradient of `w(x, y)` in its first argument, for `x ≠ y`.
    pub fn grad_first(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            WeightKind::Unit => Ok(vec![0.0; x.len()]),
            WeightKind::Scaled { factor, inner } => {
                let mut g = inner.grad_first(x, y)?;
                g.iter_mut().for_each(|v| *v *= factor);
                Ok(g)
            }
            WeightKind::Density { rho, exponent } => {
                let (rx, ry) = (rho.value(x), rho.value(y));
                let r = dist(x, y);
                let base = rx * ry + r;
                let outer = exponent * base.powf(exponent - 1.0);
                let grad_rho = rho
                    .gradient(x)
                    .ok_or_else(|| Error::NotDifferentiable("density has no gradient".into()))?;
                Ok(x.iter()
                    .zip(y)
                    .zip(&grad_rho)
                    .map(|((xi, yi), gi)| {
                        let dr = if r > 0.0 { (xi - yi) / r } else { 0.0 };
                        outer * (ry * gi + dr)
                    })
                    .collect())
            }
            WeightKind::PowerZero { a, t } => {
                let r = dist(x, a);
                if r == 0.0 {
                    return Ok(vec![0.0; x.len()]);
                }
                let c = t * r.powf(t - 2.0);
                Ok(x.iter().zip(a).map(|(xi, ai)| c * (xi - ai)).collect())
            }
            WeightKind::Symmetrized(inner) if inner.is_symmetric() => inner.grad_first(x, y),
            WeightKind::Symmetrized(_) | WeightKind::Raw(_) => Err(Error::NotDifferentiable(
                format!("weight '{}' has no analytic gradient", self.meta.label),
            )),
        }
    }
}

/// Per-point data cached for evaluating a weight on all pairs of a fixed
/// point set. Pair values match [`WeightFn::eval`] bit for bit.
pub(crate) enum PreparedWeight<'a> {
    Unit,
    Scaled {
        factor: f64,
        inner: Box<PreparedWeight<'a>>,
    },
    Density {
        rho: Vec<f64>,
        /// Flattened `∇ρ(x_i)`, when the density has one.
        grad: Option<Vec<f64>>,
        exponent: f64,
    },
    PowerZero {
        q: Vec<f64>,
        grad: Vec<f64>,
    },
    Direct(&'a WeightFn),
}

impl WeightFn {
    pub(crate) fn prepare(&self, points: &[Point], with_grad: bool) -> PreparedWeight<'_> {
        match &self.kind {
            WeightKind::Unit => PreparedWeight::Unit,
            WeightKind::Scaled { factor, inner } => PreparedWeight::Scaled {
                factor: *factor,
                inner: Box::new(inner.prepare(points, with_grad)),
            },
            WeightKind::Density { rho, exponent } => PreparedWeight::Density {
                rho: points.iter().map(|p| rho.value(&p.coords)).collect(),
                grad: if with_grad {
                    points
                        .iter()
                        .map(|p| rho.gradient(&p.coords))
                        .collect::<Option<Vec<_>>>()
                        .map(|g| g.concat())
                } else {
                    None
                },
                exponent: *exponent,
            },
            WeightKind::PowerZero { a, t } => {
                let q = points.iter().map(|p| dist(&p.coords, a).powf(*t)).collect();
                let grad = if with_grad {
                    points
                        .iter()
                        .flat_map(|p| {
                            let r = dist(&p.coords, a);
                            let c = if r == 0.0 { 0.0 } else { t * r.powf(t - 2.0) };
                            p.coords.iter().zip(a).map(move |(x, ai)| c * (x - ai))
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                PreparedWeight::PowerZero { q, grad }
            }
            WeightKind::Symmetrized(_) | WeightKind::Raw(_) => PreparedWeight::Direct(self),
        }
    }
}

impl PreparedWeight<'_> {
    /// Symmetrized pair weight `(w(x_i, x_j) + w(x_j, x_i)) / 2`.
    #[inline]
    pub(crate) fn pair(&self, i: usize, j: usize, xi: &[f64], xj: &[f64], r: f64) -> f64 {
        match self {
            PreparedWeight::Unit => 1.0,
            PreparedWeight::Scaled { factor, inner } => factor * inner.pair(i, j, xi, xj, r),
            PreparedWeight::Density { rho, exponent, .. } => (rho[i] * rho[j] + r).powf(*exponent),
            PreparedWeight::PowerZero { q, .. } => q[i] + q[j],
            PreparedWeight::Direct(w) => {
                if w.is_symmetric() {
                    w.eval(xi, xj)
                } else {
                    (w.eval(xi, xj) + w.eval(xj, xi)) / 2.0
                }
            }
        }
    }

    /// Adds `scale · ∇_x w(x_i, x_j)` to `out`, given `value = w(x_i, x_j)`.
    #[inline]
    pub(crate) fn add_grad_first(
        &self,
        i: usize,
        j: usize,
        xi: &[f64],
        xj: &[f64],
        r: f64,
        value: f64,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let dim = xi.len();
        match self {
            PreparedWeight::Unit => Ok(()),
            PreparedWeight::Scaled { factor, inner } => {
                inner.add_grad_first(i, j, xi, xj, r, value / factor, scale * factor, out)
            }
            PreparedWeight::Density {
                rho,
                grad,
                exponent,
            } => {
                let grad = grad
                    .as_ref()
                    .ok_or_else(|| Error::NotDifferentiable("density has no gradient".into()))?;
                let base = rho[i] * rho[j] + r;
                let outer = scale * exponent * value / base;
                let gi = &grad[i * dim..(i + 1) * dim];
                for k in 0..dim {
                    let dr = if r > 0.0 { (xi[k] - xj[k]) / r } else { 0.0 };
                    out[k] += outer * (rho[j] * gi[k] + dr);
                }
                Ok(())
            }
            PreparedWeight::PowerZero { grad, .. } => {
                let gi = &grad[i * dim..(i + 1) * dim];
                for k in 0..dim {
                    out[k] += scale * gi[k];
                }
                Ok(())
            }
            PreparedWeight::Direct(w) => {
                let g = w.grad_first(xi, xj)?;
                for k in 0..dim {
                    out[k] += scale * g[k];
                }
                Ok(())
            }
        }
    }
}

/// `w̃(x, y) = (w(x, y) + w(y, x)) / 2`.
pub fn symmetrize(w_raw: &WeightFn) -> WeightFn {
    let inner_differentiable = w_raw.meta.differentiable && w_raw.meta.is_symmetric;
    WeightFn {
        kind: WeightKind::Symmetrized(Box::new(w_raw.clone())),
        meta: WeightMeta {
            label: format!("sym({})", w_raw.meta.label),
            is_symmetric: true,
            differentiable: inner_differentiable,
            zeros: w_raw.meta.zeros.clone(),
            diagonal_infimum_hint: w_raw.meta.diagonal_infimum_hint,
        },
    }
}

/// Weight `(ρ(x)ρ(y) + |x - y|)^{-s/2d}` whose minimizers distribute like
/// `ρ dH_d`. On the diagonal `w(x, x) = ρ(x)^{-s/d}`.
pub fn density_weight(set: &EmbeddedSet, rho: Density, s: f64, d: usize) -> Result<WeightFn> {
    if !(s > 0.0) || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need s > 0 and d ≥ 1 (got s={s}, d={d})"
        )));
    }
    let opts = IntegrationOptions::default();
    let integral = set.integral(|p| rho.value(p), &opts)?;
    if (integral.value - 1.0).abs() > 1e-4 {
        return Err(Error::DensityNotNormalized {
            integral: integral.value,
        });
    }
    let exponent = -s / (2.0 * d as f64);
    // On G = A × A the base ρρ + |x - y| is at most sup ρ² + diam A.
    let hint = (rho.sup() * rho.sup() + set.diameter()).powf(exponent);
    let differentiable = rho.has_gradient();
    Ok(WeightFn {
        kind: WeightKind::Density { rho, exponent },
        meta: WeightMeta {
            label: "density".into(),
            is_symmetric: true,
            differentiable,
            zeros: Vec::new(),
            diagonal_infimum_hint: hint,
        },
    })
}

/// `w(x, y) = |x - a|^t + |y - a|^t`, vanishing to order `t` at `(a, a)`.
pub fn power_zero_weight(a: Point, t: f64) -> Result<WeightFn> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "zero order t must be positive, got {t}"
        )));
    }
    Ok(WeightFn {
        kind: WeightKind::PowerZero {
            a: a.coords.clone(),
            t,
        },
        meta: WeightMeta {
            label: format!("power_zero(t={t})"),
            is_symmetric: true,
            differentiable: true,
            zeros: vec![WeightZero {
                location: a,
                order: t,
            }],
            diagonal_infimum_hint: 0.0,
        },
    })
}

/// `H_d^{s,w}` on the regions of a partition together with its normalized
/// form `h_d^{s,w}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedMeasure {
    pub total: f64,
    /// Accumulated quadrature error estimate or Monte Carlo standard error.
    pub total_error: f64,
    pub regions: Vec<f64>,
    pub normalized: Vec<f64>,
}

fn check_zero_orders(w: &WeightFn, s: f64) -> Result<()> {
    if let Some(z) = w.meta.zeros.iter().find(|z| z.order >= s) {
        return Err(Error::NonIntegrable(format!(
            "weight has a zero of order {} ≥ s = {s}; w(x,x)^(-d/s) is not integrable",
            z.order
        )));
    }
    Ok(())
}

/// `∫_A w(x,x)^{-d/s} dH_d` over the whole set.
pub fn weighted_hausdorff_total(
    set: &EmbeddedSet,
    w: &WeightFn,
    s: f64,
    d: usize,
    opts: &IntegrationOptions,
) -> Result<f64> {
    check_zero_orders(w, s)?;
    let e = -(d as f64) / s;
    Ok(set.integral(|p| w.diag(p).powf(e), opts)?.value)
}

pub fn weighted_hausdorff(
    set: &EmbeddedSet,
    w: &WeightFn,
    s: f64,
    d: usize,
    partition: &RegionPartition,
    opts: &IntegrationOptions,
) -> Result<WeightedMeasure> {
    if !(s > 0.0) || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need s > 0 and d ≥ 1 (got s={s}, d={d})"
        )));
    }
    check_zero_orders(w, s)?;
    let e = -(d as f64) / s;
    let mut regions = Vec::with_capacity(partition.len());
    let mut err2 = 0.0;
    for r in partition.regions() {
        let v = set.region_integral(|p| w.diag(p).powf(e), r, opts)?;
        if v.value < 0.0 || !v.value.is_finite() {
            return Err(Error::NonIntegrable(format!("region value {}", v.value)));
        }
        regions.push(v.value);
        err2 += v.error * v.error;
    }
    let total = crate::energy::compensated_sum(regions.iter().copied());
    if !(total > 0.0) {
        return Err(Error::NonIntegrable(
            "weighted measure of the set is zero".into(),
        ));
    }
    let normalized = regions.iter().map(|v| v / total).collect();
    Ok(WeightedMeasure {
        total,
        total_error: err2.sqrt(),
        regions,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PartitionSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle() -> EmbeddedSet {
        EmbeddedSet::circle(1.0).unwrap()
    }

    #[test]
    fn symmetrize_examples() {
        let sym = WeightFn::raw(|x, y| 1.0 + (x[0] - y[0]).abs(), true, 1.0);
        let s = symmetrize(&sym);
        for (x, y) in [([0.3], [0.9]), ([2.0], [-1.0])] {
            assert_eq!(s.eval(&x, &y), sym.eval(&x, &y));
        }
        let f = WeightFn::raw(|x, _| x[0] * x[0], false, 0.0);
        let s = symmetrize(&f);
        assert_eq!(s.eval(&[2.0], &[3.0]), (4.0 + 9.0) / 2.0);
        assert_eq!(s.eval(&[2.0], &[3.0]), s.eval(&[3.0], &[2.0]));
        let pairwise = WeightFn::raw(|x, y| if x[0] < y[0] { 2.0 } else { 4.0 }, false, 2.0);
        assert_eq!(symmetrize(&pairwise).eval(&[0.0], &[1.0]), 3.0);
    }

    #[test]
    fn density_weight_examples() {
        let unit_interval = EmbeddedSet::interval(1.0).unwrap();
        let w = density_weight(&unit_interval, Density::constant(1.0), 2.0, 1).unwrap();
        assert_eq!(w.diag(&[0.4]), 1.0);
        let w = density_weight(&circle(), Density::uniform(&circle()), 2.0, 1).unwrap();
        let expected = 4.0 * PI * PI;
        assert!((w.diag(&[1.0, 0.0]) - expected).abs() < 1e-12 * expected);
        // ρ ≡ 1, |x - y| = 3, s = 2, d = 1.
        let long = EmbeddedSet::interval(1.0).unwrap();
        let w = density_weight(&long, Density::constant(1.0), 2.0, 1).unwrap();
        assert_eq!(w.eval(&[0.0], &[3.0]), 0.25);
    }

    #[test]
    fn density_must_be_normalized() {
        let err = density_weight(&circle(), Density::constant(1.0), 2.0, 1).unwrap_err();
        assert!(matches!(err, Error::DensityNotNormalized { .. }));
    }

    #[test]
    fn density_diagonal_recovers_rho() {
        let rho = Density::cosine(0.5, 0.0, 1.0).unwrap();
        let w = density_weight(&circle(), rho.clone(), 2.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let p = circle().sample(&mut rng);
            let back = w.diag(&p.coords).powf(-1.0 / 2.0);
            let r = rho.value(&p.coords);
            assert!((back - r).abs() <= 8.0 * f64::EPSILON * r, "{back} vs {r}");
        }
    }

    #[test]
    fn power_zero_examples() {
        let w = power_zero_weight(Point::from(vec![0.0, 0.0]), 3.0).unwrap();
        assert_eq!(w.eval(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(w.eval(&[1.0, 0.0], &[0.0, 1.0]), 2.0);
        let w = power_zero_weight(Point::from(vec![1.0, 0.0]), 2.0).unwrap();
        assert!((w.eval(&[1.5, 0.0], &[1.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!(power_zero_weight(Point::from(vec![0.0]), 0.0).is_err());
    }

    #[test]
    fn power_zero_lower_bound_holds() {
        let a = vec![1.0, 0.0];
        let t = 1.5;
        let w = power_zero_weight(Point::from(a.clone()), t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = circle().sample(&mut rng).coords;
            let y = circle().sample(&mut rng).coords;
            assert!(w.eval(&x, &y) >= dist(&x, &a).powf(t));
        }
    }

    #[test]
    fn weighted_measure_examples() {
        let opts = IntegrationOptions::default();
        let c = circle();
        let part = c.partition(&PartitionSpec { bins: 20 }).unwrap();
        let m = weighted_hausdorff(&c, &WeightFn::unit(), 2.0, 1, &part, &opts).unwrap();
        assert!((m.total - 2.0 * PI).abs() < 1e-10);
        let sum: f64 = m.normalized.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);

        let rho = Density::cosine(0.5, 0.0, 1.0).unwrap();
        let w = density_weight(&c, rho, 2.0, 1).unwrap();
        let m = weighted_hausdorff(&c, &w, 2.0, 1, &part, &opts).unwrap();
        assert!((m.total - 1.0).abs() < 1e-10);

        // Constant diagonal 4π²: (4π²)^(-1/2)·2π = 1, checked by direct quadrature.
        let w = density_weight(&c, Density::uniform(&c), 2.0, 1).unwrap();
        let m = weighted_hausdorff(&c, &w, 2.0, 1, &part, &opts).unwrap();
        let direct = crate::geometry::quadrature::adaptive_quadrature(
            |_| (4.0 * PI * PI).powf(-0.5),
            0.0,
            2.0 * PI,
            &opts,
        )
        .unwrap();
        assert!((m.total - direct.value).abs() < 1e-12);
        assert!((m.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_measure_scales_covariantly() {
        let opts = IntegrationOptions::default();
        let c = circle();
        let part = c.partition(&PartitionSpec { bins: 8 }).unwrap();
        let w = density_weight(&c, Density::cosine(0.5, 0.3, 1.0).unwrap(), 3.0, 1).unwrap();
        let base = weighted_hausdorff(&c, &w, 3.0, 1, &part, &opts).unwrap();
        for factor in [0.5, 2.0, 7.0] {
            let scaled =
                weighted_hausdorff(&c, &w.scaled(factor).unwrap(), 3.0, 1, &part, &opts).unwrap();
            let expected = base.total * factor.powf(-1.0 / 3.0);
            assert!((scaled.total - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn zero_of_order_at_least_s_diverges() {
        let opts = IntegrationOptions::default();
        let c = circle();
        let part = c.partition(&PartitionSpec { bins: 4 }).unwrap();
        let a = Point::from(vec![1.0, 0.0]);
        let ok = power_zero_weight(a.clone(), 1.0).unwrap();
        let m = weighted_hausdorff(&c, &ok, 2.0, 1, &part, &opts).unwrap();
        assert!(m.total.is_finite() && m.total > 0.0);
        let bad = power_zero_weight(a, 2.0).unwrap();
        let err = weighted_hausdorff(&c, &bad, 2.0, 1, &part, &opts).unwrap_err();
        assert!(matches!(err, Error::NonIntegrable(_)));
    }

    #[test]
    fn cpd_gate_on_catalog_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = circle();
        let weights = vec![
            WeightFn::unit(),
            density_weight(&c, Density::cosine(0.5, 0.0, 1.0).unwrap(), 2.0, 1).unwrap(),
            density_weight(&c, Density::uniform(&c), 4.0, 1).unwrap(),
        ];
        for w in weights {
            let hint = w.meta().diagonal_infimum_hint;
            assert!(hint > 0.0);
            let mut min = f64::INFINITY;
            for _ in 0..10_000 {
                let x = c.sample(&mut rng);
                let nudged = Point::from(vec![x.coords[0] + 1e-3, x.coords[1] - 1e-3]);
                let y = c.retract(&nudged).unwrap();
                min = min.min(w.eval(&x.coords, &y.coords));
            }
            assert!(min >= hint, "{}: {min} < {hint}", w.meta().label);
        }
    }

    #[test]
    fn weight_specs_deserialize() {
        let c = circle();
        let w: WeightSpec = serde_json::from_str(r#"{"kind":"unit"}"#).unwrap();
        assert!(w.build(&c, 2.0, 1).unwrap().is_unit());
        let w: WeightSpec =
            serde_json::from_str(r#"{"kind":"density","rho":{"name":"cosine","amplitude":0.5}}"#)
                .unwrap();
        assert!(w.build(&c, 2.0, 1).is_ok());
        let w: WeightSpec =
            serde_json::from_str(r#"{"kind":"power_zero","a":[1.0,0.0],"t":1.0}"#).unwrap();
        assert_eq!(w.build(&c, 2.0, 1).unwrap().meta().zeros.len(), 1);
        let bad: WeightSpec =
            serde_json::from_str(r#"{"kind":"power_zero","a":[1.0],"t":1.0}"#).unwrap();
        assert!(bad.build(&c, 2.0, 1).is_err());
    }
}
