//! Weighted Riesz s-energy, per-point potentials and ambient gradients.
//!
//! Pair sums are evaluated row by row: row `i` accumulates
//! `U_i = Σ_{j≠i} w̃(x_i, x_j) |x_i - x_j|^{-s}` sequentially in index order
//! with compensated summation, rows are independent, and the total is the
//! compensated sum of the rows in index order. Results are therefore
//! bit-identical for any worker count (the contract only needs stability per
//! worker count, this is stronger). `w̃` is the symmetrized weight, which
//! equals `w` for symmetric weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, EmbeddedSet, Point};
use crate::weights::{PreparedWeight, WeightFn};

/// Rows below this size are evaluated on the calling thread.
const PARALLEL_THRESHOLD: usize = 48;

/// Relative distance floor: pairs closer than `1e-14·diam(A)` are coincident.
pub const DISTANCE_FLOOR: f64 = 1e-14;

/// Tolerance (relative to the diameter) for configuration points to count
/// as lying on the set.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;

/// Neumaier summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Accumulator::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[derive(Clone, Copy, Default, Debug)]
struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: String,
}

impl Provenance {
    pub fn manual() -> Self {
        Provenance {
            seed: None,
            generator: "manual".into(),
        }
    }
}

/// N points on a set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Configuration {
    points: Vec<Point>,
    #[serde(skip)]
    set: EmbeddedSet,
    provenance: Provenance,
}

impl Configuration {
    /// Checks that every point lies on the set within `1e-10·diam(A)`.
    pub fn new(set: EmbeddedSet, points: Vec<Point>, provenance: Provenance) -> Result<Self> {
        let tol = MEMBERSHIP_TOLERANCE * set.diameter();
        for (index, p) in points.iter().enumerate() {
            let distance = set.distance_to(p)?;
            if distance > tol {
                return Err(Error::OffSet { index, distance });
            }
        }
        Ok(Configuration {
            points,
            set,
            provenance,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn set(&self) -> &EmbeddedSet {
        &self.set
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance below which two points are treated as coincident.
    pub fn distance_floor(&self) -> f64 {
        DISTANCE_FLOOR * self.set.diameter()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    pub per_point: Vec<f64>,
    pub min_pair_distance: f64,
    pub max_pair_distance: f64,
}

#[derive(Clone, Copy, Debug)]
enum Kernel {
    One,
    Two,
    Three,
    Four,
    General(f64),
}

impl Kernel {
    fn new(s: f64) -> Self {
        match s {
            1.0 => Kernel::One,
            2.0 => Kernel::Two,
            3.0 => Kernel::Three,
            4.0 => Kernel::Four,
            x => Kernel::General(x),
        }
    }

    /// `r^{-s}` from `r²`.
    #[inline]
    fn eval(self, r2: f64) -> f64 {
        match self {
            Kernel::One => 1.0 / r2.sqrt(),
            Kernel::Two => 1.0 / r2,
            Kernel::Three => 1.0 / (r2 * r2.sqrt()),
            Kernel::Four => 1.0 / (r2 * r2),
            Kernel::General(s) => r2.powf(-0.5 * s),
        }
    }
}

struct Row {
    potential: f64,
    min_r2: f64,
    max_r2: f64,
    grad: Option<Vec<f64>>,
}

fn check_inputs(points: &[Point], s: f64) -> Result<usize> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "s must be positive, got {s}"
        )));
    }
    let dim = points[0].dim();
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
    }
    Ok(dim)
}

#[allow(clippy::too_many_arguments)]
fn row<const D: usize>(
    coords: &[f64],
    dim: usize,
    i: usize,
    s: f64,
    kernel: Kernel,
    w: &PreparedWeight<'_>,
    floor2: f64,
    with_grad: bool,
) -> Result<Row> {
    let dim = if D > 0 { D } else { dim };
    let n = coords.len() / dim;
    let xi = &coords[i * dim..(i + 1) * dim];
    // Plain partial sums of 64 terms, flushed into a compensated total.
    let mut acc = Accumulator::default();
    let mut block = 0.0;
    let mut min_r2 = f64::INFINITY;
    let mut max_r2: f64 = 0.0;
    let mut grad = if with_grad {
        Some(vec![0.0; dim])
    } else {
        None
    };
    let unit = matches!(w, PreparedWeight::Unit);
    for j in 0..n {
        if j == i {
            continue;
        }
        let xj = &coords[j * dim..(j + 1) * dim];
        let r2 = dist2(xi, xj);
        if r2 <= floor2 {
            return Err(Error::CoincidentPoints {
                i: i.min(j),
                j: i.max(j),
                distance: r2.sqrt(),
                floor: floor2.sqrt(),
            });
        }
        min_r2 = min_r2.min(r2);
        max_r2 = max_r2.max(r2);
        let rs = kernel.eval(r2);
        let (wv, r) = if unit {
            (1.0, 0.0)
        } else {
            let r = r2.sqrt();
            let wv = w.pair(i, j, xi, xj, r);
            if !(wv.is_finite() && wv >= 0.0) {
                return Err(Error::InvalidWeightValue {
                    i: i.min(j),
                    j: i.max(j),
                    value: wv,
                });
            }
            (wv, r)
        };
        block += wv * rs;
        if j % 64 == 63 {
            acc.add(block);
            block = 0.0;
        }
        if let Some(g) = grad.as_mut() {
            // d/dx_i of the (i,j) and (j,i) terms of a symmetric weight.
            let radial = -2.0 * s * wv * rs / r2;
            for k in 0..dim {
                g[k] += radial * (xi[k] - xj[k]);
            }
            if !unit {
                w.add_grad_first(i, j, xi, xj, r, wv, 2.0 * rs, g)?;
            }
        }
    }
    acc.add(block);
    Ok(Row {
        potential: acc.value(),
        min_r2,
        max_r2,
        grad,
    })
}

fn evaluate(
    points: &[Point],
    s: f64,
    w: &WeightFn,
    floor: f64,
    with_grad: bool,
) -> Result<(EnergyReport, Option<Vec<Vec<f64>>>)> {
    check_inputs(points, s)?;
    if with_grad && !w.meta().differentiable {
        return Err(Error::NotDifferentiable(w.meta().label.clone()));
    }
    let kernel = Kernel::new(s);
    let floor2 = floor * floor;
    let n = points.len();
    let dim = points[0].dim();
    let coords: Vec<f64> = points
        .iter()
        .flat_map(|p| p.coords.iter().copied())
        .collect();
    let prepared = w.prepare(points, with_grad);
    let eval_row = |i: usize| match dim {
        1 => row::<1>(&coords, dim, i, s, kernel, &prepared, floor2, with_grad),
        2 => row::<2>(&coords, dim, i, s, kernel, &prepared, floor2, with_grad),
        3 => row::<3>(&coords, dim, i, s, kernel, &prepared, floor2, with_grad),
        4 => row::<4>(&coords, dim, i, s, kernel, &prepared, floor2, with_grad),
        _ => row::<0>(&coords, dim, i, s, kernel, &prepared, floor2, with_grad),
    };
    let rows: Vec<Result<Row>> = if n >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(eval_row).collect()
    } else {
        (0..n).map(eval_row).collect()
    };
    let mut per_point = Vec::with_capacity(n);
    let mut grads = if with_grad {
        Some(Vec::with_capacity(n))
    } else {
        None
    };
    let mut min_r2 = f64::INFINITY;
    let mut max_r2: f64 = 0.0;
    for r in rows {
        let r = r?;
        per_point.push(r.potential);
        min_r2 = min_r2.min(r.min_r2);
        max_r2 = max_r2.max(r.max_r2);
        if let (Some(gs), Some(g)) = (grads.as_mut(), r.grad) {
            gs.push(g);
        }
    }
    let total = compensated_sum(per_point.iter().copied());
    Ok((
        EnergyReport {
            total,
            per_point,
            min_pair_distance: min_r2.sqrt(),
            max_pair_distance: max_r2.sqrt(),
        },
        grads,
    ))
}

/// `E_s^w(ω_N) = Σ_{i≠j} w(x_i, x_j) / |x_i - x_j|^s` for a configuration.
pub fn energy(config: &Configuration, s: f64, w: &WeightFn) -> Result<EnergyReport> {
    energy_of_points(config.points(), s, w, config.distance_floor())
}

/// Energy of raw points with an explicit coincidence floor.
pub fn energy_of_points(
    points: &[Point],
    s: f64,
    w: &WeightFn,
    floor: f64,
) -> Result<EnergyReport> {
    Ok(evaluate(points, s, w, floor, false)?.0)
}

/// Ambient gradient `∂E/∂x_i` for every point.
pub fn gradient(config: &Configuration, s: f64, w: &WeightFn) -> Result<Vec<Vec<f64>>> {
    Ok(energy_and_gradient(config.points(), s, w, config.distance_floor())?.1)
}

pub fn energy_and_gradient(
    points: &[Point],
    s: f64,
    w: &WeightFn,
    floor: f64,
) -> Result<(EnergyReport, Vec<Vec<f64>>)> {
    let (report, grads) = evaluate(points, s, w, floor, true)?;
    Ok((report, grads.expect("gradient requested")))
}

/// `Σ_j w(x, x_j) / |x - x_j|^s` at an arbitrary point, skipping index `skip`.
pub fn potential_at(points: &[Point], x: &[f64], s: f64, w: &WeightFn, skip: Option<usize>) -> f64 {
    let kernel = Kernel::new(s);
    compensated_sum(
        points
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .map(|(_, p)| {
                let r2 = dist2(x, &p.coords);
                let wv = if w.is_symmetric() {
                    w.eval(x, &p.coords)
                } else {
                    (w.eval(x, &p.coords) + w.eval(&p.coords, x)) / 2.0
                };
                wv * kernel.eval(r2)
            }),
    )
}

/// Direct and predicted energies of a configuration shrunk towards a sink.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaledEnergy {
    pub gamma: f64,
    pub base: f64,
    pub direct: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub consistent: bool,
}

/// Compares `E(γω)` with `γ^{t-s} E(ω)` for the weight `|x|^t + |y|^t`
/// whose only zero sits at the origin.
pub fn scaled_energy(points: &[Point], gamma: f64, s: f64, w: &WeightFn) -> Result<ScaledEnergy> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "γ must lie in (0, 1], got {gamma}"
        )));
    }
    let zeros = &w.meta().zeros;
    let t = match zeros.as_slice() {
        [z] if z.location.coords.iter().all(|c| *c == 0.0) => z.order,
        _ => {
            return Err(Error::InvalidParameter(
                "scaled_energy needs a weight with a single zero at the origin".into(),
            ))
        }
    };
    if let Some(p) = points.iter().find(|p| p.norm() > 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "configuration must lie in the unit ball (|x| = {})",
            p.norm()
        )));
    }
    let floor = f64::MIN_POSITIVE;
    let base = energy_of_points(points, s, w, floor)?.total;
    let scaled: Vec<Point> = points.iter().map(|p| p.scaled(gamma)).collect();
    let direct = energy_of_points(&scaled, s, w, floor)?.total;
    let predicted = gamma.powf(t - s) * base;
    let relative_error = (direct - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE);
    Ok(ScaledEnergy {
        gamma,
        base,
        direct,
        predicted,
        relative_error,
        consistent: relative_error <= 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{density_weight, power_zero_weight, symmetrize, Density};
    use std::f64::consts::PI;

    fn circle_points(n: usize, phase: f64) -> Vec<Point> {
        (0..n)
            .map(|k| {
                let t = phase + 2.0 * PI * k as f64 / n as f64;
                Point::from(vec![t.cos(), t.sin()])
            })
            .collect()
    }

    /// Plain double loop over ordered pairs.
    fn brute_force(points: &[Point], s: f64) -> f64 {
        let mut e = 0.0;
        for (i, p) in points.iter().enumerate() {
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    e += p.dist(q).powf(-s);
                }
            }
        }
        e
    }

    #[test]
    fn two_points() {
        let pts = vec![Point::from(vec![0.0, 0.0]), Point::from(vec![0.0, 0.5])];
        let e = energy_of_points(&pts, 3.0, &WeightFn::unit(), 1e-14).unwrap();
        assert!((e.total - 2.0 / 0.125).abs() < 1e-12);
        assert_eq!(e.min_pair_distance, 0.5);
        assert_eq!(e.max_pair_distance, 0.5);
    }

    #[test]
    fn equilateral_triangle() {
        let e = energy_of_points(&circle_points(3, 0.0), 2.0, &WeightFn::unit(), 1e-14).unwrap();
        assert!((e.total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn equally_spaced_circle_closed_form() {
        // Σ_{k=1}^{N-1} csc²(πk/N) = (N² - 1)/3, so E = N(N² - 1)/12 for s = 2.
        for n in 2..=64usize {
            let pts = circle_points(n, 0.1);
            let e = energy_of_points(&pts, 2.0, &WeightFn::unit(), 1e-14)
                .unwrap()
                .total;
            let closed = n as f64 * ((n * n) as f64 - 1.0) / 12.0;
            let brute = brute_force(&pts, 2.0);
            assert!((e - closed).abs() < 1e-12 * closed, "n={n}");
            assert!((brute - closed).abs() < 1e-11 * closed, "n={n}");
        }
    }

    #[test]
    fn coincident_points_are_rejected() {
        let pts = vec![Point::from(vec![1.0, 0.0]), Point::from(vec![1.0, 0.0])];
        let err = energy_of_points(&pts, 2.0, &WeightFn::unit(), 1e-14).unwrap_err();
        assert!(matches!(err, Error::CoincidentPoints { i: 0, j: 1, .. }));
        let one = vec![Point::from(vec![1.0, 0.0])];
        assert!(matches!(
            energy_of_points(&one, 2.0, &WeightFn::unit(), 1e-14),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn infinite_weights_are_rejected() {
        let w = WeightFn::raw(|_, _| f64::INFINITY, true, 1.0);
        let pts = circle_points(3, 0.0);
        assert!(matches!(
            energy_of_points(&pts, 2.0, &w, 1e-14),
            Err(Error::InvalidWeightValue { .. })
        ));
    }

    #[test]
    fn potentials_sum_to_total() {
        let pts = circle_points(100, 0.3);
        let e = energy_of_points(&pts, 1.5, &WeightFn::unit(), 1e-14).unwrap();
        let sum: f64 = e.per_point.iter().sum();
        assert!((sum - e.total).abs() < 1e-12 * e.total);
        let u0 = potential_at(&pts, &pts[0].coords, 1.5, &WeightFn::unit(), Some(0));
        assert!((u0 - e.per_point[0]).abs() < 1e-12 * u0);
    }

    #[test]
    fn symmetrization_is_exact() {
        let raw = WeightFn::raw(|x, y| 1.0 + x[0] * x[0] + 0.25 * y[1], false, 0.5);
        let pts = circle_points(37, 0.2);
        let a = energy_of_points(&pts, 2.0, &raw, 1e-14).unwrap();
        let b = energy_of_points(&pts, 2.0, &symmetrize(&raw), 1e-14).unwrap();
        assert_eq!(a.total, b.total);
        assert_eq!(a.per_point, b.per_point);
    }

    #[test]
    fn sink_scaling_examples() {
        let w = power_zero_weight(Point::from(vec![0.0, 0.0]), 2.0).unwrap();
        let pts = circle_points(9, 0.4);
        let same = scaled_energy(&pts, 1.0, 2.0, &w).unwrap();
        assert_eq!(same.direct, same.base);
        let inv = scaled_energy(&pts, 0.3, 2.0, &w).unwrap();
        assert!(inv.consistent, "{inv:?}");
        assert!((inv.direct - inv.base).abs() < 1e-12 * inv.base);
        let w4 = power_zero_weight(Point::from(vec![0.0, 0.0]), 4.0).unwrap();
        let r = scaled_energy(&pts, 0.5, 2.0, &w4).unwrap();
        assert!((r.direct / r.base - 0.25).abs() < 1e-12);
        assert!(scaled_energy(&pts, 1.5, 2.0, &w4).is_err());
        assert!(scaled_energy(&pts, 0.5, 2.0, &WeightFn::unit()).is_err());
    }

    fn finite_difference(points: &[Point], s: f64, w: &WeightFn, h: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..points.len() {
            let mut gi = Vec::new();
            for k in 0..points[i].dim() {
                let mut plus = points.to_vec();
                let mut minus = points.to_vec();
                plus[i].coords[k] += h;
                minus[i].coords[k] -= h;
                let ep = energy_of_points(&plus, s, w, 0.0).unwrap().total;
                let em = energy_of_points(&minus, s, w, 0.0).unwrap().total;
                gi.push((ep - em) / (2.0 * h));
            }
            out.push(gi);
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let circle = EmbeddedSet::circle(1.0).unwrap();
        let rho = Density::cosine(0.5, 0.2, 1.0).unwrap();
        let weights = vec![
            WeightFn::unit(),
            density_weight(&circle, rho, 2.0, 1).unwrap(),
            power_zero_weight(Point::from(vec![1.0, 0.0]), 1.5).unwrap(),
        ];
        let pts = circle_points(7, 0.37);
        for w in &weights {
            let (_, g) = energy_and_gradient(&pts, 2.0, w, 1e-14).unwrap();
            let fd = finite_difference(&pts, 2.0, w, 2e-6);
            for (a, b) in g.iter().flatten().zip(fd.iter().flatten()) {
                let scale = a.abs().max(1e-3);
                assert!(
                    (a - b).abs() < 1e-5 * scale,
                    "{}: {a} vs {b}",
                    w.meta().label
                );
            }
        }
    }

    #[test]
    fn symmetric_configurations_have_radial_gradients() {
        let circle = EmbeddedSet::circle(1.0).unwrap();
        let sq = Configuration::new(circle, circle_points(4, 0.0), Provenance::manual()).unwrap();
        let g = gradient(&sq, 2.0, &WeightFn::unit()).unwrap();
        for (p, gi) in sq.points().iter().zip(&g) {
            let tangential = -p.coords[1] * gi[0] + p.coords[0] * gi[1];
            assert!(tangential.abs() < 1e-10);
        }
        let sphere = EmbeddedSet::sphere2(1.0).unwrap();
        let pair = vec![
            Point::from(vec![0.0, 0.0, 1.0]),
            Point::from(vec![0.0, 0.0, -1.0]),
        ];
        let pair = Configuration::new(sphere, pair, Provenance::manual()).unwrap();
        let g = gradient(&pair, 1.0, &WeightFn::unit()).unwrap();
        for gi in &g {
            assert_eq!(gi[0], 0.0);
            assert_eq!(gi[1], 0.0);
        }
    }

    #[test]
    fn raw_weights_are_not_differentiable() {
        let raw = WeightFn::raw(|_, _| 1.0, true, 1.0);
        assert!(matches!(
            energy_and_gradient(&circle_points(3, 0.0), 2.0, &raw, 1e-14),
            Err(Error::NotDifferentiable(_))
        ));
    }

    #[test]
    fn off_set_points_are_rejected() {
        let circle = EmbeddedSet::circle(1.0).unwrap();
        let pts = vec![Point::from(vec![1.0, 0.0]), Point::from(vec![0.0, 1.1])];
        assert!(matches!(
            Configuration::new(circle, pts, Provenance::manual()),
            Err(Error::OffSet { index: 1, .. })
        ));
    }

    #[test]
    fn parallel_and_serial_rows_agree_bitwise() {
        let pts = circle_points(200, 0.1);
        let w = WeightFn::unit();
        let a = energy_of_points(&pts, 2.5, &w, 1e-14).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| energy_of_points(&pts, 2.5, &w, 1e-14).unwrap());
        assert_eq!(a, b);
    }
}
