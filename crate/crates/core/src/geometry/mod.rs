//! Embedded compact sets: a small catalog of rectifiable pieces with
//! closed-form measure, a uniform sampler, a nearest-point retraction and
//! region partitions.

mod partition;
pub mod quadrature;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use partition::{Cell, PartitionSpec, Region, RegionPartition};
pub use quadrature::{Integral, IntegrationMethod, IntegrationOptions};

/// A point in ambient Euclidean space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Point { coords })
        } else {
            Err(Error::NonFinitePoint)
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.coords, &other.coords)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn scaled(&self, gamma: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|c| c * gamma).collect(),
        }
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Angle of `(x, y)` in `[0, 2π)`.
pub(crate) fn angle_of(x: f64, y: f64) -> f64 {
    let mut t = y.atan2(x);
    if t < 0.0 {
        t += 2.0 * PI;
    }
    if t >= 2.0 * PI {
        t = 0.0;
    }
    t
}

/// A catalog piece placed rigidly (by translation) inside a disjoint union.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub set: SetKind,
    pub translation: Vec<f64>,
}

/// Serializable description of a catalog set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetKind {
    /// Circle of the given radius centered at the origin of R².
    Circle {
        radius: f64,
    },
    /// Arc `{(r cos θ, r sin θ) : 0 ≤ θ ≤ angle}` in R².
    Arc {
        radius: f64,
        angle: f64,
    },
    /// Segment `[0, length]` of the real line.
    Interval {
        length: f64,
    },
    /// Cube `[0, side]^dim` in R^dim.
    Cube {
        side: f64,
        dim: usize,
    },
    /// Round sphere in R³ centered at the origin.
    Sphere2 {
        radius: f64,
    },
    /// Flat (Clifford) torus `{(R cos u, R sin u, r cos v, r sin v)}` in R⁴.
    FlatTorus {
        #[serde(alias = "R")]
        major: f64,
        #[serde(alias = "r")]
        minor: f64,
    },
    DisjointUnion {
        components: Vec<Placement>,
    },
}

/// Bounding ball used for the component-separation check.
struct Ball {
    center: Vec<f64>,
    radius: f64,
}

/// A validated, immutable compact set `A ⊂ R^{d'}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetKind", into = "SetKind")]
pub struct EmbeddedSet {
    kind: SetKind,
}

impl TryFrom<SetKind> for EmbeddedSet {
    type Error = Error;
    fn try_from(kind: SetKind) -> Result<Self> {
        EmbeddedSet::new(kind)
    }
}

impl From<EmbeddedSet> for SetKind {
    fn from(set: EmbeddedSet) -> Self {
        set.kind
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl EmbeddedSet {
    pub fn new(kind: SetKind) -> Result<Self> {
        validate_piece(&kind, true)?;
        let set = EmbeddedSet { kind };
        if let SetKind::DisjointUnion { components } = &set.kind {
            if components.is_empty() {
                return Err(Error::InvalidSet("disjoint union has no components".into()));
            }
            let dim = ambient_dim_of(&components[0].set);
            let hdim = hausdorff_dim_of(&components[0].set);
            for c in components {
                if c.translation.len() != ambient_dim_of(&c.set) {
                    return Err(Error::InvalidSet(format!(
                        "translation has {} coordinates, component lives in R^{}",
                        c.translation.len(),
                        ambient_dim_of(&c.set)
                    )));
                }
                if !c.translation.iter().all(|t| t.is_finite()) {
                    return Err(Error::InvalidSet("translation must be finite".into()));
                }
                if ambient_dim_of(&c.set) != dim || hausdorff_dim_of(&c.set) != hdim {
                    return Err(Error::InvalidSet(
                        "components must share ambient and Hausdorff dimension".into(),
                    ));
                }
            }
            if set.component_gap() <= 0.0 {
                return Err(Error::InvalidSet(
                    "components must be at positive distance (bounding balls overlap)".into(),
                ));
            }
        }
        Ok(set)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(SetKind::Circle { radius })
    }

    pub fn arc(radius: f64, angle: f64) -> Result<Self> {
        Self::new(SetKind::Arc { radius, angle })
    }

    pub fn interval(length: f64) -> Result<Self> {
        Self::new(SetKind::Interval { length })
    }

    pub fn cube(side: f64, dim: usize) -> Result<Self> {
        Self::new(SetKind::Cube { side, dim })
    }

    pub fn sphere2(radius: f64) -> Result<Self> {
        Self::new(SetKind::Sphere2 { radius })
    }

    pub fn flat_torus(major: f64, minor: f64) -> Result<Self> {
        Self::new(SetKind::FlatTorus { major, minor })
    }

    pub fn disjoint_union(parts: Vec<(EmbeddedSet, Vec<f64>)>) -> Result<Self> {
        Self::new(SetKind::DisjointUnion {
            components: parts
                .into_iter()
                .map(|(s, translation)| Placement {
                    set: s.kind,
                    translation,
                })
                .collect(),
        })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            SetKind::Circle { .. } => "circle",
            SetKind::Arc { .. } => "arc",
            SetKind::Interval { .. } => "interval",
            SetKind::Cube { .. } => "cube",
            SetKind::Sphere2 { .. } => "sphere2",
            SetKind::FlatTorus { .. } => "flat_torus",
            SetKind::DisjointUnion { .. } => "disjoint_union",
        }
    }

    /// Ambient dimension d'.
    pub fn ambient_dim(&self) -> usize {
        ambient_dim_of(&self.kind)
    }

    /// Hausdorff dimension d.
    pub fn dim(&self) -> usize {
        hausdorff_dim_of(&self.kind)
    }

    /// `H_d(A)` in closed form.
    pub fn measure(&self) -> f64 {
        measure_of(&self.kind)
    }

    /// Exact diameter for single pieces; for unions the bound
    /// `max |c_i - c_j| + ρ_i + ρ_j` over component bounding balls.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SetKind::DisjointUnion { components } => {
                let balls: Vec<Ball> = components.iter().map(placed_ball).collect();
                let mut best: f64 = 0.0;
                for (i, bi) in balls.iter().enumerate() {
                    best = best.max(diameter_of(&components[i].set));
                    for bj in &balls[i + 1..] {
                        best = best.max(dist(&bi.center, &bj.center) + bi.radius + bj.radius);
                    }
                }
                best
            }
            k => diameter_of(k),
        }
    }

    /// Number of connected catalog pieces (1 unless a disjoint union).
    pub fn component_count(&self) -> usize {
        match &self.kind {
            SetKind::DisjointUnion { components } => components.len(),
            _ => 1,
        }
    }

    /// Measure of component `i`.
    pub fn component_measure(&self, i: usize) -> f64 {
        match &self.kind {
            SetKind::DisjointUnion { components } => measure_of(&components[i].set),
            k => {
                debug_assert_eq!(i, 0);
                measure_of(k)
            }
        }
    }

    /// Smallest gap between component bounding balls; `+∞` for a single piece.
    /// Points of different components are at least this far apart.
    pub fn component_gap(&self) -> f64 {
        match &self.kind {
            SetKind::DisjointUnion { components } => {
                let balls: Vec<Ball> = components.iter().map(placed_ball).collect();
                let mut gap = f64::INFINITY;
                for (i, bi) in balls.iter().enumerate() {
                    for bj in &balls[i + 1..] {
                        gap = gap.min(dist(&bi.center, &bj.center) - bi.radius - bj.radius);
                    }
                }
                gap
            }
            _ => f64::INFINITY,
        }
    }

    /// Distance threshold under which a point counts as lying on the set.
    pub fn on_set_tolerance(&self) -> f64 {
        64.0 * f64::EPSILON * self.diameter().max(1.0)
    }

    fn pieces(&self) -> Vec<(&SetKind, Option<&[f64]>)> {
        match &self.kind {
            SetKind::DisjointUnion { components } => components
                .iter()
                .map(|c| (&c.set, Some(c.translation.as_slice())))
                .collect(),
            k => vec![(k, None)],
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: p.len(),
            });
        }
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
        Ok(())
    }

    /// Nearest point of the set to `p`; the input itself is returned when it
    /// already lies on the set, which makes the map exactly idempotent.
    pub fn retract(&self, p: &Point) -> Result<Point> {
        self.check_dim(&p.coords)?;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (piece, shift) in self.pieces() {
            let local = to_local(&p.coords, shift);
            let q = from_local(retract_piece(piece, &local)?, shift);
            let d = dist(&q, &p.coords);
            best = match best {
                None => Some((d, q)),
                Some((bd, bq)) => {
                    if d < bd || (d == bd && lex_cmp(&q, &bq).is_lt()) {
                        Some((d, q))
                    } else {
                        Some((bd, bq))
                    }
                }
            };
        }
        let (d, q) = best.expect("at least one piece");
        if d <= self.on_set_tolerance() {
            Ok(p.clone())
        } else {
            Ok(Point { coords: q })
        }
    }

    pub fn distance_to(&self, p: &Point) -> Result<f64> {
        self.check_dim(&p.coords)?;
        let mut best = f64::INFINITY;
        for (piece, shift) in self.pieces() {
            let local = to_local(&p.coords, shift);
            let q = retract_piece(piece, &local)?;
            best = best.min(dist(&q, &local));
        }
        Ok(best)
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        matches!(self.distance_to(p), Ok(d) if d <= tol)
    }

    /// Index of the component nearest to `p`.
    pub fn component_of(&self, p: &[f64]) -> usize {
        match &self.kind {
            SetKind::DisjointUnion { components } => {
                let mut best = (f64::INFINITY, 0);
                for (i, c) in components.iter().enumerate() {
                    let local = to_local(p, Some(&c.translation));
                    let d = match retract_piece(&c.set, &local) {
                        Ok(q) => dist(&q, &local),
                        // Singular points (e.g. a circle's center) are equidistant
                        // from the whole piece; the bounding radius is that distance.
                        Err(_) => piece_ball(&c.set).radius,
                    };
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                best.1
            }
            _ => 0,
        }
    }

    /// Removes from a displacement `v` at `p ∈ A` its normal component, and
    /// for sets with boundary the components that would leave the set.
    pub fn project_direction(&self, p: &[f64], v: &mut [f64]) {
        let (piece, shift) = match &self.kind {
            SetKind::DisjointUnion { components } => {
                let c = &components[self.component_of(p)];
                (&c.set, Some(c.translation.as_slice()))
            }
            k => (k, None),
        };
        let local = to_local(p, shift);
        project_piece(piece, &local, v);
    }

    /// One point distributed according to normalized `H_d` on the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            SetKind::DisjointUnion { components } => {
                let total = self.measure();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = components.len() - 1;
                for (i, c) in components.iter().enumerate() {
                    let m = measure_of(&c.set);
                    if u < m {
                        pick = i;
                        break;
                    }
                    u -= m;
                }
                let c = &components[pick];
                Point {
                    coords: from_local(sample_piece(&c.set, rng), Some(&c.translation)),
                }
            }
            k => Point {
                coords: sample_piece(k, rng),
            },
        }
    }

    /// One point distributed according to normalized `H_d` on component `c`.
    pub fn sample_component<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Point {
        let (piece, shift) = self.pieces()[c];
        Point {
            coords: from_local(sample_piece(piece, rng), shift),
        }
    }

    /// Whether the set is a finite union of curves parametrized by arc length.
    pub fn is_curve(&self) -> bool {
        self.dim() == 1
    }

    /// Arc-length parametrization of a one-dimensional set: `u ∈ [0, 1]`
    /// runs through the components in order, each receiving a share of the
    /// parameter proportional to its length.
    pub fn curve_point(&self, u: f64) -> Option<Point> {
        if !self.is_curve() {
            return None;
        }
        let u = u.clamp(0.0, 1.0);
        let pieces = self.pieces();
        let total = self.measure();
        let mut acc = 0.0;
        for (i, (piece, shift)) in pieces.iter().enumerate() {
            let share = measure_of(piece) / total;
            if u < acc + share || i + 1 == pieces.len() {
                let local_u = ((u - acc) / share).clamp(0.0, 1.0);
                return Some(Point {
                    coords: from_local(curve_piece(piece, local_u), *shift),
                });
            }
            acc += share;
        }
        None
    }

    pub(crate) fn piece(&self, component: usize) -> (&SetKind, Option<&[f64]>) {
        self.pieces()[component]
    }

    /// Partition into regions according to `spec`.
    pub fn partition(&self, spec: &PartitionSpec) -> Result<RegionPartition> {
        RegionPartition::new(self, spec)
    }

    /// `∫_region f dH_d`: adaptive quadrature on curves, stratified Monte Carlo
    /// with a reported standard error on surfaces and boxes.
    pub fn region_integral<F: Fn(&[f64]) -> f64>(
        &self,
        f: F,
        region: &Region,
        opts: &IntegrationOptions,
    ) -> Result<Integral> {
        partition::integrate_region(self, &f, region, opts)
    }

    /// `∫_A f dH_d` over every component.
    pub fn integral<F: Fn(&[f64]) -> f64>(
        &self,
        f: F,
        opts: &IntegrationOptions,
    ) -> Result<Integral> {
        let mut total: Option<Integral> = None;
        for c in 0..self.component_count() {
            let r = Region::whole(self, c);
            let v = partition::integrate_region(self, &f, &r, opts)?;
            total = Some(match total {
                None => v,
                Some(t) => t.add(v),
            });
        }
        Ok(total.expect("at least one component"))
    }
}

/// Closed-form `H_d(A)`; kept as a free function to mirror the run-config API.
pub fn hausdorff_measure(set: &EmbeddedSet) -> f64 {
    set.measure()
}

fn validate_piece(kind: &SetKind, top: bool) -> Result<()> {
    match kind {
        SetKind::Circle { radius } | SetKind::Sphere2 { radius } => positive("radius", *radius),
        SetKind::Arc { radius, angle } => {
            positive("radius", *radius)?;
            positive("angle", *angle)?;
            if *angle >= 2.0 * PI {
                return Err(Error::InvalidSet(
                    "arc angle must be below 2π; use a circle".into(),
                ));
            }
            Ok(())
        }
        SetKind::Interval { length } => positive("length", *length),
        SetKind::Cube { side, dim } => {
            positive("side", *side)?;
            if *dim == 0 {
                return Err(Error::InvalidSet("cube dimension must be positive".into()));
            }
            Ok(())
        }
        SetKind::FlatTorus { major, minor } => {
            positive("major radius", *major)?;
            positive("minor radius", *minor)
        }
        SetKind::DisjointUnion { components } => {
            if !top {
                return Err(Error::UnsupportedSet("nested disjoint unions".into()));
            }
            for c in components {
                validate_piece(&c.set, false)?;
            }
            Ok(())
        }
    }
}

fn ambient_dim_of(kind: &SetKind) -> usize {
    match kind {
        SetKind::Circle { .. } | SetKind::Arc { .. } => 2,
        SetKind::Interval { .. } => 1,
        SetKind::Cube { dim, .. } => *dim,
        SetKind::Sphere2 { .. } => 3,
        SetKind::FlatTorus { .. } => 4,
        SetKind::DisjointUnion { components } => {
            components.first().map_or(0, |c| ambient_dim_of(&c.set))
        }
    }
}

fn hausdorff_dim_of(kind: &SetKind) -> usize {
    match kind {
        SetKind::Circle { .. } | SetKind::Arc { .. } | SetKind::Interval { .. } => 1,
        SetKind::Cube { dim, .. } => *dim,
        SetKind::Sphere2 { .. } | SetKind::FlatTorus { .. } => 2,
        SetKind::DisjointUnion { components } => {
            components.first().map_or(0, |c| hausdorff_dim_of(&c.set))
        }
    }
}

fn measure_of(kind: &SetKind) -> f64 {
    match kind {
        SetKind::Circle { radius } => 2.0 * PI * radius,
        SetKind::Arc { radius, angle } => radius * angle,
        SetKind::Interval { length } => *length,
        SetKind::Cube { side, dim } => side.powi(*dim as i32),
        SetKind::Sphere2 { radius } => 4.0 * PI * radius * radius,
        SetKind::FlatTorus { major, minor } => 4.0 * PI * PI * major * minor,
        SetKind::DisjointUnion { components } => {
            components.iter().map(|c| measure_of(&c.set)).sum()
        }
    }
}

fn diameter_of(kind: &SetKind) -> f64 {
    match kind {
        SetKind::Circle { radius } | SetKind::Sphere2 { radius } => 2.0 * radius,
        SetKind::Arc { radius, angle } => {
            if *angle >= PI {
                2.0 * radius
            } else {
                2.0 * radius * (angle / 2.0).sin()
            }
        }
        SetKind::Interval { length } => *length,
        SetKind::Cube { side, dim } => side * (*dim as f64).sqrt(),
        SetKind::FlatTorus { major, minor } => 2.0 * (major * major + minor * minor).sqrt(),
        SetKind::DisjointUnion { .. } => {
            unreachable!("unions are handled by EmbeddedSet::diameter")
        }
    }
}

fn piece_ball(kind: &SetKind) -> Ball {
    match kind {
        SetKind::Circle { radius } | SetKind::Arc { radius, .. } => Ball {
            center: vec![0.0, 0.0],
            radius: *radius,
        },
        SetKind::Interval { length } => Ball {
            center: vec![length / 2.0],
            radius: length / 2.0,
        },
        SetKind::Cube { side, dim } => Ball {
            center: vec![side / 2.0; *dim],
            radius: side * (*dim as f64).sqrt() / 2.0,
        },
        SetKind::Sphere2 { radius } => Ball {
            center: vec![0.0; 3],
            radius: *radius,
        },
        SetKind::FlatTorus { major, minor } => Ball {
            center: vec![0.0; 4],
            radius: (major * major + minor * minor).sqrt(),
        },
        SetKind::DisjointUnion { .. } => unreachable!("nested unions are rejected"),
    }
}

fn placed_ball(c: &Placement) -> Ball {
    let b = piece_ball(&c.set);
    Ball {
        center: b
            .center
            .iter()
            .zip(&c.translation)
            .map(|(x, t)| x + t)
            .collect(),
        radius: b.radius,
    }
}

fn to_local(p: &[f64], shift: Option<&[f64]>) -> Vec<f64> {
    match shift {
        Some(t) => p.iter().zip(t).map(|(x, t)| x - t).collect(),
        None => p.to_vec(),
    }
}

fn from_local(mut q: Vec<f64>, shift: Option<&[f64]>) -> Vec<f64> {
    if let Some(t) = shift {
        for (x, t) in q.iter_mut().zip(t) {
            *x += t;
        }
    }
    q
}

fn radial(p: &[f64], radius: f64, what: &'static str) -> Result<Vec<f64>> {
    let n = norm(p);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ProjectionSingularity(what));
    }
    Ok(p.iter().map(|x| x * (radius / n)).collect())
}

fn retract_piece(kind: &SetKind, p: &[f64]) -> Result<Vec<f64>> {
    match kind {
        SetKind::Circle { radius } => radial(p, *radius, "circle"),
        SetKind::Sphere2 { radius } => radial(p, *radius, "sphere"),
        SetKind::Arc { radius, angle } => {
            let q = radial(p, *radius, "arc")?;
            let theta = angle_of(p[0], p[1]);
            if theta <= *angle {
                return Ok(q);
            }
            let start = vec![*radius, 0.0];
            let end = vec![radius * angle.cos(), radius * angle.sin()];
            let (ds, de) = (dist(p, &start), dist(p, &end));
            if ds < de || (ds == de && lex_cmp(&start, &end).is_lt()) {
                Ok(start)
            } else {
                Ok(end)
            }
        }
        SetKind::Interval { length } => Ok(vec![p[0].clamp(0.0, *length)]),
        SetKind::Cube { side, .. } => Ok(p.iter().map(|x| x.clamp(0.0, *side)).collect()),
        SetKind::FlatTorus { major, minor } => {
            let a = radial(&p[0..2], *major, "flat torus")?;
            let b = radial(&p[2..4], *minor, "flat torus")?;
            Ok(vec![a[0], a[1], b[0], b[1]])
        }
        SetKind::DisjointUnion { .. } => unreachable!("nested unions are rejected"),
    }
}

fn remove_radial(p: &[f64], v: &mut [f64]) {
    let n2 = dot(p, p);
    if n2 == 0.0 {
        return;
    }
    let c = dot(p, v) / n2;
    for (vi, pi) in v.iter_mut().zip(p) {
        *vi -= c * pi;
    }
}

fn project_piece(kind: &SetKind, p: &[f64], v: &mut [f64]) {
    let edge = 1e-12;
    match kind {
        SetKind::Circle { .. } | SetKind::Sphere2 { .. } => remove_radial(p, v),
        SetKind::Arc { radius, angle } => {
            remove_radial(p, v);
            // Tangential speed along increasing θ.
            let (s, c) = (p[1] / radius, p[0] / radius);
            let along = -s * v[0] + c * v[1];
            let theta = angle_of(p[0], p[1]);
            let at_start = theta <= edge || theta >= 2.0 * PI - edge;
            let at_end = (theta - angle).abs() <= edge;
            if (at_start && along < 0.0) || (at_end && along > 0.0) {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        SetKind::Interval { length } => {
            if (p[0] <= 0.0 && v[0] < 0.0) || (p[0] >= *length && v[0] > 0.0) {
                v[0] = 0.0;
            }
        }
        SetKind::Cube { side, .. } => {
            for (x, vi) in p.iter().zip(v.iter_mut()) {
                if (*x <= 0.0 && *vi < 0.0) || (*x >= *side && *vi > 0.0) {
                    *vi = 0.0;
                }
            }
        }
        SetKind::FlatTorus { .. } => {
            let (va, vb) = v.split_at_mut(2);
            remove_radial(&p[0..2], va);
            remove_radial(&p[2..4], vb);
        }
        SetKind::DisjointUnion { .. } => unreachable!("nested unions are rejected"),
    }
}

fn sample_piece<R: Rng + ?Sized>(kind: &SetKind, rng: &mut R) -> Vec<f64> {
    match kind {
        SetKind::Circle { radius } => {
            let t = 2.0 * PI * rng.gen::<f64>();
            vec![radius * t.cos(), radius * t.sin()]
        }
        SetKind::Arc { radius, angle } => {
            let t = angle * rng.gen::<f64>();
            vec![radius * t.cos(), radius * t.sin()]
        }
        SetKind::Interval { length } => vec![length * rng.gen::<f64>()],
        SetKind::Cube { side, dim } => (0..*dim).map(|_| side * rng.gen::<f64>()).collect(),
        SetKind::Sphere2 { radius } => {
            let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            sphere_point(*radius, z, 2.0 * PI * rng.gen::<f64>())
        }
        SetKind::FlatTorus { major, minor } => {
            let u = 2.0 * PI * rng.gen::<f64>();
            let v = 2.0 * PI * rng.gen::<f64>();
            torus_point(*major, *minor, u, v)
        }
        SetKind::DisjointUnion { .. } => unreachable!("nested unions are rejected"),
    }
}

/// Point on the sphere at height `z ∈ [-1, 1]` (unit scale) and longitude `phi`.
pub(crate) fn sphere_point(radius: f64, z: f64, phi: f64) -> Vec<f64> {
    let rho = (1.0 - z * z).max(0.0).sqrt();
    vec![
        radius * rho * phi.cos(),
        radius * rho * phi.sin(),
        radius * z,
    ]
}

pub(crate) fn torus_point(major: f64, minor: f64, u: f64, v: f64) -> Vec<f64> {
    vec![
        major * u.cos(),
        major * u.sin(),
        minor * v.cos(),
        minor * v.sin(),
    ]
}

fn curve_piece(kind: &SetKind, u: f64) -> Vec<f64> {
    match kind {
        SetKind::Circle { radius } => {
            let t = 2.0 * PI * u;
            vec![radius * t.cos(), radius * t.sin()]
        }
        SetKind::Arc { radius, angle } => {
            let t = angle * u;
            vec![radius * t.cos(), radius * t.sin()]
        }
        SetKind::Interval { length } => vec![length * u],
        SetKind::Cube { side, .. } => vec![side * u],
        _ => unreachable!("not a curve"),
    }
}

fn curve_param_piece(kind: &SetKind, p: &[f64]) -> f64 {
    match kind {
        SetKind::Circle { .. } => angle_of(p[0], p[1]) / (2.0 * PI),
        SetKind::Arc { angle, .. } => {
            let t = angle_of(p[0], p[1]);
            // Points just below θ = 0 wrap to 2π; they belong to the start.
            if t > *angle {
                if t - angle < 2.0 * PI - t {
                    1.0
                } else {
                    0.0
                }
            } else {
                t / angle
            }
        }
        SetKind::Interval { length } => (p[0] / length).clamp(0.0, 1.0),
        SetKind::Cube { side, .. } => (p[0] / side).clamp(0.0, 1.0),
        _ => unreachable!("not a curve"),
    }
}
