use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature::{adaptive_quadrature, stratified_mean, Integral, IntegrationOptions};
use super::{
    angle_of, curve_param_piece, curve_piece, from_local, measure_of, norm, sphere_point, to_local,
    torus_point, EmbeddedSet, SetKind,
};
use crate::error::{Error, Result};

/// How finely to cut each component: `bins` parameter cells on curves,
/// `bins` cells per axis on cubes and tori, and `bins` equal-height bands
/// times `2·bins` longitude sectors on spheres (equal-area cells).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub bins: usize,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec { bins: 20 }
    }
}

/// Cell of one component in its own coordinates. All ranges are half-open,
/// lower edge inclusive, except the last cell along each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cell {
    /// Range of the arc-length parameter `u ∈ [0, 1]`.
    Param { lo: f64, hi: f64 },
    /// Box in units of the cube side.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Height band `z ∈ [-1, 1]` (unit sphere scale) and longitude range.
    SphereCell {
        z_lo: f64,
        z_hi: f64,
        phi_lo: f64,
        phi_hi: f64,
    },
    /// Angle ranges as fractions of a full turn.
    TorusCell {
        u_lo: f64,
        u_hi: f64,
        v_lo: f64,
        v_hi: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub component: usize,
    pub cell: Cell,
}

impl Region {
    /// The whole of component `component`.
    pub fn whole(set: &EmbeddedSet, component: usize) -> Region {
        let (piece, _) = set.piece(component);
        let cell = match piece {
            SetKind::Cube { dim, .. } if *dim >= 2 => Cell::Box {
                lo: vec![0.0; *dim],
                hi: vec![1.0; *dim],
            },
            SetKind::Sphere2 { .. } => Cell::SphereCell {
                z_lo: -1.0,
                z_hi: 1.0,
                phi_lo: 0.0,
                phi_hi: 2.0 * PI,
            },
            SetKind::FlatTorus { .. } => Cell::TorusCell {
                u_lo: 0.0,
                u_hi: 1.0,
                v_lo: 0.0,
                v_hi: 1.0,
            },
            _ => Cell::Param { lo: 0.0, hi: 1.0 },
        };
        Region { component, cell }
    }

    /// Fraction of the component's measure covered by the cell.
    fn fraction(&self) -> f64 {
        match &self.cell {
            Cell::Param { lo, hi } => hi - lo,
            Cell::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Cell::SphereCell {
                z_lo,
                z_hi,
                phi_lo,
                phi_hi,
            } => (z_hi - z_lo) / 2.0 * (phi_hi - phi_lo) / (2.0 * PI),
            Cell::TorusCell {
                u_lo,
                u_hi,
                v_lo,
                v_hi,
            } => (u_hi - u_lo) * (v_hi - v_lo),
        }
    }

    pub fn measure(&self, set: &EmbeddedSet) -> f64 {
        set.component_measure(self.component) * self.fraction()
    }
}

/// Finite family of disjoint regions covering the set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionPartition {
    regions: Vec<Region>,
    measures: Vec<f64>,
    /// Cells per axis for each component (curve, cube, torus, sphere bands).
    bins: usize,
    /// Index of the first region of each component.
    offsets: Vec<usize>,
}

fn edge(i: usize, k: usize) -> f64 {
    i as f64 / k as f64
}

fn bin_of(x: f64, k: usize) -> usize {
    if x.is_nan() || x <= 0.0 {
        return 0;
    }
    ((x * k as f64).floor() as usize).min(k - 1)
}

impl RegionPartition {
    pub fn new(set: &EmbeddedSet, spec: &PartitionSpec) -> Result<Self> {
        let k = spec.bins;
        if k == 0 {
            return Err(Error::InvalidParameter(
                "partition needs at least one bin".into(),
            ));
        }
        let mut regions = Vec::new();
        let mut offsets = Vec::new();
        for c in 0..set.component_count() {
            offsets.push(regions.len());
            let (piece, _) = set.piece(c);
            match piece {
                SetKind::Cube { dim, .. } if *dim >= 2 => {
                    let dim = *dim;
                    let mut idx = vec![0usize; dim];
                    for _ in 0..k.pow(dim as u32) {
                        regions.push(Region {
                            component: c,
                            cell: Cell::Box {
                                lo: idx.iter().map(|&i| edge(i, k)).collect(),
                                hi: idx.iter().map(|&i| edge(i + 1, k)).collect(),
                            },
                        });
                        for slot in idx.iter_mut() {
                            *slot += 1;
                            if *slot < k {
                                break;
                            }
                            *slot = 0;
                        }
                    }
                }
                SetKind::Sphere2 { .. } => {
                    let nphi = 2 * k;
                    for iz in 0..k {
                        for ip in 0..nphi {
                            regions.push(Region {
                                component: c,
                                cell: Cell::SphereCell {
                                    z_lo: -1.0 + 2.0 * edge(iz, k),
                                    z_hi: -1.0 + 2.0 * edge(iz + 1, k),
                                    phi_lo: 2.0 * PI * edge(ip, nphi),
                                    phi_hi: 2.0 * PI * edge(ip + 1, nphi),
                                },
                            });
                        }
                    }
                }
                SetKind::FlatTorus { .. } => {
                    for iu in 0..k {
                        for iv in 0..k {
                            regions.push(Region {
                                component: c,
                                cell: Cell::TorusCell {
                                    u_lo: edge(iu, k),
                                    u_hi: edge(iu + 1, k),
                                    v_lo: edge(iv, k),
                                    v_hi: edge(iv + 1, k),
                                },
                            });
                        }
                    }
                }
                _ => {
                    for i in 0..k {
                        regions.push(Region {
                            component: c,
                            cell: Cell::Param {
                                lo: edge(i, k),
                                hi: edge(i + 1, k),
                            },
                        });
                    }
                }
            }
        }
        let measures = regions.iter().map(|r| r.measure(set)).collect();
        Ok(RegionPartition {
            regions,
            measures,
            bins: k,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_measures(&self) -> &[f64] {
        &self.measures
    }

    /// Region index of a point of the set. Every point maps to exactly one
    /// region; cell boundaries belong to the cell above them.
    pub fn locate(&self, set: &EmbeddedSet, p: &[f64]) -> usize {
        let c = set.component_of(p);
        let (piece, shift) = set.piece(c);
        let local = to_local(p, shift);
        let k = self.bins;
        let within = match piece {
            SetKind::Cube { dim, side } if *dim >= 2 => {
                let mut index = 0;
                for axis in (0..*dim).rev() {
                    index = index * k + bin_of(local[axis] / side, k);
                }
                index
            }
            SetKind::Sphere2 { .. } => {
                let n = norm(&local);
                let z = if n > 0.0 {
                    (local[2] / n).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                let iz = bin_of((z + 1.0) / 2.0, k);
                let ip = bin_of(angle_of(local[0], local[1]) / (2.0 * PI), 2 * k);
                iz * 2 * k + ip
            }
            SetKind::FlatTorus { .. } => {
                let iu = bin_of(angle_of(local[0], local[1]) / (2.0 * PI), k);
                let iv = bin_of(angle_of(local[2], local[3]) / (2.0 * PI), k);
                iu * k + iv
            }
            _ => bin_of(curve_param_piece(piece, &local), k),
        };
        self.offsets[c] + within
    }
}

pub(super) fn integrate_region<F: Fn(&[f64]) -> f64>(
    set: &EmbeddedSet,
    f: &F,
    region: &Region,
    opts: &IntegrationOptions,
) -> Result<Integral> {
    let (piece, shift) = set.piece(region.component);
    let shift = shift.map(|s| s.to_vec());
    let shift = shift.as_deref();
    let m = measure_of(piece);
    match (&region.cell, piece) {
        (Cell::Param { lo, hi }, _) => {
            let g = |u: f64| f(&from_local(curve_piece(piece, u), shift)) * m;
            adaptive_quadrature(g, *lo, *hi, opts)
        }
        (Cell::Box { lo, hi }, SetKind::Cube { side, dim }) => {
            let g = |u: &[f64]| {
                let x: Vec<f64> = (0..*dim)
                    .map(|a| side * (lo[a] + u[a] * (hi[a] - lo[a])))
                    .collect();
                f(&from_local(x, shift))
            };
            Ok(stratified_mean(g, *dim, opts)?.scaled(region.measure(set)))
        }
        (
            Cell::SphereCell {
                z_lo,
                z_hi,
                phi_lo,
                phi_hi,
            },
            SetKind::Sphere2 { radius },
        ) => {
            let g = |u: &[f64]| {
                let z = z_lo + u[0] * (z_hi - z_lo);
                let phi = phi_lo + u[1] * (phi_hi - phi_lo);
                f(&from_local(sphere_point(*radius, z, phi), shift))
            };
            Ok(stratified_mean(g, 2, opts)?.scaled(region.measure(set)))
        }
        (
            Cell::TorusCell {
                u_lo,
                u_hi,
                v_lo,
                v_hi,
            },
            SetKind::FlatTorus { major, minor },
        ) => {
            let g = |u: &[f64]| {
                let a = 2.0 * PI * (u_lo + u[0] * (u_hi - u_lo));
                let b = 2.0 * PI * (v_lo + u[1] * (v_hi - v_lo));
                f(&from_local(torus_point(*major, *minor, a, b), shift))
            };
            Ok(stratified_mean(g, 2, opts)?.scaled(region.measure(set)))
        }
        _ => Err(Error::InvalidParameter(format!(
            "region cell does not match component kind {}",
            set.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn catalog() -> Vec<EmbeddedSet> {
        vec![
            EmbeddedSet::circle(1.0).unwrap(),
            EmbeddedSet::arc(2.0, 1.0).unwrap(),
            EmbeddedSet::interval(3.0).unwrap(),
            EmbeddedSet::cube(2.0, 2).unwrap(),
            EmbeddedSet::sphere2(1.5).unwrap(),
            EmbeddedSet::flat_torus(1.0, 0.75).unwrap(),
            EmbeddedSet::disjoint_union(vec![
                (EmbeddedSet::circle(1.0).unwrap(), vec![0.0, 0.0]),
                (EmbeddedSet::circle(2.0).unwrap(), vec![6.0, 0.0]),
            ])
            .unwrap(),
        ]
    }

    #[test]
    fn region_measures_sum_to_total() {
        for set in catalog() {
            for bins in [1, 3, 20] {
                let part = set.partition(&PartitionSpec { bins }).unwrap();
                let sum: f64 = part.region_measures().iter().sum();
                let rel = (sum - set.measure()).abs() / set.measure();
                assert!(rel < 1e-12, "{}: {rel}", set.name());
            }
        }
    }

    #[test]
    fn locate_assigns_every_sample_to_its_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for set in catalog() {
            let part = set.partition(&PartitionSpec { bins: 5 }).unwrap();
            let mut counts = vec![0usize; part.len()];
            for _ in 0..20_000 {
                let p = set.sample(&mut rng);
                let i = part.locate(&set, &p.coords);
                assert!(i < part.len());
                counts[i] += 1;
            }
            // Every cell has positive measure, so every cell is hit.
            assert!(counts.iter().all(|&c| c > 0), "{}: {counts:?}", set.name());
        }
    }

    #[test]
    fn boundary_points_go_to_upper_cell() {
        let circle = EmbeddedSet::circle(1.0).unwrap();
        let part = circle.partition(&PartitionSpec { bins: 4 }).unwrap();
        assert_eq!(part.locate(&circle, &[1.0, 0.0]), 0);
        assert_eq!(part.locate(&circle, &[0.0, 1.0]), 1);
        let interval = EmbeddedSet::interval(1.0).unwrap();
        let part = interval.partition(&PartitionSpec { bins: 4 }).unwrap();
        assert_eq!(part.locate(&interval, &[0.25]), 1);
        assert_eq!(part.locate(&interval, &[1.0]), 3);
    }

    #[test]
    fn constant_integrals_match_measures() {
        let opts = IntegrationOptions::default();
        for set in catalog() {
            let total = set.integral(|_| 1.0, &opts).unwrap();
            assert!((total.value - set.measure()).abs() < 1e-10 * set.measure());
            let part = set.partition(&PartitionSpec { bins: 3 }).unwrap();
            for (r, m) in part.regions().iter().zip(part.region_measures()) {
                let v = set.region_integral(|_| 2.5, r, &opts).unwrap();
                assert!(
                    (v.value - 2.5 * m).abs() < 1e-10 * m.max(1.0),
                    "{}",
                    set.name()
                );
            }
        }
    }

    #[test]
    fn circle_density_integrates_to_one() {
        let circle = EmbeddedSet::circle(1.0).unwrap();
        let opts = IntegrationOptions::default();
        let rho = |p: &[f64]| (1.0 + 0.5 * p[0]) / (2.0 * PI);
        let v = circle.integral(rho, &opts).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrals_are_additive_over_regions() {
        let opts = IntegrationOptions::default();
        let f = |p: &[f64]| 1.0 + p[0] * p[0] + 0.3 * p[1];
        for set in [
            EmbeddedSet::circle(1.0).unwrap(),
            EmbeddedSet::sphere2(1.0).unwrap(),
        ] {
            let whole = set.integral(f, &opts).unwrap();
            let part = set.partition(&PartitionSpec { bins: 4 }).unwrap();
            let mut sum = 0.0;
            let mut err2 = 0.0;
            for r in part.regions() {
                let v = set.region_integral(f, r, &opts).unwrap();
                sum += v.value;
                err2 += v.error * v.error;
            }
            let tol = 1e-8 * whole.value.abs() + 6.0 * (err2.sqrt() + whole.error);
            assert!(
                (sum - whole.value).abs() <= tol,
                "{}: {sum} vs {}",
                set.name(),
                whole.value
            );
        }
        // Sphere: ∫ (1 + x²) dA = 4π + 4π/3.
        let s = EmbeddedSet::sphere2(1.0).unwrap();
        let v = s.integral(|p| 1.0 + p[0] * p[0], &opts).unwrap();
        assert!((v.value - (4.0 * PI + 4.0 * PI / 3.0)).abs() < 6.0 * v.error + 1e-9);
    }
}
