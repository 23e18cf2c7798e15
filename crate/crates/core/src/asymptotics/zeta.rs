//! Riemann zeta and the zeta function of the triangular lattice.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::energy::compensated_sum;
use crate::error::{Error, Result};
use crate::geometry::quadrature::{adaptive_quadrature, IntegrationOptions};

/// `B_{2k} / (2k)!` for k = 1..10.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
    43_867.0 / 5_109_094_217_170_944_000.0,
    -174_611.0 / 802_857_662_698_291_200_000.0,
];

/// Riemann zeta for real `s > 1`: the first `M - 1` terms summed directly,
/// the rest by Euler–Maclaurin with ten Bernoulli corrections.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) || s.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "ζ(s) needs s > 1, got {s}"
        )));
    }
    if s.is_infinite() {
        return Ok(1.0);
    }
    const M: f64 = 16.0;
    let head = compensated_sum((1..M as usize).rev().map(|n| (n as f64).powf(-s)));
    let mut tail = M.powf(1.0 - s) / (s - 1.0) + 0.5 * M.powf(-s);
    // Rising factorial s(s+1)...(s+2k-2) times M^{-s-2k+1}.
    let mut factor = s * M.powf(-s - 1.0);
    for (k, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += c * factor;
        let j = 2.0 * (k + 1) as f64;
        factor *= (s + j - 1.0) * (s + j) / (M * M);
    }
    Ok(head + tail)
}

/// Lattice zeta together with how it was truncated.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LatticeZeta {
    pub value: f64,
    /// Hexagonal shells `max(|m|, |n|, |m + n|) ≤ radius` summed exactly.
    pub radius: usize,
    /// Continuum estimate of the omitted shells, included in `value`.
    pub tail_estimate: f64,
    /// Rigorous bound on the omitted shells.
    pub tail_bound: f64,
}

/// `Σ_{k > R} Σ_{shell k} |v|^{-s} ≤ 6 (4/3)^{s/2} R^{2-s} / (s - 2)`, since
/// shell `k` has `6k` points at distance at least `(√3/2) k`.
pub fn lattice_tail_bound(s: f64, radius: usize) -> f64 {
    6.0 * (4.0f64 / 3.0).powf(s / 2.0) * (radius as f64).powf(2.0 - s) / (s - 2.0)
}

/// Lattice points per unit area times `∫ |v|^{-s} dA` outside the hexagon
/// with circumradius `rho`.
fn continuum_tail(s: f64, rho: f64) -> Result<f64> {
    let opts = IntegrationOptions::default();
    let angular = adaptive_quadrature(|phi| phi.cos().powf(s - 2.0), 0.0, PI / 6.0, &opts)?.value;
    let inradius = 3f64.sqrt() / 2.0 * rho;
    Ok(2.0 / 3f64.sqrt() * 12.0 / (s - 2.0) * inradius.powf(2.0 - s) * angular)
}

/// Exact sum over the 60° sector `m ≥ 1, n ≥ 0` of shells `1..=radius`,
/// times six.
pub fn lattice_shell_sum(s: f64, radius: usize) -> f64 {
    let half = s / 2.0;
    let shells: Vec<f64> = (1..=radius)
        .into_par_iter()
        .map(|k| {
            compensated_sum((1..=k).map(|m| {
                let (m, n) = (m as f64, (k - m) as f64);
                (m * m + m * n + n * n).powf(-half)
            }))
        })
        .collect();
    6.0 * compensated_sum(shells.into_iter().rev())
}

/// `ζ_L(s)` truncated at an explicit radius, with the continuum tail added.
pub fn lattice_zeta_triangular_at(s: f64, radius: usize) -> Result<LatticeZeta> {
    if !(s > 2.0) || s.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "ζ_L(s) diverges for s ≤ 2, got {s}"
        )));
    }
    if radius == 0 {
        return Err(Error::InvalidParameter(
            "truncation radius must be at least 1".into(),
        ));
    }
    let head = lattice_shell_sum(s, radius);
    let tail_estimate = if s.is_finite() {
        continuum_tail(s, radius as f64 + 0.5)?
    } else {
        0.0
    };
    Ok(LatticeZeta {
        value: head + tail_estimate,
        radius,
        tail_estimate,
        tail_bound: lattice_tail_bound(s, radius),
    })
}

/// Radius at which the continuum correction is accurate to about 1e-10
/// relative. The residual after the correction decays like `R^{-s}`.
pub fn lattice_radius(s: f64) -> usize {
    let r = 1e10f64.powf(1.0 / s).ceil();
    r.clamp(64.0, 4096.0) as usize
}

/// Zeta function of the triangular lattice `{m(1,0) + n(1/2, √3/2)}`.
pub fn lattice_zeta_triangular(s: f64) -> Result<f64> {
    if s.is_infinite() && s > 0.0 {
        return Ok(6.0);
    }
    Ok(lattice_zeta_triangular_at(s, lattice_radius(s))?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `Σ n^{-s}` to `n = 10^6` plus the integral tail bounds on either side.
    fn zeta_series(s: f64) -> (f64, f64) {
        let n = 1_000_000usize;
        let head: f64 = (1..=n).rev().map(|k| (k as f64).powf(-s)).sum();
        let lower = head + ((n + 1) as f64).powf(1.0 - s) / (s - 1.0);
        let upper = head + (n as f64).powf(1.0 - s) / (s - 1.0);
        (lower, upper)
    }

    /// Hurwitz zeta by direct summation to 10^5 plus an integral midpoint tail.
    fn hurwitz(s: f64, a: f64) -> f64 {
        let n = 100_000usize;
        let head: f64 = (0..n).rev().map(|k| (k as f64 + a).powf(-s)).sum();
        let x = n as f64 + a;
        head + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s / 12.0 * x.powf(-s - 1.0)
    }

    /// Independent closed form `ζ_L(s) = 6 ζ(s/2) L(s/2, χ_{-3})`.
    fn lattice_oracle(s: f64) -> f64 {
        let h = s / 2.0;
        let l = 3f64.powf(-h) * (hurwitz(h, 1.0 / 3.0) - hurwitz(h, 2.0 / 3.0));
        6.0 * hurwitz(h, 1.0) * l
    }

    #[test]
    fn zeta_matches_series_and_closed_forms() {
        for s in [1.5, 2.0, 3.0, 4.0, 7.5] {
            let (lo, hi) = zeta_series(s);
            let z = riemann_zeta(s).unwrap();
            assert!(
                z >= lo * (1.0 - 1e-14) && z <= hi * (1.0 + 1e-14),
                "s={s}: {lo} {z} {hi}"
            );
        }
        let z2 = riemann_zeta(2.0).unwrap();
        assert!((z2 / (PI * PI / 6.0) - 1.0).abs() < 1e-13);
        let z4 = riemann_zeta(4.0).unwrap();
        assert!((z4 / (PI.powi(4) / 90.0) - 1.0).abs() < 1e-13);
        let z3 = riemann_zeta(3.0).unwrap();
        assert!((z3 - 1.202_056_903_159_594_3).abs() < 1e-14);
        let z30 = riemann_zeta(30.0).unwrap();
        assert!(z30 > 1.0 && z30 - 1.0 < 1e-9);
        assert!(riemann_zeta(1.0).is_err());
        assert!(riemann_zeta(0.5).is_err());
    }

    #[test]
    fn zeta_near_one_stays_accurate() {
        let z = riemann_zeta(1.01).unwrap();
        // ζ(1 + ε) = 1/ε + γ + O(ε).
        assert!((z - (100.0 + 0.577_215_664_901_532_9)).abs() < 1e-3);
        assert_eq!(hurwitz(2.0, 1.0).round(), 2.0);
    }

    #[test]
    fn lattice_zeta_matches_closed_form() {
        for s in [3.0, 4.0, 6.0, 10.0] {
            let got = lattice_zeta_triangular(s).unwrap();
            let want = lattice_oracle(s);
            assert!((got / want - 1.0).abs() < 1e-8, "s={s}: {got} vs {want}");
        }
        let l3 = 3f64.powf(-2.0) * (hurwitz(2.0, 1.0 / 3.0) - hurwitz(2.0, 2.0 / 3.0));
        assert!((l3 - 0.781_302_412_896_486_3).abs() < 1e-10);
    }

    #[test]
    fn truncation_radii_agree() {
        let a = lattice_zeta_triangular_at(4.0, 256).unwrap();
        let b = lattice_zeta_triangular_at(4.0, 512).unwrap();
        assert!((a.value / b.value - 1.0).abs() < 1e-8);
        assert!(b.tail_estimate <= b.tail_bound);
        let exact_gap = b.value - lattice_shell_sum(4.0, 256);
        assert!(exact_gap <= a.tail_bound);
    }

    #[test]
    fn large_s_tends_to_six() {
        let z = lattice_zeta_triangular(40.0).unwrap();
        assert!(z > 6.0 && z < 6.001, "{z}");
        assert_eq!(lattice_zeta_triangular(f64::INFINITY).unwrap(), 6.0);
    }

    #[test]
    fn sector_sum_equals_full_sum() {
        let (s, r) = (3.5, 40i64);
        let mut full = Vec::new();
        for m in -r..=r {
            for n in -r..=r {
                if (m, n) != (0, 0) && m.abs().max(n.abs()).max((m + n).abs()) <= r {
                    let (x, y) = (m as f64 + 0.5 * n as f64, 3f64.sqrt() / 2.0 * n as f64);
                    full.push((x * x + y * y).powf(-s / 2.0));
                }
            }
        }
        full.sort_by(f64::total_cmp);
        let full = compensated_sum(full);
        let sector = lattice_shell_sum(s, r as usize);
        assert!((sector / full - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_zeta_domain() {
        assert!(lattice_zeta_triangular(2.0).is_err());
        assert!(lattice_zeta_triangular(1.0).is_err());
        assert!(lattice_zeta_triangular_at(4.0, 0).is_err());
    }
}
