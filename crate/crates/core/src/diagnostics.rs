//! Separation, distribution and scaling checks on computed configurations.

use serde::{Deserialize, Serialize};

use crate::energy::{compensated_sum, Configuration};
use crate::error::{Error, Result};
use crate::geometry::{dist2, IntegrationOptions, Point, RegionPartition};
use crate::optimize::OptimizeResult;
use crate::weights::{weighted_hausdorff, WeightFn};

/// Minimum pairwise distance of raw points.
pub fn separation_of_points(points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.min(dist2(&p.coords, &q.coords));
        }
    }
    Ok(best.sqrt())
}

/// `δ(ω_N) = min_{i≠j} |x_i - x_j|`.
pub fn separation(config: &Configuration) -> Result<f64> {
    separation_of_points(config.points())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationEntry {
    pub n: usize,
    pub delta: f64,
    pub normalized: f64,
    pub running_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationSeries {
    pub s: f64,
    pub alpha: f64,
    pub entries: Vec<SeparationEntry>,
}

impl SeparationSeries {
    pub fn running_minimum(&self) -> f64 {
        self.entries.last().map_or(f64::INFINITY, |e| e.running_min)
    }

    /// True when the normalized separation over the larger half of the
    /// series drops below half its minimum over the smaller half.
    pub fn collapses(&self) -> bool {
        let k = self.entries.len();
        if k < 2 {
            return false;
        }
        let split = k / 2;
        let head = self.entries[..split]
            .iter()
            .map(|e| e.normalized)
            .fold(f64::INFINITY, f64::min);
        let tail = self.entries[split..]
            .iter()
            .map(|e| e.normalized)
            .fold(f64::INFINITY, f64::min);
        tail < 0.5 * head
    }
}

/// Builds the normalized series `δ N^{1/α}` (`s > α`) or `δ (N ln N)^{1/α}`
/// (`s = α`) from `(N, δ)` pairs sorted by N.
pub fn separation_series_from(
    pairs: &[(usize, f64)],
    s: f64,
    alpha: f64,
) -> Result<SeparationSeries> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "separation series needs at least one entry".into(),
        ));
    }
    if !(alpha > 0.0 && s >= alpha) {
        return Err(Error::InvalidParameter(format!(
            "need s ≥ α > 0, got s={s}, α={alpha}"
        )));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by_key(|p| p.0);
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParameter("N values must be distinct".into()));
    }
    let mut running_min = f64::INFINITY;
    let entries = sorted
        .into_iter()
        .map(|(n, delta)| {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "separation at N={n} must be positive, got {delta}"
                )));
            }
            let x = n as f64;
            let scale = if s > alpha { x } else { x * x.ln() };
            let normalized = delta * scale.powf(1.0 / alpha);
            if !normalized.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "normalized separation at N={n} is not finite"
                )));
            }
            running_min = running_min.min(normalized);
            Ok(SeparationEntry {
                n,
                delta,
                normalized,
                running_min,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeparationSeries { s, alpha, entries })
}

pub fn separation_series(
    results: &[OptimizeResult],
    s: f64,
    alpha: f64,
) -> Result<SeparationSeries> {
    let pairs = results
        .iter()
        .map(|r| Ok((r.n(), separation(&r.config)?)))
        .collect::<Result<Vec<_>>>()?;
    separation_series_from(&pairs, s, alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionTest {
    pub partition: RegionPartition,
    pub counts: Vec<usize>,
    pub empirical: Vec<f64>,
    pub target: Vec<f64>,
    pub sup_error: f64,
    pub l1_error: f64,
}

impl DistributionTest {
    pub fn abs_errors(&self) -> Vec<f64> {
        self.empirical
            .iter()
            .zip(&self.target)
            .map(|(e, t)| (e - t).abs())
            .collect()
    }

    /// Largest per-region error over regions not listed in `skip`.
    pub fn sup_error_excluding(&self, skip: &[usize]) -> f64 {
        self.abs_errors()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, e)| e)
            .fold(0.0, f64::max)
    }

    /// Error of the combined frequency of a group of regions.
    pub fn joint_error(&self, group: &[usize]) -> f64 {
        let e = compensated_sum(group.iter().map(|&i| self.empirical[i]));
        let t = compensated_sum(group.iter().map(|&i| self.target[i]));
        (e - t).abs()
    }
}

/// Compares empirical frequencies with given target masses per region.
pub fn compare_frequencies(
    points: &[Point],
    set: &crate::geometry::EmbeddedSet,
    partition: &RegionPartition,
    target: Vec<f64>,
) -> Result<DistributionTest> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if target.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: partition.len(),
            got: target.len(),
        });
    }
    let mut counts = vec![0usize; partition.len()];
    for p in points {
        counts[partition.locate(set, &p.coords)] += 1;
    }
    let n = points.len() as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let errors: Vec<f64> = empirical
        .iter()
        .zip(&target)
        .map(|(e, t)| (e - t).abs())
        .collect();
    Ok(DistributionTest {
        partition: partition.clone(),
        counts,
        sup_error: errors.iter().copied().fold(0.0, f64::max),
        l1_error: compensated_sum(errors.iter().copied()),
        empirical,
        target,
    })
}

/// Region frequencies of a configuration against `h_d^{s,w}`.
pub fn distribution_test(
    config: &Configuration,
    w: &WeightFn,
    s: f64,
    d: usize,
    partition: &RegionPartition,
    opts: &IntegrationOptions,
) -> Result<DistributionTest> {
    let target = weighted_hausdorff(config.set(), w, s, d, partition, opts)?.normalized;
    compare_frequencies(config.points(), config.set(), partition, target)
}

/// Limiting fraction of points on `B` for minimizers on `B ∪ D`:
/// `g_D^{d/s} / (g_B^{d/s} + g_D^{d/s})`. Infinite `g_D` gives 1.
pub fn split_fraction(g_b: f64, g_d: f64, s: f64, d: usize) -> Result<f64> {
    if g_b.is_nan() || g_d.is_nan() || !(g_b > 0.0) || !(g_d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "limits must be positive, got g_B={g_b}, g_D={g_d}"
        )));
    }
    if g_b.is_infinite() && g_d.is_infinite() {
        return Err(Error::InvalidParameter("both limits are infinite".into()));
    }
    if !(s > 0.0) || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need s > 0 and d ≥ 1, got s={s}, d={d}"
        )));
    }
    if g_d.is_infinite() {
        return Ok(1.0);
    }
    if g_b.is_infinite() {
        return Ok(0.0);
    }
    let e = d as f64 / s;
    // Weight of a side is 1/g^{d/s}, so the fraction on B is w_B / (w_B + w_D).
    // Compute the smaller side and complement it so both orders sum to 1.
    let (wb, wd) = (g_b.powf(-e), g_d.powf(-e));
    if wb <= wd {
        Ok(wb / (wb + wd))
    } else {
        Ok(1.0 - wd / (wb + wd))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    /// `(N, E / N^{1+s/α})` or `(N, E / (N² ln N))`.
    pub ratios: Vec<(usize, f64)>,
    /// Empirical constant: the largest ratio.
    pub max_ratio: f64,
    /// All ratios finite and positive, and the larger-N half does not exceed
    /// twice the smaller-N half.
    pub bounded: bool,
}

/// Checks that `E(N)` stays within a constant multiple of `N^{1+s/α}`
/// (`s > α`) or `N² ln N` (`s = α`).
pub fn energy_upper_bound_check(
    s: f64,
    alpha: f64,
    pairs: &[(usize, f64)],
) -> Result<UpperBoundReport> {
    if !(alpha > 0.0 && s >= alpha) {
        return Err(Error::InvalidParameter(format!(
            "need s ≥ α > 0, got s={s}, α={alpha}"
        )));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no energies supplied".into()));
    }
    let ratios: Vec<(usize, f64)> = pairs
        .iter()
        .map(|&(n, e)| {
            let x = n as f64;
            let scale = if s > alpha {
                x.powf(1.0 + s / alpha)
            } else if n >= 2 {
                x * x * x.ln()
            } else {
                1.0
            };
            (n, e / scale)
        })
        .collect();
    let max_ratio = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let finite = ratios.iter().all(|r| r.1 > 0.0 && r.1.is_finite());
    let split = ratios.len() / 2;
    let head = ratios[..split.max(1)]
        .iter()
        .map(|r| r.1)
        .fold(0.0, f64::max);
    let tail = ratios[split..].iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(UpperBoundReport {
        bounded: finite && tail <= 2.0 * head,
        ratios,
        max_ratio,
    })
}
