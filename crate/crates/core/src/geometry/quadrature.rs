//! Adaptive Gauss–Kronrod quadrature on intervals and stratified Monte Carlo
//! on parameter boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Bisections allowed before the integrand is declared non-integrable.
    pub max_subdivisions: usize,
    /// Total Monte Carlo evaluations for surface regions.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
            mc_samples: 1 << 16,
            seed: 0x5eed_1e55,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    Quadrature,
    MonteCarlo,
    Exact,
}

/// Value of an integral together with its error estimate. For Monte Carlo
/// the error is the standard error of the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub method: IntegrationMethod,
}

impl Integral {
    pub fn zero(method: IntegrationMethod) -> Self {
        Integral {
            value: 0.0,
            error: 0.0,
            method,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Integral {
            value: self.value * c,
            error: self.error * c.abs(),
            method: self.method,
        }
    }

    pub fn add(self, other: Integral) -> Self {
        let method = if self.method == other.method {
            self.method
        } else {
            IntegrationMethod::MonteCarlo
        };
        Integral {
            value: self.value + other.value,
            error: (self.error * self.error + other.error * other.error).sqrt(),
            method,
        }
    }
}

// 15-point Kronrod nodes on [-1, 1]; odd indices are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Point evaluations that hit a singularity exactly (±∞) are treated as a
/// null set; a divergent integrand is caught by the subdivision budget.
fn sample_value<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_nan() {
        return Err(Error::NonIntegrable(format!("integrand is NaN at {x}")));
    }
    Ok(if v.is_infinite() { 0.0 } else { v })
}

fn kronrod_segment<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = sample_value(f, center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = sample_value(f, center - dx)? + sample_value(f, center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Globally adaptive 7/15 Gauss–Kronrod quadrature of `f` over `[lo, hi]`.
///
/// Fails with [`Error::NonIntegrable`] when the error target is not met
/// within `max_subdivisions` bisections, which is how a non-integrable
/// endpoint or interior singularity shows up.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    opts: &IntegrationOptions,
) -> Result<Integral> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(
            "integration bounds must be finite".into(),
        ));
    }
    if lo == hi {
        return Ok(Integral::zero(IntegrationMethod::Quadrature));
    }
    let (a, b, sign) = if lo < hi {
        (lo, hi, 1.0)
    } else {
        (hi, lo, -1.0)
    };

    let first = kronrod_segment(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    let mut subdivisions = 0;
    if !(total.is_finite() && total_err.is_finite()) {
        return Err(Error::NonIntegrable(format!(
            "integral blows up on [{a}, {b}]"
        )));
    }
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::NonIntegrable(format!(
                "no convergence after {subdivisions} subdivisions on [{a}, {b}] \
                 (estimate {total:e}, error {total_err:e})"
            )));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::NonIntegrable(format!(
                "segment around {mid} cannot be bisected further"
            )));
        }
        let left = kronrod_segment(&f, worst.lo, mid)?;
        let right = kronrod_segment(&f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;

        // Re-sum occasionally so cancellation in the running totals cannot
        // stall the loop.
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
        if !(total.is_finite() && total_err.is_finite()) {
            return Err(Error::NonIntegrable(format!(
                "integral blows up after {subdivisions} subdivisions on [{a}, {b}]"
            )));
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Integral {
        value: sign * value,
        error,
        method: IntegrationMethod::Quadrature,
    })
}

/// Stratified Monte Carlo mean of `f` over the unit box `[0,1)^dim`.
///
/// The box is cut into `m^dim` equal strata with two jittered draws each;
/// the standard error comes from the within-stratum pair differences.
pub fn stratified_mean<F: Fn(&[f64]) -> f64>(
    f: F,
    dim: usize,
    opts: &IntegrationOptions,
) -> Result<Integral> {
    assert!(dim >= 1);
    let per_axis = ((opts.mc_samples as f64 / 2.0)
        .powf(1.0 / dim as f64)
        .floor() as usize)
        .max(1);
    let strata = per_axis.pow(dim as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut idx = vec![0usize; dim];
    let mut u = vec![0.0; dim];
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut var_sum = 0.0;
    let step = 1.0 / per_axis as f64;
    for _ in 0..strata {
        let mut pair = [0.0; 2];
        for slot in pair.iter_mut() {
            for k in 0..dim {
                u[k] = (idx[k] as f64 + rng.gen::<f64>()) * step;
            }
            let v = f(&u);
            if !v.is_finite() {
                return Err(Error::NonIntegrable(format!(
                    "integrand is not finite at sample {u:?}"
                )));
            }
            *slot = v;
        }
        let term = 0.5 * (pair[0] + pair[1]);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        var_sum += 0.25 * (pair[0] - pair[1]) * (pair[0] - pair[1]);
        for k in 0..dim {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    let n = strata as f64;
    Ok(Integral {
        value: sum / n,
        error: var_sum.sqrt() / n,
        method: IntegrationMethod::MonteCarlo,
    })
}
