//! Extrapolation of `E(N) / τ(N)` to its large-N limit.

use serde::{Deserialize, Serialize};

use super::tau_eval;
use crate::error::{Error, Result};

const P_MIN: f64 = 0.25;
const P_MAX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Least squares of `g (1 + a N^{-p})` with `p ∈ [0.25, 2]`.
    LeastSquares,
    /// Two-point extrapolation from the largest two N with `p = 1`.
    Richardson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub g_hat: f64,
    pub a: f64,
    pub p: f64,
    /// Root-mean-square residual of `E/τ` relative to `g_hat`.
    pub residual_norm: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub s: f64,
    pub d: usize,
    pub method: FitMethod,
    /// Why the least-squares fit was abandoned, if it was.
    pub fallback_reason: Option<String>,
    /// `H_d^{s,w}(A)` when supplied.
    pub measure: Option<f64>,
    /// `g_hat · H_d^{s,w}(A)^{s/d}`.
    pub c_hat: Option<f64>,
}

impl ScalingFit {
    pub fn with_measure(mut self, measure: f64) -> Self {
        self.measure = Some(measure);
        self.c_hat = Some(self.g_hat * measure.powf(self.s / self.d as f64));
        self
    }
}

struct Linear {
    g: f64,
    b: f64,
    sse: f64,
}

/// Least squares of `y ≈ g + b x` with `x = N^{-p}`, in scaled units.
fn solve_linear(xs: &[f64], ys: &[f64]) -> Option<Linear> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let spread = xs.iter().map(|x| x * x).sum::<f64>();
    if !(sxx > 1e-24 * spread) {
        return None;
    }
    let b = sxy / sxx;
    let g = my - b * mx;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - g - b * x).powi(2))
        .sum();
    Some(Linear { g, b, sse })
}

/// Fits `E(N)/τ_{s,d}(N) = g (1 + a N^{-p})`.
///
/// For each `p` the problem is linear in `(g, g·a)`; `p` itself is chosen by
/// a grid scan followed by golden-section refinement. When the linear
/// problem is singular the fit falls back to two-point Richardson
/// extrapolation and records the reason.
pub fn fit_g(pairs: &[(usize, f64)], s: f64, d: usize) -> Result<ScalingFit> {
    if pairs.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: pairs.len(),
        });
    }
    if pairs.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter(
            "N values must be strictly increasing".into(),
        ));
    }
    if let Some((n, e)) = pairs.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "energy at N={n} must be positive, got {e}"
        )));
    }
    if pairs[0].0 < 2 {
        return Err(Error::InvalidParameter("fit needs N ≥ 2".into()));
    }
    let ratios: Vec<f64> = pairs
        .iter()
        .map(|&(n, e)| Ok(e / tau_eval(s, d, n)?))
        .collect::<Result<_>>()?;
    let scale = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let ys: Vec<f64> = ratios.iter().map(|r| r / scale).collect();
    let ns: Vec<f64> = pairs.iter().map(|&(n, _)| n as f64).collect();

    let sse_at = |p: f64| -> Option<Linear> {
        let xs: Vec<f64> = ns.iter().map(|n| n.powf(-p)).collect();
        solve_linear(&xs, &ys)
    };

    let base = ScalingFit {
        g_hat: 0.0,
        a: 0.0,
        p: 1.0,
        residual_norm: 0.0,
        n_min: pairs[0].0,
        n_max: pairs[pairs.len() - 1].0,
        s,
        d,
        method: FitMethod::LeastSquares,
        fallback_reason: None,
        measure: None,
        c_hat: None,
    };

    // Exact constant data: no correction term to identify.
    let spread = ys.iter().fold(0.0f64, |m, y| m.max((y - 1.0).abs()));
    if spread <= 1e-14 {
        return Ok(ScalingFit {
            g_hat: scale,
            residual_norm: spread,
            ..base
        });
    }

    let grid: Vec<f64> = (0..=70)
        .map(|k| P_MIN + (P_MAX - P_MIN) * k as f64 / 70.0)
        .collect();
    let scanned: Vec<(f64, Option<Linear>)> = grid.iter().map(|&p| (p, sse_at(p))).collect();
    let Some(best_k) = scanned
        .iter()
        .enumerate()
        .filter_map(|(k, (_, l))| l.as_ref().map(|l| (k, l.sse)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
    else {
        return richardson(
            pairs,
            &ratios,
            base,
            "design matrix is singular for every exponent",
        );
    };

    let mut lo = grid[best_k.saturating_sub(1)];
    let mut hi = grid[(best_k + 1).min(grid.len() - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |p: f64| sse_at(p).map_or(f64::INFINITY, |l| l.sse);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best_p = 0.5 * (lo + hi);
    let mut best = sse_at(best_p);
    let grid_best = scanned[best_k]
        .1
        .as_ref()
        .map(|l| l.sse)
        .unwrap_or(f64::INFINITY);
    if best.as_ref().is_none_or(|l| l.sse > grid_best) {
        best_p = grid[best_k];
        best = sse_at(best_p);
    }
    let Some(lin) = best else {
        return richardson(
            pairs,
            &ratios,
            base,
            "design matrix is singular at the optimum",
        );
    };
    let g_hat = lin.g * scale;
    if !(g_hat > 0.0 && g_hat.is_finite()) {
        return richardson(pairs, &ratios, base, "least-squares limit is not positive");
    }
    Ok(ScalingFit {
        g_hat,
        a: lin.b / lin.g,
        p: best_p,
        residual_norm: (lin.sse / ys.len() as f64).sqrt() / lin.g,
        ..base
    })
}

fn richardson(
    pairs: &[(usize, f64)],
    ratios: &[f64],
    base: ScalingFit,
    reason: &str,
) -> Result<ScalingFit> {
    let k = ratios.len();
    let (n1, n2) = (pairs[k - 2].0 as f64, pairs[k - 1].0 as f64);
    let (y1, y2) = (ratios[k - 2], ratios[k - 1]);
    let g = (n2 * y2 - n1 * y1) / (n2 - n1);
    let g_hat = if g > 0.0 && g.is_finite() { g } else { y2 };
    let a = (y2 / g_hat - 1.0) * n2;
    let residual = ratios
        .iter()
        .zip(pairs)
        .map(|(y, &(n, _))| (y - g_hat * (1.0 + a / n as f64)).powi(2))
        .sum::<f64>();
    Ok(ScalingFit {
        g_hat,
        a,
        p: 1.0,
        residual_norm: (residual / k as f64).sqrt() / g_hat,
        method: FitMethod::Richardson,
        fallback_reason: Some(reason.to_string()),
        ..base
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(ns: &[usize], s: f64, d: usize, f: impl Fn(f64) -> f64) -> Vec<(usize, f64)> {
        ns.iter()
            .map(|&n| (n, tau_eval(s, d, n).unwrap() * f(n as f64)))
            .collect()
    }

    #[test]
    fn exact_model_without_correction() {
        let data = synthetic(&[16, 32, 64, 128], 2.0, 1, |_| 7.0);
        let fit = fit_g(&data, 2.0, 1).unwrap();
        assert!((fit.g_hat - 7.0).abs() < 1e-10);
        assert_eq!(fit.method, FitMethod::LeastSquares);
    }

    #[test]
    fn one_over_n_correction() {
        let ns: Vec<usize> = (6..=12).map(|k| 1usize << k).collect();
        let data = synthetic(&ns, 2.0, 1, |n| 3.0 + 5.0 / n);
        let fit = fit_g(&data, 2.0, 1).unwrap();
        assert!((fit.g_hat - 3.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.p - 1.0).abs() < 1e-4);
    }

    #[test]
    fn equally_spaced_circle_energies() {
        let data: Vec<(usize, f64)> = [64usize, 128, 256, 512]
            .iter()
            .map(|&n| {
                let x = n as f64;
                (n, x * (x * x - 1.0) / 12.0)
            })
            .collect();
        let fit = fit_g(&data, 2.0, 1).unwrap();
        assert!((fit.g_hat * 12.0 - 1.0).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn c_hat_follows_measure() {
        let data = synthetic(&[8, 16, 32, 64], 4.0, 2, |n| 2.0 * (1.0 - 1.0 / n));
        let fit = fit_g(&data, 4.0, 2).unwrap().with_measure(3.0);
        let c = fit.c_hat.unwrap();
        assert!((c / (fit.g_hat * 9.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let ok = synthetic(&[8, 16, 32, 64], 2.0, 1, |_| 1.0);
        assert!(matches!(
            fit_g(&ok[..3], 2.0, 1),
            Err(Error::TooFewPoints { .. })
        ));
        let mut bad = ok.clone();
        bad[2].1 = 0.0;
        assert!(fit_g(&bad, 2.0, 1).is_err());
        let mut unordered = ok.clone();
        unordered.swap(0, 1);
        assert!(fit_g(&unordered, 2.0, 1).is_err());
        assert!(fit_g(&ok, 0.5, 1).is_err());
    }

    #[test]
    fn richardson_fallback_is_flagged() {
        let data = vec![(10, 100.0), (20, 800.0), (40, 6400.0), (80, 51200.0)];
        let ratios: Vec<f64> = data
            .iter()
            .map(|&(n, e)| e / tau_eval(2.0, 1, n).unwrap())
            .collect();
        let base = fit_g(&data, 2.0, 1).unwrap();
        let fb = richardson(&data, &ratios, base, "forced").unwrap();
        assert_eq!(fb.method, FitMethod::Richardson);
        assert_eq!(fb.fallback_reason.as_deref(), Some("forced"));
        assert!((fb.g_hat - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recovers_its_own_model(g in 0.1f64..10.0, a in -3.0f64..3.0, p in 0.5f64..1.9) {
            let ns: Vec<usize> = (5..=12).map(|k| 1usize << k).collect();
            let data = synthetic(&ns, 3.0, 1, |n| g * (1.0 + a * n.powf(-p)));
            let fit = fit_g(&data, 3.0, 1).unwrap();
            prop_assert!((fit.g_hat / g - 1.0).abs() < 1e-6, "{:?}", fit);
        }
    }
}
