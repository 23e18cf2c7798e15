//! Near-minimal configurations by projected gradient descent.
//!
//! Each start draws an initial configuration, then repeats: ambient gradient,
//! projection onto the set's tangent directions, a Barzilai–Borwein trial
//! step, Armijo backtracking, retraction onto the set. Starts run in
//! parallel and the best is selected by `(energy, start index)`. On disjoint
//! unions the winner is polished by moving single points between components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    energy_and_gradient, energy_of_points, potential_at, Configuration, EnergyReport, Provenance,
    DISTANCE_FLOOR,
};
use crate::error::{Error, Result};
use crate::geometry::{dot, EmbeddedSet, Point};
use crate::weights::WeightFn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stop when every projected gradient component is below
    /// `grad_tol · E / (N · diam A)`.
    pub grad_tol: f64,
    pub starts: usize,
    pub backtrack: f64,
    pub armijo: f64,
    pub seed: u64,
    /// Move points between components of a disjoint union after descent.
    pub exchange: bool,
    /// Descent iterations spent relaxing each exchange candidate.
    pub polish_iters: usize,
    pub step: StepRule,
    /// Correction pairs kept by the limited-memory BFGS step.
    pub memory: usize,
}

/// How the search direction is formed from the projected gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Steepest descent with a Barzilai–Borwein trial step.
    #[default]
    BarzilaiBorwein,
    /// Limited-memory BFGS direction, projected onto the tangent directions.
    Lbfgs,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iters: 2000,
            grad_tol: 1e-9,
            starts: 8,
            backtrack: 0.5,
            armijo: 1e-4,
            seed: 0,
            exchange: true,
            polish_iters: 600,
            step: StepRule::BarzilaiBorwein,
            memory: 8,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.starts >= 1
            && self.grad_tol > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.memory >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid optimizer options {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartSummary {
    pub index: usize,
    pub energy: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warm: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub config: Configuration,
    pub report: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
    /// Accepted moves of a point from one component to another.
    pub exchanges: usize,
}

impl OptimizeResult {
    pub fn n(&self) -> usize {
        self.config.len()
    }

    pub fn energy(&self) -> f64 {
        self.report.total
    }
}

struct Descent {
    points: Vec<Point>,
    report: EnergyReport,
    iterations: usize,
    converged: bool,
}

/// Typical nearest-neighbor spacing `(H_d(A) / N)^{1/d}`.
fn spacing(set: &EmbeddedSet, n: usize) -> f64 {
    (set.measure() / n as f64).powf(1.0 / set.dim() as f64)
}

fn project_all(set: &EmbeddedSet, points: &[Point], grads: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .zip(grads)
        .map(|(p, g)| {
            let mut v: Vec<f64> = g.iter().map(|x| -x).collect();
            set.project_direction(&p.coords, &mut v);
            v
        })
        .collect()
}

fn max_norm(dirs: &[Vec<f64>]) -> f64 {
    dirs.iter().map(|d| dot(d, d).sqrt()).fold(0.0, f64::max)
}

/// Flattened inner product of two per-point vector lists.
fn inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dot(x, y)).sum()
}

type Field = Vec<Vec<f64>>;

/// Limited-memory BFGS history of `(s_k, y_k, 1 / (s_k · y_k))`.
struct History {
    pairs: std::collections::VecDeque<(Field, Field, f64)>,
    memory: usize,
}

impl History {
    fn push(&mut self, s: Vec<Vec<f64>>, y: Vec<Vec<f64>>) {
        let sy = inner(&s, &y);
        if !(sy > 1e-12 * inner(&s, &s).sqrt() * inner(&y, &y).sqrt()) {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion applied to the descent direction `d = -g`.
    fn apply(&self, d: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut q = d.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * inner(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                qi.iter_mut().zip(yi).for_each(|(q, y)| *q -= a * y);
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = inner(s, y) / inner(y, y);
            q.iter_mut().flatten().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * inner(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                qi.iter_mut().zip(si).for_each(|(q, s)| *q += (a - b) * s);
            }
        }
        q
    }
}

fn descend(
    set: &EmbeddedSet,
    mut points: Vec<Point>,
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
    max_iters: usize,
) -> Result<Descent> {
    let n = points.len();
    let floor = DISTANCE_FLOOR * set.diameter();
    let scale = spacing(set, n);
    let diam = set.diameter();
    let (mut report, grads) = energy_and_gradient(&points, s, w, floor)?;
    let mut dirs = project_all(set, &points, &grads);
    let mut prev: Option<(Vec<Point>, Vec<Vec<f64>>)> = None;
    let mut history = History {
        pairs: Default::default(),
        memory: opts.memory.max(1),
    };
    let mut alpha = 0.1 * scale / max_norm(&dirs).max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        let gmax = max_norm(&dirs);
        if gmax <= opts.grad_tol * report.total / (n as f64 * diam) {
            converged = true;
            break;
        }
        let mut step = match opts.step {
            StepRule::BarzilaiBorwein => dirs.clone(),
            StepRule::Lbfgs => {
                let mut d = history.apply(&dirs);
                for (p, v) in points.iter().zip(d.iter_mut()) {
                    set.project_direction(&p.coords, v);
                }
                d
            }
        };
        let mut slope = inner(&dirs, &step);
        if !(slope > 0.0) {
            history.pairs.clear();
            step = dirs.clone();
            slope = inner(&dirs, &step);
        }
        if let Some((old_points, old_dirs)) = &prev {
            alpha = match opts.step {
                StepRule::Lbfgs if !history.pairs.is_empty() => 1.0,
                _ => {
                    // BB1 step with s = x_k - x_{k-1}, y = g_k - g_{k-1} = d_{k-1} - d_k.
                    let mut ss = 0.0;
                    let mut sy = 0.0;
                    for i in 0..n {
                        for k in 0..points[i].dim() {
                            let sk = points[i].coords[k] - old_points[i].coords[k];
                            let yk = old_dirs[i][k] - dirs[i][k];
                            ss += sk * sk;
                            sy += sk * yk;
                        }
                    }
                    if sy > 0.0 {
                        ss / sy
                    } else {
                        2.0 * alpha
                    }
                }
            };
        }
        // Never move a point by more than half the typical spacing.
        alpha = alpha.min(0.5 * scale / max_norm(&step));

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Result<Vec<Point>> = points
                .iter()
                .zip(&step)
                .map(|(p, d)| {
                    let moved = Point::from(
                        p.coords
                            .iter()
                            .zip(d)
                            .map(|(x, v)| x + alpha * v)
                            .collect::<Vec<_>>(),
                    );
                    set.retract(&moved)
                })
                .collect();
            if let Ok(trial) = trial {
                // Coincident trial points count as a failed step.
                if let Ok((r, g)) = energy_and_gradient(&trial, s, w, floor) {
                    if r.total <= report.total - opts.armijo * alpha * slope {
                        accepted = Some((trial, r, g));
                        break;
                    }
                }
            }
            alpha *= opts.backtrack;
        }
        let Some((trial, r, g)) = accepted else {
            break;
        };
        iterations += 1;
        let new_dirs = project_all(set, &trial, &g);
        if opts.step == StepRule::Lbfgs {
            let sk = trial
                .iter()
                .zip(&points)
                .map(|(a, b)| a.coords.iter().zip(&b.coords).map(|(x, y)| x - y).collect())
                .collect();
            let yk = dirs
                .iter()
                .zip(&new_dirs)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            history.push(sk, yk);
        }
        prev = Some((
            std::mem::replace(&mut points, trial),
            std::mem::replace(&mut dirs, new_dirs),
        ));
        report = r;
    }
    Ok(Descent {
        points,
        report,
        iterations,
        converged,
    })
}

/// Target density (up to normalization) of the limit distribution:
/// `w(x,x)^{-d/s}`.
fn target_density(w: &WeightFn, s: f64, d: usize, x: &[f64]) -> f64 {
    let v = w.diag(x).powf(-(d as f64) / s);
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Initial configuration. Curves use stratified inverse-CDF sampling of
/// the limit density along arc length; surfaces use uniform draws, thinned
/// by rejection for non-unit weights.
fn initial_points(
    set: &EmbeddedSet,
    n: usize,
    s: f64,
    w: &WeightFn,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let d = set.dim();
    if set.is_curve() {
        let us: Vec<f64> = (0..n)
            .map(|k| (k as f64 + rng.gen::<f64>()) / n as f64)
            .collect();
        if w.is_unit() {
            return us
                .iter()
                .map(|&u| set.curve_point(u).expect("curve"))
                .collect();
        }
        let cells = (16 * n).max(4096);
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for c in 0..cells {
            let mid = (c as f64 + 0.5) / cells as f64;
            acc += target_density(w, s, d, &set.curve_point(mid).expect("curve").coords);
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return us
                .iter()
                .map(|&u| set.curve_point(u).expect("curve"))
                .collect();
        }
        return us
            .iter()
            .map(|&u| {
                let target = u * acc;
                let c = cdf.partition_point(|&v| v <= target).clamp(1, cells) - 1;
                let width = cdf[c + 1] - cdf[c];
                let frac = if width > 0.0 {
                    (target - cdf[c]) / width
                } else {
                    0.5
                };
                set.curve_point((c as f64 + frac.clamp(0.0, 1.0)) / cells as f64)
                    .expect("curve")
            })
            .collect();
    }
    if w.is_unit() {
        return (0..n).map(|_| set.sample(rng)).collect();
    }
    let envelope = (0..4096)
        .map(|_| target_density(w, s, d, &set.sample(rng).coords))
        .fold(0.0, f64::max)
        * 2.0;
    if !(envelope > 0.0 && envelope.is_finite()) {
        return (0..n).map(|_| set.sample(rng)).collect();
    }
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        let p = set.sample(rng);
        attempts += 1;
        if attempts > 1000 * n || rng.gen::<f64>() * envelope <= target_density(w, s, d, &p.coords)
        {
            out.push(p);
        }
    }
    out
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn run_start(
    set: &EmbeddedSet,
    n: usize,
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
    index: usize,
    warm: Option<&[Point]>,
) -> Result<Descent> {
    let mut rng = start_rng(opts.seed, index);
    let mut last_err = None;
    for _ in 0..3 {
        let points = match warm {
            Some(prev) => {
                let mut pts = prev.to_vec();
                let extra = initial_points(set, n - prev.len(), s, w, &mut rng);
                pts.extend(extra);
                pts
            }
            None => initial_points(set, n, s, w, &mut rng),
        };
        match descend(set, points, s, w, opts, opts.max_iters) {
            Ok(d) => return Ok(d),
            Err(e @ Error::CoincidentPoints { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("retries record their error"))
}

fn check_problem(
    set: &EmbeddedSet,
    n: usize,
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
) -> Result<()> {
    opts.validate()?;
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "s must be positive, got {s}"
        )));
    }
    if !w.meta().differentiable {
        return Err(Error::NotDifferentiable(w.meta().label.clone()));
    }
    for z in &w.meta().zeros {
        if z.location.dim() != set.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: set.ambient_dim(),
                got: z.location.dim(),
            });
        }
    }
    Ok(())
}

fn minimize_inner(
    set: &EmbeddedSet,
    n: usize,
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
    warm: Option<&[Point]>,
) -> Result<OptimizeResult> {
    check_problem(set, n, s, w, opts)?;
    let mut jobs: Vec<(usize, Option<&[Point]>)> = (0..opts.starts).map(|i| (i, None)).collect();
    if let Some(prev) = warm.filter(|p| p.len() < n) {
        jobs.push((opts.starts, Some(prev)));
    }
    let outcomes: Vec<(usize, bool, Result<Descent>)> = jobs
        .par_iter()
        .map(|&(index, warm)| {
            (
                index,
                warm.is_some(),
                run_start(set, n, s, w, opts, index, warm),
            )
        })
        .collect();

    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut best: Option<(usize, Descent)> = None;
    let mut last_error = String::new();
    for (index, is_warm, outcome) in outcomes {
        match outcome {
            Ok(d) => {
                summaries.push(StartSummary {
                    index,
                    energy: Some(d.report.total),
                    iterations: d.iterations,
                    converged: d.converged,
                    warm: is_warm,
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((bi, bd)) => (d.report.total, index) < (bd.report.total, *bi),
                };
                if better {
                    best = Some((index, d));
                }
            }
            Err(e) => {
                last_error = e.to_string();
                summaries.push(StartSummary {
                    index,
                    energy: None,
                    iterations: 0,
                    converged: false,
                    warm: is_warm,
                    error: Some(last_error.clone()),
                });
            }
        }
    }
    let (start_index, mut descent) = best.ok_or(Error::AllStartsFailed {
        starts: summaries.len(),
        last: last_error,
    })?;

    let mut exchanges = 0;
    if opts.exchange && set.component_count() > 1 {
        let (polished, moves) = exchange_polish(set, descent, s, w, opts)?;
        descent = polished;
        exchanges = moves;
    }

    let config = Configuration::new(
        set.clone(),
        descent.points,
        Provenance {
            seed: Some(opts.seed),
            generator: format!("projected-gradient/start-{start_index}"),
        },
    )?;
    Ok(OptimizeResult {
        config,
        report: descent.report,
        iterations: descent.iterations,
        converged: descent.converged,
        start_index,
        starts: summaries,
        exchanges,
    })
}

/// Approximate minimizer of `E_s^w` over N-point configurations on `set`.
pub fn minimize(
    set: &EmbeddedSet,
    n: usize,
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    minimize_inner(set, n, s, w, opts, None)
}

/// Minimizes for each N in an increasing list. From the second N on, an
/// extra warm start (previous optimum plus freshly drawn points) joins the
/// regular starts.
pub fn minimize_sequence(
    set: &EmbeddedSet,
    n_list: &[usize],
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
) -> Result<Vec<OptimizeResult>> {
    if n_list.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParameter(
            "N list must be strictly increasing".into(),
        ));
    }
    let mut out: Vec<OptimizeResult> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let warm = out.last().map(|r| r.config.points().to_vec());
        out.push(minimize_inner(set, n, s, w, opts, warm.as_deref())?);
    }
    Ok(out)
}

/// Repeatedly tries moving the highest-potential point of one component to
/// the lowest-potential of several candidate sites on another, relaxes, and
/// keeps the move when the energy drops.
fn exchange_polish(
    set: &EmbeddedSet,
    mut current: Descent,
    s: f64,
    w: &WeightFn,
    opts: &OptimizeOptions,
) -> Result<(Descent, usize)> {
    let comps = set.component_count();
    let mut rng = start_rng(opts.seed ^ 0x00e8_c4a2, usize::MAX - 1);
    let mut moves = 0;
    let max_moves = current.points.len();
    'rounds: while moves < max_moves {
        let membership: Vec<usize> = current
            .points
            .iter()
            .map(|p| set.component_of(&p.coords))
            .collect();
        for src in 0..comps {
            for dst in 0..comps {
                if src == dst {
                    continue;
                }
                let Some(victim) = (0..current.points.len())
                    .filter(|&i| membership[i] == src)
                    .max_by(|&a, &b| {
                        current.report.per_point[a].total_cmp(&current.report.per_point[b])
                    })
                else {
                    continue;
                };
                let site = (0..64)
                    .map(|_| set.sample_component(dst, &mut rng))
                    .map(|p| {
                        let u = potential_at(&current.points, &p.coords, s, w, Some(victim));
                        (u, p)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, p)| p)
                    .expect("64 candidates");
                let mut trial = current.points.clone();
                trial[victim] = site;
                let floor = DISTANCE_FLOOR * set.diameter();
                if energy_of_points(&trial, s, w, floor).is_err() {
                    continue;
                }
                let relaxed = descend(set, trial, s, w, opts, opts.polish_iters)?;
                if relaxed.report.total < current.report.total * (1.0 - 1e-12) {
                    current = relaxed;
                    moves += 1;
                    continue 'rounds;
                }
            }
        }
        break;
    }
    // Finish the accepted configuration with a full descent.
    if moves > 0 {
        current = descend(set, current.points, s, w, opts, opts.max_iters)?;
    }
    Ok((current, moves))
}
