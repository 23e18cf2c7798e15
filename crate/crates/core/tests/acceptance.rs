//! Acceptance criteria. Each criterion runs its recipe, compares the
//! expectations used by the recipe against independent oracles computed
//! here, and prints one PASS/FAIL line with the measured values. Runs
//! without the libtest harness so the lines always reach the output.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use riesz_forge::recipes::{run_recipe, RecipeOptions, RecipeReport};

/// `ζ(3)` (Apéry's constant).
const ZETA_3: f64 = 1.202_056_903_159_594_3;
/// `L(2, χ_{-3})`, the Dirichlet L-function of the non-principal character mod 3.
const L_MINUS3_AT_2: f64 = 0.781_302_412_896_486_3;

fn run(name: &str) -> RecipeReport {
    run_recipe(name, &RecipeOptions::default())
        .unwrap_or_else(|e| panic!("recipe {name} failed: {e}"))
}

fn assert_passed(report: &RecipeReport) {
    for c in &report.checks {
        assert!(c.passed, "{}: {}", report.name, c.describe());
    }
}

fn expected_of(report: &RecipeReport, label: &str) -> f64 {
    report
        .check(label)
        .unwrap_or_else(|| panic!("missing check {label}"))
        .expected
}

/// `N Σ_{k=1}^{N-1} 1 / (2 sin(πk/N))^s`, the energy of N equally spaced
/// points on the unit circle.
fn equally_spaced_energy(n: usize, s: f64) -> f64 {
    let x = n as f64;
    x * (1..n)
        .map(|k| (2.0 * (PI * k as f64 / x).sin()).powf(-s))
        .sum::<f64>()
}

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h))
        .sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

fn criterion_01_circle_s2_constant() -> RecipeReport {
    let report = run("circle-s2-constant");
    assert!((expected_of(&report, "g") - 1.0 / 12.0).abs() < 1e-14);
    for &(n, _) in &report.energies {
        let closed = n as f64 * ((n * n - 1) as f64) / 12.0;
        assert!((equally_spaced_energy(n, 2.0) / closed - 1.0).abs() < 1e-12);
        assert!((expected_of(&report, &format!("E({n})")) - closed).abs() <= 1e-12 * closed);
    }
    assert_passed(&report);
    report
}

fn criterion_02_interval_s3_constant() -> RecipeReport {
    let report = run("interval-s3-constant");
    assert!((expected_of(&report, "g") - 2.0 * ZETA_3).abs() < 1e-12);
    assert_passed(&report);
    report
}

fn criterion_03_circle_s1_transition() -> RecipeReport {
    let report = run("circle-s1-transition");
    assert!((expected_of(&report, "g") - 1.0 / PI).abs() < 1e-15);
    for &(n, e) in &report.energies {
        assert!((e / equally_spaced_energy(n, 1.0) - 1.0).abs() < 1e-12);
    }
    assert_passed(&report);
    report
}

fn criterion_04_circle_density() -> RecipeReport {
    let report = run("circle-density");
    let test = report.distribution.as_ref().unwrap();
    // ∫ (1 + cos θ / 2) / (2π) dθ over each of 20 equal bins.
    let antiderivative = |t: f64| (t + 0.5 * t.sin()) / (2.0 * PI);
    for (k, target) in test.target.iter().enumerate() {
        let (a, b) = (2.0 * PI * k as f64 / 20.0, 2.0 * PI * (k + 1) as f64 / 20.0);
        assert!((target - (antiderivative(b) - antiderivative(a))).abs() < 1e-9);
    }
    assert_passed(&report);
    report
}

fn criterion_05_separation() -> RecipeReport {
    let report = run("separation");
    assert_passed(&report);
    report
}

fn criterion_06_split_fraction() -> RecipeReport {
    let report = run("split-fraction");
    assert!((expected_of(&report, "fraction on smaller circle") - 1.0 / 3.0).abs() < 1e-14);
    assert_passed(&report);
    report
}

fn criterion_07_sink_scaling() -> RecipeReport {
    let report = run("sink-scaling");
    assert_eq!(expected_of(&report, "E(γω)/E(ω) at γ=0.5"), 0.25);
    assert_eq!(expected_of(&report, "E(γω)/E(ω) at γ=0.25"), 0.0625);
    assert_passed(&report);
    report
}

fn criterion_08_zero_weight() -> RecipeReport {
    let report = run("zero-weight");
    let test = report.distribution.as_ref().unwrap();
    // Target density ∝ w(x,x)^{-1/2} = (2 |x - a|)^{-1/2} with |x - a| = 2 sin(θ/2).
    // Substituting θ = φ² removes the endpoint singularity at θ = 0 and the
    // reflection θ → 2π - θ handles the one at 2π.
    let density = |t: f64| (4.0 * (t / 2.0).sin()).powf(-0.5);
    let smooth = |phi: f64| {
        if phi == 0.0 {
            2f64.sqrt()
        } else {
            2.0 * phi * density(phi * phi)
        }
    };
    let from_zero = |t: f64| simpson(smooth, 0.0, t.sqrt(), 4000);
    let mass = |a: f64, b: f64| -> f64 {
        if b <= PI {
            from_zero(b) - from_zero(a)
        } else {
            from_zero(2.0 * PI - a) - from_zero(2.0 * PI - b)
        }
    };
    let bins: Vec<f64> = (0..20)
        .map(|k| mass(2.0 * PI * k as f64 / 20.0, 2.0 * PI * (k + 1) as f64 / 20.0))
        .collect();
    let total: f64 = bins.iter().sum();
    for (target, oracle) in test.target.iter().zip(&bins) {
        assert!(
            (target - oracle / total).abs() < 1e-7,
            "{target} vs {}",
            oracle / total
        );
    }
    assert_passed(&report);
    report
}

fn criterion_09_torus_planar_constant() -> RecipeReport {
    let report = run("torus-planar-constant");
    let bound = 0.75 * 6.0 * (PI * PI / 6.0) * L_MINUS3_AT_2;
    assert!((expected_of(&report, "C_hat upper") / (1.05 * bound) - 1.0).abs() < 1e-8);
    assert!((expected_of(&report, "C_hat lower") / (0.80 * bound) - 1.0).abs() < 1e-8);
    // Reporting-grade: a result outside the band is printed above but does
    // not fail the suite.
    assert!(report.soft);
    assert!(report.fit.as_ref().unwrap().c_hat.unwrap() > 0.0);
    report
}

fn criterion_10_property_suites() -> RecipeReport {
    let report = run("property-suites");
    assert_passed(&report);
    report
}

type Criterion = fn() -> RecipeReport;

const CRITERIA: [(u32, &str, Criterion); 10] = [
    (1, "circle-s2-constant", criterion_01_circle_s2_constant),
    (2, "interval-s3-constant", criterion_02_interval_s3_constant),
    (3, "circle-s1-transition", criterion_03_circle_s1_transition),
    (4, "circle-density", criterion_04_circle_density),
    (5, "separation", criterion_05_separation),
    (6, "split-fraction", criterion_06_split_fraction),
    (7, "sink-scaling", criterion_07_sink_scaling),
    (8, "zero-weight", criterion_08_zero_weight),
    (
        9,
        "torus-planar-constant",
        criterion_09_torus_planar_constant,
    ),
    (10, "property-suites", criterion_10_property_suites),
];

fn main() -> ExitCode {
    // Positional arguments filter criteria by name; libtest flags are ignored.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, criterion) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(report) => {
                let verdict = match (report.passed(), report.soft) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL (reporting only)",
                    (false, false) => "FAIL",
                };
                failed += usize::from(!report.passed() && !report.soft);
                let details: Vec<String> = report.checks.iter().map(|c| c.describe()).collect();
                println!(
                    "criterion {id} [{name}]: {verdict} ({secs:.1}s) {}",
                    details.join("; ")
                );
            }
            Err(payload) => {
                failed += 1;
                let msg = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {id} [{name}]: FAIL ({secs:.1}s) {msg}");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
