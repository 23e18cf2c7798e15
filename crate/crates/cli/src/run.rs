//! Experiments behind the subcommands.

use std::fmt;
use std::io;

use riesz_forge::asymptotics::{
    beta, fit_g, known_constant, lattice_zeta_triangular, tau_eval, theoretical_g_from_measure,
    ConstantStatus,
};
use riesz_forge::diagnostics::{
    distribution_test, energy_upper_bound_check, separation_series, split_fraction,
    DistributionTest,
};
use riesz_forge::energy::scaled_energy;
use riesz_forge::geometry::{EmbeddedSet, IntegrationOptions, PartitionSpec, Point};
use riesz_forge::optimize::{minimize, minimize_sequence, OptimizeResult};
use riesz_forge::weights::{weighted_hausdorff, weighted_hausdorff_total, WeightFn, WeightSpec};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{float, points_table, Artifacts, Table};
use crate::config::{Experiment, RunConfig, Validated};

#[derive(Debug)]
pub enum RunError {
    Numerical(riesz_forge::Error),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Numerical(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<riesz_forge::Error> for RunError {
    fn from(e: riesz_forge::Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Runs a validated experiment, writing its artifacts, and returns a summary
/// for the manifest.
pub fn execute(cfg: &RunConfig, v: &Validated, out: Option<&mut Artifacts>) -> Result<Value> {
    if v.experiment == Experiment::Constants {
        let row = constants_row(v.s, v.d)?;
        if let Some(out) = out {
            out.json("constants.json", &row)?;
        }
        return Ok(serde_json::to_value(row).expect("serializable"));
    }
    let out = out.expect("sampling experiments always have an output directory");
    let set = v.set.as_ref().expect("validated");
    let w = cfg.weight().build(set, v.s, v.d)?;
    let ctx = Context { cfg, v, set, w: &w };
    match v.experiment {
        Experiment::Generate => ctx.generate(out),
        Experiment::Sweep => ctx.sweep(out),
        Experiment::Distribution => ctx.distribution(out),
        Experiment::Separation => ctx.separation(out),
        Experiment::Splitcheck => ctx.splitcheck(out),
        Experiment::Zeroweight => ctx.zeroweight(out),
        Experiment::Constants => unreachable!(),
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    v: &'a Validated,
    set: &'a EmbeddedSet,
    w: &'a WeightFn,
}

impl Context<'_> {
    fn minimize_one(&self, out: &mut Artifacts) -> Result<OptimizeResult> {
        let result = minimize(
            self.set,
            self.cfg.n_list[0],
            self.v.s,
            self.w,
            &self.cfg.optimizer(),
        )?;
        out.table("points.csv", points_table(result.config.points()))?;
        out.table(
            "energies.csv",
            self.energies_table(std::slice::from_ref(&result)),
        )?;
        Ok(result)
    }

    fn minimize_all(&self, out: &mut Artifacts) -> Result<Vec<OptimizeResult>> {
        let results = minimize_sequence(
            self.set,
            &self.cfg.n_list,
            self.v.s,
            self.w,
            &self.cfg.optimizer(),
        )?;
        out.table("energies.csv", self.energies_table(&results))?;
        let last = results.last().expect("n_list is not empty");
        out.table("points.csv", points_table(last.config.points()))?;
        Ok(results)
    }

    fn energies_table(&self, results: &[OptimizeResult]) -> Table {
        let mut t = Table::new(&[
            "n",
            "energy",
            "energy_over_tau",
            "iterations",
            "converged",
            "start_index",
        ]);
        for r in results {
            let ratio = tau_eval(self.v.s, self.v.d, r.n())
                .map_or(String::new(), |tau| float(r.energy() / tau));
            t.row(&[
                r.n().to_string(),
                float(r.energy()),
                ratio,
                r.iterations.to_string(),
                r.converged.to_string(),
                r.start_index.to_string(),
            ]);
        }
        t
    }

    fn generate(&self, out: &mut Artifacts) -> Result<Value> {
        let r = self.minimize_one(out)?;
        Ok(json!({
            "n": r.n(),
            "energy": r.energy(),
            "iterations": r.iterations,
            "converged": r.converged,
            "start_index": r.start_index,
            "min_pair_distance": r.report.min_pair_distance,
            "starts": r.starts,
        }))
    }

    fn sweep(&self, out: &mut Artifacts) -> Result<Value> {
        let (s, d) = (self.v.s, self.v.d);
        let results = self.minimize_all(out)?;
        let pairs: Vec<(usize, f64)> = results.iter().map(|r| (r.n(), r.energy())).collect();
        let mut summary = json!({ "energies": pairs });
        if s < d as f64 {
            summary["fit"] = json!("skipped: needs s >= d");
            return Ok(summary);
        }
        if pairs.len() < 4 {
            summary["fit"] = json!("skipped: needs at least 4 values of N");
            return Ok(summary);
        }
        let h = weighted_hausdorff_total(self.set, self.w, s, d, &IntegrationOptions::default())?;
        let fit = fit_g(&pairs, s, d)?.with_measure(h);
        out.json("fit.json", &fit)?;
        let c = if s > d as f64 {
            known_constant(s, d)?.value
        } else {
            None
        };
        let g_theory = if s > d as f64 && c.is_none() {
            None
        } else {
            Some(theoretical_g_from_measure(h, s, d, c)?)
        };
        summary["g_hat"] = json!(fit.g_hat);
        summary["c_hat"] = json!(fit.c_hat);
        summary["measure"] = json!(h);
        summary["g_theory"] = json!(g_theory);
        Ok(summary)
    }

    fn distribution(&self, out: &mut Artifacts) -> Result<Value> {
        let r = self.minimize_one(out)?;
        let test = self.distribution_of(&r, &self.cfg.partition)?;
        out.table("distribution.csv", distribution_table(&test))?;
        Ok(json!({
            "n": r.n(),
            "energy": r.energy(),
            "regions": test.target.len(),
            "sup_error": test.sup_error,
            "l1_error": test.l1_error,
        }))
    }

    fn distribution_of(
        &self,
        r: &OptimizeResult,
        spec: &PartitionSpec,
    ) -> Result<DistributionTest> {
        let partition = self.set.partition(spec)?;
        Ok(distribution_test(
            &r.config,
            self.w,
            self.v.s,
            self.v.d,
            &partition,
            &IntegrationOptions::default(),
        )?)
    }

    fn separation(&self, out: &mut Artifacts) -> Result<Value> {
        let s = self.v.s;
        let alpha = self.cfg.alpha.unwrap_or(self.v.d as f64);
        let results = self.minimize_all(out)?;
        let series = separation_series(&results, s, alpha)?;
        let mut t = Table::new(&["n", "delta", "delta_normalized", "running_min"]);
        for e in &series.entries {
            t.row(&[
                e.n.to_string(),
                float(e.delta),
                float(e.normalized),
                float(e.running_min),
            ]);
        }
        out.table("separation.csv", t)?;
        let pairs: Vec<(usize, f64)> = results.iter().map(|r| (r.n(), r.energy())).collect();
        let upper = energy_upper_bound_check(s, alpha, &pairs)?;
        Ok(json!({
            "alpha": alpha,
            "running_minimum": series.running_minimum(),
            "collapses": series.collapses(),
            "energy_upper_bound": upper,
        }))
    }

    fn splitcheck(&self, out: &mut Artifacts) -> Result<Value> {
        let (s, d) = (self.v.s, self.v.d);
        // One region per component gives each component's weighted measure.
        let partition = self.set.partition(&PartitionSpec { bins: 1 })?;
        let measures = weighted_hausdorff(
            self.set,
            self.w,
            s,
            d,
            &partition,
            &IntegrationOptions::default(),
        )?;
        let mut per_component = [0.0; 2];
        for (region, m) in partition.regions().iter().zip(&measures.regions) {
            per_component[region.component] += m;
        }
        // The constant cancels in the fraction, so any positive stand-in works
        // where it is unknown.
        let c = if s > d as f64 {
            Some(known_constant(s, d)?.value.unwrap_or(1.0))
        } else {
            None
        };
        let g0 = theoretical_g_from_measure(per_component[0], s, d, c)?;
        let g1 = theoretical_g_from_measure(per_component[1], s, d, c)?;
        let predicted = split_fraction(g0, g1, s, d)?;
        let results = self.minimize_all(out)?;
        let mut t = Table::new(&["n", "on_first", "fraction", "predicted", "abs_error"]);
        let mut rows = Vec::new();
        for r in &results {
            let on_first = r
                .config
                .points()
                .iter()
                .filter(|p| self.set.component_of(&p.coords) == 0)
                .count();
            let fraction = on_first as f64 / r.n() as f64;
            t.row(&[
                r.n().to_string(),
                on_first.to_string(),
                float(fraction),
                float(predicted),
                float((fraction - predicted).abs()),
            ]);
            rows.push(json!({ "n": r.n(), "on_first": on_first, "fraction": fraction, "exchanges": r.exchanges }));
        }
        out.table("splitcheck.csv", t)?;
        Ok(json!({
            "component_measures": per_component,
            "g": [g0, g1],
            "predicted_fraction": predicted,
            "runs": rows,
        }))
    }

    fn zeroweight(&self, out: &mut Artifacts) -> Result<Value> {
        let Some(WeightSpec::PowerZero { a, t }) = &self.cfg.weight else {
            unreachable!("validated")
        };
        let r = self.minimize_one(out)?;
        let mut summary = json!({ "n": r.n(), "energy": r.energy() });
        if *t < self.v.s {
            let test = self.distribution_of(&r, &self.cfg.partition)?;
            out.table("distribution.csv", distribution_table(&test))?;
            let near = self.regions_touching(a, &test)?;
            summary["sup_error"] = json!(test.sup_error);
            summary["sup_error_away_from_zero"] = json!(test.sup_error_excluding(&near));
            if !near.is_empty() {
                summary["joint_error_at_zero"] = json!(test.joint_error(&near));
            }
            summary["regions_at_zero"] = json!(near);
        } else {
            // w(x,x)^{-d/s} is not integrable: no limit distribution to compare.
            summary["distribution"] = json!("skipped: zero of order t >= s");
        }
        let at_origin = a.iter().all(|c| *c == 0.0);
        let in_ball = r.config.points().iter().all(|p| p.norm() <= 1.0 + 1e-12);
        let gammas = match &self.cfg.gammas {
            Some(g) => g.clone(),
            None if at_origin && in_ball => vec![0.5, 0.25],
            None => {
                summary["sink_scaling"] =
                    json!("skipped: needs the zero at the origin and points in the unit ball");
                return Ok(summary);
            }
        };
        let mut table = Table::new(&["gamma", "base", "direct", "predicted", "relative_error"]);
        let mut checks = Vec::new();
        for gamma in gammas {
            let e = scaled_energy(r.config.points(), gamma, self.v.s, self.w)?;
            table.row(&[
                float(e.gamma),
                float(e.base),
                float(e.direct),
                float(e.predicted),
                float(e.relative_error),
            ]);
            checks.push(e);
        }
        out.table("sink.csv", table)?;
        summary["sink_exponent"] = json!(t - self.v.s);
        summary["sink_scaling"] = json!(checks);
        Ok(summary)
    }

    /// Regions whose closure contains the zero `a`, found by locating points
    /// of the set just around it. Empty when `a` is off the set.
    fn regions_touching(&self, a: &[f64], test: &DistributionTest) -> Result<Vec<usize>> {
        let p = Point::new(a.to_vec())?;
        let tol = 1e-9 * self.set.diameter();
        if self.set.distance_to(&p)? > tol {
            return Ok(Vec::new());
        }
        let mut regions = vec![test.partition.locate(self.set, a)];
        for k in 0..a.len() {
            for sign in [-1.0, 1.0] {
                let mut q = a.to_vec();
                q[k] += sign * tol;
                let on = self.set.retract(&Point::from(q))?;
                regions.push(test.partition.locate(self.set, &on.coords));
            }
        }
        regions.sort_unstable();
        regions.dedup();
        Ok(regions)
    }
}

fn distribution_table(test: &DistributionTest) -> Table {
    let mut t = Table::new(&[
        "region_id",
        "component",
        "count",
        "empirical",
        "target",
        "abs_error",
    ]);
    for (k, region) in test.partition.regions().iter().enumerate() {
        t.row(&[
            k.to_string(),
            region.component.to_string(),
            test.counts[k].to_string(),
            float(test.empirical[k]),
            float(test.target[k]),
            float((test.empirical[k] - test.target[k]).abs()),
        ]);
    }
    t
}

/// One line of the constants table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantRow {
    pub s: f64,
    pub d: usize,
    /// `C_s_d` for `s > d`, `beta_d` for `s = d`.
    pub quantity: &'static str,
    pub status: ConstantStatus,
    pub value: Option<f64>,
    /// Proven upper bound on the quantity, where one is known.
    pub bound: Option<f64>,
    /// Triangular-lattice zeta value behind the planar bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_zeta: Option<f64>,
}

pub fn constants_row(s: f64, d: usize) -> Result<ConstantRow> {
    if s == d as f64 {
        let b = beta(d);
        return Ok(ConstantRow {
            s,
            d,
            quantity: "beta_d",
            status: ConstantStatus::Exact,
            value: Some(b),
            bound: Some(b),
            lattice_zeta: None,
        });
    }
    let known = known_constant(s, d)?;
    let lattice_zeta = if d == 2 {
        Some(lattice_zeta_triangular(s)?)
    } else {
        None
    };
    Ok(ConstantRow {
        s,
        d,
        quantity: "C_s_d",
        status: known.status,
        value: known.value,
        bound: known.value,
        lattice_zeta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constants_rows() {
        let row = constants_row(2.0, 1).unwrap();
        assert_eq!(row.status, ConstantStatus::Exact);
        assert!((row.value.unwrap() - PI * PI / 3.0).abs() < 1e-13);
        let row = constants_row(2.0, 2).unwrap();
        assert_eq!(row.quantity, "beta_d");
        assert!((row.value.unwrap() - PI).abs() < 1e-15);
        let row = constants_row(4.0, 2).unwrap();
        assert_eq!(row.status, ConstantStatus::ConjecturedUpperBound);
        assert!(row.lattice_zeta.unwrap() > 6.0);
        let row = constants_row(5.0, 3).unwrap();
        assert_eq!(row.status, ConstantStatus::Unknown);
        assert_eq!(row.value, None);
        assert!(constants_row(1.5, 2).is_err());
    }
}
