//! Run configuration: JSON file, command-line overrides, validation.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use riesz_forge::geometry::{EmbeddedSet, PartitionSpec, SetKind};
use riesz_forge::optimize::OptimizeOptions;
use riesz_forge::weights::WeightSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Generate,
    Sweep,
    Distribution,
    Separation,
    Constants,
    Splitcheck,
    Zeroweight,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Generate => "generate",
            Experiment::Sweep => "sweep",
            Experiment::Distribution => "distribution",
            Experiment::Separation => "separation",
            Experiment::Constants => "constants",
            Experiment::Splitcheck => "splitcheck",
            Experiment::Zeroweight => "zeroweight",
        }
    }

    fn needs_seed(self) -> bool {
        self != Experiment::Constants
    }
}

/// Everything a run needs. Fields are optional at parse time so that a file
/// can be completed by command-line flags; `validate` enforces what each
/// experiment requires.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, alias = "N_list", skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub optimizer: OptimizeOptions,
    #[serde(default)]
    pub partition: PartitionSpec,
    /// Dimension used to normalize separation distances; defaults to `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Contraction factors for the sink-scaling check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A configuration problem, reported with exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Checks the fields the experiment needs and builds the set.
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let Some(experiment) = self.experiment else {
            return fail("missing field `experiment`");
        };
        if experiment.needs_seed() && self.seed.is_none() {
            return fail(format!(
                "missing field `seed` (mandatory for {})",
                experiment.name()
            ));
        }
        let Some(s) = self.s else {
            return fail("missing field `s`");
        };
        if !(s > 0.0 && s.is_finite()) {
            return fail(format!("`s` must be positive and finite, got {s}"));
        }
        let set = match &self.set {
            Some(kind) => Some(
                EmbeddedSet::new(kind.clone())
                    .map_err(|e| ConfigError(format!("field `set`: {e}")))?,
            ),
            None if experiment == Experiment::Constants => None,
            None => return fail("missing field `set`"),
        };
        let d = match (self.d, &set) {
            (Some(d), Some(set)) if d != set.dim() => {
                return fail(format!(
                    "`d` = {d} does not match the set dimension {}",
                    set.dim()
                ))
            }
            (Some(d), _) => d,
            (None, Some(set)) => set.dim(),
            (None, None) => return fail("missing field `d`"),
        };
        if d == 0 {
            return fail("`d` must be at least 1");
        }
        let n = self.n_list.len();
        match experiment {
            Experiment::Constants => {}
            Experiment::Generate | Experiment::Distribution | Experiment::Zeroweight if n != 1 => {
                return fail(format!(
                    "{} takes exactly one value in `n_list`, got {n}",
                    experiment.name()
                ))
            }
            Experiment::Separation if n < 2 => {
                return fail("separation needs at least two values in `n_list`")
            }
            _ if n == 0 => return fail("missing field `n_list`"),
            _ => {}
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return fail("every value in `n_list` must be at least 2");
        }
        if n > 1 && self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return fail("`n_list` must be strictly increasing");
        }
        if experiment == Experiment::Splitcheck
            && set.as_ref().map(|s| s.component_count()) != Some(2)
        {
            return fail("splitcheck needs a disjoint_union set with exactly two components");
        }
        if experiment == Experiment::Zeroweight
            && !matches!(self.weight, Some(WeightSpec::PowerZero { .. }))
        {
            return fail("zeroweight needs a power_zero weight");
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha <= s) {
                return fail(format!("`alpha` must lie in (0, s], got {alpha}"));
            }
        }
        if let Some(gammas) = &self.gammas {
            if gammas.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
                return fail("every value in `gammas` must lie in (0, 1]");
            }
        }
        if self.partition.bins == 0 {
            return fail("`partition.bins` must be at least 1");
        }
        self.optimizer
            .validate()
            .map_err(|e| ConfigError(format!("field `optimizer`: {e}")))?;
        Ok(Validated {
            experiment,
            s,
            d,
            set,
        })
    }

    /// Optimizer options with the run seed.
    pub fn optimizer(&self) -> OptimizeOptions {
        OptimizeOptions {
            seed: self.seed.unwrap_or(self.optimizer.seed),
            ..self.optimizer.clone()
        }
    }

    pub fn weight(&self) -> WeightSpec {
        self.weight.clone().unwrap_or(WeightSpec::Unit)
    }
}

/// Fields resolved by validation.
#[derive(Debug)]
pub struct Validated {
    pub experiment: Experiment,
    pub s: f64,
    pub d: usize,
    pub set: Option<EmbeddedSet>,
}

/// `--set` accepts a catalog name (with unit-size defaults) or a JSON object.
pub fn parse_set(arg: &str) -> Result<SetKind, ConfigError> {
    let trimmed = arg.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).map_err(|e| ConfigError(format!("--set: {e}")));
    }
    let kind = match trimmed.replace('-', "_").as_str() {
        "circle" => SetKind::Circle { radius: 1.0 },
        "arc" => SetKind::Arc {
            radius: 1.0,
            angle: PI,
        },
        "interval" => SetKind::Interval { length: 1.0 },
        "square" => SetKind::Cube { side: 1.0, dim: 2 },
        "cube" => SetKind::Cube { side: 1.0, dim: 3 },
        "sphere" | "sphere2" => SetKind::Sphere2 { radius: 1.0 },
        "torus" | "flat_torus" => SetKind::FlatTorus {
            major: 1.0,
            minor: 1.0,
        },
        other => return fail(format!("--set: unknown set name {other:?}")),
    };
    Ok(kind)
}

/// `--weight` accepts `unit` or a JSON object.
pub fn parse_weight(arg: &str) -> Result<WeightSpec, ConfigError> {
    let trimmed = arg.trim();
    if trimmed == "unit" {
        return Ok(WeightSpec::Unit);
    }
    serde_json::from_str(trimmed).map_err(|e| ConfigError(format!("--weight: {e}")))
}
