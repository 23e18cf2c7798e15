//! Command-line front-end: experiments from JSON configs and flags, written
//! as CSV/JSON artifacts, plus the named acceptance recipes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use riesz_forge::recipes::{run_recipe, RecipeOptions, RECIPES};
use serde_json::Value;

use artifacts::{Artifacts, Manifest};
use config::{parse_set, parse_weight, ConfigError, Experiment, RunConfig};

const OUT_ENV: &str = "RIESZ_FORGE_OUT";
const DEFAULT_OUT: &str = "riesz-forge-out";

#[derive(Parser, Debug)]
#[command(
    name = "riesz-forge",
    version,
    about = "Near-minimal weighted Riesz energy configurations"
)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Results are bit-stable for a fixed worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (the RIESZ_FORGE_OUT environment variable takes precedence).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the energy for one N and write the points.
    Generate(ExperimentArgs),
    /// Minimize over a list of N and fit the large-N limit of E/τ.
    Sweep(ExperimentArgs),
    /// Compare region frequencies of a minimizer with the limit distribution.
    Distribution(ExperimentArgs),
    /// Track the normalized separation distance over a list of N.
    Separation(ExperimentArgs),
    /// Print what is known about the asymptotic constant.
    Constants(ExperimentArgs),
    /// Compare the split of points between two components with its limit.
    Splitcheck(ExperimentArgs),
    /// Distribution and sink scaling for a weight with a zero.
    Zeroweight(ExperimentArgs),
    /// Run named acceptance recipes.
    Recipe(RecipeArgs),
}

#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// Catalog set name (circle, arc, interval, square, cube, sphere2, flat-torus) or a JSON object.
    #[arg(long)]
    set: Option<String>,
    /// `unit` or a JSON weight object.
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Numbers of points, comma separated.
    #[arg(long = "N", visible_alias = "n", value_delimiter = ',')]
    n: Vec<usize>,
    /// Partition resolution for distribution tests.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct RecipeArgs {
    /// Recipe name, or `all`.
    name: Option<String>,
    /// List the recipe names.
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let (experiment, args) = match &cli.command {
        Command::Recipe(args) => return recipes(&cli, args),
        Command::Generate(a) => (Experiment::Generate, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
        Command::Distribution(a) => (Experiment::Distribution, a),
        Command::Separation(a) => (Experiment::Separation, a),
        Command::Constants(a) => (Experiment::Constants, a),
        Command::Splitcheck(a) => (Experiment::Splitcheck, a),
        Command::Zeroweight(a) => (Experiment::Zeroweight, a),
    };
    match resolve(&cli, experiment, args) {
        Ok(cfg) => experiment_run(&cli, cfg),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve(
    cli: &Cli,
    experiment: Experiment,
    args: &ExperimentArgs,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(from_file) = cfg.experiment {
        if from_file != experiment {
            return Err(ConfigError(format!(
                "config is for `{}` but the subcommand is `{}`",
                from_file.name(),
                experiment.name()
            )));
        }
    }
    cfg.experiment = Some(experiment);
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(set) = &args.set {
        cfg.set = Some(parse_set(set)?);
    }
    if let Some(weight) = &args.weight {
        cfg.weight = Some(parse_weight(weight)?);
    }
    if args.s.is_some() {
        cfg.s = args.s;
    }
    if args.d.is_some() {
        cfg.d = args.d;
    }
    if !args.n.is_empty() {
        cfg.n_list = args.n.clone();
    }
    if let Some(bins) = args.bins {
        cfg.partition.bins = bins;
    }
    if let Some(starts) = args.starts {
        cfg.optimizer.starts = starts;
    }
    if args.alpha.is_some() {
        cfg.alpha = args.alpha;
    }
    if let Ok(dir) = std::env::var(OUT_ENV) {
        cfg.output = Some(PathBuf::from(dir));
    } else if let Some(dir) = &cli.out {
        cfg.output = Some(dir.clone());
    }
    Ok(cfg)
}

fn experiment_run(cli: &Cli, mut cfg: RunConfig) -> ExitCode {
    let validated = match cfg.validate() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cfg.seed {
        cfg.optimizer.seed = seed;
    }
    // Constants are computed, not sampled: files only on request.
    if validated.experiment != Experiment::Constants && cfg.output.is_none() {
        cfg.output = Some(PathBuf::from(DEFAULT_OUT));
    }
    let mut out = match cfg.output.as_deref().map(Artifacts::create).transpose() {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: cannot create output directory: {e}");
            return ExitCode::from(1);
        }
    };
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let outcome = run::execute(&cfg, &validated, out.as_mut());
    let (status, error, summary) = match outcome {
        Ok(summary) => ("ok", None, summary),
        Err(e) => ("error", Some(e.to_string()), Value::Null),
    };
    if let Some(out) = out.as_mut() {
        let artifacts = out.written().to_vec();
        let manifest = Manifest {
            tool: "riesz-forge",
            version: env!("CARGO_PKG_VERSION"),
            core_version: riesz_forge::VERSION,
            experiment: validated.experiment.name(),
            seed: cfg.seed,
            workers: rayon::current_num_threads(),
            config: &echo,
            status,
            error: error.clone(),
            partial: error.is_some() && !artifacts.is_empty(),
            artifacts,
            summary: summary.clone(),
        };
        if let Err(e) = out.json("manifest.json", &manifest) {
            eprintln!("error: cannot write manifest: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(e) = error {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("summary serializes")
        );
    } else {
        print_summary(&summary);
        if let Some(out) = &out {
            println!(
                "artifacts in {}: {}",
                out.dir().display(),
                out.written().join(", ")
            );
        }
    }
    ExitCode::SUCCESS
}

fn print_summary(summary: &Value) {
    if let Value::Object(map) = summary {
        for (k, v) in map {
            match v {
                Value::Array(_) | Value::Object(_) => println!("{k}: {v}"),
                _ => println!("{k}: {}", v.to_string().trim_matches('"')),
            }
        }
    }
}

fn recipes(cli: &Cli, args: &RecipeArgs) -> ExitCode {
    if args.list {
        for name in RECIPES {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let names: Vec<&str> = match args.name.as_deref() {
        None => {
            eprintln!("error: give a recipe name, `all`, or --list");
            return ExitCode::from(2);
        }
        Some("all") => RECIPES.to_vec(),
        Some(name) if RECIPES.contains(&name) => vec![name],
        Some(name) => {
            eprintln!(
                "error: unknown recipe {name:?}; known recipes: {}",
                RECIPES.join(", ")
            );
            return ExitCode::from(2);
        }
    };
    let mut opts = RecipeOptions::default();
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }
    let mut failed = false;
    let mut reports = Vec::new();
    for name in names {
        let start = Instant::now();
        match run_recipe(name, &opts) {
            Ok(report) => {
                let verdict = match (report.passed(), report.soft) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL (reporting only)",
                    (false, false) => "FAIL",
                };
                failed |= !report.passed() && !report.soft;
                if !cli.json {
                    println!("{name}: {verdict} ({:.1}s)", start.elapsed().as_secs_f64());
                    for check in &report.checks {
                        let mark = if check.passed { "ok" } else { "FAILED" };
                        println!("  [{mark}] {}", check.describe());
                    }
                }
                reports.push(serde_json::to_value(&report).expect("report serializes"));
            }
            Err(e) => {
                failed = true;
                if !cli.json {
                    println!("{name}: FAIL (error: {e})");
                }
                reports.push(serde_json::json!({ "name": name, "error": e.to_string() }));
            }
        }
    }
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        );
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
