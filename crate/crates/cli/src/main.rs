use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use virial_core::models::{self, ModelDescriptor, Params};
use virial_core::scenario::{self, exit_code, Overrides, PeriodSetting, ScenarioConfig};
use virial_core::Error;

/// Caps the number of scenarios run concurrently in batch mode.
const BATCH_THREADS_ENV: &str = "VIRIAL_BATCH_THREADS";

#[derive(Parser)]
#[command(name = "virial", version, about = "Integrate mechanical systems and check virial time-average identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and build its model without integrating.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Integrate a scenario (or every scenario in a directory) and write
    /// trajectory.csv, report.json and convergence.csv.
    Run {
        #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
        scenario: Option<PathBuf>,
        /// Run every `*.json` scenario in this directory, one output subdirectory each.
        #[arg(long)]
        batch: Option<PathBuf>,
        /// Output directory; defaults to `outputs.directory` of the scenario.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tmax: Option<f64>,
        /// `auto`, `none` or a period.
        #[arg(long)]
        period: Option<String>,
    },
    /// List the built-in models.
    ListModels {
        #[arg(long)]
        json: bool,
    },
    /// Jet, frame and structure-equation checks for a model.
    Check {
        #[arg(long)]
        model: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Run {
            scenario,
            batch,
            out,
            tmax,
            period,
        } => parse_overrides(tmax, period.as_deref()).and_then(|ov| match (scenario, batch) {
            (Some(path), _) => run_one(&path, out.as_deref(), &ov),
            (None, Some(dir)) => run_batch(&dir, out.as_deref(), &ov),
            (None, None) => Err(Error::Config("either --scenario or --batch is required".into())),
        }),
        Command::ListModels { json } => list_models(json),
        Command::Check { model } => check(&model),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn parse_overrides(tmax: Option<f64>, period: Option<&str>) -> Result<Overrides, Error> {
    if let Some(t) = tmax {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Validation(format!("--tmax must be positive, got {t}")));
        }
    }
    Ok(Overrides {
        t_max: tmax,
        period: period.map(str::parse::<PeriodSetting>).transpose()?,
    })
}

fn validate(path: &Path) -> Result<u8, Error> {
    let config = ScenarioConfig::from_path(path)?;
    let prepared = scenario::prepare(&config)?;
    let d = &prepared.dynamics;
    println!(
        "ok: {} ({} in {}, {} state components)",
        config.display_name(),
        prepared.descriptor.name,
        d.formalism(),
        d.dim()
    );
    for e in &prepared.check.entries {
        println!("  {:<48} {:>10.3e} <= {:.1e}", e.name, e.value, e.tolerance);
    }
    println!("  virial functions: {}", prepared.virials.join(", "));
    for w in &prepared.warnings {
        println!("  warning: {w}");
    }
    Ok(0)
}

fn output_dir(config: &ScenarioConfig, out: Option<&Path>) -> Result<PathBuf, Error> {
    out.map(Path::to_path_buf)
        .or_else(|| config.outputs.directory.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no output directory: pass --out or set outputs.directory".into()))
}

fn run_one(path: &Path, out: Option<&Path>, overrides: &Overrides) -> Result<u8, Error> {
    let config = ScenarioConfig::from_path(path)?;
    let dir = output_dir(&config, out)?;
    let run = scenario::run(&config, overrides)?;
    scenario::write_outputs(&run, &dir)?;
    print_summary(&run.report, &dir);
    Ok(0)
}

fn print_summary(report: &scenario::RunReport, dir: &Path) {
    let period = report
        .period
        .value
        .map(|p| format!(", period {p:.10}"))
        .unwrap_or_default();
    println!(
        "{}: {} in {}, t = {}{}{} -> {}",
        report.scenario,
        report.model,
        report.formalism,
        report.t_end,
        period,
        if report.guard_tripped { ", guard tripped" } else { "" },
        dir.display()
    );
    for v in &report.virials {
        println!(
            "  {:<16} <F> = {:>+.6e} ({}), boundary {:>+.6e}, residual {:.2e} (tol {:.2e}){}{}",
            v.name,
            v.average,
            v.average_mode,
            v.boundary_term,
            v.self_consistency_residual,
            v.tolerance,
            if v.consistent { "" } else { " INCONSISTENT" },
            if v.bound_warning { " [G unbounded?]" } else { "" }
        );
    }
    for d in &report.conserved {
        println!("  drift {:<26} {:.3e}", d.name, d.max_abs_drift);
    }
    for w in &report.warnings {
        println!("  warning: {w}");
    }
}

fn batch_threads() -> Result<Option<usize>, Error> {
    match std::env::var(BATCH_THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{BATCH_THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn run_batch(dir: &Path, out: Option<&Path>, overrides: &Overrides) -> Result<u8, Error> {
    let out = out.ok_or_else(|| Error::Config("--batch needs --out".into()))?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no *.json scenarios in {}", dir.display())));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = batch_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<scenario::RunReport, Error>> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let config = ScenarioConfig::from_path(p)?;
                let run = scenario::run(&config, overrides)?;
                scenario::write_outputs(&run, &out.join(&stem))?;
                Ok(run.report)
            })
            .collect()
    });
    let mut code = 0;
    for (p, r) in paths.iter().zip(results) {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match r {
            Ok(report) => print_summary(&report, &out.join(&stem)),
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                code = code.max(exit_code(&e) as u8);
            }
        }
    }
    Ok(code)
}

fn model_row(d: &ModelDescriptor) -> Result<Value, Error> {
    let params: Params = d.parameters.iter().map(|p| (p.name.clone(), p.value.clone())).collect();
    let mut virials = serde_json::Map::new();
    for &f in &d.formalisms {
        let dy = d.dynamics(f)?;
        virials.insert(
            f.as_str().into(),
            dy.virials.iter().map(|v| json!({"name": v.name, "description": v.description})).collect(),
        );
    }
    let template = ScenarioConfig {
        name: Some(d.name.clone()),
        model: scenario::ModelSpec {
            name: d.name.clone(),
            params,
        },
        formalism: Some(d.default_formalism()),
        initial_state: None,
        integrator: Default::default(),
        averaging: Default::default(),
        virial: None,
        outputs: Default::default(),
    };
    Ok(json!({
        "name": d.name,
        "description": d.description,
        "formalisms": d.formalisms,
        "parameters": d.parameters,
        "constants": d.constants,
        "virial_functions": virials,
        "scenario": template,
    }))
}

fn list_models(as_json: bool) -> Result<u8, Error> {
    let registry = models::registry();
    if as_json {
        let rows = registry.iter().map(model_row).collect::<Result<Vec<_>, _>>()?;
        println!("{}", scenario::to_json_string(&rows)?.trim_end());
        return Ok(0);
    }
    for d in &registry {
        let formalisms: Vec<&str> = d.formalisms.iter().map(|f| f.as_str()).collect();
        println!("{}  [{}]", d.name, formalisms.join(", "));
        println!("    {}", d.description);
        for p in &d.parameters {
            println!("    {:<8} = {:<24} {} ({})", p.name, p.value.to_string(), p.description, p.unit);
        }
        let dy = d.dynamics(d.default_formalism())?;
        let names: Vec<&str> = dy.virials.iter().map(|v| v.name.as_str()).collect();
        println!("    virial functions ({}): {}", d.default_formalism(), names.join(", "));
    }
    Ok(0)
}

fn check(name: &str) -> Result<u8, Error> {
    let d = models::build_unchecked(name, &Params::new())?;
    let rep = d.check()?;
    for e in &rep.entries {
        println!(
            "{} {:<48} {:>10.3e} <= {:.1e}",
            if e.passed { "ok  " } else { "FAIL" },
            e.name,
            e.value,
            e.tolerance
        );
    }
    Ok(if rep.passed() { 0 } else { 1 })
}
