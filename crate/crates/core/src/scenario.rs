//! Scenario files: configuration, validation, runs and their artifacts
//! (`trajectory.csv`, `report.json`, `convergence.csv`).

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::averaging::{
    detect_period, integrate, running_average, Drift, IntegratorSettings, IntegratorStats, Trajectory,
    VirialEntry, VirialReport,
};
use crate::dynamics::{Dynamics, Formalism, VirialFunction};
use crate::error::{Error, Result};
use crate::jet::ConstantSection;
use crate::models::{self, CheckReport, ModelDescriptor, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// Initial state either flat or split into base and fibre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Flat(Vec<f64>),
    Split { base: Vec<f64>, fibre: Vec<f64> },
}

impl InitialState {
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            InitialState::Flat(v) => v.clone(),
            InitialState::Split { base, fibre } => base.iter().chain(fibre).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Cesaro,
    Periodic,
}

/// `"auto"`, `"none"` or a fixed period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PeriodSetting {
    #[default]
    Auto,
    None,
    Fixed(f64),
}

impl std::str::FromStr for PeriodSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PeriodSetting::Auto),
            "none" => Ok(PeriodSetting::None),
            _ => s
                .parse::<f64>()
                .map(PeriodSetting::Fixed)
                .map_err(|_| Error::Config(format!("period must be auto, none or a number, got `{s}`"))),
        }
    }
}

impl Serialize for PeriodSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PeriodSetting::Auto => s.serialize_str("auto"),
            PeriodSetting::None => s.serialize_str("none"),
            PeriodSetting::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for PeriodSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(PeriodSetting::Fixed(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingConfig {
    pub mode: Mode,
    pub convergence_tol: f64,
    pub period: PeriodSetting,
    /// Recurrence radius for period detection, relative to `1 + |s0|`.
    pub period_eps: f64,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Cesaro,
            convergence_tol: 1e-3,
            period: PeriodSetting::Auto,
            period_eps: 1e-6,
        }
    }
}

/// A registered virial function by name, or a constant section / vector
/// field given by components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VirialSpec {
    Named(String),
    Section { name: String, section: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<String>,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub formalism: Option<Formalism>,
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub averaging: AveragingConfig,
    /// Defaults to every registered virial function.
    #[serde(default)]
    pub virial: Option<Vec<VirialSpec>>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.model.name.clone())
    }
}

/// A scenario with its model built and every reference resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub descriptor: ModelDescriptor,
    pub dynamics: Dynamics,
    pub virials: Vec<String>,
    pub initial_state: Vec<f64>,
    pub check: CheckReport,
    pub warnings: Vec<String>,
}

/// Schema-level and model-level validation without integration.
pub fn prepare(config: &ScenarioConfig) -> Result<Prepared> {
    let descriptor = models::build_unchecked(&config.model.name, &config.model.params)?;
    let check = descriptor.check()?;
    if !check.passed() {
        let failing: Vec<String> = check
            .failures()
            .iter()
            .map(|e| format!("{} = {:e} exceeds {:e}", e.name, e.value, e.tolerance))
            .collect();
        return Err(Error::Validation(failing.join("; ")));
    }
    let formalism = config.formalism.unwrap_or_else(|| descriptor.default_formalism());
    let mut dynamics = descriptor
        .dynamics(formalism)
        .map_err(|e| Error::Validation(e.to_string()))?;
    config.integrator.validate()?;
    let av = &config.averaging;
    if !(av.convergence_tol > 0.0) {
        return Err(Error::Validation("averaging.convergence_tol must be positive".into()));
    }
    if !(av.period_eps > 0.0) {
        return Err(Error::Validation("averaging.period_eps must be positive".into()));
    }
    match av.period {
        PeriodSetting::Fixed(tau) if !(tau > 0.0 && tau <= config.integrator.t_max) => {
            return Err(Error::Validation(format!(
                "period {tau} must lie in (0, t_max = {}]",
                config.integrator.t_max
            )))
        }
        PeriodSetting::None if av.mode == Mode::Periodic => {
            return Err(Error::Validation("periodic averaging needs period auto or a value".into()))
        }
        _ => {}
    }
    let mut warnings = Vec::new();
    let initial_state = match &config.initial_state {
        Some(s) => s.flatten(),
        None => dynamics.initial_state.clone(),
    };
    if initial_state.len() != dynamics.dim() {
        return Err(Error::Validation(format!(
            "initial_state has {} components, model `{}` in `{formalism}` needs {} ({})",
            initial_state.len(),
            descriptor.name,
            dynamics.dim(),
            dynamics.state_names.join(", ")
        )));
    }
    if !dynamics.in_domain(&initial_state) {
        return Err(Error::Validation(format!("initial_state {initial_state:?} lies outside the model domain")));
    }
    if descriptor.name == "heavy_top" {
        let n = initial_state[..3].iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            warnings.push(format!("|gamma(0)| = {n} is not 1"));
        }
    }
    let mut virials = Vec::new();
    match &config.virial {
        None => virials.extend(dynamics.virials.iter().map(|v| v.name.clone())),
        Some(specs) => {
            for spec in specs {
                match spec {
                    VirialSpec::Named(name) => {
                        if dynamics.virial(name).is_none() {
                            return Err(Error::Validation(format!(
                                "virial function `{name}` is not registered for `{}` in `{formalism}` (available: {})",
                                descriptor.name,
                                dynamics.virials.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", ")
                            )));
                        }
                        virials.push(name.clone());
                    }
                    VirialSpec::Section { name, section } => {
                        if dynamics.virial(name).is_some() {
                            return Err(Error::Validation(format!("virial name `{name}` is already registered")));
                        }
                        let m = dynamics.dim() - dynamics.base_dim();
                        if section.len() != m || section.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Validation(format!(
                                "section `{name}` needs {m} finite components, got {}",
                                section.len()
                            )));
                        }
                        dynamics.virials.push(VirialFunction::section(
                            name.clone(),
                            format!("constant section {section:?}"),
                            Arc::new(ConstantSection {
                                values: section.clone(),
                                base_dim: dynamics.base_dim(),
                            }),
                        ));
                        virials.push(name.clone());
                    }
                }
            }
        }
    }
    if virials.is_empty() {
        return Err(Error::Validation("no virial functions selected".into()));
    }
    for f in &config.outputs.formats {
        if f != "csv" && f != "json" {
            return Err(Error::Validation(format!("unknown output format `{f}` (csv, json)")));
        }
    }
    Ok(Prepared {
        config: config.clone(),
        descriptor,
        dynamics,
        virials,
        initial_state,
        check,
        warnings,
    })
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub t_max: Option<f64>,
    pub period: Option<PeriodSetting>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(t) = self.t_max {
            config.integrator.t_max = t;
        }
        if let Some(p) = self.period {
            config.averaging.period = p;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VirialSummary {
    pub name: String,
    pub description: String,
    /// Headline average: periodic when requested and available, else Cesàro.
    pub average: f64,
    pub average_mode: String,
    pub cesaro_average: f64,
    pub half_average: Option<f64>,
    pub converged: bool,
    pub periodic_average: Option<f64>,
    pub periodic_boundary_term: Option<f64>,
    pub boundary_term: f64,
    pub self_consistency_residual: f64,
    pub tolerance: f64,
    pub consistent: bool,
    pub bound_warning: bool,
    /// False when `bound_warning` is set: the vanishing-average conclusion
    /// is not supported on this run.
    pub vanishing_average_supported: bool,
    pub max_abs_g: f64,
    pub g_start: f64,
    pub g_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodInfo {
    pub setting: PeriodSetting,
    pub value: Option<f64>,
    pub detected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegratorInfo {
    pub settings: IntegratorSettings,
    pub stats: IntegratorStats,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub model: String,
    pub formalism: Formalism,
    pub parameters: Params,
    pub state_names: Vec<String>,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
    pub t_end: f64,
    pub guard_tripped: bool,
    pub period: PeriodInfo,
    pub virials: Vec<VirialSummary>,
    pub conserved: Vec<Drift>,
    pub integrator: IntegratorInfo,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn all_consistent(&self) -> bool {
        self.virials.iter().all(|v| v.consistent)
    }

    pub fn virial(&self, name: &str) -> Option<&VirialSummary> {
        self.virials.iter().find(|v| v.name == name)
    }

    pub fn drift(&self, name: &str) -> Option<&Drift> {
        self.conserved.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub prepared: Prepared,
    pub trajectory: Trajectory,
    pub virial_report: VirialReport,
    pub report: RunReport,
}

fn summarize(entry: &VirialEntry, description: &str, mode: Mode) -> VirialSummary {
    let (average, average_mode) = match (mode, entry.periodic) {
        (Mode::Periodic, Some(p)) => (p, "periodic"),
        _ => (entry.cesaro.value, "cesaro"),
    };
    VirialSummary {
        name: entry.name.clone(),
        description: description.into(),
        average,
        average_mode: average_mode.into(),
        cesaro_average: entry.cesaro.value,
        half_average: entry.cesaro.half_value,
        converged: entry.cesaro.converged,
        periodic_average: entry.periodic,
        periodic_boundary_term: entry.periodic_boundary_term,
        boundary_term: entry.boundary_term,
        self_consistency_residual: entry.residual,
        tolerance: entry.tolerance,
        consistent: entry.consistent,
        bound_warning: entry.cesaro.bound_warning,
        vanishing_average_supported: !entry.cesaro.bound_warning,
        max_abs_g: entry.max_abs_g,
        g_start: entry.g_start,
        g_end: entry.g_end,
    }
}

/// Validate, integrate and evaluate a scenario.
pub fn run(config: &ScenarioConfig, overrides: &Overrides) -> Result<RunOutput> {
    let mut config = config.clone();
    overrides.apply(&mut config);
    let prepared = prepare(&config)?;
    run_prepared(prepared)
}

pub fn run_prepared(prepared: Prepared) -> Result<RunOutput> {
    let cfg = &prepared.config;
    let dy = &prepared.dynamics;
    let traj = integrate(dy, &prepared.initial_state, &cfg.integrator)?;
    let mut warnings = prepared.warnings.clone();
    if traj.guard_tripped {
        warnings.push(format!("domain guard tripped at t = {}", traj.span()));
    }
    let av = &cfg.averaging;
    let period = match av.period {
        PeriodSetting::Auto => detect_period(&traj, av.period_eps, &dy.angular),
        PeriodSetting::None => None,
        PeriodSetting::Fixed(tau) if tau <= traj.span() => Some(tau),
        PeriodSetting::Fixed(tau) => {
            warnings.push(format!("period {tau} exceeds the integrated span {}", traj.span()));
            None
        }
    };
    if av.mode == Mode::Periodic && period.is_none() {
        warnings.push("no period available; reporting Cesàro averages".into());
    }
    let vr = crate::averaging::virial_report(dy, &prepared.virials, &traj, period, av.convergence_tol, &cfg.integrator)?;
    for e in &vr.entries {
        if e.cesaro.bound_warning {
            warnings.push(format!("virial `{}`: max|G| grows across the run; vanishing average unsupported", e.name));
        }
        if !e.consistent {
            warnings.push(format!(
                "virial `{}`: self-consistency residual {:e} exceeds 10 x {:e}",
                e.name, e.residual, e.tolerance
            ));
        }
    }
    let virials = vr
        .entries
        .iter()
        .map(|e| summarize(e, &dy.virial(&e.name).map(|v| v.description.clone()).unwrap_or_default(), av.mode))
        .collect();
    let report = RunReport {
        scenario: cfg.display_name(),
        model: prepared.descriptor.name.clone(),
        formalism: dy.formalism(),
        parameters: prepared
            .descriptor
            .parameters
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect(),
        state_names: dy.state_names.clone(),
        initial_state: prepared.initial_state.clone(),
        final_state: traj.states.last().cloned().unwrap_or_default(),
        t_end: traj.span(),
        guard_tripped: traj.guard_tripped,
        period: PeriodInfo {
            setting: av.period,
            value: period,
            detected: matches!(av.period, PeriodSetting::Auto) && period.is_some(),
        },
        virials,
        conserved: vr.drifts.clone(),
        integrator: IntegratorInfo {
            settings: cfg.integrator,
            stats: traj.stats,
            samples: traj.times.len(),
        },
        warnings,
    };
    Ok(RunOutput {
        prepared,
        trajectory: traj,
        virial_report: vr,
        report,
    })
}

// ---------------------------------------------------------------------------
// Serialization

/// Floats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON formatter writing every float with 17 significant digits.
struct SigFormatter<'a>(serde_json::ser::PrettyFormatter<'a>);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + std::io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl serde_json::ser::Formatter for SigFormatter<'_> {
    forward! {
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    }

    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(serde_json::ser::PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("serializing report: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

fn csv_row(out: &mut Vec<u8>, cells: impl IntoIterator<Item = f64>) {
    let row: Vec<String> = cells.into_iter().map(fmt_f64).collect();
    out.extend_from_slice(row.join(",").as_bytes());
    out.push(b'\n');
}

/// `t, state…, E, G_name, dGdt_name…` at every dense sample.
pub fn trajectory_csv(run: &RunOutput) -> Result<String> {
    let dy = &run.prepared.dynamics;
    let virials: Vec<&VirialFunction> = run.prepared.virials.iter().filter_map(|n| dy.virial(n)).collect();
    let mut header = vec!["t".to_string()];
    header.extend(dy.state_names.iter().cloned());
    header.push("E".into());
    for v in &virials {
        header.push(format!("G_{}", v.name));
        header.push(format!("dGdt_{}", v.name));
    }
    let mut out = Vec::new();
    out.extend_from_slice(header.join(",").as_bytes());
    out.push(b'\n');
    for (t, s) in run.trajectory.times.iter().zip(&run.trajectory.states) {
        let mut row = vec![*t];
        row.extend_from_slice(s);
        row.push(dy.energy(s)?);
        for v in &virials {
            row.push(dy.virial_value(v, s)?);
            row.push(dy.virial_integrand(v, s)?);
        }
        csv_row(&mut out, row);
    }
    String::from_utf8(out).map_err(|e| Error::Io(e.to_string()))
}

/// `T, avg_name…`: running Cesàro averages of every integrand.
pub fn convergence_csv(run: &RunOutput) -> Result<String> {
    let dy = &run.prepared.dynamics;
    let traj = &run.trajectory;
    let mut columns = Vec::new();
    let mut header = vec!["T".to_string()];
    for name in &run.prepared.virials {
        let v = dy.virial(name).ok_or_else(|| Error::Config(format!("unknown virial `{name}`")))?;
        let vals = traj.states.iter().map(|s| dy.virial_integrand(v, s)).collect::<Result<Vec<_>>>()?;
        columns.push(running_average(&traj.times, &vals));
        header.push(format!("avg_{name}"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(header.join(",").as_bytes());
    out.push(b'\n');
    for (k, t) in traj.times.iter().enumerate().skip(1) {
        csv_row(&mut out, std::iter::once(*t).chain(columns.iter().map(|c| c[k])));
    }
    String::from_utf8(out).map_err(|e| Error::Io(e.to_string()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Write the artifacts selected by `outputs.formats` into `dir`.
pub fn write_outputs(run: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let formats = &run.prepared.config.outputs.formats;
    if formats.iter().any(|f| f == "csv") {
        write_file(dir, "trajectory.csv", &trajectory_csv(run)?)?;
        write_file(dir, "convergence.csv", &convergence_csv(run)?)?;
    }
    if formats.iter().any(|f| f == "json") {
        write_file(dir, "report.json", &to_json_string(&run.report)?)?;
    }
    Ok(())
}

/// Exit code for an error: 1 validation, 2 numerical, 3 configuration or I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => 3,
        e if e.is_numerical() => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kepler() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{"model": {"name": "kepler_quasi"}, "integrator": {"t_max": 10.0, "dense_dt": 0.01}}"#,
        )
        .unwrap()
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        let s = to_json_string(&serde_json::json!({"a": 0.1, "b": [1, 2.5], "c": null})).unwrap();
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert!(s.contains("2.5000000000000000e0"));
    }

    #[test]
    fn period_setting_parse() {
        assert_eq!("auto".parse::<PeriodSetting>().unwrap(), PeriodSetting::Auto);
        assert_eq!("none".parse::<PeriodSetting>().unwrap(), PeriodSetting::None);
        assert_eq!("2.5".parse::<PeriodSetting>().unwrap(), PeriodSetting::Fixed(2.5));
        assert!("often".parse::<PeriodSetting>().is_err());
    }

    #[test]
    fn validation_errors() {
        let mut c = kepler();
        c.virial = Some(vec![VirialSpec::Named("nope".into())]);
        assert!(matches!(prepare(&c), Err(Error::Validation(_))));
        let mut c = kepler();
        c.initial_state = Some(InitialState::Flat(vec![1.0, 0.0]));
        assert!(matches!(prepare(&c), Err(Error::Validation(_))));
        let mut c = kepler();
        c.integrator.dense_dt = 1.0;
        assert_eq!(exit_code(&prepare(&c).unwrap_err()), 1);
        let mut c = kepler();
        c.formalism = Some(Formalism::AlgebroidH);
        assert_eq!(exit_code(&prepare(&c).unwrap_err()), 1);
        assert_eq!(exit_code(&ScenarioConfig::from_json("{").unwrap_err()), 3);
        assert_eq!(exit_code(&ScenarioConfig::from_json(r#"{"model": {"name": "x"}, "extra": 1}"#).unwrap_err()), 3);
        assert_eq!(exit_code(&Error::StepSizeUnderflow { t: 1.0 }), 2);
    }

    #[test]
    fn custom_section_virial() {
        let mut c = kepler();
        c.virial = Some(vec![
            VirialSpec::Named("dilation".into()),
            VirialSpec::Section {
                name: "shift".into(),
                section: vec![1.0, 0.0],
            },
        ]);
        let p = prepare(&c).unwrap();
        assert_eq!(p.virials, vec!["dilation".to_string(), "shift".to_string()]);
    }

    #[test]
    fn run_is_deterministic() {
        let a = run(&kepler(), &Overrides::default()).unwrap();
        let b = run(&kepler(), &Overrides::default()).unwrap();
        assert_eq!(to_json_string(&a.report).unwrap(), to_json_string(&b.report).unwrap());
        assert_eq!(trajectory_csv(&a).unwrap(), trajectory_csv(&b).unwrap());
        assert!(a.report.all_consistent(), "{:#?}", a.report.virials);
        assert!(a.report.period.value.is_some());
    }
}
