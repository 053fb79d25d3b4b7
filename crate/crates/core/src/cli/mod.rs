//! Command-line front end: point bounds, figure sweeps, analytic-versus-numeric
//! comparison, fidelity fringes and a packaged self-test.
//!
//! Exit codes: 0 ok, 1 self-test failure, 2 invalid input, 3 numeric failure,
//! 4 I/O failure.

mod selftest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analytic::{analytic_bounds, InputStateKind, SensitivityReport};
use crate::channel::{ChiralParams, ParamLabel};
use crate::error::{Error, Result};
use crate::estimation::{qfim_pipeline, DerivativeMethod, QfimResult};
use crate::experiments::{
    compare_analytic_numeric, format_sig, fringe_scan, fringe_shift_defect, preset, run_sweep,
    state_prefix, Axis, AxisParam, CompareReport, FringePoint, SweepMethod, SweepSpec,
    PRESET_NAMES,
};
use crate::fock::{COHERENT_CUTOFF_CAP, COHERENT_TAIL_BUDGET};

pub use selftest::{run_selftest, CheckOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Version of the JSON configuration and output format.
pub const CONFIG_SCHEMA: u32 = 1;

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain { .. }
        | Error::Config(_)
        | Error::UnknownLabel(_)
        | Error::Unsupported(_)
        | Error::Cutoff { .. }
        | Error::Truncation { .. }
        | Error::Json(_) => EXIT_INVALID,
        Error::Io(_) => EXIT_IO,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chiral-qfim",
    version,
    about = "Quantum Cramér-Rao bounds for chiral absorption and phase parameters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// QFIM, inverse, bounds, covariances and block structure at one point.
    Bounds(BoundsArgs),
    /// Run a parameter sweep and write a CSV.
    Sweep(SweepArgs),
    /// Compare numerical QFIM bounds with the closed forms over a grid.
    Compare(CompareArgs),
    /// Scan the fidelity with the input state against Δ.
    Fringe(FringeArgs),
    /// Run the packaged consistency checks.
    Selftest(SelftestArgs),
}

/// Input-state selection shared by subcommands.
#[derive(Debug, Default, Args)]
pub struct StateArgs {
    /// Input state: coherent, single-photon, noon or fock11.
    #[arg(long)]
    pub state: Option<String>,
    /// Mean photon number of a coherent input.
    #[arg(long)]
    pub n0: Option<f64>,
}

/// Channel parameters, in composite or native coordinates.
#[derive(Debug, Default, Args)]
pub struct PointArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub xd: Option<f64>,
    #[arg(long)]
    pub xs: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long = "alpha-plus")]
    pub alpha_plus: Option<f64>,
    #[arg(long = "alpha-minus")]
    pub alpha_minus: Option<f64>,
    #[arg(long = "phi-plus", allow_negative_numbers = true)]
    pub phi_plus: Option<f64>,
    #[arg(long = "phi-minus", allow_negative_numbers = true)]
    pub phi_minus: Option<f64>,
}

/// Numerical settings shared by subcommands.
#[derive(Debug, Default, Args)]
pub struct NumericArgs {
    /// JSON configuration file (`"schema": 1`); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Derivative method: analytic or central.
    #[arg(long)]
    pub derivative: Option<String>,
    /// Largest per-mode Fock cutoff for coherent inputs.
    #[arg(long = "cutoff-cap")]
    pub cutoff_cap: Option<usize>,
    /// Poisson tail probability allowed when truncating coherent inputs.
    #[arg(long = "tail-budget")]
    pub tail_budget: Option<f64>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub point: PointArgs,
    /// Parameters to estimate, comma separated (default depends on the state).
    #[arg(long, value_delimiter = ',')]
    pub params: Option<Vec<String>>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Built-in figure sweep.
    #[arg(long)]
    pub preset: Option<String>,
    /// Input states, comma separated; replaces the preset or config inputs.
    #[arg(long, value_delimiter = ',')]
    pub states: Option<Vec<String>>,
    /// Mean photon number for coherent entries of `--states`.
    #[arg(long)]
    pub n0: Option<f64>,
    /// Grid axis as `param:start:stop:points`; give once or twice.
    #[arg(long)]
    pub axis: Vec<String>,
    /// Methods, comma separated: qfim_numeric, qfim_analytic, intensity_exact, intensity_analytic, fidelity.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Quantities, comma separated: x_d, x_s, delta, sigma.
    #[arg(long, value_delimiter = ',')]
    pub quantities: Option<Vec<String>>,
    #[arg(long, allow_negative_numbers = true)]
    pub xd: Option<f64>,
    #[arg(long)]
    pub xs: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Output CSV path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Take the grid from a figure preset instead of the default 5x5 grid.
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct FringeArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub point: PointArgs,
    /// First Δ of the scan.
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    /// Last Δ of the scan.
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Also write the scan as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

/// Channel parameters as they may appear in a configuration file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointConfig {
    pub x_d: Option<f64>,
    pub x_s: Option<f64>,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha_plus: Option<f64>,
    pub alpha_minus: Option<f64>,
    pub phi_plus: Option<f64>,
    pub phi_minus: Option<f64>,
}

impl PointConfig {
    fn overlay(mut self, p: &PointArgs) -> Self {
        let pairs = [
            (&mut self.x_d, p.xd),
            (&mut self.x_s, p.xs),
            (&mut self.delta, p.delta),
            (&mut self.sigma, p.sigma),
            (&mut self.alpha_plus, p.alpha_plus),
            (&mut self.alpha_minus, p.alpha_minus),
            (&mut self.phi_plus, p.phi_plus),
            (&mut self.phi_minus, p.phi_minus),
        ];
        for (slot, flag) in pairs {
            if flag.is_some() {
                *slot = flag;
            }
        }
        self
    }

    /// Validates every given value and builds the channel parameters.
    pub fn resolve(&self) -> Result<ChiralParams> {
        let named = [
            ("x_d", self.x_d),
            ("x_s", self.x_s),
            ("delta", self.delta),
            ("sigma", self.sigma),
            ("alpha_plus", self.alpha_plus),
            ("alpha_minus", self.alpha_minus),
            ("phi_plus", self.phi_plus),
            ("phi_minus", self.phi_minus),
        ];
        for (name, v) in named {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::domain(name, v, "must be finite"));
                }
            }
        }
        let native_abs = self.alpha_plus.is_some() || self.alpha_minus.is_some();
        let composite_abs = self.x_d.is_some() || self.x_s.is_some();
        if native_abs && composite_abs {
            return Err(Error::Config(
                "give absorption as either x_d/x_s or alpha_plus/alpha_minus, not both".into(),
            ));
        }
        let native_phase = self.phi_plus.is_some() || self.phi_minus.is_some();
        if native_phase && (self.delta.is_some() || self.sigma.is_some()) {
            return Err(Error::Config(
                "give phases as either delta/sigma or phi_plus/phi_minus, not both".into(),
            ));
        }
        let (ap, am) = if native_abs {
            (
                self.alpha_plus.unwrap_or(0.0),
                self.alpha_minus.unwrap_or(0.0),
            )
        } else {
            let (xd, xs) = (self.x_d.unwrap_or(0.0), self.x_s.unwrap_or(0.0));
            for (name, a) in [("alpha_plus", xs + xd), ("alpha_minus", xs - xd)] {
                if !(0.0..1.0).contains(&a) {
                    return Err(Error::domain(
                        "x_d/x_s",
                        a,
                        format!("implies {name} = {a}, which must lie in [0, 1)"),
                    ));
                }
            }
            (xs + xd, xs - xd)
        };
        let (pp, pm) = if native_phase {
            (self.phi_plus.unwrap_or(0.0), self.phi_minus.unwrap_or(0.0))
        } else {
            let (d, s) = (self.delta.unwrap_or(0.0), self.sigma.unwrap_or(0.0));
            ((s + d) / 2.0, (s - d) / 2.0)
        };
        ChiralParams::new(ap, am, pp, pm)
    }
}

/// Fidelity-scan range in a configuration file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// JSON configuration file. Every field is optional except `schema`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    #[serde(default)]
    pub state: Option<String>,
    #[serde(default)]
    pub n0: Option<f64>,
    #[serde(default)]
    pub point: PointConfig,
    #[serde(default)]
    pub params: Option<Vec<ParamLabel>>,
    #[serde(default)]
    pub derivative: Option<DerivativeMethod>,
    #[serde(default)]
    pub cutoff_cap: Option<usize>,
    #[serde(default)]
    pub tail_budget: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub fringe: Option<FringeRange>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("configuration file: {e}")))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "configuration schema {} is not supported (expected {CONFIG_SCHEMA})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }
}

/// Numerical settings after merging file and flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub derivative: DerivativeMethod,
    pub cutoff_cap: usize,
    pub tail_budget: f64,
}

/// Prefixes an I/O error with the path it concerns.
fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Io(e) => Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )),
        other => other,
    }
}

fn load_config(numeric: &NumericArgs) -> Result<ConfigFile> {
    match &numeric.config {
        Some(path) => ConfigFile::load(path).map_err(|e| with_path(e, path)),
        None => Ok(ConfigFile {
            schema: CONFIG_SCHEMA,
            ..ConfigFile::default()
        }),
    }
}

fn settings(cfg: &ConfigFile, numeric: &NumericArgs) -> Result<Settings> {
    let derivative = match &numeric.derivative {
        Some(s) => s.parse()?,
        None => cfg.derivative.unwrap_or_default(),
    };
    let cutoff_cap = numeric
        .cutoff_cap
        .or(cfg.cutoff_cap)
        .unwrap_or(COHERENT_CUTOFF_CAP);
    if cutoff_cap == 0 || cutoff_cap > 60 {
        return Err(Error::domain(
            "cutoff_cap",
            cutoff_cap as f64,
            "must lie in [1, 60]",
        ));
    }
    let tail_budget = numeric
        .tail_budget
        .or(cfg.tail_budget)
        .unwrap_or(COHERENT_TAIL_BUDGET);
    if !(tail_budget > 0.0 && tail_budget < 1.0) {
        return Err(Error::domain(
            "tail_budget",
            tail_budget,
            "must lie in (0, 1)",
        ));
    }
    Ok(Settings {
        derivative,
        cutoff_cap,
        tail_budget,
    })
}

/// Resolves a state name, with `n0` applying to coherent inputs only.
pub fn resolve_state(name: &str, n0: Option<f64>) -> Result<InputStateKind> {
    let kind: InputStateKind = name.parse()?;
    match (kind, n0) {
        (InputStateKind::Coherent { .. }, Some(n0)) => InputStateKind::coherent(n0),
        (InputStateKind::Coherent { .. }, None) => Ok(kind),
        (_, Some(_)) => Err(Error::Config(format!(
            "--n0 applies to coherent input only, not {name}"
        ))),
        (_, None) => Ok(kind),
    }
}

fn state_from(cfg: &ConfigFile, args: &StateArgs) -> Result<InputStateKind> {
    let name = args
        .state
        .as_deref()
        .or(cfg.state.as_deref())
        .ok_or_else(|| Error::Config("an input state is required (--state)".into()))?;
    resolve_state(name, args.n0.or(cfg.n0))
}

fn parse_labels(items: &[String]) -> Result<Vec<ParamLabel>> {
    let mut out: Vec<ParamLabel> = Vec::new();
    for s in items {
        let l: ParamLabel = s.parse()?;
        if out.contains(&l) {
            return Err(Error::Config(format!("parameter {l} listed twice")));
        }
        out.push(l);
    }
    Ok(out)
}

fn symbol(label: ParamLabel) -> &'static str {
    match label {
        ParamLabel::AlphaPlus => "δα₊",
        ParamLabel::AlphaMinus => "δα₋",
        ParamLabel::PhiPlus => "δφ₊",
        ParamLabel::PhiMinus => "δφ₋",
        ParamLabel::Xd => "δX_d",
        ParamLabel::Xs => "δX_s",
        ParamLabel::Delta => "δΔ",
        ParamLabel::Sigma => "δΣ",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig).unwrap_or_else(|| "-".into())
}

fn matrix_table(out: &mut String, labels: &[ParamLabel], m: &[Vec<f64>]) {
    let _ = write!(out, "{:>12}", "");
    for l in labels {
        let _ = write!(out, " {:>20}", l.as_str());
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(m) {
        let _ = write!(out, "{:>12}", l.as_str());
        for v in row {
            let _ = write!(out, " {:>20}", format_sig(*v));
        }
        out.push('\n');
    }
}

#[derive(Serialize)]
struct PointJson {
    native: ChiralParams,
    x_d: f64,
    x_s: f64,
    delta: f64,
    sigma: f64,
}

impl PointJson {
    fn new(p: &ChiralParams) -> Self {
        PointJson {
            native: *p,
            x_d: p.x_d(),
            x_s: p.x_s(),
            delta: p.delta(),
            sigma: p.sigma(),
        }
    }
}

#[derive(Serialize)]
struct BoundsJson<'a> {
    schema: u32,
    command: &'static str,
    state: String,
    point: PointJson,
    settings: Settings,
    qfim: &'a QfimResult,
    closed_form: Option<&'a SensitivityReport>,
    notes: Vec<String>,
}

/// Output of the `bounds` subcommand.
pub fn cmd_bounds(args: &BoundsArgs) -> Result<String> {
    let cfg = load_config(&args.numeric)?;
    let kind = state_from(&cfg, &args.state)?;
    let p = cfg.point.overlay(&args.point).resolve()?;
    let s = settings(&cfg, &args.numeric)?;
    let labels = match (&args.params, &cfg.params) {
        (Some(v), _) => parse_labels(v)?,
        (None, Some(v)) => v.clone(),
        (None, None) => kind.default_params(),
    };
    if labels.is_empty() {
        return Err(Error::Config("no parameters to estimate".into()));
    }
    let input = kind.prepare(s.tail_budget, s.cutoff_cap)?;
    let run = qfim_pipeline(&input, &p, &labels, s.derivative)?;
    let closed = analytic_bounds(&kind, &p).ok();
    let mut notes = run.notes();
    if let Some(c) = &closed {
        notes.extend(c.notes.iter().cloned());
        if c.limit_evaluated {
            notes.push("closed-form bounds evaluated as a boundary limit".into());
        }
    }

    if args.numeric.json {
        let j = BoundsJson {
            schema: CONFIG_SCHEMA,
            command: "bounds",
            state: state_prefix(&kind),
            point: PointJson::new(&p),
            settings: s,
            qfim: &run.qfim,
            closed_form: closed.as_ref(),
            notes,
        };
        return Ok(serde_json::to_string_pretty(&j)? + "\n");
    }

    let q = &run.qfim;
    let mut out = String::new();
    let _ = writeln!(out, "state: {kind}");
    let _ = writeln!(
        out,
        "point: x_d = {}, x_s = {}, delta = {}, sigma = {} (alpha_plus = {}, alpha_minus = {}, phi_plus = {}, phi_minus = {})",
        format_sig(p.x_d()),
        format_sig(p.x_s()),
        format_sig(p.delta()),
        format_sig(p.sigma()),
        format_sig(p.alpha_plus),
        format_sig(p.alpha_minus),
        format_sig(p.phi_plus),
        format_sig(p.phi_minus)
    );
    let _ = writeln!(
        out,
        "Fock space: {}x{} levels\n",
        input.space().cutoff_plus + 1,
        input.space().cutoff_minus + 1
    );
    out.push_str("QFIM\n");
    matrix_table(&mut out, &q.params, &q.f);
    match &q.f_inverse {
        Some(inv) => {
            out.push_str("\ninverse (pseudo-inverse on the identifiable subspace)\n");
            matrix_table(&mut out, &q.params, inv);
        }
        None => out.push_str("\ninverse: not available\n"),
    }
    out.push_str("\nbounds (numeric, closed form)\n");
    for (i, &l) in q.params.iter().enumerate() {
        let cf = closed.as_ref().and_then(|c| c.get(l));
        let _ = writeln!(
            out,
            "  {} = {}    (closed form {})",
            symbol(l),
            opt(q.bounds[i]),
            opt(cf)
        );
    }
    out.push_str("\ncovariances\n");
    for i in 0..q.params.len() {
        for j in i + 1..q.params.len() {
            if let Some(c) = q.covariances[i][j] {
                let _ = writeln!(
                    out,
                    "  Cov({}, {}) = {}",
                    q.params[i],
                    q.params[j],
                    format_sig(c)
                );
            }
        }
    }
    let blocks: Vec<String> = q
        .blocks
        .iter()
        .map(|b| {
            format!(
                "{{{}}}",
                b.iter()
                    .map(|&i| q.params[i].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })
        .collect();
    let _ = writeln!(out, "\nblocks: {}", blocks.join(" "));
    let unident: Vec<&str> = q
        .params
        .iter()
        .zip(&q.identifiable)
        .filter(|(_, ok)| !**ok)
        .map(|(l, _)| l.as_str())
        .collect();
    if unident.is_empty() {
        out.push_str("identifiable: all\n");
    } else {
        let _ = writeln!(out, "unidentifiable: {}", unident.join(", "));
    }
    for n in notes {
        let _ = writeln!(out, "note: {n}");
    }
    Ok(out)
}

/// Parses `param:start:stop:points`.
pub fn parse_axis(s: &str) -> Result<Axis> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "axis '{s}' must look like param:start:stop:points"
        )));
    }
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse()
            .map_err(|_| Error::Config(format!("axis '{s}': '{t}' is not a number")))
    };
    let points = parts[3]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("axis '{s}': '{}' is not a point count", parts[3])))?;
    Ok(Axis::new(
        parts[0].parse::<AxisParam>()?,
        num(parts[1])?,
        num(parts[2])?,
        points,
    ))
}

/// Builds the sweep described by a configuration file and flags.
pub fn sweep_spec(args: &SweepArgs, cfg: &ConfigFile) -> Result<SweepSpec> {
    let s = settings(cfg, &args.numeric)?;
    let preset_name = args.preset.as_deref().or(cfg.preset.as_deref());
    let mut spec = match (preset_name, &cfg.sweep) {
        (Some(name), _) => preset(name)?,
        (None, Some(spec)) => spec.clone(),
        (None, None) => {
            if args.axis.is_empty() {
                return Err(Error::Config(format!(
                    "give --preset ({}), a config with a sweep, or --axis",
                    PRESET_NAMES.join(", ")
                )));
            }
            let mut spec = SweepSpec::new(
                "custom",
                Vec::new(),
                Vec::new(),
                vec![SweepMethod::QfimNumeric, SweepMethod::QfimAnalytic],
                vec![
                    ParamLabel::Xd,
                    ParamLabel::Xs,
                    ParamLabel::Delta,
                    ParamLabel::Sigma,
                ],
            );
            if let Some(state) = &cfg.state {
                spec.inputs.push(resolve_state(state, cfg.n0)?);
            }
            spec
        }
    };
    if !args.axis.is_empty() {
        spec.axes = args
            .axis
            .iter()
            .map(|a| parse_axis(a))
            .collect::<Result<_>>()?;
    }
    if let Some(states) = &args.states {
        spec.inputs = states
            .iter()
            .map(|name| {
                let n0 = if name.trim() == "coherent" {
                    args.n0
                } else {
                    None
                };
                resolve_state(name, n0)
            })
            .collect::<Result<_>>()?;
    }
    if let Some(m) = &args.methods {
        spec.methods = m.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(q) = &args.quantities {
        spec.quantities = parse_labels(q)?;
    }
    for (slot, v) in [
        (&mut spec.fixed.x_d, args.xd),
        (&mut spec.fixed.x_s, args.xs),
        (&mut spec.fixed.delta, args.delta),
        (&mut spec.fixed.sigma, args.sigma),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if args.numeric.derivative.is_some() || cfg.derivative.is_some() {
        spec.derivative = s.derivative;
    }
    if args.numeric.cutoff_cap.is_some() || cfg.cutoff_cap.is_some() {
        spec.cutoff_cap = s.cutoff_cap;
    }
    if args.numeric.tail_budget.is_some() || cfg.tail_budget.is_some() {
        spec.tail_budget = s.tail_budget;
    }
    if let Some(o) = args.output.as_ref().or(cfg.output.as_ref()) {
        spec.output = Some(o.clone());
    }
    if spec.output.is_none() {
        spec.output = Some(PathBuf::from(format!(
            "{}.csv",
            if spec.name.is_empty() {
                "sweep"
            } else {
                &spec.name
            }
        )));
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct SweepSummaryJson<'a> {
    schema: u32,
    command: &'static str,
    output: &'a Path,
    rows: usize,
    flagged: usize,
    columns: &'a [String],
}

/// Runs a sweep and writes its CSV; returns the summary line.
pub fn cmd_sweep(args: &SweepArgs) -> Result<String> {
    let cfg = load_config(&args.numeric)?;
    let spec = sweep_spec(args, &cfg)?;
    let path = spec.output.clone().expect("output path set");
    let table = run_sweep(&spec)?;
    table
        .write_csv_file(&path)
        .map_err(|e| with_path(e, &path))?;
    let flagged = table.flagged_rows();
    if args.numeric.json {
        let j = SweepSummaryJson {
            schema: CONFIG_SCHEMA,
            command: "sweep",
            output: &path,
            rows: table.rows.len(),
            flagged,
            columns: &table.columns,
        };
        return Ok(serde_json::to_string_pretty(&j)? + "\n");
    }
    let mut out = format!(
        "wrote {} rows to {} ({flagged} flagged)\n",
        table.rows.len(),
        path.display()
    );
    let mut counts = std::collections::BTreeMap::new();
    for r in table.rows.iter().filter(|r| r.is_flagged()) {
        *counts.entry(r.status()).or_insert(0usize) += 1;
    }
    for (status, n) in counts {
        let _ = writeln!(out, "  {status}: {n}");
    }
    Ok(out)
}

/// Default comparison grid: 5x5 in `(X_s, X_d)` away from the rank boundaries.
pub fn default_compare_grid() -> SweepSpec {
    let mut g = SweepSpec::new(
        "compare",
        Vec::new(),
        vec![
            Axis::new(AxisParam::Label(ParamLabel::Xs), 0.1, 0.8, 5),
            Axis::new(AxisParam::Label(ParamLabel::Xd), 0.0, 0.08, 5),
        ],
        vec![SweepMethod::QfimNumeric, SweepMethod::QfimAnalytic],
        vec![
            ParamLabel::Xd,
            ParamLabel::Xs,
            ParamLabel::Delta,
            ParamLabel::Sigma,
        ],
    );
    g.fixed.delta = 0.3;
    g
}

pub fn cmd_compare(args: &CompareArgs) -> Result<String> {
    let cfg = load_config(&args.numeric)?;
    let kind = state_from(&cfg, &args.state)?;
    let s = settings(&cfg, &args.numeric)?;
    let mut grid = match (args.preset.as_deref().or(cfg.preset.as_deref()), &cfg.sweep) {
        (Some(name), _) => {
            let mut g = preset(name)?;
            g.methods = vec![SweepMethod::QfimNumeric, SweepMethod::QfimAnalytic];
            g.quantities = vec![
                ParamLabel::Xd,
                ParamLabel::Xs,
                ParamLabel::Delta,
                ParamLabel::Sigma,
            ];
            g
        }
        (None, Some(spec)) => spec.clone(),
        (None, None) => default_compare_grid(),
    };
    grid.derivative = s.derivative;
    grid.cutoff_cap = s.cutoff_cap;
    grid.tail_budget = s.tail_budget;
    let report = compare_analytic_numeric(&kind, &grid)?;
    if args.numeric.json {
        #[derive(Serialize)]
        struct J<'a> {
            schema: u32,
            command: &'static str,
            report: &'a CompareReport,
        }
        let j = J {
            schema: CONFIG_SCHEMA,
            command: "compare",
            report: &report,
        };
        return Ok(serde_json::to_string_pretty(&j)? + "\n");
    }
    let mut out = String::new();
    let _ = writeln!(out, "input: {}", report.input);
    let _ = writeln!(
        out,
        "points: {} compared, {} skipped",
        report.points, report.skipped
    );
    out.push_str("quantity        max |dev|           mean |dev|\n");
    for d in &report.deviations {
        let _ = writeln!(
            out,
            "{:<12} {:>14} {:>20}",
            symbol(d.quantity),
            format!("{:.3e}", d.max_abs),
            format!("{:.3e}", d.mean_abs)
        );
    }
    let _ = writeln!(out, "outliers above 1e-6: {}", report.outliers.len());
    for o in report.outliers.iter().take(20) {
        let _ = writeln!(
            out,
            "  #{} at {:?}: {} numeric {} closed form {}",
            o.index,
            o.coords,
            o.quantity,
            format_sig(o.numeric),
            format_sig(o.analytic)
        );
    }
    if let Some(g) = &report.fock_gap {
        let _ = writeln!(
            out,
            "NOON vs |1+,1-> relative gap in δX_d: min {:.4}, mean {:.4}, max {:.4} over {} points",
            g.min_relative, g.mean_relative, g.max_relative, g.points
        );
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    Ok(out)
}

pub fn cmd_fringe(args: &FringeArgs) -> Result<String> {
    let cfg = load_config(&args.numeric)?;
    let kind = state_from(&cfg, &args.state)?;
    let p = cfg.point.overlay(&args.point).resolve()?;
    let range = cfg.fringe.unwrap_or(FringeRange {
        start: 0.0,
        stop: 2.0 * std::f64::consts::PI,
        points: 73,
    });
    let (start, stop, points) = (
        args.from.unwrap_or(range.start),
        args.to.unwrap_or(range.stop),
        args.points.unwrap_or(range.points),
    );
    let scan = fringe_scan(&kind, &p, start, stop, points)?;
    let deltas: Vec<f64> = scan.iter().map(|f| f.delta).collect();
    let shift = fringe_shift_defect(&kind, &p, &deltas)?;
    let agreement = scan
        .iter()
        .map(|f| (f.formula - f.channel).abs())
        .fold(0.0, f64::max);

    if let Some(path) = args.output.as_ref().or(cfg.output.as_ref()) {
        write_fringe_csv(path, &kind, &p, &scan).map_err(|e| with_path(e, path))?;
    }
    if args.numeric.json {
        #[derive(Serialize)]
        struct J<'a> {
            schema: u32,
            command: &'static str,
            state: String,
            point: PointJson,
            points: &'a [FringePoint],
            max_shift_by_pi: f64,
            max_formula_channel_gap: f64,
        }
        let j = J {
            schema: CONFIG_SCHEMA,
            command: "fringe",
            state: state_prefix(&kind),
            point: PointJson::new(&p),
            points: &scan,
            max_shift_by_pi: shift,
            max_formula_channel_gap: agreement,
        };
        return Ok(serde_json::to_string_pretty(&j)? + "\n");
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "state: {kind}, x_d = {}, x_s = {}",
        format_sig(p.x_d()),
        format_sig(p.x_s())
    );
    let _ = writeln!(
        out,
        "{:>16} {:>20} {:>20}",
        "delta", "F (formula)", "F (channel)"
    );
    for f in &scan {
        let _ = writeln!(
            out,
            "{:>16} {:>20} {:>20}",
            format_sig(f.delta),
            format_sig(f.formula),
            format_sig(f.channel)
        );
    }
    let _ = writeln!(out, "max |F(Δ) - F(Δ+π)| = {shift:.3e}");
    let _ = writeln!(out, "max |formula - channel| = {agreement:.3e}");
    Ok(out)
}

fn write_fringe_csv(
    path: &Path,
    kind: &InputStateKind,
    p: &ChiralParams,
    scan: &[FringePoint],
) -> Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let spec = serde_json::json!({ "fringe": state_prefix(kind), "point": PointJson::new(p) });
    writeln!(file, "# spec: {spec}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["delta", "f", "f_channel", "status"])?;
    for f in scan {
        w.write_record([
            format_sig(f.delta),
            format_sig(f.formula),
            format_sig(f.channel),
            "ok".to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the self-test; the error names the first failing check.
pub fn cmd_selftest(args: &SelftestArgs) -> (i32, String) {
    let checks = run_selftest();
    let first_fail = checks.iter().find(|c| !c.passed).map(|c| c.name.clone());
    let mut out = String::new();
    if args.json {
        #[derive(Serialize)]
        struct J<'a> {
            schema: u32,
            command: &'static str,
            passed: bool,
            checks: &'a [CheckOutcome],
        }
        let j = J {
            schema: CONFIG_SCHEMA,
            command: "selftest",
            passed: first_fail.is_none(),
            checks: &checks,
        };
        out = serde_json::to_string_pretty(&j).unwrap_or_default() + "\n";
    } else {
        for c in &checks {
            let _ = writeln!(
                out,
                "{} {:<36} residual {:>10}  tolerance {:>8}{}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                format!("{:.2e}", c.residual),
                format!("{:.0e}", c.tolerance),
                c.detail
                    .as_deref()
                    .map(|d| format!("  ({d})"))
                    .unwrap_or_default()
            );
        }
    }
    match first_fail {
        None => (EXIT_OK, out),
        Some(name) => {
            if !args.json {
                let _ = writeln!(out, "selftest failed: {name}");
            }
            (EXIT_SELFTEST, out)
        }
    }
}

/// Parses `args` and runs the chosen subcommand, printing to stdout/stderr.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Fringe(a) => cmd_fringe(a),
        Command::Selftest(a) => {
            let (code, out) = cmd_selftest(a);
            print!("{out}");
            return code;
        }
    };
    match result {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_resolution() {
        let p = PointConfig {
            x_d: Some(0.1),
            x_s: Some(0.5),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert!((p.alpha_plus - 0.6).abs() < 1e-15);
        let err = PointConfig {
            alpha_plus: Some(1.2),
            ..Default::default()
        }
        .resolve()
        .unwrap_err();
        assert_eq!(exit_code(&err), EXIT_INVALID);
        assert!(err.to_string().contains("alpha_plus"));
        let err = PointConfig {
            x_d: Some(0.1),
            alpha_minus: Some(0.2),
            ..Default::default()
        }
        .resolve()
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = PointConfig {
            x_s: Some(f64::NAN),
            ..Default::default()
        }
        .resolve()
        .unwrap_err();
        assert!(err.to_string().contains("x_s"));
    }

    #[test]
    fn config_schema_is_checked() {
        assert!(ConfigFile::parse(r#"{"schema": 1, "state": "noon"}"#).is_ok());
        assert!(matches!(
            ConfigFile::parse(r#"{"schema": 2}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ConfigFile::parse(r#"{"schema": 1, "bogus": 0}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn axis_parsing() {
        let a = parse_axis("x_s:0.1:0.5:2").unwrap();
        assert_eq!(a, Axis::new(AxisParam::Label(ParamLabel::Xs), 0.1, 0.5, 2));
        assert_eq!(
            parse_axis("alpha:0:0.9:91").unwrap().param,
            AxisParam::AlphaDiagonal
        );
        assert!(parse_axis("x_s:0.1:0.5").is_err());
        assert!(parse_axis("x_q:0.1:0.5:3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numeric("x".into())), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::UnknownLabel("x".into())), EXIT_INVALID);
    }

    #[test]
    fn coordinates_of_native_flags() {
        let p = PointConfig {
            alpha_plus: Some(0.3),
            phi_plus: Some(0.2),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(p.native_vector(), [0.3, 0.0, 0.2, 0.0]);
    }
}
