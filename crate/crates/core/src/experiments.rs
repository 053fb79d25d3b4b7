//! Parameter-grid sweeps, exact intensity statistics with error propagation,
//! analytic-versus-numeric comparison and fidelity fringe scans.
//!
//! Grid points are independent and evaluated on a rayon pool whose size can
//! be capped with `CHIRAL_QFIM_THREADS`; results are always ordered by grid
//! index.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    analytic_bounds, analytic_intensity, analytic_qfim, fidelity_fringe, fock_benchmark_bound,
    InputStateKind,
};
use crate::channel::{apply_channel_kraus, ChiralParams, Coordinates, ParamLabel, SWEEP_ALPHA_MAX};
use crate::error::{Error, Result};
use crate::estimation::{chain_rule_stencil, qfim_pipeline, DerivativeMethod};
use crate::fock::{
    hv_input_vector, FockSpace, HvInput, TwoModeState, COHERENT_CUTOFF_CAP, COHERENT_TAIL_BUDGET,
    FOCK_CUTOFF,
};
use crate::linalg::{re, Complex};

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "CHIRAL_QFIM_THREADS";

/// Largest number of grid points a single sweep may request.
pub const MAX_SWEEP_POINTS: usize = 1_000_000;

/// Deviations above this are listed individually in a comparison report.
pub const OUTLIER_THRESHOLD: f64 = 1e-6;

/// Mean-intensity slopes at or below this are treated as vanishing.
pub const ZERO_DERIVATIVE_TOL: f64 = 1e-9;

/// Significant digits in CSV output.
pub const CSV_SIGNIFICANT_DIGITS: usize = 12;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 13] = [
    "fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig2f", "fig3a", "fig3b", "fig3c", "fig3d",
    "fig3e", "fig3f", "fig4",
];

/// Exact first and second moments of the photon numbers `n₊`, `n₋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityMoments {
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub var_plus: f64,
    pub var_minus: f64,
    pub covariance: f64,
}

impl IntensityMoments {
    pub fn of_state(state: &TwoModeState) -> Self {
        let (mut m1p, mut m1m, mut m2p, mut m2m, mut mpm) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((np, nm), p) in state.occupation_probabilities() {
            let (np, nm) = (np as f64, nm as f64);
            m1p += p * np;
            m1m += p * nm;
            m2p += p * np * np;
            m2m += p * nm * nm;
            mpm += p * np * nm;
        }
        IntensityMoments {
            mean_plus: m1p,
            mean_minus: m1m,
            var_plus: m2p - m1p * m1p,
            var_minus: m2m - m1m * m1m,
            covariance: mpm - m1p * m1m,
        }
    }

    /// Mean and variance of `w₊ n₊ + w₋ n₋`.
    pub fn combination(&self, w_plus: f64, w_minus: f64) -> (f64, f64) {
        let mean = w_plus * self.mean_plus + w_minus * self.mean_minus;
        let var = w_plus * w_plus * self.var_plus
            + w_minus * w_minus * self.var_minus
            + 2.0 * w_plus * w_minus * self.covariance;
        (mean, var)
    }
}

/// Photon-number moments of the channel output for a reference input.
pub fn intensity_statistics(
    kind: &InputStateKind,
    params: &ChiralParams,
) -> Result<IntensityMoments> {
    intensity_statistics_with(&kind.prepare_default()?, params)
}

/// Photon-number moments of `Λ_params(input)`.
pub fn intensity_statistics_with(
    input: &TwoModeState,
    params: &ChiralParams,
) -> Result<IntensityMoments> {
    Ok(IntensityMoments::of_state(&apply_channel_kraus(
        input, params,
    )?))
}

/// Weights of the intensity combination read out for `target`: the difference
/// `n₊ - n₋` for `X_d` and `Δ`, the sum for `X_s` and `Σ`, a single mode otherwise.
fn intensity_weights(target: ParamLabel) -> (f64, f64) {
    match target {
        ParamLabel::Xd | ParamLabel::Delta => (1.0, -1.0),
        ParamLabel::Xs | ParamLabel::Sigma => (1.0, 1.0),
        ParamLabel::AlphaPlus | ParamLabel::PhiPlus => (1.0, 0.0),
        ParamLabel::AlphaMinus | ParamLabel::PhiMinus => (0.0, 1.0),
    }
}

/// Error-propagation sensitivity `δX = δS / |∂<S>/∂X|` of an intensity
/// measurement for a reference input. `None` when the slope vanishes.
pub fn error_propagation_sensitivity(
    kind: &InputStateKind,
    params: &ChiralParams,
    target: ParamLabel,
) -> Result<Option<f64>> {
    error_propagation_sensitivity_with(&kind.prepare_default()?, params, target)
}

/// As [`error_propagation_sensitivity`] for an already prepared input state.
pub fn error_propagation_sensitivity_with(
    input: &TwoModeState,
    params: &ChiralParams,
    target: ParamLabel,
) -> Result<Option<f64>> {
    let (wp, wm) = intensity_weights(target);
    let (_, var) = intensity_statistics_with(input, params)?.combination(wp, wm);
    let mean_at = |p: &ChiralParams| -> Result<Vec<Complex>> {
        let (mean, _) = intensity_statistics_with(input, p)?.combination(wp, wm);
        Ok(vec![re(mean)])
    };
    let (slope, _) = chain_rule_stencil(params, target, &mean_at)?;
    let slope = slope.first().map(|z| z.re).unwrap_or(0.0);
    if slope.abs() <= ZERO_DERIVATIVE_TOL {
        return Ok(None);
    }
    Ok(Some(var.max(0.0).sqrt() / slope.abs()))
}

/// Evaluation methods available in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    QfimNumeric,
    QfimAnalytic,
    IntensityExact,
    IntensityAnalytic,
    #[serde(rename = "fidelity", alias = "fidelity_fringe")]
    FidelityFringe,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 5] = [
        SweepMethod::QfimNumeric,
        SweepMethod::QfimAnalytic,
        SweepMethod::IntensityExact,
        SweepMethod::IntensityAnalytic,
        SweepMethod::FidelityFringe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepMethod::QfimNumeric => "qfim_numeric",
            SweepMethod::QfimAnalytic => "qfim_analytic",
            SweepMethod::IntensityExact => "intensity_exact",
            SweepMethod::IntensityAnalytic => "intensity_analytic",
            SweepMethod::FidelityFringe => "fidelity",
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        SweepMethod::ALL
            .into_iter()
            .find(|m| {
                m.as_str() == norm
                    || (norm == "fidelity_fringe" && *m == SweepMethod::FidelityFringe)
            })
            .ok_or_else(|| Error::Config(format!("unknown sweep method '{s}'")))
    }
}

/// What a sweep axis varies: one parameter, or `α₊ = α₋` together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AxisParam {
    Label(ParamLabel),
    AlphaDiagonal,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::Label(l) => l.as_str(),
            AxisParam::AlphaDiagonal => "alpha",
        }
    }

    fn coordinates(self) -> Coordinates {
        match self {
            AxisParam::Label(l) => l.coordinates(),
            AxisParam::AlphaDiagonal => Coordinates::Native,
        }
    }

    fn is_absorption(self) -> bool {
        match self {
            AxisParam::Label(l) => l.is_absorption(),
            AxisParam::AlphaDiagonal => true,
        }
    }

    fn apply(self, params: &ChiralParams, value: f64) -> Result<ChiralParams> {
        match self {
            AxisParam::Label(l) => params.with_value(l, value),
            AxisParam::AlphaDiagonal => params
                .with_value(ParamLabel::AlphaPlus, value)?
                .with_value(ParamLabel::AlphaMinus, value),
        }
    }

    /// Allowed range of axis values.
    fn bounds(self) -> (f64, f64) {
        match self {
            AxisParam::AlphaDiagonal
            | AxisParam::Label(ParamLabel::AlphaPlus | ParamLabel::AlphaMinus | ParamLabel::Xs) => {
                (0.0, SWEEP_ALPHA_MAX)
            }
            AxisParam::Label(ParamLabel::Xd) => (-SWEEP_ALPHA_MAX, SWEEP_ALPHA_MAX),
            AxisParam::Label(_) => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

impl TryFrom<String> for AxisParam {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AxisParam> for String {
    fn from(a: AxisParam) -> String {
        a.name().to_string()
    }
}

impl FromStr for AxisParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("alpha") {
            Ok(AxisParam::AlphaDiagonal)
        } else {
            Ok(AxisParam::Label(s.parse()?))
        }
    }
}

/// One grid axis: `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: AxisParam,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(param: AxisParam, start: f64, stop: f64, points: usize) -> Self {
        Axis {
            param,
            start,
            stop,
            points,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.stop
        } else {
            self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64
        }
    }

    fn validate(&self) -> Result<()> {
        let name = self.param.name();
        if self.points < 2 {
            return Err(Error::Config(format!(
                "axis {name} needs at least 2 points, got {}",
                self.points
            )));
        }
        let (lo, hi) = self.param.bounds();
        for v in [self.start, self.stop] {
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::domain(
                    name,
                    v,
                    format!("axis values must lie in [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }
}

/// Values of the composite parameters not varied by an axis.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedParams {
    pub x_d: f64,
    pub x_s: f64,
    pub delta: f64,
    pub sigma: f64,
}

fn default_tail_budget() -> f64 {
    COHERENT_TAIL_BUDGET
}

fn default_cutoff_cap() -> usize {
    COHERENT_CUTOFF_CAP
}

/// A sweep: inputs, one or two axes, methods and the quantities to tabulate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: String,
    pub inputs: Vec<InputStateKind>,
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub fixed: FixedParams,
    pub methods: Vec<SweepMethod>,
    pub quantities: Vec<ParamLabel>,
    #[serde(default)]
    pub derivative: DerivativeMethod,
    #[serde(default = "default_tail_budget")]
    pub tail_budget: f64,
    #[serde(default = "default_cutoff_cap")]
    pub cutoff_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SweepSpec {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<InputStateKind>,
        axes: Vec<Axis>,
        methods: Vec<SweepMethod>,
        quantities: Vec<ParamLabel>,
    ) -> Self {
        SweepSpec {
            name: name.into(),
            inputs,
            axes,
            fixed: FixedParams::default(),
            methods,
            quantities,
            derivative: DerivativeMethod::default(),
            tail_budget: COHERENT_TAIL_BUDGET,
            cutoff_cap: COHERENT_CUTOFF_CAP,
            output: None,
            notes: Vec::new(),
        }
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Config("sweep needs at least one input state".into()));
        }
        let prefixes: BTreeSet<String> = self.inputs.iter().map(state_prefix).collect();
        if prefixes.len() != self.inputs.len() {
            return Err(Error::Config("sweep inputs must be distinct".into()));
        }
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Config(format!(
                "sweep needs one or two axes, got {}",
                self.axes.len()
            )));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.axes.len() == 2 {
            let (a, b) = (self.axes[0].param, self.axes[1].param);
            if a == b {
                return Err(Error::Config(format!("axis {} appears twice", a.name())));
            }
            if a.is_absorption() == b.is_absorption() && a.coordinates() != b.coordinates() {
                return Err(Error::Config(format!(
                    "axes {} and {} mix native and composite coordinates of the same kind",
                    a.name(),
                    b.name()
                )));
            }
        }
        let total = self
            .axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.points))
            .filter(|&n| n <= MAX_SWEEP_POINTS);
        if total.is_none() {
            return Err(Error::Config(format!(
                "sweep exceeds {MAX_SWEEP_POINTS} grid points"
            )));
        }
        for (name, v) in [
            ("x_d", self.fixed.x_d),
            ("x_s", self.fixed.x_s),
            ("delta", self.fixed.delta),
            ("sigma", self.fixed.sigma),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(name, v, "fixed value must be finite"));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("sweep needs at least one method".into()));
        }
        for q in &self.quantities {
            if q.coordinates() != Coordinates::Composite {
                return Err(Error::Config(format!(
                    "quantity {q} must be one of x_d, x_s, delta, sigma"
                )));
            }
        }
        if !(self.tail_budget > 0.0 && self.tail_budget < 1.0) {
            return Err(Error::domain(
                "tail_budget",
                self.tail_budget,
                "must lie in (0, 1)",
            ));
        }
        if self.cutoff_cap == 0 || self.cutoff_cap > 60 {
            return Err(Error::domain(
                "cutoff_cap",
                self.cutoff_cap as f64,
                "must lie in [1, 60]",
            ));
        }
        if self.columns().is_empty() {
            return Err(Error::Config(
                "no method produces any of the requested quantities for these inputs".into(),
            ));
        }
        Ok(())
    }

    /// Axis values of grid point `index`, first axis outermost.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = a.value(rest % a.points);
            rest /= a.points;
        }
        out
    }

    /// Channel parameters at grid point `index`.
    pub fn params_at(&self, index: usize) -> Result<ChiralParams> {
        let coords = self.coords(index);
        let f = self.fixed;
        let mut composite = [f.x_d, f.x_s, f.delta, f.sigma];
        for (a, &v) in self.axes.iter().zip(&coords) {
            if let AxisParam::Label(l) = a.param {
                if l.coordinates() == Coordinates::Composite {
                    composite[l.position()] = v;
                }
            }
        }
        let mut p =
            ChiralParams::from_composite(composite[0], composite[1], composite[2], composite[3])?;
        for (a, &v) in self.axes.iter().zip(&coords) {
            if a.param.coordinates() == Coordinates::Native {
                p = a.param.apply(&p, v)?;
            }
        }
        for (label, a) in [
            (ParamLabel::AlphaPlus, p.alpha_plus),
            (ParamLabel::AlphaMinus, p.alpha_minus),
        ] {
            if a > SWEEP_ALPHA_MAX {
                return Err(Error::domain(
                    label.as_str(),
                    a,
                    format!("sweeps stop at {SWEEP_ALPHA_MAX}"),
                ));
            }
        }
        Ok(p)
    }

    fn columns(&self) -> Vec<Column> {
        let mut cols = Vec::new();
        for (i, kind) in self.inputs.iter().enumerate() {
            let prefix = state_prefix(kind);
            let estimated = kind.default_params();
            for &m in &self.methods {
                let name = |q: &str| format!("{prefix}.{}.{q}", m.as_str());
                match m {
                    SweepMethod::QfimNumeric | SweepMethod::QfimAnalytic => {
                        for &q in self.quantities.iter().filter(|q| estimated.contains(q)) {
                            cols.push(Column::bound(name(&quantity_name(q)), i, m, q));
                        }
                    }
                    SweepMethod::IntensityExact | SweepMethod::IntensityAnalytic => {
                        if m == SweepMethod::IntensityAnalytic
                            && *kind == InputStateKind::FockOnePlusOneMinus
                        {
                            continue;
                        }
                        for &q in self.quantities.iter().filter(|q| q.is_absorption()) {
                            cols.push(Column::bound(name(&quantity_name(q)), i, m, q));
                        }
                    }
                    SweepMethod::FidelityFringe => {
                        if fringe_input(kind).is_some() {
                            cols.push(Column {
                                name: name("f"),
                                input: i,
                                kind: ColumnKind::FidelityFormula,
                            });
                            cols.push(Column {
                                name: name("f_channel"),
                                input: i,
                                kind: ColumnKind::FidelityChannel,
                            });
                        }
                    }
                }
            }
        }
        cols
    }

    /// Header names of the grid-coordinate columns.
    pub fn coord_names(&self) -> Vec<String> {
        self.axes
            .iter()
            .map(|a| a.param.name().to_string())
            .collect()
    }

    /// Header names of the value columns, `<state>.<method>.<quantity>`.
    pub fn column_names(&self) -> Vec<String> {
        self.columns().into_iter().map(|c| c.name).collect()
    }
}

/// Column prefix for an input: `coherent_n1`, `single-photon`, `noon`, `fock11`.
pub fn state_prefix(kind: &InputStateKind) -> String {
    match kind {
        InputStateKind::Coherent { amp_h, amp_v } => {
            let base = format!("coherent_n{}", format_sig(kind.n0()));
            if amp_v == &[0.0, 0.0] && amp_h[1] == 0.0 {
                base
            } else {
                format!(
                    "{base}_h{}{:+}i_v{}{:+}i",
                    format_sig(amp_h[0]),
                    amp_h[1],
                    format_sig(amp_v[0]),
                    amp_v[1]
                )
            }
        }
        other => other.name().to_string(),
    }
}

/// Column name of a bound on `q`: `dx_d`, `dx_s`, `ddelta`, `dsigma`.
pub fn quantity_name(q: ParamLabel) -> String {
    format!("d{}", q.as_str())
}

fn fringe_input(kind: &InputStateKind) -> Option<HvInput> {
    match kind {
        InputStateKind::SinglePhotonH => Some(HvInput::SinglePhotonH),
        InputStateKind::NoonHV => Some(HvInput::NoonHV),
        _ => None,
    }
}

/// True where the output rank changes, so the numerical absorption QFIM
/// differs from its interior limit.
fn rank_boundary(kind: &InputStateKind, p: &ChiralParams) -> bool {
    match kind {
        InputStateKind::Coherent { .. } => false,
        InputStateKind::SinglePhotonH => p.alpha_plus == 0.0 && p.alpha_minus == 0.0,
        InputStateKind::NoonHV | InputStateKind::FockOnePlusOneMinus => {
            p.alpha_plus == 0.0 || p.alpha_minus == 0.0
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum ColumnKind {
    Bound {
        method: SweepMethod,
        label: ParamLabel,
    },
    FidelityFormula,
    FidelityChannel,
}

#[derive(Clone, Debug)]
struct Column {
    name: String,
    input: usize,
    kind: ColumnKind,
}

impl Column {
    fn bound(name: String, input: usize, method: SweepMethod, label: ParamLabel) -> Self {
        Column {
            name,
            input,
            kind: ColumnKind::Bound { method, label },
        }
    }

    fn method(&self) -> SweepMethod {
        match self.kind {
            ColumnKind::Bound { method, .. } => method,
            _ => SweepMethod::FidelityFringe,
        }
    }
}

/// Status flags a row may carry.
pub mod status {
    pub const OUT_OF_DOMAIN: &str = "out-of-domain";
    pub const UNIDENTIFIABLE: &str = "unidentifiable";
    pub const LIMIT_EVALUATED: &str = "limit-evaluated";
    pub const BOUNDARY: &str = "boundary";
    pub const ZERO_DERIVATIVE: &str = "zero-derivative";
    pub const ERROR: &str = "error";
    pub const OK: &str = "ok";
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub coords: Vec<f64>,
    pub params: Option<ChiralParams>,
    /// One entry per value column; `None` is an undefined cell.
    pub values: Vec<Option<f64>>,
    pub flags: BTreeSet<&'static str>,
    pub notes: BTreeSet<String>,
}

impl SweepRow {
    /// Status cell: flags joined by `;`, or `ok`.
    pub fn status(&self) -> String {
        if self.flags.is_empty() {
            status::OK.to_string()
        } else {
            self.flags.iter().copied().collect::<Vec<_>>().join(";")
        }
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// A finished sweep: headers and ordered rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub spec: SweepSpec,
    pub coord_names: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column in row order.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn flagged_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_flagged()).count()
    }

    /// Writes the `# spec:` line, the header and one line per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# spec: {}", serde_json::to_string(&self.spec)?)?;
        let mut csv = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.coord_names.iter().map(String::as_str).collect();
        header.extend(self.columns.iter().map(String::as_str));
        header.push("status");
        csv.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.coords.iter().map(|&v| format_sig(v)).collect();
            rec.extend(
                row.values
                    .iter()
                    .map(|v| v.map(format_sig).unwrap_or_default()),
            );
            rec.push(row.status());
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Numeric(e.to_string()))
    }
}

/// Formats `x` with [`CSV_SIGNIFICANT_DIGITS`] significant digits, in fixed
/// notation for moderate exponents and scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = CSV_SIGNIFICANT_DIGITS - 1;
    let sci = format!("{x:.digits$e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..CSV_SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (digits as i32 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Thread cap from [`THREADS_ENV`], `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_from_env()? {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start sweep workers: {e}")))
}

/// An input prepared once per sweep.
struct PreparedInput {
    kind: InputStateKind,
    prefix: String,
    state: TwoModeState,
    psi: Option<Vec<Complex>>,
}

impl PreparedInput {
    fn new(kind: InputStateKind, tail_budget: f64, cutoff_cap: usize) -> Result<Self> {
        let psi = match fringe_input(&kind) {
            Some(hv) => Some(hv_input_vector(hv, FockSpace::symmetric(FOCK_CUTOFF))?),
            None => None,
        };
        Ok(PreparedInput {
            kind,
            prefix: state_prefix(&kind),
            state: kind.prepare(tail_budget, cutoff_cap)?,
            psi,
        })
    }
}

fn evaluate_point(
    spec: &SweepSpec,
    inputs: &[PreparedInput],
    columns: &[Column],
    index: usize,
) -> SweepRow {
    let coords = spec.coords(index);
    let mut row = SweepRow {
        index,
        coords,
        params: None,
        values: vec![None; columns.len()],
        flags: BTreeSet::new(),
        notes: BTreeSet::new(),
    };
    let p = match spec.params_at(index) {
        Ok(p) => p,
        Err(e) => {
            row.flags.insert(status::OUT_OF_DOMAIN);
            row.notes.insert(e.to_string());
            return row;
        }
    };
    row.params = Some(p);
    for (i, inp) in inputs.iter().enumerate() {
        let mine: Vec<usize> = (0..columns.len())
            .filter(|&c| columns[c].input == i)
            .collect();
        let needs = |m: SweepMethod| mine.iter().any(|&c| columns[c].method() == m);
        let numeric = needs(SweepMethod::QfimNumeric)
            .then(|| qfim_pipeline(&inp.state, &p, &inp.kind.default_params(), spec.derivative));
        let analytic = needs(SweepMethod::QfimAnalytic).then(|| analytic_bounds(&inp.kind, &p));
        let intensity =
            needs(SweepMethod::IntensityAnalytic).then(|| analytic_intensity(&inp.kind, &p));
        let channel_fidelity = mine
            .iter()
            .any(|&c| matches!(columns[c].kind, ColumnKind::FidelityChannel))
            .then(|| {
                let psi = inp.psi.as_ref().expect("fringe input");
                match &numeric {
                    Some(Ok(run)) => run.output.fidelity_with(psi),
                    _ => apply_channel_kraus(&inp.state, &p)?.fidelity_with(psi),
                }
            });
        let boundary = rank_boundary(&inp.kind, &p);

        for c in mine {
            let col = &columns[c];
            let fail = |row: &mut SweepRow, e: &Error| {
                row.flags.insert(status::ERROR);
                row.notes
                    .insert(format!("{}.{}: {e}", inp.prefix, col.method()));
            };
            let value = match col.kind {
                ColumnKind::Bound { method, label } => match method {
                    SweepMethod::QfimNumeric => match numeric.as_ref().expect("numeric run") {
                        Ok(_) if boundary && label.is_absorption() => {
                            row.flags.insert(status::BOUNDARY);
                            None
                        }
                        Ok(run) => {
                            let b = run.qfim.bound(label);
                            if b.is_none() {
                                row.flags.insert(status::UNIDENTIFIABLE);
                            }
                            b
                        }
                        Err(e) => {
                            fail(&mut row, e);
                            None
                        }
                    },
                    SweepMethod::QfimAnalytic | SweepMethod::IntensityAnalytic => {
                        let rep = if method == SweepMethod::QfimAnalytic {
                            &analytic
                        } else {
                            &intensity
                        };
                        match rep.as_ref().expect("analytic report") {
                            Ok(r) => {
                                if r.limit_evaluated {
                                    row.flags.insert(status::LIMIT_EVALUATED);
                                }
                                let v = r.get(label);
                                if v.is_none() {
                                    row.flags.insert(status::UNIDENTIFIABLE);
                                }
                                v
                            }
                            Err(e) => {
                                fail(&mut row, e);
                                None
                            }
                        }
                    }
                    SweepMethod::IntensityExact => {
                        match error_propagation_sensitivity_with(&inp.state, &p, label) {
                            Ok(Some(v)) => Some(v),
                            Ok(None) => {
                                row.flags.insert(status::ZERO_DERIVATIVE);
                                None
                            }
                            Err(e) => {
                                fail(&mut row, &e);
                                None
                            }
                        }
                    }
                    SweepMethod::FidelityFringe => None,
                },
                ColumnKind::FidelityFormula => match fidelity_fringe(&inp.kind, &p) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        fail(&mut row, &e);
                        None
                    }
                },
                ColumnKind::FidelityChannel => {
                    match channel_fidelity.as_ref().expect("channel fidelity") {
                        Ok(v) => Some(*v),
                        Err(e) => {
                            fail(&mut row, e);
                            None
                        }
                    }
                }
            };
            row.values[c] = match value {
                Some(v) if !v.is_finite() => {
                    row.flags.insert(status::ERROR);
                    row.notes.insert(format!("{}: non-finite value", col.name));
                    None
                }
                v => v,
            };
        }
    }
    row
}

/// Evaluates every grid point of `spec`. Per-point failures are recorded in
/// the row status; only an invalid spec or an unpreparable input is an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let inputs = spec
        .inputs
        .iter()
        .map(|&k| PreparedInput::new(k, spec.tail_budget, spec.cutoff_cap))
        .collect::<Result<Vec<_>>>()?;
    let columns = spec.columns();
    let pool = thread_pool()?;
    let rows = pool.install(|| {
        (0..spec.point_count())
            .into_par_iter()
            .map(|i| evaluate_point(spec, &inputs, &columns, i))
            .collect::<Vec<_>>()
    });
    Ok(SweepTable {
        spec: spec.clone(),
        coord_names: spec.coord_names(),
        columns: columns.into_iter().map(|c| c.name).collect(),
        rows,
    })
}

/// Absolute deviation statistics for one bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantityDeviation {
    pub quantity: ParamLabel,
    pub points: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
}

/// A grid point where numeric and closed-form bounds differ by more than [`OUTLIER_THRESHOLD`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outlier {
    pub index: usize,
    pub coords: Vec<f64>,
    pub quantity: ParamLabel,
    pub numeric: f64,
    pub analytic: f64,
}

/// Covariance entries whose closed-form sign disagrees with the numerical QFIM.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignDiscrepancy {
    pub pair: (ParamLabel, ParamLabel),
    pub points: usize,
    pub example_coords: Vec<f64>,
    pub example_numeric: f64,
    pub example_analytic: f64,
}

/// Relative gap `(δX_d^NOON - δX_d^fock) / δX_d^fock` over the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSummary {
    pub points: usize,
    pub max_relative: f64,
    pub mean_relative: f64,
    pub min_relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub input: String,
    pub points: usize,
    /// Points outside the domain, on a rank boundary, or failing to evaluate.
    pub skipped: usize,
    pub deviations: Vec<QuantityDeviation>,
    pub outliers: Vec<Outlier>,
    pub sign_discrepancies: Vec<SignDiscrepancy>,
    pub fock_gap: Option<GapSummary>,
    pub notes: Vec<String>,
}

impl CompareReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations
            .iter()
            .map(|d| d.max_abs)
            .fold(0.0, f64::max)
    }
}

struct ComparePoint {
    index: usize,
    coords: Vec<f64>,
    /// `(label, numeric, analytic)` bounds.
    bounds: Vec<(ParamLabel, f64, f64)>,
    /// `(a, b, numeric, analytic)` covariances.
    covariances: Vec<(ParamLabel, ParamLabel, f64, f64)>,
    fock_gap: Option<f64>,
}

fn compare_point(
    spec: &SweepSpec,
    input: &TwoModeState,
    kind: &InputStateKind,
    labels: &[ParamLabel],
    index: usize,
) -> std::result::Result<ComparePoint, String> {
    let p = spec.params_at(index).map_err(|e| e.to_string())?;
    if rank_boundary(kind, &p) {
        return Err("rank boundary".into());
    }
    let run = qfim_pipeline(input, &p, &kind.default_params(), spec.derivative)
        .map_err(|e| e.to_string())?;
    let closed = analytic_qfim(kind, &p).map_err(|e| e.to_string())?;
    let mut bounds = Vec::new();
    for &l in labels {
        if let (Some(n), Some(a)) = (run.qfim.bound(l), closed.bound(l)) {
            bounds.push((l, n, a));
        }
    }
    let mut covariances = Vec::new();
    let params = kind.default_params();
    for (i, &a) in params.iter().enumerate() {
        for &b in &params[i + 1..] {
            if let (Some(n), Some(c)) = (run.qfim.covariance(a, b), closed.covariance(a, b)) {
                covariances.push((a, b, n, c));
            }
        }
    }
    let fock_gap = if *kind == InputStateKind::NoonHV {
        match (
            run.qfim.bound(ParamLabel::Xd),
            fock_benchmark_bound(&p)
                .ok()
                .and_then(|r| r.get(ParamLabel::Xd)),
        ) {
            (Some(n), Some(f)) if f > 0.0 => Some((n - f) / f),
            _ => None,
        }
    } else {
        None
    };
    Ok(ComparePoint {
        index,
        coords: spec.coords(index),
        bounds,
        covariances,
        fock_gap,
    })
}

/// Compares the numerical QFIM bounds of `kind` with its closed-form bounds
/// at every point of `grid`.
pub fn compare_analytic_numeric(kind: &InputStateKind, grid: &SweepSpec) -> Result<CompareReport> {
    if !(grid.methods.contains(&SweepMethod::QfimNumeric)
        && grid.methods.contains(&SweepMethod::QfimAnalytic))
    {
        return Err(Error::Config(
            "comparison needs both qfim_numeric and qfim_analytic methods".into(),
        ));
    }
    let mut spec = grid.clone();
    spec.inputs = vec![*kind];
    spec.validate()?;
    let input = kind.prepare(spec.tail_budget, spec.cutoff_cap)?;
    let estimated = kind.default_params();
    let labels: Vec<ParamLabel> = spec
        .quantities
        .iter()
        .copied()
        .filter(|q| estimated.contains(q))
        .collect();
    let pool = thread_pool()?;
    let results = pool.install(|| {
        (0..spec.point_count())
            .into_par_iter()
            .map(|i| compare_point(&spec, &input, kind, &labels, i))
            .collect::<Vec<_>>()
    });

    let mut report = CompareReport {
        input: state_prefix(kind),
        points: 0,
        skipped: 0,
        deviations: labels
            .iter()
            .map(|&q| QuantityDeviation {
                quantity: q,
                points: 0,
                max_abs: 0.0,
                mean_abs: 0.0,
            })
            .collect(),
        outliers: Vec::new(),
        sign_discrepancies: Vec::new(),
        fock_gap: None,
        notes: Vec::new(),
    };
    let mut skip_reasons = BTreeSet::new();
    let mut gaps = Vec::new();
    for r in results {
        let pt = match r {
            Ok(pt) => pt,
            Err(reason) => {
                report.skipped += 1;
                skip_reasons.insert(reason);
                continue;
            }
        };
        report.points += 1;
        for (l, n, a) in &pt.bounds {
            let dev = (n - a).abs();
            let d = report
                .deviations
                .iter_mut()
                .find(|d| d.quantity == *l)
                .expect("tracked quantity");
            d.points += 1;
            d.max_abs = d.max_abs.max(dev);
            d.mean_abs += dev;
            if dev > OUTLIER_THRESHOLD {
                report.outliers.push(Outlier {
                    index: pt.index,
                    coords: pt.coords.clone(),
                    quantity: *l,
                    numeric: *n,
                    analytic: *a,
                });
            }
        }
        for &(a, b, n, c) in &pt.covariances {
            let scale = n.abs().max(c.abs());
            if scale > 1e-9 && n * c < 0.0 && (n.abs() - c.abs()).abs() <= 1e-6 * scale.max(1.0) {
                match report
                    .sign_discrepancies
                    .iter_mut()
                    .find(|s| s.pair == (a, b))
                {
                    Some(s) => s.points += 1,
                    None => report.sign_discrepancies.push(SignDiscrepancy {
                        pair: (a, b),
                        points: 1,
                        example_coords: pt.coords.clone(),
                        example_numeric: n,
                        example_analytic: c,
                    }),
                }
            }
        }
        gaps.extend(pt.fock_gap);
    }
    for d in &mut report.deviations {
        if d.points > 0 {
            d.mean_abs /= d.points as f64;
        }
    }
    if !gaps.is_empty() {
        report.fock_gap = Some(GapSummary {
            points: gaps.len(),
            max_relative: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_relative: gaps.iter().copied().fold(f64::INFINITY, f64::min),
            mean_relative: gaps.iter().sum::<f64>() / gaps.len() as f64,
        });
    }
    for s in &report.sign_discrepancies {
        report.notes.push(format!(
            "closed-form covariance ({}, {}) has the opposite sign to the numerical QFIM at {} points",
            s.pair.0, s.pair.1, s.points
        ));
    }
    for reason in skip_reasons {
        report.notes.push(format!("skipped: {reason}"));
    }
    Ok(report)
}

/// One point of a fidelity fringe scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FringePoint {
    pub delta: f64,
    pub formula: f64,
    pub channel: f64,
}

/// Fidelity `<ψ_in|ρ_out|ψ_in>` over `points` values of `Δ` in `[start, stop]`,
/// from the closed form and from the channel output.
pub fn fringe_scan(
    kind: &InputStateKind,
    params: &ChiralParams,
    start: f64,
    stop: f64,
    points: usize,
) -> Result<Vec<FringePoint>> {
    let hv = fringe_input(kind)
        .ok_or_else(|| Error::Unsupported(format!("no fidelity fringe for {kind}")))?;
    let axis = Axis::new(AxisParam::Label(ParamLabel::Delta), start, stop, points);
    axis.validate()?;
    let input = kind.prepare_default()?;
    let psi = hv_input_vector(hv, input.space())?;
    (0..points)
        .map(|i| {
            let delta = axis.value(i);
            let p = params.with_value(ParamLabel::Delta, delta)?;
            Ok(FringePoint {
                delta,
                formula: fidelity_fringe(kind, &p)?,
                channel: apply_channel_kraus(&input, &p)?.fidelity_with(&psi)?,
            })
        })
        .collect()
}

/// Maximum of `|F(Δ) - F(Δ + π)|` over `deltas`, using the closed form.
pub fn fringe_shift_defect(
    kind: &InputStateKind,
    params: &ChiralParams,
    deltas: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &d in deltas {
        let a = fidelity_fringe(kind, &params.with_value(ParamLabel::Delta, d)?)?;
        let b = fidelity_fringe(
            kind,
            &params.with_value(ParamLabel::Delta, d + std::f64::consts::PI)?,
        )?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

const FIGURE_X_D: [f64; 4] = [0.005, 0.05, 0.1, 0.2];

fn xs_axis() -> Axis {
    Axis::new(AxisParam::Label(ParamLabel::Xs), 0.01, 0.95, 95)
}

/// Built-in sweep reproducing one figure panel.
///
/// `fig2*` tabulate `δX_s` and `fig3*` `δX_d`: panel a over the `(X_d, X_s)`
/// plane, panels b-e against `X_s` at fixed `X_d`, panel f over `(α₊, α₋)` for
/// the NOON and `|1_+, 1_->` inputs. `fig4` tabulates `δΔ` along `α₊ = α₋`.
pub fn preset(name: &str) -> Result<SweepSpec> {
    let unknown = || {
        Error::Config(format!(
            "unknown preset '{name}'; expected one of {}",
            PRESET_NAMES.join(", ")
        ))
    };
    if name == "fig4" {
        let mut s = SweepSpec::new(
            name,
            vec![
                InputStateKind::SinglePhotonH,
                InputStateKind::coherent(2.0)?,
                InputStateKind::NoonHV,
            ],
            vec![Axis::new(AxisParam::AlphaDiagonal, 0.0, 0.9, 91)],
            vec![SweepMethod::QfimNumeric, SweepMethod::QfimAnalytic],
            vec![ParamLabel::Delta],
        );
        s.notes
            .push("delta bound along alpha_plus = alpha_minus".into());
        return Ok(s);
    }
    let (fig, panel) = name.split_at(name.len().min(4));
    let quantity = match fig {
        "fig2" => ParamLabel::Xs,
        "fig3" => ParamLabel::Xd,
        _ => return Err(unknown()),
    };
    let curves = || -> Result<Vec<InputStateKind>> {
        Ok(vec![
            InputStateKind::coherent(1.0)?,
            InputStateKind::SinglePhotonH,
            InputStateKind::NoonHV,
        ])
    };
    let curve_methods = vec![
        SweepMethod::QfimNumeric,
        SweepMethod::QfimAnalytic,
        SweepMethod::IntensityExact,
        SweepMethod::IntensityAnalytic,
    ];
    let mut s = match panel {
        "a" => SweepSpec::new(
            name,
            curves()?,
            vec![
                Axis::new(AxisParam::Label(ParamLabel::Xd), 0.0, 0.2, 41),
                xs_axis(),
            ],
            curve_methods,
            vec![quantity],
        ),
        "b" | "c" | "d" | "e" => {
            let x_d = FIGURE_X_D[(panel.as_bytes()[0] - b'b') as usize];
            let mut s = SweepSpec::new(
                name,
                curves()?,
                vec![xs_axis()],
                curve_methods,
                vec![quantity],
            );
            s.fixed.x_d = x_d;
            s
        }
        "f" => {
            let ax = |l| Axis::new(AxisParam::Label(l), 0.01, 0.9, 90);
            SweepSpec::new(
                name,
                vec![InputStateKind::NoonHV, InputStateKind::FockOnePlusOneMinus],
                vec![ax(ParamLabel::AlphaPlus), ax(ParamLabel::AlphaMinus)],
                vec![SweepMethod::QfimNumeric, SweepMethod::QfimAnalytic],
                vec![quantity],
            )
        }
        _ => return Err(unknown()),
    };
    if fig == "fig2" && panel != "f" {
        s.notes.push(
            "coherent input has equal x_d and x_s bounds, so one coherent column serves both captions".into(),
        );
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(xd: f64, xs: f64) -> ChiralParams {
        ChiralParams::from_composite(xd, xs, 0.0, 0.0).unwrap()
    }

    #[test]
    fn single_photon_mean_intensity() {
        let p = ChiralParams::new(0.6, 0.2, 0.0, 0.0).unwrap();
        let m = intensity_statistics(&InputStateKind::SinglePhotonH, &p).unwrap();
        assert!((m.mean_plus - 0.2).abs() < 1e-15);
        assert!((m.mean_minus - 0.4).abs() < 1e-15);
        // n₊ and n₋ are never both 1, so Cov = -<n₊><n₋>.
        assert!((m.covariance + 0.08).abs() < 1e-15);
    }

    #[test]
    fn coherent_modes_uncorrelated() {
        let m =
            intensity_statistics(&InputStateKind::coherent(1.0).unwrap(), &pt(0.1, 0.4)).unwrap();
        // Both deviations come from the truncated Poisson tail.
        assert!(m.covariance.abs() < 1e-10);
        assert!((m.var_plus - m.mean_plus).abs() < 1e-8);
    }

    #[test]
    fn vacuum_output_has_no_photons() {
        let input = crate::fock::fock_product_state(FockSpace::symmetric(2), 0, 0).unwrap();
        let m = intensity_statistics_with(&input, &pt(0.0, 0.3)).unwrap();
        assert_eq!(
            [
                m.mean_plus,
                m.mean_minus,
                m.var_plus,
                m.var_minus,
                m.covariance
            ],
            [0.0; 5]
        );
    }

    #[test]
    fn error_propagation_examples() {
        let coh = InputStateKind::coherent(1.0).unwrap();
        let v = error_propagation_sensitivity(&coh, &pt(0.0, 0.5), ParamLabel::Xs)
            .unwrap()
            .unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-8, "{v}");
        let v = error_propagation_sensitivity(
            &InputStateKind::SinglePhotonH,
            &pt(0.1, 0.5),
            ParamLabel::Xd,
        )
        .unwrap()
        .unwrap();
        assert!((v - 0.7).abs() < 1e-9, "{v}");
        let v =
            error_propagation_sensitivity(&InputStateKind::NoonHV, &pt(0.0, 0.0), ParamLabel::Xs)
                .unwrap()
                .unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn phase_has_no_intensity_signal() {
        let v = error_propagation_sensitivity(
            &InputStateKind::NoonHV,
            &pt(0.1, 0.3),
            ParamLabel::Delta,
        )
        .unwrap();
        assert_eq!(v, None);
    }

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.5f64.sqrt()), "0.707106781187");
        assert_eq!(format_sig(-2.5), "-2.5");
        assert_eq!(format_sig(1.0 / 3.0 * 1e-7), "3.33333333333e-8");
        assert_eq!(format_sig(123456.789), "123456.789");
        assert_eq!(format_sig(1e15), "1e15");
        assert_eq!(format_sig(9.9999999999999), "10");
    }

    #[test]
    fn grid_coordinates_are_row_major() {
        let s = SweepSpec::new(
            "t",
            vec![InputStateKind::NoonHV],
            vec![
                Axis::new(AxisParam::Label(ParamLabel::AlphaPlus), 0.1, 0.3, 3),
                Axis::new(AxisParam::Label(ParamLabel::AlphaMinus), 0.2, 0.4, 2),
            ],
            vec![SweepMethod::QfimAnalytic],
            vec![ParamLabel::Xd],
        );
        assert_eq!(s.point_count(), 6);
        assert_eq!(s.coords(0), vec![0.1, 0.2]);
        assert_eq!(s.coords(1), vec![0.1, 0.4]);
        assert_eq!(s.coords(5), vec![0.3, 0.4]);
        let p = s.params_at(3).unwrap();
        assert!((p.alpha_plus - 0.2).abs() < 1e-15 && (p.alpha_minus - 0.4).abs() < 1e-15);
    }

    #[test]
    fn composite_axis_keeps_fixed_values() {
        let mut s = preset("fig3c").unwrap();
        s.fixed.delta = 0.4;
        let p = s.params_at(10).unwrap();
        assert!((p.x_d() - 0.05).abs() < 1e-15);
        assert!((p.x_s() - 0.11).abs() < 1e-12);
        assert!((p.delta() - 0.4).abs() < 1e-15);
        // X_s below X_d leaves the domain.
        assert!(s.params_at(0).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = preset("fig2b").unwrap();
        s.axes[0].points = 1;
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = preset("fig2b").unwrap();
        s.axes[0].stop = 1.2;
        assert!(matches!(s.validate(), Err(Error::Domain { .. })));
        let mut s = preset("fig2b").unwrap();
        s.quantities = vec![ParamLabel::AlphaPlus];
        assert!(s.validate().is_err());
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("fig5").is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = preset("fig4").unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"param\":\"alpha\""), "{text}");
        let back: SweepSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn two_point_sweep() {
        let mut s = SweepSpec::new(
            "two",
            vec![InputStateKind::SinglePhotonH],
            vec![Axis::new(AxisParam::Label(ParamLabel::Xs), 0.2, 0.4, 2)],
            vec![
                SweepMethod::QfimAnalytic,
                SweepMethod::IntensityExact,
                SweepMethod::FidelityFringe,
            ],
            vec![ParamLabel::Xd, ParamLabel::Xs],
        );
        s.fixed.x_d = 0.1;
        let t = run_sweep(&s).unwrap();
        assert_eq!(t.rows.len(), 2);
        let csv = t.to_csv_string().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# spec: {"));
        assert_eq!(
            lines[1],
            "x_s,single-photon.qfim_analytic.dx_d,single-photon.qfim_analytic.dx_s,\
             single-photon.intensity_exact.dx_d,single-photon.intensity_exact.dx_s,\
             single-photon.fidelity.f,single-photon.fidelity.f_channel,status"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with(",ok"));
        let f = t.column("single-photon.fidelity.f").unwrap();
        let g = t.column("single-photon.fidelity.f_channel").unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_rows_are_flagged_not_fatal() {
        let t = run_sweep(&preset("fig2e").unwrap()).unwrap();
        assert_eq!(t.rows.len(), 95);
        let first = &t.rows[0];
        assert!(first.flags.contains(status::OUT_OF_DOMAIN));
        assert!(first.values.iter().all(Option::is_none));
        assert!(t.rows[49].flags.is_empty(), "{:?}", t.rows[49].notes);
        // X_s + X_d > 1 leaves the domain at the other end.
        assert!(t.rows.last().unwrap().flags.contains(status::OUT_OF_DOMAIN));
    }

    #[test]
    fn fringe_shift() {
        let p = pt(0.1, 0.5);
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        assert!(fringe_shift_defect(&InputStateKind::NoonHV, &p, &grid).unwrap() <= 1e-12);
        assert!(fringe_shift_defect(&InputStateKind::SinglePhotonH, &p, &grid).unwrap() >= 0.1);
        for f in fringe_scan(&InputStateKind::NoonHV, &p, 0.0, 6.0, 13).unwrap() {
            assert!((f.formula - f.channel).abs() <= 1e-10);
        }
    }
}
