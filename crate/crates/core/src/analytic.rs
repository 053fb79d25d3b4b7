//! Closed-form SLDs, QFIM entries, bounds, intensity sensitivities and
//! fidelity fringes for the four reference inputs.
//!
//! These formulas are independent of the numerical pipeline in
//! [`crate::estimation`] and serve as its cross-check.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChiralParams, ParamLabel};
use crate::error::{Error, Result};
use crate::estimation::{invert_and_bound, qfim_from_matrix, QfimResult};
use crate::fock::{
    coherent_cutoff, coherent_product_state_with_budget, fock_product_state, hv_to_pm_amplitudes,
    hv_to_pm_state, FockSpace, HvInput, TwoModeState, COHERENT_CUTOFF_CAP, COHERENT_TAIL_BUDGET,
    FOCK_CUTOFF,
};
use crate::linalg::{c, commutator, Complex, ComplexMatrix};

/// Smallest absorption at which formulas with `1/α` factors are evaluated directly.
pub const NOON_ALPHA_FLOOR: f64 = 1e-6;

/// The reference input states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputStateKind {
    /// Product coherent state with H and V amplitudes.
    Coherent { amp_h: [f64; 2], amp_v: [f64; 2] },
    /// `|1_H, 0_V>`.
    #[serde(rename = "single_photon")]
    SinglePhotonH,
    /// `|1_H, 1_V>`, which is a NOON state in the circular basis.
    #[serde(rename = "noon")]
    NoonHV,
    /// `|1_+, 1_->`.
    #[serde(rename = "fock11")]
    FockOnePlusOneMinus,
}

impl InputStateKind {
    /// H-polarized coherent input with mean photon number `n0`.
    pub fn coherent(n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::domain(
                "n0",
                n0,
                "mean photon number must be positive",
            ));
        }
        Ok(InputStateKind::Coherent {
            amp_h: [n0.sqrt(), 0.0],
            amp_v: [0.0, 0.0],
        })
    }

    pub fn amplitudes(&self) -> Option<(Complex, Complex)> {
        match self {
            InputStateKind::Coherent { amp_h, amp_v } => {
                Some((c(amp_h[0], amp_h[1]), c(amp_v[0], amp_v[1])))
            }
            _ => None,
        }
    }

    pub fn n0(&self) -> f64 {
        match self {
            InputStateKind::Coherent { .. } => {
                let (h, v) = self.amplitudes().expect("coherent");
                h.norm_sqr() + v.norm_sqr()
            }
            InputStateKind::SinglePhotonH => 1.0,
            InputStateKind::NoonHV | InputStateKind::FockOnePlusOneMinus => 2.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InputStateKind::Coherent { .. } => "coherent",
            InputStateKind::SinglePhotonH => "single-photon",
            InputStateKind::NoonHV => "noon",
            InputStateKind::FockOnePlusOneMinus => "fock11",
        }
    }

    /// Parameters estimated by default: Σ only for inputs that carry an absolute
    /// phase, and no phase at all for `|1_+, 1_->`, which is phase-invariant.
    pub fn default_params(&self) -> Vec<ParamLabel> {
        if matches!(self, InputStateKind::FockOnePlusOneMinus) {
            return vec![ParamLabel::Xd, ParamLabel::Xs];
        }
        let mut v = vec![ParamLabel::Xd, ParamLabel::Xs, ParamLabel::Delta];
        if matches!(self, InputStateKind::Coherent { .. }) {
            v.push(ParamLabel::Sigma);
        }
        v
    }

    /// Input density matrix on a space just large enough for it.
    pub fn prepare(&self, tail_budget: f64, cutoff_cap: usize) -> Result<TwoModeState> {
        match self {
            InputStateKind::Coherent { .. } => {
                let (h, v) = self.amplitudes().expect("coherent");
                let (p, m) = hv_to_pm_amplitudes(h, v);
                let space = FockSpace::new(
                    coherent_cutoff(p, tail_budget, cutoff_cap)?,
                    coherent_cutoff(m, tail_budget, cutoff_cap)?,
                );
                coherent_product_state_with_budget(space, p, m, tail_budget)
            }
            InputStateKind::SinglePhotonH => {
                hv_to_pm_state(HvInput::SinglePhotonH, FockSpace::symmetric(FOCK_CUTOFF))
            }
            InputStateKind::NoonHV => {
                hv_to_pm_state(HvInput::NoonHV, FockSpace::symmetric(FOCK_CUTOFF))
            }
            InputStateKind::FockOnePlusOneMinus => {
                fock_product_state(FockSpace::symmetric(FOCK_CUTOFF), 1, 1)
            }
        }
    }

    pub fn prepare_default(&self) -> Result<TwoModeState> {
        self.prepare(COHERENT_TAIL_BUDGET, COHERENT_CUTOFF_CAP)
    }
}

impl fmt::Display for InputStateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputStateKind::Coherent { .. } => write!(f, "coherent(n0={})", self.n0()),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses `single-photon`, `noon`, `fock11`; coherent inputs need [`InputStateKind::coherent`].
impl FromStr for InputStateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-photon" | "single_photon" | "single" => Ok(InputStateKind::SinglePhotonH),
            "noon" => Ok(InputStateKind::NoonHV),
            "fock11" | "fock" => Ok(InputStateKind::FockOnePlusOneMinus),
            "coherent" => InputStateKind::coherent(1.0),
            other => Err(Error::Config(format!("unknown input state '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityMethod {
    QfimBound,
    IntensityMeasurement,
    FidelityFringe,
}

/// Per-parameter sensitivities from one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub method: SensitivityMethod,
    pub values: BTreeMap<ParamLabel, f64>,
    pub covariances: Vec<(ParamLabel, ParamLabel, f64)>,
    /// True when a boundary value was replaced by its one-sided limit.
    pub limit_evaluated: bool,
    pub notes: Vec<String>,
}

impl SensitivityReport {
    fn new(method: SensitivityMethod) -> Self {
        SensitivityReport {
            method,
            values: BTreeMap::new(),
            covariances: Vec::new(),
            limit_evaluated: false,
            notes: Vec::new(),
        }
    }

    pub fn get(&self, label: ParamLabel) -> Option<f64> {
        self.values.get(&label).copied()
    }

    pub fn covariance(&self, a: ParamLabel, b: ParamLabel) -> Option<f64> {
        self.covariances
            .iter()
            .find(|(x, y, _)| (*x == a && *y == b) || (*x == b && *y == a))
            .map(|t| t.2)
    }

    fn set(&mut self, label: ParamLabel, v: f64) {
        self.values.insert(label, v);
    }
}

/// An SLD written on a small support basis of Fock labels `(n_plus, n_minus)`.
#[derive(Clone, Debug)]
pub struct CatalogSld {
    pub param: ParamLabel,
    pub basis: Vec<(usize, usize)>,
    pub matrix: ComplexMatrix,
}

impl CatalogSld {
    /// The same operator on the full space, zero outside the basis.
    pub fn embed(&self, space: FockSpace) -> Result<ComplexMatrix> {
        embed(&self.basis, &self.matrix, space)
    }
}

fn embed(basis: &[(usize, usize)], m: &ComplexMatrix, space: FockSpace) -> Result<ComplexMatrix> {
    for &(p, q) in basis {
        space.require("catalog basis", p, q)?;
    }
    let mut out = ComplexMatrix::zeros(space.dim(), space.dim());
    for (a, &(pa, qa)) in basis.iter().enumerate() {
        for (b, &(pb, qb)) in basis.iter().enumerate() {
            out[(space.index(pa, qa), space.index(pb, qb))] = m[(a, b)];
        }
    }
    Ok(out)
}

/// Closed-form results for one input at one parameter point.
#[derive(Clone, Debug)]
pub struct Catalog {
    pub basis: Vec<(usize, usize)>,
    pub rho_support: ComplexMatrix,
    /// Empty where the closed forms are undefined.
    pub slds: Vec<CatalogSld>,
    pub qfim: QfimResult,
    pub bounds: SensitivityReport,
    pub intensity: SensitivityReport,
}

impl Catalog {
    pub fn rho(&self, space: FockSpace) -> Result<ComplexMatrix> {
        embed(&self.basis, &self.rho_support, space)
    }

    pub fn sld(&self, label: ParamLabel) -> Option<&CatalogSld> {
        self.slds.iter().find(|s| s.param == label)
    }
}

fn check_n0(n0: f64) -> Result<()> {
    if n0 > 0.0 && n0.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            "n0",
            n0,
            "mean photon number must be positive",
        ))
    }
}

fn denominator(params: &ChiralParams) -> Result<f64> {
    let d = (1.0 - params.x_s()).powi(2) - params.x_d().powi(2);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::domain(
            "x_s",
            params.x_s(),
            "(1 - X_s)^2 - X_d^2 must be positive",
        ))
    }
}

/// Coherent-input QFIM over `(X_d, X_s, Δ, Σ)` from the closed-form entry list.
///
/// `F_ds` is listed as `-N₀X_d/((1-X_s)² - X_d²)`. The numerical QFIM has the
/// opposite sign; bounds do not depend on it.
pub fn coherent_qfim(params: &ChiralParams, n0: f64) -> Result<QfimResult> {
    params.validate()?;
    check_n0(n0)?;
    let d = denominator(params)?;
    let (xs, xd) = (params.x_s(), params.x_d());
    let f_dd = n0 * (1.0 - xs) / d;
    let f_ds = -n0 * xd / d;
    let f_pp = n0 * (1.0 - xs);
    let f_sd = -n0 * xd;
    invert_and_bound(qfim_from_matrix(
        vec![
            ParamLabel::Xd,
            ParamLabel::Xs,
            ParamLabel::Delta,
            ParamLabel::Sigma,
        ],
        vec![
            vec![f_dd, f_ds, 0.0, 0.0],
            vec![f_ds, f_dd, 0.0, 0.0],
            vec![0.0, 0.0, f_pp, f_sd],
            vec![0.0, 0.0, f_sd, f_pp],
        ],
    )?)
}

/// Coherent-input Cramér-Rao bounds and covariances in closed form.
///
/// `Cov(X_d, X_s)` is reported as `+X_d/N₀`, matching the `F_ds` convention of
/// [`coherent_qfim`].
pub fn coherent_bounds(params: &ChiralParams, n0: f64) -> Result<SensitivityReport> {
    params.validate()?;
    check_n0(n0)?;
    let d = denominator(params)?;
    let (xs, xd) = (params.x_s(), params.x_d());
    let mut r = SensitivityReport::new(SensitivityMethod::QfimBound);
    let absorption = ((1.0 - xs) / n0).sqrt();
    let phase = ((1.0 - xs) / (n0 * d)).sqrt();
    r.set(ParamLabel::Xd, absorption);
    r.set(ParamLabel::Xs, absorption);
    r.set(ParamLabel::Delta, phase);
    r.set(ParamLabel::Sigma, phase);
    r.covariances
        .push((ParamLabel::Xd, ParamLabel::Xs, xd / n0));
    r.covariances
        .push((ParamLabel::Sigma, ParamLabel::Delta, xd / (n0 * d)));
    Ok(r)
}

/// Intensity-measurement sensitivities for coherent input, `δX_d = δX_s = √((1-X_s)/N₀)`.
pub fn coherent_intensity_sensitivities(
    params: &ChiralParams,
    n0: f64,
) -> Result<SensitivityReport> {
    params.validate()?;
    check_n0(n0)?;
    let v = ((1.0 - params.x_s()) / n0).sqrt();
    let mut r = SensitivityReport::new(SensitivityMethod::IntensityMeasurement);
    r.set(ParamLabel::Xd, v);
    r.set(ParamLabel::Xs, v);
    Ok(r)
}

/// As [`coherent_intensity_sensitivities`] for explicit amplitudes, which must
/// share a common phase.
pub fn coherent_intensity_sensitivities_for(
    kind: &InputStateKind,
    params: &ChiralParams,
) -> Result<SensitivityReport> {
    let (h, v) = kind
        .amplitudes()
        .ok_or_else(|| Error::Unsupported(format!("{kind} is not a coherent input")))?;
    let rel = (h.conj() * v).im;
    if rel.abs() > 1e-12 * (h.norm_sqr() + v.norm_sqr()).max(1.0) {
        return Err(Error::Unsupported(
            "intensity sensitivities assume zero relative phase between the H and V amplitudes"
                .into(),
        ));
    }
    coherent_intensity_sensitivities(params, kind.n0())
}

/// Closed-form SLDs for the H-polarized coherent input with mean photon number `n0`.
///
/// `L_d = -n₊/η₊ + n₋/η₋`, `L_s = N₀ - n₊/η₊ - n₋/η₋`, `L_Δ = -i[n₊ - n₋, ρ]`
/// and `L_Σ = -i[n₊ + n₋, ρ]`, with `ρ` the coherent output on `space`.
pub fn coherent_slds(params: &ChiralParams, n0: f64, space: FockSpace) -> Result<Vec<CatalogSld>> {
    params.validate()?;
    check_n0(n0)?;
    let kind = InputStateKind::coherent(n0)?;
    let (h, v) = kind.amplitudes().expect("coherent");
    let (p, m) = hv_to_pm_amplitudes(h, v);
    let (ep, em) = params.eta();
    let bp = p * ep.sqrt() * c(0.0, -params.phi_plus).exp();
    let bm = m * em.sqrt() * c(0.0, -params.phi_minus).exp();
    let mut missing = 0.0;
    for (b, cut) in [(bp, space.cutoff_plus), (bm, space.cutoff_minus)] {
        missing += crate::fock::poisson_tail(b.norm_sqr(), cut);
    }
    if missing > 1e-6 {
        let need =
            coherent_cutoff(bp, 1e-7, usize::MAX)?.max(coherent_cutoff(bm, 1e-7, usize::MAX)?);
        return Err(Error::Cutoff {
            what: "coherent SLD support".into(),
            required: need,
            available: space.cutoff_plus.min(space.cutoff_minus),
        });
    }
    let psi = crate::fock::coherent_vector(space, bp, bm);
    let rho = ComplexMatrix::outer(&psi, &psi);
    let basis: Vec<(usize, usize)> = (0..space.dim()).map(|k| space.occupation(k)).collect();
    let diag = |f: &dyn Fn(f64, f64) -> f64| {
        ComplexMatrix::from_diag(
            &basis
                .iter()
                .map(|&(a, b)| f(a as f64, b as f64))
                .collect::<Vec<_>>(),
        )
    };
    let l_d = diag(&|a, b| -a / ep + b / em);
    let l_s = diag(&|a, b| n0 - a / ep - b / em);
    let g_delta = diag(&|a, b| a - b);
    let g_sigma = diag(&|a, b| a + b);
    let l_delta = commutator(&g_delta, &rho)?.scale(c(0.0, -1.0));
    let l_sigma = commutator(&g_sigma, &rho)?.scale(c(0.0, -1.0));
    Ok([
        (ParamLabel::Xd, l_d),
        (ParamLabel::Xs, l_s),
        (ParamLabel::Delta, l_delta),
        (ParamLabel::Sigma, l_sigma),
    ]
    .into_iter()
    .map(|(param, matrix)| CatalogSld {
        param,
        basis: basis.clone(),
        matrix,
    })
    .collect())
}

/// Single-mode absorption SLD `|β|² - n₊/(1-α)` for a coherent amplitude `β`
/// in the `+` mode, as a diagonal operator on `space`.
pub fn single_mode_coherent_sld(
    alpha: f64,
    beta_sq: f64,
    space: FockSpace,
) -> Result<ComplexMatrix> {
    ChiralParams::new(alpha, 0.0, 0.0, 0.0)?;
    let v: Vec<f64> = (0..space.dim())
        .map(|k| beta_sq - space.occupation(k).0 as f64 / (1.0 - alpha))
        .collect();
    Ok(ComplexMatrix::from_diag(&v))
}

/// Generator of Δ translations, `n₊ - n₋`, on `space`.
pub fn delta_generator(space: FockSpace) -> ComplexMatrix {
    let v: Vec<f64> = (0..space.dim())
        .map(|k| {
            let (a, b) = space.occupation(k);
            a as f64 - b as f64
        })
        .collect();
    ComplexMatrix::from_diag(&v)
}

const SINGLE_PHOTON_BASIS: [(usize, usize); 3] = [(1, 0), (0, 1), (0, 0)];
const NOON_BASIS: [(usize, usize); 5] = [(2, 0), (0, 2), (1, 0), (0, 1), (0, 0)];

/// Output state, SLDs, QFIM and bounds for the `|1_H, 0_V>` input.
///
/// Support basis `{|1,0>, |0,1>, |0,0>}`. At `X_s = 0` the vacuum drops out of
/// the support and the `L_s` vacuum entry is set to zero.
pub fn single_photon_catalog(params: &ChiralParams) -> Result<Catalog> {
    params.validate()?;
    let (ep, em) = params.eta();
    let (xs, xd, dl) = (params.x_s(), params.x_d(), params.delta());
    let coh = c(0.0, -dl).exp() * (0.5 * (ep * em).sqrt());
    let mut rho = ComplexMatrix::from_diag(&[ep / 2.0, em / 2.0, xs]);
    rho[(0, 1)] = coh;
    rho[(1, 0)] = coh.conj();

    let mut notes = Vec::new();
    let vac = if xs > 0.0 {
        1.0 / xs
    } else {
        notes.push("X_s = 0: vacuum outside the support, L_s vacuum entry set to 0".to_string());
        0.0
    };
    let l_d = ComplexMatrix::from_diag(&[-1.0 / ep, 1.0 / em, 0.0]);
    let l_s = ComplexMatrix::from_diag(&[-1.0 / ep, -1.0 / em, vac]);
    let k = 2.0 * (ep * em).sqrt() / (ep + em);
    let mut l_delta = ComplexMatrix::zeros(3, 3);
    l_delta[(0, 1)] = c(0.0, -1.0) * c(0.0, -dl).exp() * k;
    l_delta[(1, 0)] = l_delta[(0, 1)].conj();
    let basis = SINGLE_PHOTON_BASIS.to_vec();
    let slds = [
        (ParamLabel::Xd, l_d),
        (ParamLabel::Xs, l_s),
        (ParamLabel::Delta, l_delta),
    ]
    .into_iter()
    .map(|(param, matrix)| CatalogSld {
        param,
        basis: basis.clone(),
        matrix,
    })
    .collect();

    let pp = ep * em;
    let f_dd = (1.0 - xs) / pp;
    let f_ss = if xs > 0.0 {
        f_dd + 1.0 / xs
    } else {
        f64::INFINITY
    };
    let f_ds = xd / pp;
    let f_dl = 2.0 * pp / (ep + em);
    let qfim = if f_ss.is_finite() {
        invert_and_bound(qfim_from_matrix(
            vec![ParamLabel::Xd, ParamLabel::Xs, ParamLabel::Delta],
            vec![
                vec![f_dd, f_ds, 0.0],
                vec![f_ds, f_ss, 0.0],
                vec![0.0, 0.0, f_dl],
            ],
        )?)?
    } else {
        // F_ss diverges at the boundary, so X_s drops out of the QFIM.
        invert_and_bound(qfim_from_matrix(
            vec![ParamLabel::Xd, ParamLabel::Delta],
            vec![vec![f_dd, 0.0], vec![0.0, f_dl]],
        )?)?
    };

    let mut bounds = SensitivityReport::new(SensitivityMethod::QfimBound);
    bounds.set(ParamLabel::Xd, (1.0 - xs - xd * xd).sqrt());
    bounds.set(ParamLabel::Xs, ((1.0 - xs) * xs).sqrt());
    bounds.set(ParamLabel::Delta, ((ep + em) / (2.0 * ep * em)).sqrt());
    bounds
        .covariances
        .push((ParamLabel::Xd, ParamLabel::Xs, -xs * xd));
    bounds.notes = notes;

    let mut intensity = SensitivityReport::new(SensitivityMethod::IntensityMeasurement);
    intensity.set(ParamLabel::Xd, (1.0 - xs - xd * xd).sqrt());
    intensity.set(ParamLabel::Xs, ((1.0 - xs) * xs).sqrt());

    Ok(Catalog {
        basis,
        rho_support: rho,
        slds,
        qfim,
        bounds,
        intensity,
    })
}

fn noon_one_photon_term(alpha: f64) -> f64 {
    (1.0 - 2.0 * alpha).powi(2) / (alpha * (1.0 - alpha))
}

/// NOON-input intensity sensitivities
/// `δX_d = ½√(η₊ + η₋ + 2η₊η₋)`, `δX_s = ½√(η₊ + η₋ - 2η₊η₋)`.
pub fn noon_intensity_sensitivities(params: &ChiralParams) -> Result<SensitivityReport> {
    params.validate()?;
    let (ep, em) = params.eta();
    let mut r = SensitivityReport::new(SensitivityMethod::IntensityMeasurement);
    r.set(ParamLabel::Xd, 0.5 * (ep + em + 2.0 * ep * em).sqrt());
    r.set(
        ParamLabel::Xs,
        0.5 * (ep + em - 2.0 * ep * em).max(0.0).sqrt(),
    );
    Ok(r)
}

/// Output state, SLDs, QFIM and bounds for the `|1_H, 1_V>` (NOON) input.
///
/// Support basis `{|2,0>, |0,2>, |1,0>, |0,1>, |0,0>}`. Entries with `1/α`
/// factors are evaluated with `α` floored at [`NOON_ALPHA_FLOOR`]; at
/// `α₊ = α₋ = 0` the absorption bounds are reported as their limit 0 and no
/// SLDs are returned.
pub fn noon_catalog(params: &ChiralParams) -> Result<Catalog> {
    params.validate()?;
    let (ep, em) = params.eta();
    let (ap, am) = (params.alpha_plus, params.alpha_minus);
    let dl = params.delta();
    let basis = NOON_BASIS.to_vec();

    let mut rho = ComplexMatrix::from_diag(&[
        0.5 * ep * ep,
        0.5 * em * em,
        ap * ep,
        am * em,
        0.5 * (ap * ap + am * am),
    ]);
    let coh = c(0.0, -2.0 * dl).exp() * (-0.5 * ep * em);
    rho[(0, 1)] = coh;
    rho[(1, 0)] = coh.conj();

    let s2 = ep * ep + em * em;
    let f_dl = 8.0 * (ep * em).powi(2) / s2;
    let k = 4.0 * ep * em / s2;
    let mut l_delta = ComplexMatrix::zeros(5, 5);
    l_delta[(0, 1)] = c(0.0, 1.0) * c(0.0, -2.0 * dl).exp() * k;
    l_delta[(1, 0)] = l_delta[(0, 1)].conj();

    let mut bounds = SensitivityReport::new(SensitivityMethod::QfimBound);
    bounds.set(ParamLabel::Delta, 1.0 / f_dl.sqrt());
    let mut slds = vec![];

    let both_zero = ap == 0.0 && am == 0.0;
    let qfim = if both_zero {
        bounds.set(ParamLabel::Xd, 0.0);
        bounds.set(ParamLabel::Xs, 0.0);
        bounds.limit_evaluated = true;
        bounds.notes.push(
            "alpha_plus = alpha_minus = 0: absorption bounds reported as their limit 0".into(),
        );
        // The absorption block diverges here; only Δ keeps a finite QFIM.
        invert_and_bound(qfim_from_matrix(vec![ParamLabel::Delta], vec![vec![f_dl]])?)?
    } else {
        let apf = ap.max(NOON_ALPHA_FLOOR);
        let amf = am.max(NOON_ALPHA_FLOOR);
        if apf != ap || amf != am {
            bounds.limit_evaluated = true;
            bounds.notes.push(format!(
                "absorption below {NOON_ALPHA_FLOOR:.0e} evaluated at the floor"
            ));
        }
        let (tp, tm) = (noon_one_photon_term(apf), noon_one_photon_term(amf));
        let (xs, xd) = ((apf + amf) / 2.0, (apf - amf) / 2.0);
        let q2 = xs * xs + xd * xd;
        let f_dd = 4.0 + tp + tm + 4.0 * xd * xd / q2;
        let f_ss = 4.0 + tp + tm + 4.0 * xs * xs / q2;
        let f_ds = 4.0 * xs * xd / q2 + tp - tm;
        let q = invert_and_bound(qfim_from_matrix(
            vec![ParamLabel::Xd, ParamLabel::Xs, ParamLabel::Delta],
            vec![
                vec![f_dd, f_ds, 0.0],
                vec![f_ds, f_ss, 0.0],
                vec![0.0, 0.0, f_dl],
            ],
        )?)?;
        for l in [ParamLabel::Xd, ParamLabel::Xs] {
            if let Some(b) = q.bound(l) {
                bounds.set(l, b);
            }
        }
        if let Some(cv) = q.covariance(ParamLabel::Xd, ParamLabel::Xs) {
            bounds
                .covariances
                .push((ParamLabel::Xd, ParamLabel::Xs, cv));
        }

        if ap > 0.0 && am > 0.0 {
            let one_p = (1.0 - 2.0 * ap) / (ap * ep);
            let one_m = (1.0 - 2.0 * am) / (am * em);
            let (xs, xd) = (params.x_s(), params.x_d());
            let q2 = xs * xs + xd * xd;
            let l_d =
                ComplexMatrix::from_diag(&[-2.0 / ep, 2.0 / em, one_p, -one_m, 2.0 * xd / q2]);
            let l_s =
                ComplexMatrix::from_diag(&[-2.0 / ep, -2.0 / em, one_p, one_m, 2.0 * xs / q2]);
            slds.push(CatalogSld {
                param: ParamLabel::Xd,
                basis: basis.clone(),
                matrix: l_d,
            });
            slds.push(CatalogSld {
                param: ParamLabel::Xs,
                basis: basis.clone(),
                matrix: l_s,
            });
        }
        q
    };
    slds.push(CatalogSld {
        param: ParamLabel::Delta,
        basis: basis.clone(),
        matrix: l_delta,
    });

    Ok(Catalog {
        basis,
        rho_support: rho,
        slds,
        qfim,
        bounds,
        intensity: noon_intensity_sensitivities(params)?,
    })
}

/// Cramér-Rao bound `½√(α₊(1-α₊) + α₋(1-α₋))` on both `X_d` and `X_s` for `|1_+, 1_->`.
pub fn fock_benchmark_bound(params: &ChiralParams) -> Result<SensitivityReport> {
    params.validate()?;
    let v = 0.5
        * (params.alpha_plus * (1.0 - params.alpha_plus)
            + params.alpha_minus * (1.0 - params.alpha_minus))
            .sqrt();
    let mut r = SensitivityReport::new(SensitivityMethod::QfimBound);
    r.set(ParamLabel::Xd, v);
    r.set(ParamLabel::Xs, v);
    Ok(r)
}

/// Fidelity `<ψ_in|ρ_out|ψ_in>` of the output with its own input.
///
/// Single photon: `½[1 - X_s + √((1-X_s)² - X_d²) cos Δ]`;
/// NOON: `½[(1-X_s)² + X_d² + ((1-X_s)² - X_d²) cos 2Δ]`.
pub fn fidelity_fringe(kind: &InputStateKind, params: &ChiralParams) -> Result<f64> {
    params.validate()?;
    let (xs, xd, dl) = (params.x_s(), params.x_d(), params.delta());
    let d = (1.0 - xs).powi(2) - xd * xd;
    match kind {
        InputStateKind::SinglePhotonH => Ok(0.5 * (1.0 - xs + d.max(0.0).sqrt() * dl.cos())),
        InputStateKind::NoonHV => Ok(0.5 * ((1.0 - xs).powi(2) + xd * xd + d * (2.0 * dl).cos())),
        other => Err(Error::Unsupported(format!(
            "no fidelity fringe formula for {other}"
        ))),
    }
}

/// Sensitivity report wrapper around [`fidelity_fringe`], with `δΔ` from the fringe slope.
pub fn fringe_report(kind: &InputStateKind, params: &ChiralParams) -> Result<SensitivityReport> {
    let f = fidelity_fringe(kind, params)?;
    let mut r = SensitivityReport::new(SensitivityMethod::FidelityFringe);
    r.notes.push(format!("fidelity = {f}"));
    // Projective measurement onto the input: δΔ = √(F(1-F)) / |∂F/∂Δ|.
    let h = 1e-6;
    let p = ChiralParams::from_composite(
        params.x_d(),
        params.x_s(),
        params.delta() + h,
        params.sigma(),
    )?;
    let m = ChiralParams::from_composite(
        params.x_d(),
        params.x_s(),
        params.delta() - h,
        params.sigma(),
    )?;
    let slope = (fidelity_fringe(kind, &p)? - fidelity_fringe(kind, &m)?) / (2.0 * h);
    if slope.abs() > 1e-9 {
        r.set(
            ParamLabel::Delta,
            (f * (1.0 - f)).max(0.0).sqrt() / slope.abs(),
        );
    } else {
        r.notes.push("fringe slope vanishes".into());
    }
    Ok(r)
}

/// Closed-form QFIM for any reference input where one exists.
pub fn analytic_qfim(kind: &InputStateKind, params: &ChiralParams) -> Result<QfimResult> {
    match kind {
        InputStateKind::Coherent { .. } => coherent_qfim(params, kind.n0()),
        InputStateKind::SinglePhotonH => Ok(single_photon_catalog(params)?.qfim),
        InputStateKind::NoonHV => Ok(noon_catalog(params)?.qfim),
        InputStateKind::FockOnePlusOneMinus => {
            let (ap, am) = (params.alpha_plus, params.alpha_minus);
            if ap <= 0.0 || am <= 0.0 {
                return Err(Error::domain(
                    "alpha",
                    ap.min(am),
                    "Fock benchmark QFIM diverges at zero absorption",
                ));
            }
            let (fp, fm) = (1.0 / (ap * (1.0 - ap)), 1.0 / (am * (1.0 - am)));
            // ∂/∂X_d = ∂/∂α₊ - ∂/∂α₋, ∂/∂X_s = ∂/∂α₊ + ∂/∂α₋
            invert_and_bound(qfim_from_matrix(
                vec![ParamLabel::Xd, ParamLabel::Xs],
                vec![vec![fp + fm, fp - fm], vec![fp - fm, fp + fm]],
            )?)
        }
    }
}

/// Closed-form Cramér-Rao bounds for any reference input.
pub fn analytic_bounds(kind: &InputStateKind, params: &ChiralParams) -> Result<SensitivityReport> {
    match kind {
        InputStateKind::Coherent { .. } => coherent_bounds(params, kind.n0()),
        InputStateKind::SinglePhotonH => Ok(single_photon_catalog(params)?.bounds),
        InputStateKind::NoonHV => Ok(noon_catalog(params)?.bounds),
        InputStateKind::FockOnePlusOneMinus => fock_benchmark_bound(params),
    }
}

/// Closed-form intensity-measurement sensitivities where available.
pub fn analytic_intensity(
    kind: &InputStateKind,
    params: &ChiralParams,
) -> Result<SensitivityReport> {
    match kind {
        InputStateKind::Coherent { .. } => coherent_intensity_sensitivities_for(kind, params),
        InputStateKind::SinglePhotonH => Ok(single_photon_catalog(params)?.intensity),
        InputStateKind::NoonHV => noon_intensity_sensitivities(params),
        InputStateKind::FockOnePlusOneMinus => Err(Error::Unsupported(
            "no closed-form intensity sensitivity for fock11".into(),
        )),
    }
}

/// `ρ_out` for the Fock-basis inputs as a full-space matrix.
pub fn catalog_output(kind: &InputStateKind, params: &ChiralParams) -> Result<ComplexMatrix> {
    let space = FockSpace::symmetric(FOCK_CUTOFF);
    match kind {
        InputStateKind::SinglePhotonH => single_photon_catalog(params)?.rho(space),
        InputStateKind::NoonHV => noon_catalog(params)?.rho(space),
        _ => Err(Error::Unsupported(format!(
            "no closed-form support matrix for {kind}"
        ))),
    }
}
