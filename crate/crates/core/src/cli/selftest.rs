//! Packaged consistency checks run by `chiral-qfim selftest`.

use serde::Serialize;

use crate::analytic::{
    analytic_bounds, coherent_bounds, coherent_slds, delta_generator, fidelity_fringe,
    fock_benchmark_bound, single_mode_coherent_sld, InputStateKind,
};
use crate::channel::{
    apply_channel_kraus, apply_channel_rk4, ChiralParams, ParamLabel, RK4_DEFAULT_STEPS,
};
use crate::error::Result;
use crate::estimation::{qfim_pipeline, support_restricted_diff, DerivativeMethod};
use crate::experiments::{error_propagation_sensitivity_with, fringe_scan, fringe_shift_defect};
use crate::fock::{coherent_product_state_with_budget, FockSpace};
use crate::linalg::{c, commutator};

/// Result of one check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

fn check(name: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> CheckOutcome {
    match f() {
        Ok(residual) => CheckOutcome {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual <= tolerance,
            detail: None,
        },
        Err(e) => CheckOutcome {
            name: name.to_string(),
            residual: f64::INFINITY,
            tolerance,
            passed: false,
            detail: Some(e.to_string()),
        },
    }
}

fn pt(xd: f64, xs: f64, delta: f64) -> Result<ChiralParams> {
    ChiralParams::from_composite(xd, xs, delta, 0.1)
}

const ANALYTIC: DerivativeMethod = DerivativeMethod::AnalyticKraus;

fn reference_inputs() -> Result<Vec<InputStateKind>> {
    Ok(vec![
        InputStateKind::coherent(1.0)?,
        InputStateKind::SinglePhotonH,
        InputStateKind::NoonHV,
    ])
}

/// Single-mode damped coherent state at `α = 0.5`, `|β|² = 1`: numerical SLD
/// against `|β|² - a†a/(1-α)` on the support of ρ.
fn appendix_a() -> Result<f64> {
    let space = FockSpace::new(40, 0);
    let input = coherent_product_state_with_budget(space, c(1.0, 0.0), c(0.0, 0.0), 1e-30)?;
    let p = ChiralParams::new(0.5, 0.0, 0.0, 0.0)?;
    let run = qfim_pipeline(&input, &p, &[ParamLabel::AlphaPlus], ANALYTIC)?;
    let numeric = &run.sld(ParamLabel::AlphaPlus).expect("requested").l;
    support_restricted_diff(
        run.output.rho(),
        numeric,
        &single_mode_coherent_sld(0.5, 1.0, space)?,
    )
}

fn appendix_b() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kind in reference_inputs()? {
        let input = kind.prepare_default()?;
        for p in [pt(0.05, 0.3, 0.7)?, pt(-0.1, 0.4, 1.9)?] {
            let q = qfim_pipeline(&input, &p, &kind.default_params(), ANALYTIC)?.qfim;
            for a in [ParamLabel::Xd, ParamLabel::Xs] {
                for b in [ParamLabel::Delta, ParamLabel::Sigma] {
                    worst = worst.max(q.entry(a, b).unwrap_or(0.0).abs());
                }
            }
        }
    }
    let space = FockSpace::symmetric(12);
    let slds = coherent_slds(&pt(0.05, 0.3, 0.7)?, 1.0, space)?;
    let l_d = &slds
        .iter()
        .find(|s| s.param == ParamLabel::Xd)
        .expect("L_d")
        .matrix;
    worst = worst.max(commutator(l_d, &delta_generator(space))?.max_abs());
    Ok(worst)
}

fn fringe_doubling() -> Result<f64> {
    let p = pt(0.1, 0.5, 0.0)?;
    let deltas: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
    let noon = fringe_shift_defect(&InputStateKind::NoonHV, &p, &deltas)?;
    let single = fringe_shift_defect(&InputStateKind::SinglePhotonH, &p, &deltas)?;
    // The single-photon fringe must not be π-periodic; fold that requirement into the residual.
    Ok(if single >= 0.1 { noon } else { f64::INFINITY })
}

fn fringe_channel() -> Result<f64> {
    let p = pt(0.1, 0.5, 0.0)?;
    let mut worst: f64 = 0.0;
    for kind in [InputStateKind::SinglePhotonH, InputStateKind::NoonHV] {
        for f in fringe_scan(&kind, &p, 0.0, 2.0 * std::f64::consts::PI, 25)? {
            worst = worst.max((f.formula - f.channel).abs());
        }
    }
    Ok(worst)
}

fn saturation(kind: InputStateKind) -> Result<f64> {
    let input = kind.prepare_default()?;
    let mut worst: f64 = 0.0;
    for &(xd, xs) in &[(0.0, 0.2), (0.05, 0.3), (0.1, 0.6)] {
        let p = pt(xd, xs, 0.0)?;
        let closed = analytic_bounds(&kind, &p)?;
        for l in [ParamLabel::Xd, ParamLabel::Xs] {
            let v = error_propagation_sensitivity_with(&input, &p, l)?.unwrap_or(f64::INFINITY);
            worst = worst.max((v - closed.get(l).unwrap_or(f64::NAN)).abs());
        }
    }
    Ok(worst)
}

fn numeric_vs_closed(kind: InputStateKind) -> Result<f64> {
    let input = kind.prepare_default()?;
    let mut worst: f64 = 0.0;
    for &(xd, xs) in &[(0.02, 0.1), (0.05, 0.3), (-0.1, 0.6)] {
        let p = pt(xd, xs, 0.4)?;
        let q = qfim_pipeline(&input, &p, &kind.default_params(), ANALYTIC)?.qfim;
        let closed = analytic_bounds(&kind, &p)?;
        for l in kind.default_params() {
            if let (Some(a), Some(b)) = (q.bound(l), closed.get(l)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

fn kraus_vs_rk4() -> Result<f64> {
    let p = ChiralParams::new(0.35, 0.15, 0.4, -0.3)?;
    let mut worst: f64 = 0.0;
    for kind in reference_inputs()?
        .into_iter()
        .chain([InputStateKind::FockOnePlusOneMinus])
    {
        let input = kind.prepare_default()?;
        let a = apply_channel_kraus(&input, &p)?;
        let b = apply_channel_rk4(&input, &p, RK4_DEFAULT_STEPS)?.state;
        worst = worst.max(a.rho().max_abs_diff(b.rho()));
    }
    Ok(worst)
}

fn semigroup() -> Result<f64> {
    let (p1, p2) = (
        ChiralParams::new(0.2, 0.4, 0.3, -0.1)?,
        ChiralParams::new(0.5, 0.1, -0.6, 0.2)?,
    );
    let joint = ChiralParams::new(
        1.0 - (1.0 - p1.alpha_plus) * (1.0 - p2.alpha_plus),
        1.0 - (1.0 - p1.alpha_minus) * (1.0 - p2.alpha_minus),
        p1.phi_plus + p2.phi_plus,
        p1.phi_minus + p2.phi_minus,
    )?;
    let mut worst: f64 = 0.0;
    for kind in reference_inputs()? {
        let input = kind.prepare_default()?;
        let two = apply_channel_kraus(&apply_channel_kraus(&input, &p1)?, &p2)?;
        let one = apply_channel_kraus(&input, &joint)?;
        worst = worst.max(two.rho().max_abs_diff(one.rho()));
    }
    Ok(worst)
}

fn fock_benchmark() -> Result<f64> {
    let kind = InputStateKind::FockOnePlusOneMinus;
    let input = kind.prepare_default()?;
    let mut worst: f64 = 0.0;
    for &(ap, am) in &[(0.05, 0.05), (0.3, 0.7), (0.9, 0.2)] {
        let p = ChiralParams::new(ap, am, 0.0, 0.0)?;
        let q = qfim_pipeline(&input, &p, &kind.default_params(), ANALYTIC)?.qfim;
        let closed = fock_benchmark_bound(&p)?;
        for l in kind.default_params() {
            worst = worst.max(
                (q.bound(l).unwrap_or(f64::INFINITY) - closed.get(l).unwrap_or(f64::NAN)).abs(),
            );
        }
    }
    Ok(worst)
}

fn coherent_floor() -> Result<f64> {
    let p = ChiralParams::identity();
    let closed = coherent_bounds(&p, 2.0)?
        .get(ParamLabel::Xd)
        .unwrap_or(f64::NAN);
    Ok((closed - 0.5f64.sqrt()).abs())
}

fn fidelity_identity() -> Result<f64> {
    // Without loss or phase the output equals the input.
    let p = ChiralParams::identity();
    let mut worst: f64 = 0.0;
    for kind in [InputStateKind::SinglePhotonH, InputStateKind::NoonHV] {
        worst = worst.max((fidelity_fringe(&kind, &p)? - 1.0).abs());
    }
    Ok(worst)
}

/// Runs every packaged check in a fixed order.
pub fn run_selftest() -> Vec<CheckOutcome> {
    vec![
        check("appendix-A coherent SLD", 1e-8, appendix_a),
        check("appendix-B zero blocks", 1e-10, appendix_b),
        check("fringe period doubling", 1e-12, fringe_doubling),
        check("fringe formula vs channel", 1e-10, fringe_channel),
        check("fidelity at identity", 1e-14, fidelity_identity),
        check("coherent saturation", 1e-8, || {
            saturation(InputStateKind::coherent(1.0)?)
        }),
        check("single-photon saturation", 1e-8, || {
            saturation(InputStateKind::SinglePhotonH)
        }),
        check("coherent numeric vs closed form", 1e-6, || {
            numeric_vs_closed(InputStateKind::coherent(1.0)?)
        }),
        check("single-photon numeric vs closed form", 1e-6, || {
            numeric_vs_closed(InputStateKind::SinglePhotonH)
        }),
        check("noon numeric vs closed form", 1e-6, || {
            numeric_vs_closed(InputStateKind::NoonHV)
        }),
        check("fock benchmark", 1e-6, fock_benchmark),
        check("coherent floor", 1e-10, coherent_floor),
        check("kraus vs rk4", 1e-8, kraus_vs_rk4),
        check("semigroup composition", 1e-10, semigroup),
    ]
}
