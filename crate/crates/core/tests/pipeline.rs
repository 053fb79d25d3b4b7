//! Closed-form catalog against the numerical QFIM pipeline.

use chiral_qfim::analytic::{
    coherent_bounds, coherent_slds, fock_benchmark_bound, noon_catalog, single_photon_catalog,
    InputStateKind,
};
use chiral_qfim::channel::{apply_channel_kraus, ChiralParams, ParamLabel};
use chiral_qfim::estimation::{qfim_pipeline, support_restricted_diff, DerivativeMethod};
use chiral_qfim::fock::FockSpace;

const ABS: [ParamLabel; 2] = [ParamLabel::Xd, ParamLabel::Xs];

#[test]
fn noon_qfim_matches_numeric() {
    let p = ChiralParams::new(0.3, 0.1, 0.2, -0.2).unwrap();
    let input = InputStateKind::NoonHV.prepare_default().unwrap();
    let labels = InputStateKind::NoonHV.default_params();
    let run = qfim_pipeline(&input, &p, &labels, DerivativeMethod::AnalyticKraus).unwrap();
    let cat = noon_catalog(&p).unwrap();
    for &a in &labels {
        for &b in &labels {
            let (x, y) = (run.qfim.entry(a, b).unwrap(), cat.qfim.entry(a, b).unwrap());
            assert!((x - y).abs() <= 1e-7, "F[{a},{b}] numeric {x} analytic {y}");
        }
    }
}

#[test]
fn noon_slds_match_numeric_on_support() {
    let space = FockSpace::symmetric(2);
    let p = ChiralParams::new(0.3, 0.1, 0.5, 0.1).unwrap();
    let input = InputStateKind::NoonHV.prepare_default().unwrap();
    let run = qfim_pipeline(
        &input,
        &p,
        &InputStateKind::NoonHV.default_params(),
        DerivativeMethod::AnalyticKraus,
    )
    .unwrap();
    let cat = noon_catalog(&p).unwrap();
    for s in &cat.slds {
        let numeric = &run.sld(s.param).unwrap().l;
        let d =
            support_restricted_diff(run.output.rho(), numeric, &s.embed(space).unwrap()).unwrap();
        assert!(d <= 1e-8, "{}: {d}", s.param);
    }
}

#[test]
fn single_photon_slds_match_numeric_on_support() {
    let space = FockSpace::symmetric(2);
    let p = ChiralParams::new(0.6, 0.4, 0.3, 0.0).unwrap();
    let input = InputStateKind::SinglePhotonH.prepare_default().unwrap();
    let run = qfim_pipeline(
        &input,
        &p,
        &InputStateKind::SinglePhotonH.default_params(),
        DerivativeMethod::AnalyticKraus,
    )
    .unwrap();
    let cat = single_photon_catalog(&p).unwrap();
    for s in &cat.slds {
        let numeric = &run.sld(s.param).unwrap().l;
        let d =
            support_restricted_diff(run.output.rho(), numeric, &s.embed(space).unwrap()).unwrap();
        assert!(d <= 1e-10, "{}: {d}", s.param);
    }
}

#[test]
fn coherent_slds_match_numeric_on_support() {
    let p = ChiralParams::new(0.3, 0.2, 0.4, 0.1).unwrap();
    let kind = InputStateKind::coherent(0.64).unwrap();
    // The number-operator form is exact only without truncation; the residual
    // scales with the amplitude left at the cutoff.
    let input = kind.prepare(1e-18, 40).unwrap();
    let run = qfim_pipeline(
        &input,
        &p,
        &kind.default_params(),
        DerivativeMethod::AnalyticKraus,
    )
    .unwrap();
    let slds = coherent_slds(&p, 0.64, input.space()).unwrap();
    for s in &slds {
        let numeric = &run.sld(s.param).unwrap().l;
        let d =
            support_restricted_diff(run.output.rho(), numeric, &s.embed(input.space()).unwrap())
                .unwrap();
        assert!(d <= 1e-7, "{}: {d}", s.param);
    }
}

#[test]
fn coherent_bounds_match_numeric() {
    for &(xd, xs) in &[(0.1, 0.5), (0.0, 0.3), (0.02, 0.05)] {
        let p = ChiralParams::from_composite(xd, xs, 0.3, 0.1).unwrap();
        let kind = InputStateKind::coherent(1.0).unwrap();
        let input = kind.prepare_default().unwrap();
        let run = qfim_pipeline(
            &input,
            &p,
            &kind.default_params(),
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let closed = coherent_bounds(&p, 1.0).unwrap();
        for l in kind.default_params() {
            let (a, b) = (run.qfim.bound(l).unwrap(), closed.get(l).unwrap());
            assert!((a - b).abs() <= 1e-6, "{l}: {a} vs {b}");
        }
        // The numerical covariance has the opposite sign to the closed-form list.
        let cov = run.qfim.covariance(ParamLabel::Xd, ParamLabel::Xs).unwrap();
        assert!((cov + xd).abs() <= 1e-6, "{cov}");
        let cov = run
            .qfim
            .covariance(ParamLabel::Sigma, ParamLabel::Delta)
            .unwrap();
        assert!(
            (cov - closed
                .covariance(ParamLabel::Sigma, ParamLabel::Delta)
                .unwrap())
            .abs()
                <= 1e-6
        );
    }
}

#[test]
fn fock_benchmark_matches_numeric() {
    let input = InputStateKind::FockOnePlusOneMinus
        .prepare_default()
        .unwrap();
    for &(ap, am) in &[(0.05, 0.05), (0.3, 0.7), (0.9, 0.2)] {
        let p = ChiralParams::new(ap, am, 0.0, 0.0).unwrap();
        let run = qfim_pipeline(&input, &p, &ABS, DerivativeMethod::AnalyticKraus).unwrap();
        let closed = fock_benchmark_bound(&p).unwrap();
        for l in ABS {
            assert!((run.qfim.bound(l).unwrap() - closed.get(l).unwrap()).abs() <= 1e-10);
        }
    }
}

#[test]
fn central_difference_agrees_with_analytic_derivative() {
    let p = ChiralParams::new(0.3, 0.1, 0.2, -0.2).unwrap();
    let input = InputStateKind::NoonHV.prepare_default().unwrap();
    let labels = InputStateKind::NoonHV.default_params();
    let a = qfim_pipeline(&input, &p, &labels, DerivativeMethod::AnalyticKraus).unwrap();
    let f = qfim_pipeline(&input, &p, &labels, DerivativeMethod::CentralDifference).unwrap();
    for l in labels {
        assert!((a.qfim.bound(l).unwrap() - f.qfim.bound(l).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn absorption_phase_blocks_vanish() {
    for kind in [
        InputStateKind::coherent(1.0).unwrap(),
        InputStateKind::SinglePhotonH,
        InputStateKind::NoonHV,
    ] {
        let input = kind.prepare_default().unwrap();
        let p = ChiralParams::from_composite(0.05, 0.3, 0.7, 0.2).unwrap();
        let run = qfim_pipeline(
            &input,
            &p,
            &kind.default_params(),
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        for a in ABS {
            for b in [ParamLabel::Delta, ParamLabel::Sigma] {
                if let Some(v) = run.qfim.entry(a, b) {
                    assert!(v.abs() <= 1e-10, "{kind} F[{a},{b}] = {v}");
                }
            }
        }
        assert!(run.qfim.blocks.len() >= 2);
        let _ = apply_channel_kraus(&input, &p).unwrap();
    }
}
