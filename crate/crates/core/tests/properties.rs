//! Property tests for the invariants each module promises.

use chiral_qfim::analytic::{analytic_bounds, fidelity_fringe, InputStateKind};
use chiral_qfim::channel::{
    apply_channel_kraus, apply_channel_rk4, ChiralParams, ParamLabel, RK4_DEFAULT_STEPS,
};
use chiral_qfim::estimation::{qfim_pipeline, DerivativeMethod};
use chiral_qfim::experiments::{
    error_propagation_sensitivity, run_sweep, Axis, AxisParam, SweepMethod, SweepSpec,
};
use chiral_qfim::fock::{FockSpace, TwoModeState};
use chiral_qfim::linalg::{
    c, conjugate_by, hermitian_eigen, matmul, trace_of_product, Complex, ComplexMatrix,
};
use proptest::prelude::*;

const ABS: [ParamLabel; 2] = [ParamLabel::Xd, ParamLabel::Xs];

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    complex_vec(rows * cols).prop_map(move |v| ComplexMatrix::from_vec(rows, cols, v).unwrap())
}

fn hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(n, n).prop_map(|m| m.hermitian_part())
}

/// Mixture of two random pure states on a 3×3-level space.
fn two_mode_state() -> impl Strategy<Value = TwoModeState> {
    let space = FockSpace::symmetric(2);
    let d = space.dim();
    (complex_vec(d), complex_vec(d), 0.0..1.0f64).prop_filter_map(
        "non-zero vectors",
        move |(u, v, p)| {
            let norm = |x: &[Complex]| x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let (nu, nv) = (norm(&u), norm(&v));
            if nu < 1e-3 || nv < 1e-3 {
                return None;
            }
            let u: Vec<Complex> = u.iter().map(|z| z / nu).collect();
            let v: Vec<Complex> = v.iter().map(|z| z / nv).collect();
            let rho = ComplexMatrix::outer(&u, &u)
                .scale_real(p)
                .try_add(&ComplexMatrix::outer(&v, &v).scale_real(1.0 - p))
                .unwrap();
            TwoModeState::new(space, rho.hermitian_part(), "random", 0.0).ok()
        },
    )
}

fn native_params() -> impl Strategy<Value = ChiralParams> {
    (0.0..0.95f64, 0.0..0.95f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(ap, am, pp, pm)| ChiralParams::new(ap, am, pp, pm).unwrap())
}

fn reference_input() -> impl Strategy<Value = InputStateKind> {
    prop_oneof![
        Just(InputStateKind::coherent(1.0).unwrap()),
        Just(InputStateKind::SinglePhotonH),
        Just(InputStateKind::NoonHV),
        Just(InputStateKind::FockOnePlusOneMinus),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn cyclic_trace(a in matrix(5, 7), b in matrix(7, 5)) {
        let ab = trace_of_product(&a, &b).unwrap();
        let ba = trace_of_product(&b, &a).unwrap();
        prop_assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
    }

    #[test]
    fn eigendecomposition_residuals(h in hermitian(8)) {
        let e = hermitian_eigen(&h).unwrap();
        let scale = h.max_abs().max(1.0);
        prop_assert!(e.residual(&h) <= 1e-10 * scale);
        prop_assert!(e.orthonormality_defect() <= 1e-10);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unitary_conjugation_keeps_hermiticity(h in hermitian(6), x in hermitian(6)) {
        // Eigenvectors of a Hermitian matrix form a unitary.
        let u = hermitian_eigen(&h).unwrap().eigenvectors;
        let y = conjugate_by(&u, &x).unwrap();
        prop_assert!(y.hermiticity_defect() <= 1e-12);
        let back = matmul(&matmul(&u.adjoint(), &y).unwrap(), &u).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn channel_is_positive_and_trace_preserving(state in two_mode_state(), p in native_params()) {
        let out = apply_channel_kraus(&state, &p).unwrap();
        prop_assert!(out.min_eigenvalue().unwrap() >= -1e-10);
        prop_assert!((out.trace() - state.trace()).abs() <= 1e-12);
    }

    #[test]
    fn channel_composes_as_semigroup(state in two_mode_state(), p1 in native_params(), p2 in native_params()) {
        let joint = ChiralParams::new(
            1.0 - (1.0 - p1.alpha_plus) * (1.0 - p2.alpha_plus),
            1.0 - (1.0 - p1.alpha_minus) * (1.0 - p2.alpha_minus),
            p1.phi_plus + p2.phi_plus,
            p1.phi_minus + p2.phi_minus,
        ).unwrap();
        let two = apply_channel_kraus(&apply_channel_kraus(&state, &p1).unwrap(), &p2).unwrap();
        let one = apply_channel_kraus(&state, &joint).unwrap();
        prop_assert!(two.rho().max_abs_diff(one.rho()) <= 1e-10);
    }

    #[test]
    fn photon_number_decays_linearly(state in two_mode_state(), p in native_params()) {
        let (np, nm) = state.mean_photons();
        let (op, om) = apply_channel_kraus(&state, &p).unwrap().mean_photons();
        let (ep, em) = p.eta();
        prop_assert!((op - ep * np).abs() <= 1e-10);
        prop_assert!((om - em * nm).abs() <= 1e-10);
    }

    #[test]
    fn qfim_is_symmetric_psd_with_finite_bounds(kind in reference_input(), ap in 0.02..0.9f64, am in 0.02..0.9f64, dl in -3.0..3.0f64) {
        let p = ChiralParams::new(ap, am, dl / 2.0, -dl / 2.0).unwrap();
        let input = kind.prepare_default().unwrap();
        let run = qfim_pipeline(&input, &p, &kind.default_params(), DerivativeMethod::AnalyticKraus).unwrap();
        let f = &run.qfim.f;
        for i in 0..f.len() {
            for j in 0..f.len() {
                prop_assert!((f[i][j] - f[j][i]).abs() <= 1e-12 * run.qfim.max_abs().max(1.0));
            }
        }
        prop_assert!(run.qfim.min_eigenvalue >= -1e-9 * run.qfim.max_abs().max(1.0));
        for (i, b) in run.qfim.bounds.iter().enumerate() {
            if run.qfim.identifiable[i] {
                let b = b.expect("identifiable parameters have a bound");
                prop_assert!(b.is_finite() && b >= 0.0);
            }
        }
        for s in &run.slds {
            prop_assert!(s.residual <= 1e-8);
        }
    }

    #[test]
    fn fidelities_lie_in_unit_interval(xs in 0.0..0.95f64, frac in -1.0..1.0f64, dl in -7.0..7.0f64) {
        let xd = frac * xs.min(0.999 - xs);
        let p = ChiralParams::from_composite(xd, xs, dl, 0.0).unwrap();
        for kind in [InputStateKind::SinglePhotonH, InputStateKind::NoonHV] {
            let f = fidelity_fringe(&kind, &p).unwrap();
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&f), "{kind}: {f}");
        }
    }

    #[test]
    fn weak_absorption_hierarchy(xs in 0.001..0.1f64, frac in 0.0..1.0f64) {
        let xd = frac * xs.min(0.05);
        let p = ChiralParams::from_composite(xd, xs, 0.0, 0.0).unwrap();
        let get = |k: InputStateKind| analytic_bounds(&k, &p).unwrap().get(ParamLabel::Xd).unwrap();
        let noon = get(InputStateKind::NoonHV);
        let single = get(InputStateKind::SinglePhotonH);
        let coherent = get(InputStateKind::coherent(1.0).unwrap());
        prop_assert!(noon <= single + 1e-12 && single <= coherent + 1e-12, "{noon} {single} {coherent}");
    }

    #[test]
    fn noon_bound_never_worse_than_intensity(ap in 0.001..0.9f64, am in 0.001..0.9f64) {
        let p = ChiralParams::new(ap, am, 0.0, 0.0).unwrap();
        let bound = analytic_bounds(&InputStateKind::NoonHV, &p).unwrap().get(ParamLabel::Xd).unwrap();
        if let Some(intensity) = error_propagation_sensitivity(&InputStateKind::NoonHV, &p, ParamLabel::Xd).unwrap() {
            prop_assert!(bound <= intensity + 1e-10, "bound {bound} intensity {intensity}");
        }
    }

    #[test]
    fn saturation_of_exact_intensity(xs in 0.05..0.9f64, frac in 0.0..1.0f64) {
        let xd = frac * xs.min(0.999 - xs);
        let p = ChiralParams::from_composite(xd, xs, 0.0, 0.0).unwrap();
        for kind in [InputStateKind::coherent(1.0).unwrap(), InputStateKind::SinglePhotonH] {
            let closed = analytic_bounds(&kind, &p).unwrap();
            for l in ABS {
                let v = error_propagation_sensitivity(&kind, &p, l).unwrap().unwrap();
                prop_assert!((v - closed.get(l).unwrap()).abs() <= 1e-8, "{kind} {l}: {v}");
            }
        }
    }

    #[test]
    fn more_photons_tighten_coherent_bound(n0 in 0.2..3.0f64, extra in 0.1..2.0f64, xs in 0.05..0.7f64) {
        let p = ChiralParams::from_composite(0.3 * xs, xs, 0.0, 0.0).unwrap();
        let bound = |n: f64| {
            let kind = InputStateKind::coherent(n).unwrap();
            let input = kind.prepare(1e-10, 20).unwrap();
            qfim_pipeline(&input, &p, &ABS, DerivativeMethod::AnalyticKraus).unwrap().qfim.bound(ParamLabel::Xd).unwrap()
        };
        prop_assert!(bound(n0 + extra) < bound(n0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn kraus_matches_rk4(state in two_mode_state(), p in native_params()) {
        let a = apply_channel_kraus(&state, &p).unwrap();
        let b = apply_channel_rk4(&state, &p, RK4_DEFAULT_STEPS).unwrap().state;
        prop_assert!(a.rho().max_abs_diff(b.rho()) <= 1e-8);
    }
}

#[test]
fn sweeps_are_bit_reproducible() {
    let spec = SweepSpec::new(
        "repro",
        vec![
            InputStateKind::coherent(1.0).unwrap(),
            InputStateKind::SinglePhotonH,
            InputStateKind::NoonHV,
        ],
        vec![
            Axis::new(AxisParam::Label(ParamLabel::AlphaPlus), 0.0, 0.6, 4),
            Axis::new(AxisParam::Label(ParamLabel::AlphaMinus), 0.05, 0.5, 3),
        ],
        SweepMethod::ALL.to_vec(),
        vec![ParamLabel::Xd, ParamLabel::Xs, ParamLabel::Delta],
    );
    let a = run_sweep(&spec).unwrap().to_csv_string().unwrap();
    let b = run_sweep(&spec).unwrap().to_csv_string().unwrap();
    assert_eq!(a, b);
}
