//! Two-mode truncated Fock space in the circular (±) polarization basis.
//!
//! Basis ordering is mode-`+` major: `k = n_plus * (cutoff_minus + 1) + n_minus`.
//! Every module shares this ordering.
//!
//! Linear (H/V) and circular modes are related by `a_± = (a_H ± i a_V)/√2`,
//! hence `a_H† = (a_+† + a_-†)/√2` and `a_V† = i (a_+† - a_-†)/√2`. States
//! are stored in the ± basis only; H/V appears solely in constructors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eigen, hybrid_tol, joint_range, matmul, re, Complex, ComplexMatrix,
};

/// Poisson tail mass allowed beyond the cutoff for coherent inputs.
pub const COHERENT_TAIL_BUDGET: f64 = 1e-10;

/// Default upper limit for automatically chosen coherent cutoffs.
pub const COHERENT_CUTOFF_CAP: usize = 12;

/// Exact cutoff for Fock and NOON inputs (absorption never raises photon number).
pub const FOCK_CUTOFF: usize = 2;

/// Most negative eigenvalue tolerated in a density matrix.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub cutoff_plus: usize,
    pub cutoff_minus: usize,
}

impl FockSpace {
    pub fn new(cutoff_plus: usize, cutoff_minus: usize) -> Self {
        FockSpace {
            cutoff_plus,
            cutoff_minus,
        }
    }

    pub fn symmetric(cutoff: usize) -> Self {
        Self::new(cutoff, cutoff)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        (self.cutoff_plus + 1) * (self.cutoff_minus + 1)
    }

    #[inline]
    pub fn index(&self, n_plus: usize, n_minus: usize) -> usize {
        debug_assert!(n_plus <= self.cutoff_plus && n_minus <= self.cutoff_minus);
        n_plus * (self.cutoff_minus + 1) + n_minus
    }

    /// Inverse of [`FockSpace::index`].
    #[inline]
    pub fn occupation(&self, k: usize) -> (usize, usize) {
        (k / (self.cutoff_minus + 1), k % (self.cutoff_minus + 1))
    }

    pub fn require(&self, what: &str, n_plus: usize, n_minus: usize) -> Result<()> {
        let available = self.cutoff_plus.min(self.cutoff_minus);
        if n_plus > self.cutoff_plus || n_minus > self.cutoff_minus {
            return Err(Error::Cutoff {
                what: what.to_string(),
                required: n_plus.max(n_minus),
                available,
            });
        }
        Ok(())
    }

    pub fn basis_vector(&self, n_plus: usize, n_minus: usize) -> Vec<Complex> {
        let mut v = vec![re(0.0); self.dim()];
        v[self.index(n_plus, n_minus)] = re(1.0);
        v
    }
}

/// Truncated ladder and number operators for both modes.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub a_plus: ComplexMatrix,
    pub a_plus_dag: ComplexMatrix,
    pub n_plus: ComplexMatrix,
    pub a_minus: ComplexMatrix,
    pub a_minus_dag: ComplexMatrix,
    pub n_minus: ComplexMatrix,
}

pub fn mode_operators(space: FockSpace) -> ModeOperators {
    let d = space.dim();
    let mut a_plus = ComplexMatrix::zeros(d, d);
    let mut a_minus = ComplexMatrix::zeros(d, d);
    let mut n_plus = ComplexMatrix::zeros(d, d);
    let mut n_minus = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        let (np, nm) = space.occupation(k);
        n_plus[(k, k)] = re(np as f64);
        n_minus[(k, k)] = re(nm as f64);
        if np > 0 {
            a_plus[(space.index(np - 1, nm), k)] = re((np as f64).sqrt());
        }
        if nm > 0 {
            a_minus[(space.index(np, nm - 1), k)] = re((nm as f64).sqrt());
        }
    }
    ModeOperators {
        a_plus_dag: a_plus.adjoint(),
        a_minus_dag: a_minus.adjoint(),
        a_plus,
        n_plus,
        a_minus,
        n_minus,
    }
}

/// A density matrix on a truncated two-mode Fock space.
#[derive(Clone, Debug)]
pub struct TwoModeState {
    space: FockSpace,
    rho: ComplexMatrix,
    label: String,
    truncation_budget: f64,
}

impl TwoModeState {
    /// Validates Hermiticity, trace window `[1 - budget, 1]` and positivity.
    pub fn new(
        space: FockSpace,
        rho: ComplexMatrix,
        label: impl Into<String>,
        truncation_budget: f64,
    ) -> Result<Self> {
        let d = space.dim();
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                op: "TwoModeState::new",
                left: (d, d),
                right: rho.shape(),
            });
        }
        rho.check_finite()?;
        let state = TwoModeState {
            space,
            rho,
            label: label.into(),
            truncation_budget,
        };
        state.validate(PSD_TOL)?;
        Ok(state)
    }

    fn validate(&self, psd_tol: f64) -> Result<()> {
        let defect = self.rho.hermiticity_defect();
        let tol = hybrid_tol(1e-12, self.rho.max_abs());
        if defect > tol {
            return Err(Error::NotHermitian {
                defect,
                tolerance: tol,
            });
        }
        let tr = self.rho.trace();
        let slack = 1e-12;
        if tr.im.abs() > slack
            || tr.re > 1.0 + slack
            || tr.re < 1.0 - self.truncation_budget - slack
        {
            return Err(Error::InvalidState(format!(
                "{}: trace {:.15} outside [1 - {:.1e}, 1]",
                self.label, tr.re, self.truncation_budget
            )));
        }
        let min = self.min_eigenvalue()?;
        if min < -psd_tol {
            return Err(Error::InvalidState(format!(
                "{}: negative eigenvalue {min:.3e}",
                self.label
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue on the numerical range of ρ (zero if ρ is rank deficient).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let p = joint_range(&[&self.rho], 1e-11)?;
        if p.cols() == 0 {
            return Ok(0.0);
        }
        let compressed = matmul(&matmul(&p.adjoint(), &self.rho)?, &p)?.hermitian_part();
        let e = hermitian_eigen(&compressed)?;
        let min = e.eigenvalues[0];
        Ok(if p.cols() < self.space.dim() {
            min.min(0.0)
        } else {
            min
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_rho(self) -> ComplexMatrix {
        self.rho
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn truncation_budget(&self) -> f64 {
        self.truncation_budget
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        crate::linalg::trace_of_product(&self.rho, &self.rho)
            .expect("square")
            .re
    }

    /// `<ψ|ρ|ψ>`.
    pub fn fidelity_with(&self, psi: &[Complex]) -> Result<f64> {
        Ok(self.rho.sandwich(psi, psi)?.re)
    }

    /// Photon-number distribution `P(n_plus, n_minus)` read off the diagonal.
    pub fn occupation_probabilities(&self) -> Vec<((usize, usize), f64)> {
        (0..self.space.dim())
            .map(|k| (self.space.occupation(k), self.rho[(k, k)].re))
            .collect()
    }

    pub fn mean_photons(&self) -> (f64, f64) {
        self.occupation_probabilities()
            .iter()
            .fold((0.0, 0.0), |(a, b), &((np, nm), p)| {
                (a + np as f64 * p, b + nm as f64 * p)
            })
    }

    pub(crate) fn with_rho(&self, rho: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        TwoModeState::new(self.space, rho, label, self.truncation_budget)
    }

    /// Like [`with_rho`](Self::with_rho) but accepts negative eigenvalues down to `-psd_tol`.
    pub(crate) fn with_rho_tolerant(
        &self,
        rho: ComplexMatrix,
        label: impl Into<String>,
        psd_tol: f64,
    ) -> Result<Self> {
        rho.check_finite()?;
        let state = TwoModeState {
            space: self.space,
            rho,
            label: label.into(),
            truncation_budget: self.truncation_budget,
        };
        state.validate(psd_tol.max(PSD_TOL))?;
        Ok(state)
    }
}

/// Poisson mass beyond `cutoff` for mean photon number `mean`.
///
/// Summed term by term from `cutoff + 1` upward; `1 - head` would lose the
/// tail to cancellation long before it reaches the budgets used here.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    for n in 1..=cutoff {
        term *= mean / n as f64;
    }
    let mut tail = 0.0;
    for n in (cutoff + 1).. {
        term *= mean / n as f64;
        tail += term;
        if term <= tail * 1e-17 || n > cutoff + 1000 {
            break;
        }
    }
    tail
}

/// Smallest cutoff whose Poisson tail at `|amp|^2` is within `budget`.
pub fn coherent_cutoff(amp: Complex, budget: f64, cap: usize) -> Result<usize> {
    let mean = amp.norm_sqr();
    let mut cutoff = 0;
    while poisson_tail(mean, cutoff) > budget {
        cutoff += 1;
        if cutoff > 400 {
            break;
        }
    }
    if cutoff > cap {
        return Err(Error::Truncation {
            amplitude: amp.norm(),
            required: cutoff,
            cap,
            budget,
        });
    }
    Ok(cutoff)
}

/// `(α + iβ)/√2, (α - iβ)/√2`: coherent amplitudes of the circular modes.
pub fn hv_to_pm_amplitudes(amp_h: Complex, amp_v: Complex) -> (Complex, Complex) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (
        (amp_h + c(0.0, 1.0) * amp_v) * s,
        (amp_h - c(0.0, 1.0) * amp_v) * s,
    )
}

/// Truncated coherent-state amplitudes `e^{-|a|²/2} a^n / √n!`, `n = 0..=cutoff`.
pub fn coherent_amplitudes(amp: Complex, cutoff: usize) -> Vec<Complex> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut v = re((-amp.norm_sqr() / 2.0).exp());
    out.push(v);
    for n in 1..=cutoff {
        v = v * amp / (n as f64).sqrt();
        out.push(v);
    }
    out
}

/// Product coherent state `|amp_plus>_+ ⊗ |amp_minus>_-`.
pub fn coherent_product_state(
    space: FockSpace,
    amp_plus: Complex,
    amp_minus: Complex,
) -> Result<TwoModeState> {
    coherent_product_state_with_budget(space, amp_plus, amp_minus, COHERENT_TAIL_BUDGET)
}

pub fn coherent_product_state_with_budget(
    space: FockSpace,
    amp_plus: Complex,
    amp_minus: Complex,
    budget: f64,
) -> Result<TwoModeState> {
    for (amp, cutoff) in [
        (amp_plus, space.cutoff_plus),
        (amp_minus, space.cutoff_minus),
    ] {
        if poisson_tail(amp.norm_sqr(), cutoff) > budget {
            let required = coherent_cutoff(amp, budget, usize::MAX)?;
            return Err(Error::Truncation {
                amplitude: amp.norm(),
                required,
                cap: cutoff,
                budget,
            });
        }
    }
    let psi = coherent_vector(space, amp_plus, amp_minus);
    TwoModeState::new(
        space,
        ComplexMatrix::outer(&psi, &psi),
        format!("coherent(+{amp_plus:.4}, -{amp_minus:.4})"),
        2.0 * budget,
    )
}

pub fn coherent_vector(space: FockSpace, amp_plus: Complex, amp_minus: Complex) -> Vec<Complex> {
    let p = coherent_amplitudes(amp_plus, space.cutoff_plus);
    let m = coherent_amplitudes(amp_minus, space.cutoff_minus);
    (0..space.dim())
        .map(|k| {
            let (np, nm) = space.occupation(k);
            p[np] * m[nm]
        })
        .collect()
}

/// Fixed-polarization inputs defined in the linear basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HvInput {
    /// `|1_H, 0_V>`.
    SinglePhotonH,
    /// `|1_H, 1_V>`, the two-photon NOON state in the circular basis.
    NoonHV,
}

/// `(a_H†)^{n_h} (a_V†)^{n_v} |0> / √(n_h! n_v!)` expressed in the ± basis.
///
/// Expands the creation-operator polynomial with `a_H† = (a_+† + a_-†)/√2`
/// and `a_V† = i(a_+† − a_-†)/√2`. No global phase is removed.
pub fn hv_fock_vector(space: FockSpace, n_h: usize, n_v: usize) -> Result<Vec<Complex>> {
    let total = n_h + n_v;
    space.require("H/V Fock input", total, total)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // poly[j] = coefficient of (a_+†)^j (a_-†)^{deg - j}
    let mut poly = vec![re(1.0)];
    let factors = std::iter::repeat_n((re(s), re(s)), n_h)
        .chain(std::iter::repeat_n((c(0.0, s), c(0.0, -s)), n_v));
    for (cp, cm) in factors {
        let mut next = vec![re(0.0); poly.len() + 1];
        for (j, &coef) in poly.iter().enumerate() {
            next[j + 1] += coef * cp;
            next[j] += coef * cm;
        }
        poly = next;
    }
    let norm = (factorial(n_h) * factorial(n_v)).sqrt();
    let mut v = vec![re(0.0); space.dim()];
    for (j, &coef) in poly.iter().enumerate() {
        let (np, nm) = (j, total - j);
        v[space.index(np, nm)] = coef * (factorial(np) * factorial(nm)).sqrt() / norm;
    }
    Ok(v)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Removes the global phase so the largest-magnitude entry (first on ties) is real positive.
pub fn fix_global_phase(v: &mut [Complex]) {
    let mut pivot = re(0.0);
    for z in v.iter() {
        if z.norm() > pivot.norm() + 1e-15 {
            pivot = *z;
        }
    }
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// State vector of an H/V input in the ± basis, global phase fixed.
///
/// `SinglePhotonH` gives `(|1,0> + |0,1>)/√2`; `NoonHV` gives `(|2,0> − |0,2>)/√2`.
pub fn hv_input_vector(kind: HvInput, space: FockSpace) -> Result<Vec<Complex>> {
    let mut v = match kind {
        HvInput::SinglePhotonH => hv_fock_vector(space, 1, 0)?,
        HvInput::NoonHV => hv_fock_vector(space, 1, 1)?,
    };
    fix_global_phase(&mut v);
    for z in v.iter_mut() {
        // Entries are 0 or ±1/√2; clear rounding residue in the phase rotation.
        if z.norm() < 1e-15 {
            *z = re(0.0);
        }
    }
    Ok(v)
}

pub fn hv_to_pm_state(kind: HvInput, space: FockSpace) -> Result<TwoModeState> {
    let psi = hv_input_vector(kind, space)?;
    let label = match kind {
        HvInput::SinglePhotonH => "|1_H,0_V>",
        HvInput::NoonHV => "|1_H,1_V>",
    };
    TwoModeState::new(space, ComplexMatrix::outer(&psi, &psi), label, 0.0)
}

/// `|n_plus, n_minus>` projector.
pub fn fock_product_state(space: FockSpace, n_plus: usize, n_minus: usize) -> Result<TwoModeState> {
    space.require("Fock product state", n_plus, n_minus)?;
    let psi = space.basis_vector(n_plus, n_minus);
    TwoModeState::new(
        space,
        ComplexMatrix::outer(&psi, &psi),
        format!("|{n_plus}_+,{n_minus}_->"),
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;

    fn inner(u: &[Complex], v: &[Complex]) -> Complex {
        u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
    }

    #[test]
    fn index_map_round_trips() {
        let s = FockSpace::new(3, 2);
        assert_eq!(s.dim(), 12);
        for k in 0..s.dim() {
            let (a, b) = s.occupation(k);
            assert_eq!(s.index(a, b), k);
        }
    }

    #[test]
    fn number_operator_at_cutoff_one() {
        let ops = mode_operators(FockSpace::symmetric(1));
        assert_eq!(ops.n_plus, ComplexMatrix::from_diag(&[0.0, 0.0, 1.0, 1.0]));
        assert_eq!(ops.n_minus, ComplexMatrix::from_diag(&[0.0, 1.0, 0.0, 1.0]));
        let nn = matmul(&ops.a_plus_dag, &ops.a_plus).unwrap();
        assert_eq!(nn, ops.n_plus);
    }

    #[test]
    fn lowering_acts_on_one_photon() {
        let s = FockSpace::symmetric(1);
        let ops = mode_operators(s);
        let out = ops.a_plus.mat_vec(&s.basis_vector(1, 0)).unwrap();
        assert_eq!(out, s.basis_vector(0, 0));
    }

    #[test]
    fn modes_commute() {
        let ops = mode_operators(FockSpace::symmetric(3));
        assert_eq!(
            commutator(&ops.a_plus, &ops.a_minus_dag).unwrap().max_abs(),
            0.0
        );
        assert_eq!(
            commutator(&ops.a_plus, &ops.a_minus).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn canonical_commutator_defect_sits_on_top_level() {
        let cutoff = 6;
        let s = FockSpace::symmetric(cutoff);
        let ops = mode_operators(s);
        let comm = commutator(&ops.a_plus, &ops.a_plus_dag).unwrap();
        for k in 0..s.dim() {
            let (np, _) = s.occupation(k);
            // [a, a†] = 1 below the cutoff and -cutoff on the top level.
            let expected = if np == cutoff { -(cutoff as f64) } else { 1.0 };
            assert!((comm[(k, k)].re - expected).abs() < 1e-12, "level {np}");
        }
        let off = comm
            .try_sub(&ComplexMatrix::from_diag(
                &comm.diagonal().iter().map(|z| z.re).collect::<Vec<_>>(),
            ))
            .unwrap();
        assert_eq!(off.max_abs(), 0.0);
    }

    #[test]
    fn vacuum_from_zero_amplitudes() {
        let s = FockSpace::symmetric(2);
        let st = coherent_product_state(s, re(0.0), re(0.0)).unwrap();
        let vac = fock_product_state(s, 0, 0).unwrap();
        assert!(st.rho().max_abs_diff(vac.rho()) < 1e-15);
    }

    #[test]
    fn coherent_mean_photon_number() {
        let cutoff = coherent_cutoff(re(0.6), COHERENT_TAIL_BUDGET, COHERENT_CUTOFF_CAP).unwrap();
        let st = coherent_product_state(FockSpace::new(cutoff, 0), re(0.6), re(0.0)).unwrap();
        let (np, nm) = st.mean_photons();
        assert!((np - 0.36).abs() < 1e-9);
        assert_eq!(nm, 0.0);
        assert!(1.0 - st.trace() <= 2e-10);
    }

    #[test]
    fn hv_coherent_mapping() {
        let (p, m) = hv_to_pm_amplitudes(re(0.8), re(0.0));
        let expected = 0.8 / 2f64.sqrt();
        assert!((p - re(expected)).norm() < 1e-15);
        assert!((m - re(expected)).norm() < 1e-15);
    }

    #[test]
    fn truncation_budget_is_enforced() {
        let err = coherent_product_state(FockSpace::symmetric(3), re(1.0), re(0.0)).unwrap_err();
        match err {
            Error::Truncation { required, .. } => assert!(required > 3),
            e => panic!("unexpected {e:?}"),
        }
        assert!(coherent_cutoff(re(3.0), COHERENT_TAIL_BUDGET, COHERENT_CUTOFF_CAP).is_err());
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        // Oracle: explicit Poisson pmf summed beyond the cutoff.
        let mean: f64 = 0.5;
        let mut p = (-mean).exp();
        let mut tail_from_10 = 0.0;
        for n in 1..60 {
            p *= mean / n as f64;
            if n > 10 {
                tail_from_10 += p;
            }
        }
        let t = poisson_tail(mean, 10);
        assert!((t - tail_from_10).abs() < 1e-20 + 1e-12 * tail_from_10);
    }

    #[test]
    fn single_photon_h_entries() {
        let s = FockSpace::symmetric(FOCK_CUTOFF);
        let st = hv_to_pm_state(HvInput::SinglePhotonH, s).unwrap();
        let a = s.index(1, 0);
        let b = s.index(0, 1);
        for (i, j) in [(a, a), (a, b), (b, a), (b, b)] {
            assert!((st.rho()[(i, j)] - re(0.5)).norm() < 1e-15);
        }
        assert!((st.purity() - 1.0).abs() < 1e-12);
        assert!((st.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noon_has_minus_sign() {
        let s = FockSpace::symmetric(FOCK_CUTOFF);
        let st = hv_to_pm_state(HvInput::NoonHV, s).unwrap();
        let v = st.rho()[(s.index(2, 0), s.index(0, 2))];
        assert!((v - re(-0.5)).norm() < 1e-15);
        assert!((st.purity() - 1.0).abs() < 1e-12);
        assert!((st.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn insufficient_cutoff_rejected() {
        assert!(hv_to_pm_state(HvInput::NoonHV, FockSpace::symmetric(1)).is_err());
        assert!(hv_to_pm_state(HvInput::SinglePhotonH, FockSpace::symmetric(0)).is_err());
        assert!(fock_product_state(FockSpace::symmetric(1), 2, 0).is_err());
    }

    #[test]
    fn hv_map_is_unitary_on_single_photons() {
        let s = FockSpace::symmetric(2);
        let h = hv_fock_vector(s, 1, 0).unwrap();
        let v = hv_fock_vector(s, 0, 1).unwrap();
        assert!((inner(&h, &h) - re(1.0)).norm() < 1e-15);
        assert!((inner(&v, &v) - re(1.0)).norm() < 1e-15);
        assert!(inner(&h, &v).norm() < 1e-15);
        // Two-photon sector: |2_H>, |1_H 1_V>, |2_V> stay orthonormal.
        let two = [
            hv_fock_vector(s, 2, 0).unwrap(),
            hv_fock_vector(s, 1, 1).unwrap(),
            hv_fock_vector(s, 0, 2).unwrap(),
        ];
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&two[i], &two[j]) - re(expected)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn fock_product_moments() {
        let s = FockSpace::symmetric(2);
        let st = fock_product_state(s, 1, 1).unwrap();
        assert_eq!(st.mean_photons(), (1.0, 1.0));
        let nonzero = st
            .rho()
            .as_slice()
            .iter()
            .filter(|z| z.norm() > 0.0)
            .count();
        assert_eq!(nonzero, 1);
        let vac = fock_product_state(s, 0, 0).unwrap();
        assert_eq!(vac.rho()[(0, 0)], re(1.0));
    }

    #[test]
    fn rejects_non_physical_matrices() {
        let s = FockSpace::symmetric(1);
        let bad_trace = ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.0]);
        assert!(TwoModeState::new(s, bad_trace, "bad", 0.0).is_err());
        let negative = ComplexMatrix::from_diag(&[1.2, -0.2, 0.0, 0.0]);
        assert!(TwoModeState::new(s, negative, "neg", 0.0).is_err());
    }
}
