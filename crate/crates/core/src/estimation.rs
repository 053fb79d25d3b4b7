//! Numerical quantum Fisher information: derivatives of the channel output,
//! SLD solve on the support of ρ, QFIM assembly and Cramér-Rao bounds.
//!
//! Every output state here lives on a small subspace of the truncated Fock
//! space. The SLD solve is therefore done in an orthonormal basis of the
//! joint range of ρ and its derivatives and expanded back afterwards. The
//! result is the same Moore-Penrose solution as the full-space spectral
//! formula, since both ρ and ∂ρ vanish outside that subspace.

use serde::{Deserialize, Serialize};

use crate::channel::apply_channel_kraus;
use crate::channel::{
    channel_map, coordinate_jacobian, ChannelDerivative, ChiralParams, CoordinateJacobian,
    Coordinates, ParamLabel,
};
use crate::error::{Error, Result};
use crate::fock::TwoModeState;
use crate::linalg::{
    hermitian_eigen, joint_range, matmul, re, symmetric_eigen, Complex, ComplexMatrix,
    EigenDecomposition,
};

/// Relative central-difference step, scaled by `max(1, |X|)`.
pub const FD_RELATIVE_STEP: f64 = 1e-5;
/// `λ_j + λ_k` at or below this fraction of `λ_max` is treated as kernel.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;
/// QFIM eigenvalues at or below this fraction of the largest are dropped by the pseudo-inverse.
pub const PINV_THRESHOLD: f64 = 1e-10;
/// `|F_ij|` at or below this fraction of `max |F|` counts as a structural zero.
pub const BLOCK_THRESHOLD: f64 = 1e-9;
/// Allowed negative QFIM eigenvalue, relative to `max(1, λ_max)`.
pub const QFIM_PSD_TOL: f64 = 1e-9;
/// Relative tolerance used when extracting the joint range of ρ and its derivatives.
const RANGE_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    /// Exact parameter derivative of the Kraus map.
    #[default]
    AnalyticKraus,
    /// Central difference of the Kraus engine with step `FD_RELATIVE_STEP * max(1, |X|)`.
    CentralDifference,
}

impl std::str::FromStr for DerivativeMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" | "analytic-kraus" => Ok(DerivativeMethod::AnalyticKraus),
            "central" | "central-difference" | "fd" => Ok(DerivativeMethod::CentralDifference),
            other => Err(Error::Config(format!(
                "unknown derivative method '{other}'"
            ))),
        }
    }
}

/// `∂ρ_out/∂X` for one parameter.
#[derive(Clone, Debug)]
pub struct ParamDerivative {
    pub param: ParamLabel,
    pub drho: ComplexMatrix,
    pub method: DerivativeMethod,
    /// Set when the finite-difference stencil had to be adapted near a domain edge.
    pub note: Option<String>,
}

impl ParamDerivative {
    pub fn trace_defect(&self) -> f64 {
        self.drho.trace().norm()
    }
}

fn native_analytic(
    input: &TwoModeState,
    params: &ChiralParams,
    label: ParamLabel,
) -> ComplexMatrix {
    use ChannelDerivative::{Alpha, None as Plain, Phi};
    let (dp, dm) = match label {
        ParamLabel::AlphaPlus => (Alpha, Plain),
        ParamLabel::AlphaMinus => (Plain, Alpha),
        ParamLabel::PhiPlus => (Phi, Plain),
        _ => (Plain, Phi),
    };
    channel_map(input.rho(), input.space(), params, dp, dm)
}

/// Finite-difference derivative of `f` along a native parameter.
///
/// Uses the central stencil when it fits in the domain, a shrunk central
/// stencil near an absorption edge, and a second-order one-sided stencil at
/// the edge itself. The second value describes any adaptation.
pub(crate) fn native_stencil(
    params: &ChiralParams,
    label: ParamLabel,
    f: &dyn Fn(&ChiralParams) -> Result<Vec<Complex>>,
) -> Result<(Vec<Complex>, Option<String>)> {
    let x = params.get(label);
    let h = FD_RELATIVE_STEP * x.abs().max(1.0);
    let eval = |step: f64| -> Result<Vec<Complex>> { f(&params.shifted(label, step)?) };
    let combine = |terms: &[(f64, &Vec<Complex>)], denom: f64| -> Vec<Complex> {
        let mut out = vec![re(0.0); terms[0].1.len()];
        for (w, v) in terms {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += x * (w / denom);
            }
        }
        out
    };

    if let (Ok(fp), Ok(fm)) = (eval(h), eval(-h)) {
        return Ok((combine(&[(1.0, &fp), (-1.0, &fm)], 2.0 * h), None));
    }
    if label.is_absorption() {
        let shrunk = 0.5 * x.min(1.0 - x);
        if shrunk >= 1e-3 * h {
            let fp = eval(shrunk)?;
            let fm = eval(-shrunk)?;
            let note = format!("{label}: central step shrunk from {h:.1e} to {shrunk:.1e}");
            return Ok((
                combine(&[(1.0, &fp), (-1.0, &fm)], 2.0 * shrunk),
                Some(note),
            ));
        }
    }
    for dir in [1.0, -1.0] {
        if let (Ok(f1), Ok(f2)) = (eval(dir * h), eval(2.0 * dir * h)) {
            let f0 = f(params)?;
            let d = combine(&[(-3.0, &f0), (4.0, &f1), (-1.0, &f2)], 2.0 * dir * h);
            let side = if dir > 0.0 { "forward" } else { "backward" };
            return Ok((
                d,
                Some(format!(
                    "{label}: one-sided {side} difference at the domain edge"
                )),
            ));
        }
    }
    Err(Error::domain(
        label.as_str(),
        x,
        "no finite-difference stencil fits inside the absorption domain",
    ))
}

/// Finite-difference derivative along any label; composite labels go through
/// native derivatives and the chain rule.
pub(crate) fn chain_rule_stencil(
    params: &ChiralParams,
    label: ParamLabel,
    f: &dyn Fn(&ChiralParams) -> Result<Vec<Complex>>,
) -> Result<(Vec<Complex>, Option<String>)> {
    if label.coordinates() == Coordinates::Native {
        return native_stencil(params, label, f);
    }
    let jac = coordinate_jacobian(Coordinates::Composite, Coordinates::Native);
    let mut acc: Option<Vec<Complex>> = None;
    let mut notes = Vec::new();
    for (i, native) in Coordinates::Native.labels().into_iter().enumerate() {
        let w = jac.matrix[i][label.position()];
        if w == 0.0 {
            continue;
        }
        let (d, n) = native_stencil(params, native, f)?;
        let acc = acc.get_or_insert_with(|| vec![re(0.0); d.len()]);
        for (a, v) in acc.iter_mut().zip(&d) {
            *a += v * w;
        }
        notes.extend(n);
    }
    Ok((
        acc.unwrap_or_default(),
        if notes.is_empty() {
            None
        } else {
            Some(notes.join("; "))
        },
    ))
}

/// Derivative of the channel output `Λ_params(input)` with respect to `param`.
///
/// Composite labels are differentiated natively and combined by the chain rule.
pub fn rho_derivative(
    input: &TwoModeState,
    params: &ChiralParams,
    param: ParamLabel,
    method: DerivativeMethod,
) -> Result<ParamDerivative> {
    Ok(rho_derivatives(input, params, &[param], method)?.remove(0))
}

/// [`rho_derivative`] for several labels, evaluating each native derivative once.
pub fn rho_derivatives(
    input: &TwoModeState,
    params: &ChiralParams,
    labels: &[ParamLabel],
    method: DerivativeMethod,
) -> Result<Vec<ParamDerivative>> {
    params.validate()?;
    let dim = input.space().dim();
    let mut natives: [Option<ComplexMatrix>; 4] = Default::default();
    let jac = coordinate_jacobian(Coordinates::Composite, Coordinates::Native);
    labels
        .iter()
        .map(|&param| {
            let (drho, note) = match method {
                DerivativeMethod::AnalyticKraus => {
                    let mut acc = ComplexMatrix::zeros(dim, dim);
                    for (i, label) in Coordinates::Native.labels().into_iter().enumerate() {
                        let w = if param.coordinates() == Coordinates::Native {
                            if label == param {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            // ∂/∂Y_j = Σ_i (∂x_i/∂Y_j) ∂/∂x_i
                            jac.matrix[i][param.position()]
                        };
                        if w == 0.0 {
                            continue;
                        }
                        let d =
                            natives[i].get_or_insert_with(|| native_analytic(input, params, label));
                        for (a, v) in acc.as_mut_slice().iter_mut().zip(d.as_slice()) {
                            *a += v * w;
                        }
                    }
                    (acc, None)
                }
                DerivativeMethod::CentralDifference => {
                    let f = |p: &ChiralParams| -> Result<Vec<Complex>> {
                        Ok(apply_channel_kraus(input, p)?.rho().as_slice().to_vec())
                    };
                    let (v, note) = chain_rule_stencil(params, param, &f)?;
                    (ComplexMatrix::from_vec(dim, dim, v)?, note)
                }
            };
            let defect = drho.hermiticity_defect();
            if defect > 1e-10 {
                return Err(Error::NotHermitian {
                    defect,
                    tolerance: 1e-10,
                });
            }
            Ok(ParamDerivative {
                param,
                drho: drho.hermitian_part(),
                method,
                note,
            })
        })
        .collect()
}

/// Eigenbasis of ρ restricted to the joint range of ρ and a set of derivatives.
struct SpectralFrame {
    /// `n x r` isometry onto the working subspace.
    basis: ComplexMatrix,
    rho_w: ComplexMatrix,
    eig: EigenDecomposition,
    lambda_max: f64,
    full_dim: usize,
}

impl SpectralFrame {
    fn new(rho: &ComplexMatrix, derivatives: &[&ComplexMatrix]) -> Result<Self> {
        let mut mats = vec![rho];
        mats.extend_from_slice(derivatives);
        let basis = joint_range(&mats, RANGE_TOL)?;
        let rho_w = compress(&basis, rho)?.hermitian_part();
        let eig = hermitian_eigen(&rho_w)?;
        let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
        Ok(SpectralFrame {
            basis,
            rho_w,
            eig,
            lambda_max,
            full_dim: rho.rows(),
        })
    }

    fn rank(&self) -> usize {
        self.basis.cols()
    }

    fn threshold(&self) -> f64 {
        SUPPORT_THRESHOLD * self.lambda_max
    }

    /// Number of full-space eigenpairs `(j, k)` treated as kernel.
    fn zeroed_pairs(&self) -> usize {
        let mut lambdas = self.eig.eigenvalues.clone();
        lambdas.resize(self.full_dim, 0.0);
        let t = self.threshold();
        lambdas
            .iter()
            .map(|a| lambdas.iter().filter(|b| a + *b <= t).count())
            .sum()
    }

    /// Support rank of ρ in the sense of the SLD threshold.
    fn support_rank(&self) -> usize {
        let t = self.threshold();
        self.eig
            .eigenvalues
            .iter()
            .filter(|l| 2.0 * **l > t)
            .count()
    }

    /// Solves the SLD equation in the frame; returns `(L_w, residual)`.
    fn solve(&self, drho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
        let v = &self.eig.eigenvectors;
        let d_w = compress(&self.basis, drho)?;
        let d_e = matmul(&matmul(&v.adjoint(), &d_w)?, v)?;
        let r = self.rank();
        let t = self.threshold();
        let lam = &self.eig.eigenvalues;
        let mut l_e = ComplexMatrix::zeros(r, r);
        let mut d_kept = ComplexMatrix::zeros(r, r);
        for j in 0..r {
            for k in 0..r {
                let s = lam[j] + lam[k];
                if s > t {
                    l_e[(j, k)] = d_e[(j, k)] * (2.0 / s);
                    d_kept[(j, k)] = d_e[(j, k)];
                }
            }
        }
        let l_w = matmul(&matmul(v, &l_e)?, &v.adjoint())?.hermitian_part();
        let d_proj = matmul(&matmul(v, &d_kept)?, &v.adjoint())?;
        let lr = matmul(&l_w, &self.rho_w)?;
        let rl = matmul(&self.rho_w, &l_w)?;
        let mut residual: f64 = 0.0;
        for idx in 0..r * r {
            let lhs = d_proj.as_slice()[idx];
            let rhs = (lr.as_slice()[idx] + rl.as_slice()[idx]) * 0.5;
            residual = residual.max((lhs - rhs).norm());
        }
        Ok((l_w, residual))
    }

    fn expand(&self, m_w: &ComplexMatrix) -> Result<ComplexMatrix> {
        matmul(&matmul(&self.basis, m_w)?, &self.basis.adjoint())
    }
}

fn compress(basis: &ComplexMatrix, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    matmul(&matmul(&basis.adjoint(), m)?, basis)
}

/// Symmetric logarithmic derivative for one parameter.
#[derive(Clone, Debug)]
pub struct SldMatrix {
    pub param: ParamLabel,
    pub l: ComplexMatrix,
    pub support_rank: usize,
    /// `max |∂ρ_proj - ½(Lρ + ρL)|` on the working subspace.
    pub residual: f64,
    /// Full-space eigenpairs whose eigenvalue sum fell at or below the support threshold.
    pub zeroed_entries: usize,
}

/// Largest residual tolerated by [`solve_sld`] before it reports a numeric failure.
pub const SLD_RESIDUAL_TOL: f64 = 1e-8;

fn sld_from_frame(frame: &SpectralFrame, d: &ParamDerivative) -> Result<SldMatrix> {
    Ok(sld_in_frame(frame, d)?.0)
}

/// The SLD on the full space together with its working-subspace form.
fn sld_in_frame(frame: &SpectralFrame, d: &ParamDerivative) -> Result<(SldMatrix, ComplexMatrix)> {
    let (l_w, residual) = frame.solve(&d.drho)?;
    if !(residual <= SLD_RESIDUAL_TOL) {
        return Err(Error::Numeric(format!(
            "SLD residual {residual:.3e} for {} exceeds {SLD_RESIDUAL_TOL:.0e}",
            d.param
        )));
    }
    let sld = SldMatrix {
        param: d.param,
        l: frame.expand(&l_w)?,
        support_rank: frame.support_rank(),
        residual,
        zeroed_entries: frame.zeroed_pairs(),
    };
    Ok((sld, l_w))
}

/// Spectral SLD solve `L_jk = 2<j|∂ρ|k>/(λ_j + λ_k)` with kernel pairs zeroed.
pub fn solve_sld(rho: &TwoModeState, drho: &ParamDerivative) -> Result<SldMatrix> {
    check_shape(rho, &drho.drho)?;
    let frame = SpectralFrame::new(rho.rho(), &[&drho.drho])?;
    sld_from_frame(&frame, drho)
}

/// SLDs for several derivatives of the same ρ, sharing one eigendecomposition.
pub fn solve_slds(rho: &TwoModeState, derivatives: &[ParamDerivative]) -> Result<Vec<SldMatrix>> {
    for d in derivatives {
        check_shape(rho, &d.drho)?;
    }
    let mats: Vec<&ComplexMatrix> = derivatives.iter().map(|d| &d.drho).collect();
    let frame = SpectralFrame::new(rho.rho(), &mats)?;
    derivatives
        .iter()
        .map(|d| sld_from_frame(&frame, d))
        .collect()
}

fn check_shape(rho: &TwoModeState, m: &ComplexMatrix) -> Result<()> {
    if rho.rho().shape() != m.shape() {
        return Err(Error::DimensionMismatch {
            op: "solve_sld",
            left: rho.rho().shape(),
            right: m.shape(),
        });
    }
    Ok(())
}

/// QFIM with its inverse, bounds and structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfimResult {
    pub params: Vec<ParamLabel>,
    pub f: Vec<Vec<f64>>,
    /// Pseudo-inverse on the identifiable subspace; `None` before inversion.
    pub f_inverse: Option<Vec<Vec<f64>>>,
    /// `sqrt((F⁺)_jj)` for identifiable parameters.
    pub bounds: Vec<Option<f64>>,
    /// `(F⁺)_ij` for identifiable pairs.
    pub covariances: Vec<Vec<Option<f64>>>,
    /// `sqrt((F⁺)_ij)` where that entry is non-negative.
    pub sqfim: Vec<Vec<Option<f64>>>,
    pub identifiable: Vec<bool>,
    /// Parameter indices grouped into decoupled blocks of F.
    pub blocks: Vec<Vec<usize>>,
    pub min_eigenvalue: f64,
}

impl QfimResult {
    fn from_f(params: Vec<ParamLabel>, mut f: Vec<Vec<f64>>) -> Result<Self> {
        let n = params.len();
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (f[i][j] + f[j][i]);
                f[i][j] = avg;
                f[j][i] = avg;
            }
        }
        for (i, row) in f.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        let (min_eigenvalue, lambda_max) = if n == 0 {
            (0.0, 0.0)
        } else {
            let (vals, _) = symmetric_eigen(&f)?;
            (vals[0], vals[n - 1])
        };
        if min_eigenvalue < -QFIM_PSD_TOL * lambda_max.max(1.0) {
            return Err(Error::Numeric(format!(
                "QFIM has negative eigenvalue {min_eigenvalue:.3e}"
            )));
        }
        let blocks = detect_blocks(&f);
        Ok(QfimResult {
            params,
            f,
            f_inverse: None,
            bounds: vec![None; n],
            covariances: vec![vec![None; n]; n],
            sqfim: vec![vec![None; n]; n],
            identifiable: vec![false; n],
            blocks,
            min_eigenvalue,
        })
    }

    pub fn index_of(&self, label: ParamLabel) -> Option<usize> {
        self.params.iter().position(|p| *p == label)
    }

    pub fn entry(&self, a: ParamLabel, b: ParamLabel) -> Option<f64> {
        Some(self.f[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn bound(&self, label: ParamLabel) -> Option<f64> {
        self.bounds[self.index_of(label)?]
    }

    pub fn covariance(&self, a: ParamLabel, b: ParamLabel) -> Option<f64> {
        self.covariances[self.index_of(a)?][self.index_of(b)?]
    }

    pub fn is_identifiable(&self, label: ParamLabel) -> bool {
        self.index_of(label)
            .map(|i| self.identifiable[i])
            .unwrap_or(false)
    }

    pub fn max_abs(&self) -> f64 {
        self.f.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn detect_blocks(f: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = f.len();
    let scale = f.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let thr = BLOCK_THRESHOLD * scale;
    let mut component = vec![usize::MAX; n];
    let mut blocks = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        component[start] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let i = members[cursor];
            for j in 0..n {
                if component[j] == usize::MAX && f[i][j].abs() > thr {
                    component[j] = id;
                    members.push(j);
                }
            }
            cursor += 1;
        }
        members.sort_unstable();
        blocks.push(members);
    }
    blocks
}

/// `F_ij = ½ tr[ρ(L_i L_j + L_j L_i)]`.
pub fn assemble_qfim(rho: &TwoModeState, slds: &[SldMatrix]) -> Result<QfimResult> {
    // tr(ρ L_i L_j) = tr(ρ_Q B_i† B_j) with ρ = Q ρ_Q Q† and B_i = L_i Q.
    let q = joint_range(&[rho.rho()], RANGE_TOL)?;
    let rho_q = compress(&q, rho.rho())?;
    let bs = slds
        .iter()
        .map(|s| {
            check_shape(rho, &s.l)?;
            matmul(&s.l, &q)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = slds.len();
    let mut f = vec![vec![0.0; n]; n];
    for i in 0..n {
        let rb = matmul(&rho_q, &bs[i].adjoint())?;
        for j in i..n {
            let v = crate::linalg::trace_of_product(&rb, &bs[j])?.re;
            f[i][j] = v;
            f[j][i] = v;
        }
    }
    QfimResult::from_f(slds.iter().map(|s| s.param).collect(), f)
}

/// Builds a result directly from a QFIM, e.g. one evaluated from closed forms.
pub fn qfim_from_matrix(params: Vec<ParamLabel>, f: Vec<Vec<f64>>) -> Result<QfimResult> {
    let n = params.len();
    if f.len() != n || f.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            op: "qfim_from_matrix",
            left: (n, n),
            right: (f.len(), f.first().map_or(0, |r| r.len())),
        });
    }
    QfimResult::from_f(params, f)
}

/// Pseudo-inverts F on its identifiable subspace and fills bounds, covariances and SQFIM.
pub fn invert_and_bound(mut qfim: QfimResult) -> Result<QfimResult> {
    let n = qfim.params.len();
    qfim.bounds = vec![None; n];
    qfim.covariances = vec![vec![None; n]; n];
    qfim.sqfim = vec![vec![None; n]; n];
    qfim.identifiable = vec![false; n];
    if n == 0 {
        qfim.f_inverse = Some(Vec::new());
        return Ok(qfim);
    }
    let (vals, vecs) = symmetric_eigen(&qfim.f)?;
    let lambda_max = vals[n - 1];
    let mut pinv = vec![vec![0.0; n]; n];
    let mut range_proj = vec![vec![0.0; n]; n];
    if lambda_max > 0.0 {
        for (lam, v) in vals.iter().zip(&vecs) {
            if *lam > PINV_THRESHOLD * lambda_max {
                for i in 0..n {
                    for j in 0..n {
                        pinv[i][j] += v[i] * v[j] / lam;
                        range_proj[i][j] += v[i] * v[j];
                    }
                }
            }
        }
    }
    for i in 0..n {
        // e_i must lie in range(F) for a finite bound on parameter i.
        let outside = (0..n)
            .map(|k| {
                let e = if k == i { 1.0 } else { 0.0 };
                (e - range_proj[k][i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        qfim.identifiable[i] = outside < 1e-6;
    }
    for i in 0..n {
        for j in 0..n {
            pinv[i][j] = 0.5 * (pinv[i][j] + pinv[j][i]);
        }
    }
    for i in 0..n {
        if !qfim.identifiable[i] {
            continue;
        }
        qfim.bounds[i] = Some(pinv[i][i].max(0.0).sqrt());
        for j in 0..n {
            if qfim.identifiable[j] {
                qfim.covariances[i][j] = Some(pinv[i][j]);
                if pinv[i][j] >= 0.0 {
                    qfim.sqfim[i][j] = Some(pinv[i][j].sqrt());
                }
            }
        }
    }
    qfim.f_inverse = Some(pinv);
    Ok(qfim)
}

fn invert4(m: &[[f64; 4]; 4]) -> Result<[[f64; 4]; 4]> {
    let mut a = *m;
    let mut inv = [[0.0; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty");
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::Numeric("singular coordinate Jacobian".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for k in 0..4 {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..4 {
            if r != col {
                let factor = a[r][col];
                for k in 0..4 {
                    a[r][k] -= factor * a[col][k];
                    inv[r][k] -= factor * inv[col][k];
                }
            }
        }
    }
    Ok(inv)
}

/// Transforms F to the coordinates `jacobian.to` by `F' = Kᵀ F K` with `K = ∂old/∂new`.
///
/// Parameters of the old set that are absent from `qfim` are treated as
/// carrying no information. The new parameter list holds the labels that the
/// present parameters actually depend on, in canonical order.
pub fn reparameterize_qfim(qfim: &QfimResult, jacobian: &CoordinateJacobian) -> Result<QfimResult> {
    if let Some(bad) = qfim
        .params
        .iter()
        .find(|p| p.coordinates() != jacobian.from)
    {
        return Err(Error::UnknownLabel(format!(
            "parameter {bad} is not in the {} coordinate set",
            jacobian.from.as_str()
        )));
    }
    let k = invert4(&jacobian.matrix)?;
    let mut full = [[0.0; 4]; 4];
    for (a, pa) in qfim.params.iter().enumerate() {
        for (b, pb) in qfim.params.iter().enumerate() {
            full[pa.position()][pb.position()] = qfim.f[a][b];
        }
    }
    let present: Vec<usize> = qfim.params.iter().map(|p| p.position()).collect();
    let new_labels: Vec<ParamLabel> = jacobian
        .to
        .labels()
        .into_iter()
        .filter(|l| present.iter().any(|&i| k[i][l.position()].abs() > 0.0))
        .collect();
    let n = new_labels.len();
    let mut f = vec![vec![0.0; n]; n];
    for (a, la) in new_labels.iter().enumerate() {
        for (b, lb) in new_labels.iter().enumerate() {
            let mut v = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    v += k[i][la.position()] * full[i][j] * k[j][lb.position()];
                }
            }
            f[a][b] = v;
        }
    }
    let out = QfimResult::from_f(new_labels, f)?;
    if qfim.f_inverse.is_some() {
        invert_and_bound(out)
    } else {
        Ok(out)
    }
}

/// Everything the pipeline computes at one parameter point.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub output: TwoModeState,
    pub derivatives: Vec<ParamDerivative>,
    pub slds: Vec<SldMatrix>,
    pub qfim: QfimResult,
}

impl PipelineOutput {
    pub fn sld(&self, label: ParamLabel) -> Option<&SldMatrix> {
        self.slds.iter().find(|s| s.param == label)
    }

    pub fn notes(&self) -> Vec<String> {
        self.derivatives
            .iter()
            .filter_map(|d| d.note.clone())
            .collect()
    }
}

/// Channel output, derivatives, SLDs, QFIM and bounds for `labels` at `params`.
pub fn qfim_pipeline(
    input: &TwoModeState,
    params: &ChiralParams,
    labels: &[ParamLabel],
    method: DerivativeMethod,
) -> Result<PipelineOutput> {
    let output = apply_channel_kraus(input, params)?;
    let derivatives = rho_derivatives(input, params, labels, method)?;
    let mats: Vec<&ComplexMatrix> = derivatives.iter().map(|d| &d.drho).collect();
    let frame = SpectralFrame::new(output.rho(), &mats)?;
    let (slds, l_ws): (Vec<SldMatrix>, Vec<ComplexMatrix>) = derivatives
        .iter()
        .map(|d| sld_in_frame(&frame, d))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    // ρ and every L live in the working subspace, so tr(ρ L_i L_j) can be taken there.
    let n = l_ws.len();
    let mut f = vec![vec![0.0; n]; n];
    for i in 0..n {
        let rl = matmul(&frame.rho_w, &l_ws[i])?;
        for j in i..n {
            let v = crate::linalg::trace_of_product(&rl, &l_ws[j])?.re;
            f[i][j] = v;
            f[j][i] = v;
        }
    }
    let qfim = invert_and_bound(QfimResult::from_f(labels.to_vec(), f)?)?;
    Ok(PipelineOutput {
        output,
        derivatives,
        slds,
        qfim,
    })
}

/// Projector onto the eigenvectors of ρ whose eigenvalue exceeds `SUPPORT_THRESHOLD * λ_max`.
pub fn support_projector(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let frame = SpectralFrame::new(rho, &[])?;
    let t = frame.threshold();
    let r = frame.rank();
    let mut keep = ComplexMatrix::zeros(r, r);
    for (k, lam) in frame.eig.eigenvalues.iter().enumerate() {
        if *lam > t {
            keep[(k, k)] = re(1.0);
        }
    }
    let v = &frame.eig.eigenvectors;
    frame.expand(&matmul(&matmul(v, &keep)?, &v.adjoint())?)
}

/// Restriction `P X + X P - P X P` of `x` to the blocks touching the support of ρ.
///
/// The SLD is only unique on these blocks; its kernel-kernel block is arbitrary.
pub fn support_restricted(rho: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let p = support_projector(rho)?;
    let px = matmul(&p, x)?;
    let xp = matmul(x, &p)?;
    let pxp = matmul(&px, &p)?;
    Ok(&(&px + &xp) - &pxp)
}

/// Max-entry difference between two operators on the support blocks of ρ.
pub fn support_restricted_diff(
    rho: &ComplexMatrix,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<f64> {
    let d = a.try_sub(b)?;
    Ok(support_restricted(rho, &d)?.max_abs())
}

/// `tr(ρ L)`, which vanishes for every SLD.
pub fn sld_expectation(rho: &ComplexMatrix, l: &ComplexMatrix) -> Result<Complex> {
    crate::linalg::trace_of_product(rho, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::coordinate_jacobian;
    use crate::fock::{fock_product_state, hv_to_pm_state, FockSpace, HvInput};
    use crate::linalg::c;

    fn single_photon() -> TwoModeState {
        hv_to_pm_state(HvInput::SinglePhotonH, FockSpace::symmetric(2)).unwrap()
    }

    fn noon() -> TwoModeState {
        hv_to_pm_state(HvInput::NoonHV, FockSpace::symmetric(2)).unwrap()
    }

    const COMPOSITE3: [ParamLabel; 3] = [ParamLabel::Xd, ParamLabel::Xs, ParamLabel::Delta];

    #[test]
    fn delta_derivative_of_diagonal_state_vanishes() {
        let st = fock_product_state(FockSpace::symmetric(2), 1, 1).unwrap();
        let p = ChiralParams::from_composite(0.1, 0.3, 0.4, 0.2).unwrap();
        for m in [
            DerivativeMethod::AnalyticKraus,
            DerivativeMethod::CentralDifference,
        ] {
            let d = rho_derivative(&st, &p, ParamLabel::Delta, m).unwrap();
            assert!(d.drho.max_abs() < 1e-12);
        }
    }

    #[test]
    fn single_photon_delta_derivative_entries() {
        let space = FockSpace::symmetric(2);
        let p = ChiralParams::from_composite(0.1, 0.5, 0.3, 0.0).unwrap();
        let d = rho_derivative(
            &single_photon(),
            &p,
            ParamLabel::Delta,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let (a, b) = (space.index(1, 0), space.index(0, 1));
        let expected = 0.5 * (0.4f64 * 0.6).sqrt();
        assert!((d.drho[(a, b)].norm() - expected).abs() < 1e-14);
        assert!((d.drho[(b, a)].norm() - expected).abs() < 1e-14);
        let mut others = d.drho.clone();
        others[(a, b)] = re(0.0);
        others[(b, a)] = re(0.0);
        assert!(others.max_abs() < 1e-15);
    }

    #[test]
    fn finite_difference_matches_analytic_on_noon() {
        let p = ChiralParams::from_composite(0.1, 0.2, 0.4, 0.0).unwrap();
        for label in ParamLabel::ALL {
            let a = rho_derivative(&noon(), &p, label, DerivativeMethod::AnalyticKraus).unwrap();
            let f =
                rho_derivative(&noon(), &p, label, DerivativeMethod::CentralDifference).unwrap();
            assert!(a.drho.max_abs_diff(&f.drho) <= 1e-7, "{label}");
            assert!(a.trace_defect() <= 1e-9);
        }
    }

    #[test]
    fn finite_difference_at_edge_uses_one_sided_stencil() {
        let p = ChiralParams::new(0.0, 0.2, 0.1, 0.0).unwrap();
        let f = rho_derivative(
            &noon(),
            &p,
            ParamLabel::AlphaPlus,
            DerivativeMethod::CentralDifference,
        )
        .unwrap();
        assert!(f.note.as_deref().unwrap().contains("one-sided"));
        let a = rho_derivative(
            &noon(),
            &p,
            ParamLabel::AlphaPlus,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        assert!(a.drho.max_abs_diff(&f.drho) <= 1e-8);
        let p = ChiralParams::new(3e-6, 0.2, 0.1, 0.0).unwrap();
        let f = rho_derivative(
            &noon(),
            &p,
            ParamLabel::AlphaPlus,
            DerivativeMethod::CentralDifference,
        )
        .unwrap();
        assert!(f.note.as_deref().unwrap().contains("shrunk"));
    }

    #[test]
    fn pure_state_sld_is_twice_derivative() {
        let p = ChiralParams::new(0.0, 0.0, 0.3, -0.2).unwrap();
        let out = apply_channel_kraus(&single_photon(), &p).unwrap();
        let d = rho_derivative(
            &single_photon(),
            &p,
            ParamLabel::Delta,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let sld = solve_sld(&out, &d).unwrap();
        let twice = d.drho.scale_real(2.0);
        assert!(support_restricted_diff(out.rho(), &sld.l, &twice).unwrap() < 1e-12);
        assert_eq!(sld.support_rank, 1);
        assert!(sld.residual <= 1e-12);
    }

    #[test]
    fn single_photon_ld_is_diagonal() {
        let space = FockSpace::symmetric(2);
        let p = ChiralParams::from_composite(0.1, 0.5, 0.3, 0.0).unwrap();
        let run = qfim_pipeline(
            &single_photon(),
            &p,
            &COMPOSITE3,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let l = &run.sld(ParamLabel::Xd).unwrap().l;
        let mut expected = ComplexMatrix::zeros(space.dim(), space.dim());
        expected[(space.index(1, 0), space.index(1, 0))] = re(-1.0 / 0.4);
        expected[(space.index(0, 1), space.index(0, 1))] = re(1.0 / 0.6);
        assert!(support_restricted_diff(run.output.rho(), l, &expected).unwrap() < 1e-10);
    }

    #[test]
    fn single_photon_bounds() {
        let p = ChiralParams::from_composite(0.1, 0.5, 0.3, 0.0).unwrap();
        let run = qfim_pipeline(
            &single_photon(),
            &p,
            &COMPOSITE3,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let q = &run.qfim;
        assert!((q.bound(ParamLabel::Xd).unwrap() - 0.7).abs() < 1e-10);
        assert!((q.bound(ParamLabel::Xs).unwrap() - 0.5).abs() < 1e-10);
        assert!((q.covariance(ParamLabel::Xd, ParamLabel::Xs).unwrap() + 0.05).abs() < 1e-10);
        assert!((q.entry(ParamLabel::Delta, ParamLabel::Delta).unwrap() - 0.48).abs() < 1e-10);
        assert!(q.entry(ParamLabel::Xd, ParamLabel::Delta).unwrap().abs() < 1e-10);
        assert_eq!(q.blocks, vec![vec![0, 1], vec![2]]);
        // Negative covariance has no SQFIM entry.
        assert!(q.sqfim[0][1].is_none());
        assert!((q.sqfim[0][0].unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn sigma_is_unidentifiable_for_single_photon() {
        let p = ChiralParams::from_composite(0.1, 0.5, 0.3, 0.2).unwrap();
        let labels = [
            ParamLabel::Xd,
            ParamLabel::Xs,
            ParamLabel::Delta,
            ParamLabel::Sigma,
        ];
        let with = qfim_pipeline(
            &single_photon(),
            &p,
            &labels,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let without = qfim_pipeline(
            &single_photon(),
            &p,
            &COMPOSITE3,
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        assert!(!with.qfim.is_identifiable(ParamLabel::Sigma));
        assert!(with.qfim.bound(ParamLabel::Sigma).is_none());
        for l in COMPOSITE3 {
            let (a, b) = (with.qfim.bound(l).unwrap(), without.qfim.bound(l).unwrap());
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_singular_qfim_flags_everything() {
        let q = qfim_from_matrix(
            vec![ParamLabel::Xd, ParamLabel::Xs],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let q = invert_and_bound(q).unwrap();
        assert!(q.identifiable.iter().all(|x| !x));
        assert!(q.bounds.iter().all(Option::is_none));
    }

    #[test]
    fn reparameterization_round_trip_and_identity() {
        let p = ChiralParams::from_composite(0.1, 0.4, 0.3, 0.2).unwrap();
        let space = FockSpace::symmetric(9);
        let st = crate::fock::coherent_product_state(space, c(0.5, 0.1), c(0.3, -0.2)).unwrap();
        let run = qfim_pipeline(
            &st,
            &p,
            &Coordinates::Native.labels(),
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let fwd = coordinate_jacobian(Coordinates::Native, Coordinates::Composite);
        let back = coordinate_jacobian(Coordinates::Composite, Coordinates::Native);
        let there = reparameterize_qfim(&run.qfim, &fwd).unwrap();
        let again = reparameterize_qfim(&there, &back).unwrap();
        assert_eq!(again.params, run.qfim.params);
        for i in 0..4 {
            for j in 0..4 {
                assert!((again.f[i][j] - run.qfim.f[i][j]).abs() < 1e-12);
            }
        }
        let id = reparameterize_qfim(
            &run.qfim,
            &coordinate_jacobian(Coordinates::Native, Coordinates::Native),
        )
        .unwrap();
        assert_eq!(id.f, run.qfim.f);
        assert!(reparameterize_qfim(&run.qfim, &back).is_err());
    }

    #[test]
    fn native_and_composite_paths_agree() {
        let p = ChiralParams::new(0.6, 0.4, 0.0, 0.0).unwrap();
        let native = qfim_pipeline(
            &single_photon(),
            &p,
            &[ParamLabel::AlphaPlus, ParamLabel::AlphaMinus],
            DerivativeMethod::CentralDifference,
        )
        .unwrap();
        let composite = qfim_pipeline(
            &single_photon(),
            &p,
            &[ParamLabel::Xd, ParamLabel::Xs],
            DerivativeMethod::AnalyticKraus,
        )
        .unwrap();
        let pushed = reparameterize_qfim(
            &composite.qfim,
            &coordinate_jacobian(Coordinates::Composite, Coordinates::Native),
        )
        .unwrap();
        assert_eq!(pushed.params, native.qfim.params);
        for i in 0..2 {
            for j in 0..2 {
                assert!((pushed.f[i][j] - native.qfim.f[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sld_expectation_vanishes() {
        let p = ChiralParams::from_composite(0.05, 0.3, 0.4, 0.0).unwrap();
        let run = qfim_pipeline(&noon(), &p, &COMPOSITE3, DerivativeMethod::AnalyticKraus).unwrap();
        for s in &run.slds {
            assert!(sld_expectation(run.output.rho(), &s.l).unwrap().norm() < 1e-12);
            assert!(s.residual <= SLD_RESIDUAL_TOL);
            assert!(s.l.is_hermitian(1e-12));
        }
    }

    #[test]
    fn blocks_split_on_zero_entries() {
        let f = vec![
            vec![2.0, 0.0, 0.5],
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 3.0],
        ];
        assert_eq!(detect_blocks(&f), vec![vec![0, 2], vec![1]]);
    }
}
